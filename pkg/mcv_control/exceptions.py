"""
Exceptions for the MCV control library
======================================

Every error raised by the library derives from MCVError. Each class
carries the process exit code the management commands report for it:

    2  configuration problems
    3  solver / numerical problems
    4  simulation divergence
    5  I/O and file-format problems
"""

from typing import Iterable, List, Optional, Sequence


class MCVError(Exception):
    """Base class for all library errors."""

    exit_code = 3


# =========================================================================
# CONFIGURATION
# =========================================================================
class ConfigError(MCVError):
    """Invalid scenario configuration or inconsistent solver inputs."""

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class InvalidModelError(MCVError):
    """Wind model covariance is not symmetric positive semidefinite."""

    exit_code = 2


class DegenerateWaypointsError(MCVError):
    """Waypoint list cannot define a trajectory."""

    exit_code = 2


# =========================================================================
# I/O
# =========================================================================
class TraceFormatError(MCVError):
    """A wind trace file does not follow the t,wx,wy,wz format."""

    exit_code = 5

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = path or "trace"
        if line is not None:
            where = f"{where}, line {line}"
        super().__init__(f"{where}: {message}")


class OutOfRangeError(MCVError):
    """A lookup time lies outside the data it indexes."""

    exit_code = 3


# =========================================================================
# DYNAMICS / NUMERICS
# =========================================================================
class DegenerateQuaternionError(MCVError):
    """Quaternion norm too small to define an attitude."""


class NumericalBlowupError(MCVError):
    """Integration produced non-finite values."""

    exit_code = 4

    def __init__(self, message: str, time: Optional[float] = None):
        self.time = time
        super().__init__(message)


class SingularLinearizationError(MCVError):
    """Nominal velocity too small for the drag Jacobian."""


class NumericalError(MCVError):
    """A dense linear solve failed."""


class InstabilityError(MCVError):
    """A closed-loop matrix is not Hurwitz."""

    def __init__(self, message: str, max_real_part: Optional[float] = None):
        self.max_real_part = max_real_part
        super().__init__(message)


class UnstabilizableError(MCVError):
    """No stabilizing gain could be found for (A, B)."""


class ConvergenceError(MCVError):
    """An iteration exhausted its budget or missed its tolerance."""

    def __init__(self, message: str, history: Optional[Sequence[float]] = None):
        self.history: List[float] = list(history or [])
        super().__init__(message)


class HorizonError(MCVError):
    """Backward Riccati sweep blew up."""

    def __init__(self, message: str, time: Optional[float] = None):
        self.time = time
        super().__init__(message)


# =========================================================================
# SIMULATION
# =========================================================================
class DivergedRunError(MCVError):
    """A closed-loop simulation left the finite numbers."""

    exit_code = 4

    def __init__(self, message: str, time: float, state=None, seed: Optional[int] = None):
        self.time = time
        self.state = state
        self.seed = seed
        super().__init__(message)


class MonteCarloAbortedError(MCVError):
    """One or more Monte Carlo runs diverged."""

    exit_code = 4

    def __init__(self, failed_seeds: Iterable[int]):
        self.failed_seeds = list(failed_seeds)
        seeds = ", ".join(str(s) for s in self.failed_seeds)
        super().__init__(f"{len(self.failed_seeds)} run(s) diverged; seeds: {seeds}")
