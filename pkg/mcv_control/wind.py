"""
Wind Models - Mean Plus Turbulence
==================================

Wind velocity in the inertial frame is modelled as a constant mean plus a
zero-mean turbulent part. Samples come from one of two sources:

- Gaussian synthesis: mean + L z, L a lower-triangular factor of the
  per-sample covariance, z standard normal.
- Replay of a recorded trace (zero-order hold or linear interpolation).

The wind is spatially homogeneous: samples depend on time only. One
turbulence vector is drawn per control step and held over that step, so the
covariance handed to the controller as W is the per-sample covariance.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .exceptions import InvalidModelError, OutOfRangeError, TraceFormatError

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-10


class Interpolation(str, Enum):
    """Replay interpolation between trace knots."""

    ZOH = "zoh"
    LINEAR = "linear"


# =========================================================================
# DOMAIN TYPES
# =========================================================================
@dataclass(frozen=True, eq=False)
class WindModel:
    """
    Stochastic wind description.

    Attributes:
        mean: Mean wind velocity, m/s (3,)
        covariance: Per-sample turbulence covariance, m^2/s^2 (3, 3)
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(3)
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (3, 3):
            raise InvalidModelError(f"covariance must be 3x3, got shape {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidModelError("wind model contains non-finite values")
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        # factor eagerly so a bad model fails at construction
        _ = self.factor

    @classmethod
    def still(cls) -> "WindModel":
        return cls(np.zeros(3), np.zeros((3, 3)))

    @cached_property
    def factor(self) -> np.ndarray:
        """Lower-triangular L with L L^T = covariance."""
        return _psd_lower_factor(self.covariance)

    def scaled(self, intensity: float) -> "WindModel":
        """Same mean, covariance multiplied by ``intensity``."""
        return WindModel(self.mean, intensity * self.covariance)


@dataclass(frozen=True, eq=False)
class WindTrace:
    """
    Recorded wind time series.

    Attributes:
        times: Strictly increasing sample times, s (N,)
        samples: Wind velocity at each time, m/s (N, 3)
    """

    times: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 3:
            raise TraceFormatError(f"samples must be N x 3, got shape {samples.shape}")
        if len(times) != len(samples):
            raise TraceFormatError(
                f"{len(times)} times but {len(samples)} samples"
            )
        if len(times) < 2:
            raise TraceFormatError("a trace needs at least 2 samples")
        bad = np.flatnonzero(np.diff(times) <= 0)
        if bad.size:
            raise TraceFormatError(f"times not strictly increasing at index {bad[0] + 1}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "samples", samples)

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])

    def __len__(self) -> int:
        return len(self.times)


# =========================================================================
# OPERATIONS
# =========================================================================
def _psd_lower_factor(covariance: np.ndarray) -> np.ndarray:
    """
    Lower-triangular factor of a symmetric PSD matrix.

    Cholesky when the matrix is positive definite; for singular PSD
    matrices the factor is recovered from the eigendecomposition by a QR
    step, so it stays lower triangular.
    """
    try:
        return np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError:
        pass

    eigvals, eigvecs = np.linalg.eigh(covariance)
    if eigvals.min() < -PSD_TOLERANCE:
        raise InvalidModelError(
            f"covariance is not positive semidefinite (min eigenvalue {eigvals.min():.3e})"
        )
    root = np.sqrt(np.clip(eigvals, 0.0, None))[:, None] * eigvecs.T
    _, upper = np.linalg.qr(root)
    return upper.T


def sample_gaussian(model: WindModel, rng: np.random.Generator) -> np.ndarray:
    """
    Draw one wind velocity sample.

    Args:
        model: Wind model (mean + covariance)
        rng: Generator owned by the caller; advances by 3 normals

    Returns:
        Wind velocity, m/s (3,)
    """
    z = rng.standard_normal(3)
    return model.mean + model.factor @ z


def lookup(trace: WindTrace, t: float, mode: Interpolation = Interpolation.ZOH) -> np.ndarray:
    """
    Wind velocity from a recorded trace at time ``t``.

    Args:
        trace: Recorded trace
        t: Query time, s; must lie inside the trace (no extrapolation)
        mode: Zero-order hold or linear interpolation

    Returns:
        Wind velocity, m/s (3,)
    """
    times = trace.times
    if not (times[0] <= t <= times[-1]):
        raise OutOfRangeError(
            f"t={t:.6g} s outside trace range [{times[0]:.6g}, {times[-1]:.6g}]"
        )
    if Interpolation(mode) is Interpolation.ZOH:
        idx = int(np.searchsorted(times, t, side="right")) - 1
        return trace.samples[idx].copy()
    return np.array([np.interp(t, times, trace.samples[:, axis]) for axis in range(3)])


def estimate_stats(trace: WindTrace) -> WindModel:
    """
    Estimate mean and unbiased covariance from a trace.

    Args:
        trace: Recorded trace with at least 2 samples

    Returns:
        WindModel with sample mean and N-1 normalised covariance
    """
    mean = trace.samples.mean(axis=0)
    cov = np.cov(trace.samples, rowvar=False, ddof=1)
    logger.debug(f"Estimated wind stats from {len(trace)} samples: mean={mean}")
    return WindModel(mean, 0.5 * (cov + cov.T))


def synthesize_trace(
    model: WindModel,
    n: int,
    period: float = 1.0,
    seed: Optional[int] = None,
) -> WindTrace:
    """
    Generate a Gaussian wind trace at a fixed sample period.

    Args:
        model: Wind model to draw from
        n: Number of samples (>= 2)
        period: Sample spacing, s
        seed: Generator seed

    Returns:
        WindTrace starting at t=0
    """
    if n < 2:
        raise TraceFormatError("a trace needs at least 2 samples")
    if period <= 0:
        raise TraceFormatError(f"period must be positive, got {period}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 3))
    samples = model.mean + z @ model.factor.T
    return WindTrace(np.arange(n) * period, samples)


# =========================================================================
# SOURCES AND PER-RUN SAMPLERS
# =========================================================================
class GaussianSampler:
    """Per-run Gaussian wind stream; owns its generator."""

    def __init__(self, model: WindModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng

    def sample(self, t: float) -> np.ndarray:
        return sample_gaussian(self.model, self.rng)


class ReplaySampler:
    """Per-run replay of a trace starting ``offset`` seconds into it."""

    def __init__(self, trace: WindTrace, mode: Interpolation, offset: float = 0.0):
        self.trace = trace
        self.mode = Interpolation(mode)
        self.start = float(trace.times[0]) + offset

    def sample(self, t: float) -> np.ndarray:
        return lookup(self.trace, self.start + t, self.mode)


@dataclass(frozen=True, eq=False)
class GaussianWind:
    """Gaussian synthesis alternative of a wind source."""

    model: WindModel
    seed: Optional[int] = None
    intensity: Optional[float] = None

    def statistics(self) -> WindModel:
        return self.model

    def sampler(self, run_seed: Optional[int], horizon: float) -> GaussianSampler:
        seed = self.seed if run_seed is None else run_seed
        return GaussianSampler(self.model, np.random.default_rng(seed))


@dataclass(frozen=True, eq=False)
class ReplayWind:
    """Trace replay alternative of a wind source."""

    trace: WindTrace
    mode: Interpolation = Interpolation.ZOH
    randomize_offset: bool = False
    intensity: Optional[float] = None
    _stats: Optional[WindModel] = field(default=None, repr=False)

    def statistics(self) -> WindModel:
        if self._stats is None:
            object.__setattr__(self, "_stats", estimate_stats(self.trace))
        return self._stats

    def sampler(self, run_seed: Optional[int], horizon: float) -> ReplaySampler:
        slack = self.trace.span - horizon
        if slack < 0:
            raise OutOfRangeError(
                f"trace spans {self.trace.span:.6g} s but the run needs {horizon:.6g} s"
            )
        offset = 0.0
        if self.randomize_offset and slack > 0:
            offset = float(np.random.default_rng(run_seed).uniform(0.0, slack))
        return ReplaySampler(self.trace, self.mode, offset)


WindSource = Union[GaussianWind, ReplayWind]


def controller_noise_model(source: WindSource, dt: float = 1.0) -> WindModel:
    """
    Mean and W the controller designs against.

    One sample is held per control step, so the Wiener intensity of the
    turbulence is its covariance times the step: W = intensity * covariance
    with intensity defaulting to ``dt``. An explicit source intensity wins.
    """
    stats = source.statistics()
    scale = dt if source.intensity is None else source.intensity
    if scale == 1.0:
        return stats
    return stats.scaled(scale)
