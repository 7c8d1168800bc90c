"""
Reference Trajectories - Hover Points and Minimum Snap
======================================================

Piecewise degree-7 polynomials per axis. Each segment is stored with
ascending coefficients in its local time tau = t - t_start(segment).

Minimum snap: per axis, minimize the integral of the squared 4th derivative
subject to

    p_j(0) = w_j,  p_j(T_j) = w_{j+1}              (interpolation)
    p_j^(r)(T_j) = p_{j+1}^(r)(0), r = 1..3        (interior joints)
    p^(r) = 0 at both ends, r = 1..3               (rest-to-rest)

solved as one dense KKT system [[2Q, A^T], [A, 0]] in normalized segment
time s = tau / T_j, then rescaled to tau.
"""

import logging
from dataclasses import dataclass
from math import factorial
from typing import List, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from .dynamics import State
from .exceptions import DegenerateWaypointsError, OutOfRangeError

logger = logging.getLogger(__name__)

DEGREE = 7
N_COEFFS = DEGREE + 1
SNAP_ORDER = 4
CONTINUITY_ORDER = 3
TIME_TOLERANCE = 1e-12

HOVER_POINT = (1.0, 1.0, 8.0)
LINE_START = (0.0, 0.0, 4.0)
LINE_END = (5.0, 0.0, 4.0)
LINE_DURATION = 10.0
CIRCUIT_START = (0.0, 0.0, 0.0)
CIRCUIT_CORNERS = ((1.0, 0.0, 4.0), (4.0, 0.0, 4.0), (4.0, 3.0, 4.0), (1.0, 3.0, 4.0))
CIRCUIT_SEGMENT_TIME = 5.0

IDENTITY_QUATERNION = np.array([1.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class Waypoint:
    """Position (m) to pass at ``arrival_time`` (s)."""

    position: Tuple[float, float, float]
    arrival_time: float

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "arrival_time", float(self.arrival_time))
        if len(self.position) != 3:
            raise DegenerateWaypointsError(f"waypoint position must have 3 components, got {self.position}")


@dataclass(frozen=True, eq=False)
class PolyTrajectory:
    """
    Piecewise polynomial reference.

    Attributes:
        coefficients: (segments, 3, 8) ascending coefficients in local time
        breaks: Segment boundary times (segments + 1,), s
    """

    coefficients: np.ndarray
    breaks: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float))
        object.__setattr__(self, "breaks", np.asarray(self.breaks, dtype=float))

    @property
    def n_segments(self) -> int:
        return self.coefficients.shape[0]

    @property
    def start(self) -> float:
        return float(self.breaks[0])

    @property
    def t_f(self) -> float:
        return float(self.breaks[-1])

    @property
    def duration(self) -> float:
        return self.t_f - self.start

    def segment_index(self, t: float) -> int:
        idx = int(np.searchsorted(self.breaks, t, side="right")) - 1
        return min(max(idx, 0), self.n_segments - 1)

    def evaluate(self, t: float, order: int = 0) -> np.ndarray:
        """Derivative of the given order at time t, per axis (3,)."""
        if not (self.breaks[0] - TIME_TOLERANCE <= t <= self.breaks[-1] + TIME_TOLERANCE):
            raise OutOfRangeError(
                f"t={t:.6g} s outside trajectory range [{self.start:.6g}, {self.t_f:.6g}]"
            )
        seg = self.segment_index(t)
        tau = t - self.breaks[seg]
        coeffs = self.coefficients[seg]
        if order:
            coeffs = P.polyder(coeffs, m=order, axis=1)
        return np.array([P.polyval(tau, coeffs[axis]) for axis in range(3)])


# =========================================================================
# CONSTRUCTION
# =========================================================================
def _derivative_row(s: float, order: int) -> np.ndarray:
    """Row r with r @ a = d^order/ds^order of sum a_k s^k."""
    row = np.zeros(N_COEFFS)
    for k in range(order, N_COEFFS):
        row[k] = factorial(k) / factorial(k - order) * s ** (k - order)
    return row


def _snap_hessian(T: float) -> np.ndarray:
    """Q with a^T Q a = integral over [0, T] of (d^4 p / dtau^4)^2, p in s = tau / T."""
    Q = np.zeros((N_COEFFS, N_COEFFS))
    for k in range(SNAP_ORDER, N_COEFFS):
        for l in range(SNAP_ORDER, N_COEFFS):
            power = k + l - 2 * SNAP_ORDER + 1
            scale = factorial(k) / factorial(k - SNAP_ORDER) * factorial(l) / factorial(l - SNAP_ORDER)
            Q[k, l] = scale / power
    return Q / T ** (2 * SNAP_ORDER - 1)


def _constraints(durations: np.ndarray, rest_to_rest: bool) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """
    Constraint matrix shared by all axes, in normalized segment time s.

    Returns:
        (A, targets) where targets[i] = (row, waypoint index) for the
        interpolation rows; every other row has right-hand side 0.
    """
    n_seg = len(durations)
    boundary_orders = range(1, CONTINUITY_ORDER + 1) if rest_to_rest else range(1, 2)
    rows, targets = [], []

    def add(row, waypoint=None):
        if waypoint is not None:
            targets.append((len(rows), waypoint))
        rows.append(row)

    for j in range(n_seg):
        start = np.zeros(N_COEFFS * n_seg)
        start[N_COEFFS * j:N_COEFFS * (j + 1)] = _derivative_row(0.0, 0)
        add(start, j)
        end = np.zeros(N_COEFFS * n_seg)
        end[N_COEFFS * j:N_COEFFS * (j + 1)] = _derivative_row(1.0, 0)
        add(end, j + 1)

    for order in boundary_orders:
        first = np.zeros(N_COEFFS * n_seg)
        first[:N_COEFFS] = _derivative_row(0.0, order)
        add(first)
        last = np.zeros(N_COEFFS * n_seg)
        last[-N_COEFFS:] = _derivative_row(1.0, order)
        add(last)

    # d/dtau = (1/T) d/ds on each side of a joint
    for j in range(n_seg - 1):
        for order in range(1, CONTINUITY_ORDER + 1):
            joint = np.zeros(N_COEFFS * n_seg)
            joint[N_COEFFS * j:N_COEFFS * (j + 1)] = _derivative_row(1.0, order) / durations[j] ** order
            joint[N_COEFFS * (j + 1):N_COEFFS * (j + 2)] = -_derivative_row(0.0, order) / durations[j + 1] ** order
            add(joint)

    return np.array(rows), targets


def min_snap(waypoints: Sequence[Waypoint], rest_to_rest: bool = True) -> PolyTrajectory:
    """
    Minimum-snap trajectory through waypoints.

    Args:
        waypoints: At least 2 waypoints with strictly increasing arrival times
        rest_to_rest: Zero velocity, acceleration and jerk at both ends;
            when False only the end velocities are pinned to zero

    Returns:
        PolyTrajectory with one degree-7 segment per waypoint interval
    """
    if len(waypoints) < 2:
        raise DegenerateWaypointsError(f"need at least 2 waypoints, got {len(waypoints)}")
    times = np.array([w.arrival_time for w in waypoints])
    durations = np.diff(times)
    if np.any(durations <= TIME_TOLERANCE):
        bad = int(np.flatnonzero(durations <= TIME_TOLERANCE)[0]) + 1
        raise DegenerateWaypointsError(f"arrival times not strictly increasing at waypoint {bad}")

    n_seg = len(durations)
    n_vars = N_COEFFS * n_seg
    hessian = np.zeros((n_vars, n_vars))
    for j, T in enumerate(durations):
        hessian[N_COEFFS * j:N_COEFFS * (j + 1), N_COEFFS * j:N_COEFFS * (j + 1)] = _snap_hessian(T)

    A, targets = _constraints(durations, rest_to_rest)
    n_cons = A.shape[0]
    # a positive rescale leaves the minimizer unchanged; match the constraint scale
    hessian *= np.abs(A).max() / np.abs(hessian).max()
    kkt = np.zeros((n_vars + n_cons, n_vars + n_cons))
    kkt[:n_vars, :n_vars] = 2.0 * hessian
    kkt[:n_vars, n_vars:] = A.T
    kkt[n_vars:, :n_vars] = A

    positions = np.array([w.position for w in waypoints])
    rhs = np.zeros((n_vars + n_cons, 3))
    for row, waypoint in targets:
        rhs[n_vars + row] = positions[waypoint]

    try:
        solution = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as e:
        raise DegenerateWaypointsError(f"minimum snap system is singular: {e}") from e
    if not np.all(np.isfinite(solution)):
        raise DegenerateWaypointsError("minimum snap system produced non-finite coefficients")

    normalized = solution[:n_vars].T.reshape(3, n_seg, N_COEFFS).transpose(1, 0, 2)
    powers = durations[:, None] ** np.arange(N_COEFFS)[None, :]
    coefficients = normalized / powers[:, None, :]
    logger.debug(f"Minimum snap: {n_seg} segment(s) over {times[-1] - times[0]:g} s")
    return PolyTrajectory(coefficients, times)


def hover(p: Sequence[float] = HOVER_POINT, duration: float = 10.0) -> PolyTrajectory:
    """Constant trajectory at ``p`` for ``duration`` seconds."""
    if not duration > 0:
        raise DegenerateWaypointsError(f"hover duration must be positive, got {duration}")
    coefficients = np.zeros((1, 3, N_COEFFS))
    coefficients[0, :, 0] = np.asarray(p, dtype=float).reshape(3)
    return PolyTrajectory(coefficients, np.array([0.0, float(duration)]))


def line(
    start: Sequence[float] = LINE_START,
    end: Sequence[float] = LINE_END,
    duration: float = LINE_DURATION,
    rest_to_rest: bool = True,
) -> PolyTrajectory:
    """Single-segment minimum-snap straight line."""
    return min_snap([Waypoint(start, 0.0), Waypoint(end, duration)], rest_to_rest)


def circuit(
    start: Sequence[float] = CIRCUIT_START,
    corners: Sequence[Sequence[float]] = CIRCUIT_CORNERS,
    segment_time: float = CIRCUIT_SEGMENT_TIME,
    rest_to_rest: bool = True,
) -> PolyTrajectory:
    """Minimum-snap circuit from ``start`` through ``corners``, evenly timed."""
    points = [start, *corners]
    return min_snap(
        [Waypoint(pos, i * segment_time) for i, pos in enumerate(points)],
        rest_to_rest,
    )


# =========================================================================
# SAMPLING
# =========================================================================
def sample(traj: PolyTrajectory, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reference position and velocity at time t.

    Args:
        traj: Trajectory
        t: Time within [start, t_f], s

    Returns:
        (p_n, p_dot_n), each (3,)
    """
    return traj.evaluate(t, 0), traj.evaluate(t, 1)


def reference_state(traj: PolyTrajectory, t: float, v_w_mean: Sequence[float]) -> State:
    """
    Reference state: p = p_n(t), identity attitude, v = -v_w_mean + p_dot_n(t).

    The vehicle's inertial velocity plus the mean wind must reproduce the
    reference ground speed, since p_dot = v + v_w.
    """
    p_n, p_dot_n = sample(traj, t)
    return State(p_n, IDENTITY_QUATERNION.copy(), p_dot_n - np.asarray(v_w_mean, dtype=float))
