"""
Quadrotor Dynamics - Quaternion Rigid Body with Quadratic Drag
==============================================================

State x = [p; q; v] (10): inertial position, attitude quaternion
[q_w, q_x, q_y, q_z], inertial velocity.
Input u = [omega; f_c] (4): body angular rate and collective thrust.

    p_dot = v + v_w
    q_dot = 1/2 q (x) [0; omega]
    v_dot = g + (1/m) R(q) [0, 0, f_c] - (1/m) f_D
    f_D   = ||v|| R D R^T v

The rotation matrix comes from the product of the right- and
left-multiplication quaternion matrices. ``linearize`` returns the exact
Jacobians of ``derivative``; every term that sees the attitude through
R(q / ||q||) carries the normalization projection (I - q q^T/||q||^2)/||q||.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from .exceptions import (
    DegenerateQuaternionError,
    NumericalBlowupError,
    SingularLinearizationError,
)

logger = logging.getLogger(__name__)

STATE_DIM = 10
INPUT_DIM = 4
NOISE_DIM = 3

P_SLICE = slice(0, 3)
Q_SLICE = slice(3, 7)
V_SLICE = slice(7, 10)
QW_INDEX = 3

STATE_LABELS = ("px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz")
INPUT_LABELS = ("omega_x", "omega_y", "omega_z", "f_c")

MIN_QUATERNION_NORM = 1e-12
MIN_LINEARIZATION_SPEED = 1e-8

DRAG_CLAMP = 1.1


class DragMode(str, Enum):
    """How the drag coefficient matrix D is obtained."""

    FORMULA = "formula"
    FIXED = "fixed"


class DragFormula(str, Enum):
    """
    Readings of the airspeed-dependent drag coefficient.

    OFFSET: min(1.1, 0.2 + 0.9 exp(-0.6 s - 2))
    SCALED: min(1.1, 0.2 + 0.9 exp(-0.6 (s - 2)))
    """

    OFFSET = "offset"
    SCALED = "scaled"


# =========================================================================
# DOMAIN TYPES
# =========================================================================
@dataclass(frozen=True, eq=False)
class State:
    """Quadrotor state: position (m), quaternion, inertial velocity (m/s)."""

    p: np.ndarray
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(3))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(4))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.q, self.v])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "State":
        x = np.asarray(x, dtype=float)
        return cls(x[P_SLICE], x[Q_SLICE], x[V_SLICE])

    @classmethod
    def at_rest(cls, p=(0.0, 0.0, 0.0)) -> "State":
        return cls(np.asarray(p, dtype=float), np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))


@dataclass(frozen=True, eq=False)
class Input:
    """Control input: body rate (rad/s) and collective thrust (N)."""

    omega: np.ndarray
    f_c: float

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float).reshape(3))
        object.__setattr__(self, "f_c", float(self.f_c))

    @property
    def vector(self) -> np.ndarray:
        return np.append(self.omega, self.f_c)

    @classmethod
    def from_vector(cls, u: np.ndarray) -> "Input":
        u = np.asarray(u, dtype=float)
        return cls(u[:3], u[3])


@dataclass(frozen=True, eq=False)
class Params:
    """
    Vehicle parameters.

    Attributes:
        m: Mass, kg
        g: Gravitational acceleration, m/s^2
        drag_mode: Airspeed-dependent formula or fixed matrix
        drag_formula: Reading of the drag coefficient formula
        drag_matrix: D used when drag_mode is FIXED (3, 3)
        drag_uses_airspeed: Use v - v_w in the drag force instead of v
    """

    m: float = 1.0
    g: float = 9.81
    drag_mode: DragMode = DragMode.FORMULA
    drag_formula: DragFormula = DragFormula.OFFSET
    drag_matrix: np.ndarray = field(default_factory=lambda: np.diag([0.2, 0.2, 0.2]))
    drag_uses_airspeed: bool = False

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        object.__setattr__(self, "drag_mode", DragMode(self.drag_mode))
        object.__setattr__(self, "drag_formula", DragFormula(self.drag_formula))
        object.__setattr__(self, "drag_matrix", np.asarray(self.drag_matrix, dtype=float).reshape(3, 3))

    @property
    def gravity(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.g])

    def hover_input(self) -> np.ndarray:
        """Nominal input u0 = [0, 0, 0, m g]."""
        return np.array([0.0, 0.0, 0.0, self.m * self.g])


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Linearization (A, B) with noise injection G and turbulence covariance W."""

    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    W: np.ndarray


def noise_injection() -> np.ndarray:
    """G = [I3; 0]: turbulence enters through p_dot only."""
    G = np.zeros((STATE_DIM, NOISE_DIM))
    G[P_SLICE, :] = np.eye(3)
    return G


# =========================================================================
# QUATERNION ALGEBRA
# =========================================================================
def _left_matrix(q: np.ndarray) -> np.ndarray:
    """Q^x(q): q (x) r = Q^x(q) r."""
    qw, qx, qy, qz = q
    return np.array([
        [qw, -qx, -qy, -qz],
        [qx, qw, -qz, qy],
        [qy, qz, qw, -qx],
        [qz, -qy, qx, qw],
    ])


def _right_matrix(q: np.ndarray) -> np.ndarray:
    """Qbar^x(q): r (x) q = Qbar^x(q) r."""
    qw, qx, qy, qz = q
    return np.array([
        [qw, -qx, -qy, -qz],
        [qx, qw, qz, -qy],
        [qy, -qz, qw, qx],
        [qz, qy, -qx, qw],
    ])


# d Q^x / d q_i and d Qbar^x / d q_i (both matrices are linear in q)
_LEFT_BASIS = tuple(_left_matrix(e) for e in np.eye(4))
_RIGHT_BASIS = tuple(_right_matrix(e) for e in np.eye(4))


def _unit(q: np.ndarray) -> Tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(q))
    if norm < MIN_QUATERNION_NORM:
        raise DegenerateQuaternionError(f"quaternion norm {norm:.3e} too small")
    return q / norm, norm


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """
    Rotation matrix of a quaternion.

    Computed as the lower-right block of Qbar^x(q)^T Q^x(q) after
    normalizing q.

    Args:
        q: Quaternion [q_w, q_x, q_y, q_z]; need not be unit

    Returns:
        Rotation matrix (3, 3), body to inertial
    """
    qu, _ = _unit(np.asarray(q, dtype=float))
    return (_right_matrix(qu).T @ _left_matrix(qu))[1:, 1:]


def _rotation_partials(qu: np.ndarray) -> Tuple[np.ndarray, ...]:
    """dR/dq_i of the homogeneous product, evaluated at ``qu``."""
    left = _left_matrix(qu)
    right = _right_matrix(qu)
    return tuple(
        (_RIGHT_BASIS[i].T @ left + right.T @ _LEFT_BASIS[i])[1:, 1:]
        for i in range(4)
    )


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a (x) b."""
    return _left_matrix(np.asarray(a, dtype=float)) @ np.asarray(b, dtype=float)


def quat_derivative(q: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """q_dot = 1/2 q (x) [0; omega]."""
    return 0.5 * _left_matrix(np.asarray(q, dtype=float)) @ np.concatenate(([0.0], omega))


# =========================================================================
# DRAG
# =========================================================================
def _drag_scalar(speed: float, formula: DragFormula) -> Tuple[float, float]:
    """Drag coefficient d and dd/dspeed."""
    if DragFormula(formula) is DragFormula.OFFSET:
        decay = 0.9 * np.exp(-0.6 * speed - 2.0)
    else:
        decay = 0.9 * np.exp(-0.6 * (speed - 2.0))
    raw = 0.2 + decay
    if raw >= DRAG_CLAMP:
        return DRAG_CLAMP, 0.0
    return float(raw), float(-0.6 * decay)


def drag_coefficient(
    v_w: np.ndarray,
    p_dot: np.ndarray,
    formula: DragFormula = DragFormula.OFFSET,
) -> np.ndarray:
    """
    Airspeed-dependent isotropic drag coefficient matrix.

    Args:
        v_w: Wind velocity, m/s
        p_dot: Vehicle inertial velocity p_dot, m/s
        formula: Which reading of the coefficient formula to use

    Returns:
        d * I3 with 0.2 <= d <= 1.1
    """
    speed = float(np.linalg.norm(np.asarray(v_w, dtype=float) - np.asarray(p_dot, dtype=float)))
    d, _ = _drag_scalar(speed, formula)
    return d * np.eye(3)


def _drag_force(R: np.ndarray, v: np.ndarray, D: np.ndarray) -> np.ndarray:
    speed = float(np.linalg.norm(v))
    if speed == 0.0:
        return np.zeros(3)
    return speed * (R @ (D @ (R.T @ v)))


def drag_force(q: np.ndarray, v: np.ndarray, D: np.ndarray) -> np.ndarray:
    """
    Quadratic drag in the inertial frame, f_D = ||v|| R D R^T v.

    Args:
        q: Attitude quaternion
        v: Velocity the drag acts on, m/s
        D: Body-frame drag coefficient matrix (3, 3)

    Returns:
        Drag force, N (3,); exactly zero when v = 0
    """
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return np.zeros(3)
    return _drag_force(quat_to_rotation(q), v, np.asarray(D, dtype=float))


def _drag_matrix(params: Params, v_w: np.ndarray, p_dot: np.ndarray) -> np.ndarray:
    if params.drag_mode is DragMode.FIXED:
        return params.drag_matrix
    return drag_coefficient(v_w, p_dot, params.drag_formula)


# =========================================================================
# CONTINUOUS DYNAMICS
# =========================================================================
def state_derivative(x: np.ndarray, u: np.ndarray, v_w: np.ndarray, params: Params) -> np.ndarray:
    """Vector form of ``derivative`` on flat arrays x (10,), u (4,)."""
    q = x[Q_SLICE]
    v = x[V_SLICE]
    R = quat_to_rotation(q)

    p_dot = v + v_w
    q_dot = quat_derivative(q, u[:3])

    D = _drag_matrix(params, v_w, p_dot)
    v_drag = v - v_w if params.drag_uses_airspeed else v
    f_drag = _drag_force(R, v_drag, D)
    v_dot = params.gravity + (R[:, 2] * u[3] - f_drag) / params.m

    return np.concatenate([p_dot, q_dot, v_dot])


def derivative(x: State, u: Input, v_w: np.ndarray, params: Params) -> np.ndarray:
    """
    Time derivative of the quadrotor state.

    Args:
        x: State
        u: Input
        v_w: Wind velocity, m/s
        params: Vehicle parameters

    Returns:
        x_dot (10,) ordered [p_dot; q_dot; v_dot]
    """
    return state_derivative(x.vector, u.vector, np.asarray(v_w, dtype=float), params)


def rk4_step(
    x: np.ndarray,
    u: np.ndarray,
    v_w: np.ndarray,
    dt: float,
    params: Params,
    t: Optional[float] = None,
) -> np.ndarray:
    """One RK4 step on flat arrays, wind and input held; quaternion renormalized."""
    k1 = state_derivative(x, u, v_w, params)
    k2 = state_derivative(x + 0.5 * dt * k1, u, v_w, params)
    k3 = state_derivative(x + 0.5 * dt * k2, u, v_w, params)
    k4 = state_derivative(x + dt * k3, u, v_w, params)
    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if not np.all(np.isfinite(x_next)):
        raise NumericalBlowupError(f"non-finite state after step at t={t}", time=t)
    x_next[Q_SLICE] /= np.linalg.norm(x_next[Q_SLICE])
    return x_next


def step(
    x: State,
    u: Input,
    v_w: np.ndarray,
    dt: float,
    params: Params,
    t: Optional[float] = None,
) -> State:
    """
    Advance the state by ``dt`` with classical RK4.

    Args:
        x: Current state
        u: Input held over the step
        v_w: Wind velocity held over the step, m/s
        dt: Step, s (> 0)
        params: Vehicle parameters
        t: Current time, reported if the step blows up

    Returns:
        Next state with unit quaternion
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return State.from_vector(rk4_step(x.vector, u.vector, np.asarray(v_w, dtype=float), dt, params, t))


# =========================================================================
# LINEARIZATION
# =========================================================================
def _rate_matrix(omega: np.ndarray) -> np.ndarray:
    """Omega(w) with q (x) [0; w] = Omega(w) q."""
    return _right_matrix(np.concatenate(([0.0], omega)))


def linearize(
    x_n: Union[State, np.ndarray],
    u_n: Union[Input, np.ndarray],
    params: Params,
    v_w: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Jacobians of ``derivative`` at a nominal point.

    Args:
        x_n: Nominal state; its velocity must be nonzero
        u_n: Nominal input
        params: Vehicle parameters
        v_w: Nominal wind, only used when drag_uses_airspeed is set

    Returns:
        (A (10, 10), B (10, 4))
    """
    x = x_n.vector if isinstance(x_n, State) else np.asarray(x_n, dtype=float)
    u = u_n.vector if isinstance(u_n, Input) else np.asarray(u_n, dtype=float)
    v_w = np.zeros(3) if v_w is None else np.asarray(v_w, dtype=float)

    q = x[Q_SLICE]
    v = x[V_SLICE]
    omega, f_c = u[:3], u[3]
    m = params.m

    speed = float(np.linalg.norm(v))
    v_drag = v - v_w if params.drag_uses_airspeed else v
    drag_speed = float(np.linalg.norm(v_drag))
    if speed < MIN_LINEARIZATION_SPEED or drag_speed < MIN_LINEARIZATION_SPEED:
        raise SingularLinearizationError(
            f"nominal speed {min(speed, drag_speed):.3e} m/s below {MIN_LINEARIZATION_SPEED:g}; "
            "perturb the nominal velocity"
        )

    qu, q_norm = _unit(q)
    projection = (np.eye(4) - np.outer(qu, qu)) / q_norm
    R = quat_to_rotation(qu)
    dR = _rotation_partials(qu)

    # airspeed seen by the coefficient is ||v_w - p_dot|| = ||v||
    if params.drag_mode is DragMode.FIXED:
        D = params.drag_matrix
        d_slope = 0.0
    else:
        d, d_slope = _drag_scalar(speed, params.drag_formula)
        D = d * np.eye(3)

    A = np.zeros((STATE_DIM, STATE_DIM))
    B = np.zeros((STATE_DIM, INPUT_DIM))

    A[P_SLICE, V_SLICE] = np.eye(3)
    A[Q_SLICE, Q_SLICE] = 0.5 * _rate_matrix(omega)

    dv_dq = np.empty((3, 4))
    for i in range(4):
        thrust = dR[i][:, 2] * f_c
        drag = drag_speed * (dR[i] @ D @ R.T + R @ D @ dR[i].T) @ v_drag
        dv_dq[:, i] = (thrust - drag) / m
    A[V_SLICE, Q_SLICE] = dv_dq @ projection

    N = R @ D @ R.T
    dv_dv = N @ (drag_speed * np.eye(3) + np.outer(v_drag, v_drag) / drag_speed)
    if d_slope:
        dv_dv = dv_dv + (d_slope * drag_speed / speed) * np.outer(v_drag, v)
    A[V_SLICE, V_SLICE] = -dv_dv / m

    B[Q_SLICE, 0:3] = 0.5 * _left_matrix(q)[:, 1:]
    B[V_SLICE, 3] = R[:, 2] / m

    return A, B


def linear_model(
    x_n: Union[State, np.ndarray],
    u_n: Union[Input, np.ndarray],
    params: Params,
    W: np.ndarray,
    v_w: Optional[np.ndarray] = None,
) -> LinearModel:
    """Bundle ``linearize`` with G = [I3; 0] and the given W."""
    A, B = linearize(x_n, u_n, params, v_w)
    return LinearModel(A, B, noise_injection(), np.asarray(W, dtype=float))
