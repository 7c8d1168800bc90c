"""
Riccati Solvers - LQR and Minimum Cost Variance Gains
=====================================================

Solvers for the matrix equations behind LQR and minimum-cost-variance (MCV)
feedback:

- Lyapunov equations A^T X + X A + Q = 0 (dense Kronecker solve)
- LQR algebraic Riccati equation (Kleinman-Newton iteration)
- Coupled MCV algebraic Riccati equations, infinite horizon
  (policy iteration on the pair of Lyapunov equations)
- Coupled MCV Riccati differential equations, finite horizon
  (backward RK4 sweep, forward gain evaluation)

MCV gain: K = -R^-1 B^T (M + gamma H). With S = B R^-1 B^T the CARE pair is

    A^T M + M A + Q - M S M + gamma^2 H S H = 0
    A^T H + H A - M S H - H S M - 2 gamma H S H + 4 M G W G^T M = 0
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import (
    ConfigError,
    ConvergenceError,
    HorizonError,
    InstabilityError,
    NumericalError,
    UnstabilizableError,
)

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
MIN_R_EIGENVALUE = 1e-10
LYAPUNOV_RESIDUAL = 1e-8
ARE_RESIDUAL = 1e-8

STATIONARY_TOLERANCE = 1e-9
SWEEP_HORIZON = 1e4
SWEEP_DIVERGENCE = 1e12


# =========================================================================
# DOMAIN TYPES
# =========================================================================
def _symmetric(name: str, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] != X.shape[1]:
        raise ConfigError(f"must be square, got shape {X.shape}", key=name)
    if np.max(np.abs(X - X.T), initial=0.0) > SYMMETRY_TOLERANCE:
        raise ConfigError("must be symmetric", key=name)
    return X


@dataclass(frozen=True, eq=False)
class CostSpec:
    """
    Quadratic cost weights and the variance weight gamma.

    Attributes:
        Q: State weight (n, n), symmetric PSD
        R: Input weight (m, m), symmetric PD
        Q_f: Terminal weight (n, n); defaults to Q
        gamma: Variance weight (>= 0); 0 is the LQR limit
    """

    Q: np.ndarray
    R: np.ndarray
    Q_f: Optional[np.ndarray] = None
    gamma: float = 0.0

    def __post_init__(self):
        Q = _symmetric("cost.Q", self.Q)
        R = _symmetric("cost.R", self.R)
        Q_f = Q.copy() if self.Q_f is None else _symmetric("cost.Q_f", self.Q_f)
        if Q_f.shape != Q.shape:
            raise ConfigError(f"shape {Q_f.shape} differs from Q {Q.shape}", key="cost.Q_f")
        if np.linalg.eigvalsh(R).min() <= MIN_R_EIGENVALUE:
            raise ConfigError("must be positive definite", key="cost.R")
        if not self.gamma >= 0:
            raise ConfigError(f"must be >= 0, got {self.gamma}", key="cost.gamma")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "Q_f", Q_f)
        object.__setattr__(self, "gamma", float(self.gamma))

    def with_gamma(self, gamma: float) -> "CostSpec":
        return replace(self, gamma=gamma)

    def restricted(self, keep: Sequence[int]) -> "CostSpec":
        """Cost on the state coordinates ``keep``."""
        idx = np.ix_(keep, keep)
        return CostSpec(self.Q[idx], self.R, self.Q_f[idx], self.gamma)


@dataclass(frozen=True, eq=False)
class MCVSolution:
    """Infinite-horizon MCV solution."""

    M: np.ndarray
    H: np.ndarray
    K: np.ndarray
    iterations: int
    residuals: Tuple[float, float]
    sigma_history: List[float] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class GainSchedule:
    """
    Feedback gains on a time grid, applied zero-order hold.

    A constant (infinite-horizon) gain has a single knot at t=0.
    """

    times: np.ndarray
    gains: np.ndarray
    M_traj: Optional[np.ndarray] = None
    H_traj: Optional[np.ndarray] = None

    @classmethod
    def constant(cls, K: np.ndarray, M: Optional[np.ndarray] = None, H: Optional[np.ndarray] = None):
        return cls(
            np.zeros(1),
            K[None, :, :],
            None if M is None else M[None, :, :],
            None if H is None else H[None, :, :],
        )

    @property
    def is_constant(self) -> bool:
        return len(self.times) == 1

    def index_at(self, t: float) -> int:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(idx, 0), len(self.times) - 1)

    def gain_at(self, t: float) -> np.ndarray:
        return self.gains[self.index_at(t)]

    def embedded(self, keep: Sequence[int], n: int) -> "GainSchedule":
        """Lift a schedule designed on coordinates ``keep`` back to dimension ``n``."""
        keep = np.asarray(keep)
        gains = np.zeros(self.gains.shape[:2] + (n,))
        gains[:, :, keep] = self.gains

        def lift(traj):
            if traj is None:
                return None
            full = np.zeros((traj.shape[0], n, n))
            full[:, keep[:, None], keep[None, :]] = traj
            return full

        return GainSchedule(self.times, gains, lift(self.M_traj), lift(self.H_traj))


# =========================================================================
# LYAPUNOV
# =========================================================================
def spectral_abscissa(A: np.ndarray) -> float:
    """Largest real part of the eigenvalues of A."""
    return float(np.max(np.linalg.eigvals(A).real))


def is_hurwitz(A: np.ndarray) -> bool:
    return spectral_abscissa(A) < 0.0


def solve_lyapunov(A_cl: np.ndarray, Q_bar: np.ndarray) -> np.ndarray:
    """
    Solve A_cl^T X + X A_cl + Q_bar = 0.

    The equation is vectorized as (A^T (x) I + I (x) A^T) vec(X) = -vec(Q_bar)
    and solved densely.

    Args:
        A_cl: Hurwitz matrix (n, n)
        Q_bar: Symmetric matrix (n, n)

    Returns:
        Symmetric solution X (n, n)
    """
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    Q_bar = np.atleast_2d(np.asarray(Q_bar, dtype=float))
    abscissa = spectral_abscissa(A_cl)
    if abscissa >= 0.0:
        raise InstabilityError(
            f"closed loop not Hurwitz (max real part {abscissa:.3e})",
            max_real_part=abscissa,
        )

    n = A_cl.shape[0]
    eye = np.eye(n)
    operator = np.kron(A_cl.T, eye) + np.kron(eye, A_cl.T)
    try:
        vec = np.linalg.solve(operator, -Q_bar.reshape(-1))
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Lyapunov system singular: {e}") from e

    X = vec.reshape(n, n)
    X = 0.5 * (X + X.T)
    residual = np.linalg.norm(A_cl.T @ X + X @ A_cl + Q_bar)
    if residual > LYAPUNOV_RESIDUAL * (1.0 + np.linalg.norm(Q_bar)):
        raise NumericalError(f"Lyapunov residual {residual:.3e} too large")
    return X


# =========================================================================
# LQR
# =========================================================================
def _input_coupling(B: np.ndarray, R: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    R_inv = np.linalg.inv(R)
    return R_inv, B @ R_inv @ B.T


def are_residual(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, M: np.ndarray) -> float:
    """Frobenius norm of A^T M + M A + Q - M B R^-1 B^T M."""
    _, S = _input_coupling(B, R)
    return float(np.linalg.norm(A.T @ M + M @ A + Q - M @ S @ M))


def initial_stabilizing_gain(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    horizon: float = SWEEP_HORIZON,
    tolerance: float = STATIONARY_TOLERANCE,
) -> np.ndarray:
    """
    Stabilizing gain from a backward LQR Riccati sweep.

    Integrates dM/dtau = A^T M + M A + Q - M S M from M(0) = Q until
    ||dM/dtau|| / ||M|| < tolerance, in chunks of doubling length.

    Args:
        A, B: System matrices
        Q, R: LQR weights
        horizon: Total sweep length before giving up, s
        tolerance: Relative stationarity threshold

    Returns:
        K0 (m, n) with A + B K0 Hurwitz
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    R_inv, S = _input_coupling(B, R)
    blowup = SWEEP_DIVERGENCE * (1.0 + np.linalg.norm(Q))

    def rhs_matrix(M):
        return A.T @ M + M @ A + Q - M @ S @ M

    def rhs(_, y):
        return rhs_matrix(y.reshape(n, n)).reshape(-1)

    M = np.array(Q, dtype=float)
    tau, chunk = 0.0, 1.0
    previous = np.inf
    while tau < horizon:
        sol = solve_ivp(rhs, (tau, tau + chunk), M.reshape(-1), method="LSODA", rtol=1e-10, atol=1e-12)
        if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
            raise UnstabilizableError(f"Riccati sweep failed at tau={tau:.3g} s: {sol.message}")
        tau += chunk
        chunk = min(2.0 * chunk, 100.0)

        M = sol.y[:, -1].reshape(n, n)
        M = 0.5 * (M + M.T)
        norm = np.linalg.norm(M)
        if norm > blowup:
            raise UnstabilizableError(f"Riccati sweep diverging (||M||={norm:.3e} at tau={tau:.3g} s)")

        relative = np.linalg.norm(rhs_matrix(M)) / max(norm, 1e-300)
        K0 = -R_inv @ B.T @ M
        logger.debug(f"Stabilizing sweep tau={tau:.1f}s relative rate={relative:.3e}")
        if relative < tolerance:
            if is_hurwitz(A + B @ K0):
                return K0
            raise UnstabilizableError("stationary Riccati solution does not stabilize (A, B)")
        if relative > 0.5 * previous and is_hurwitz(A + B @ K0):
            logger.warning(
                f"Riccati sweep stalled at relative rate {relative:.3e}; accepting stabilizing gain"
            )
            return K0
        previous = relative

    raise UnstabilizableError(f"no stationary Riccati solution within {horizon:g} s")


def solve_lqr(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    K0: Optional[np.ndarray] = None,
    max_iter: int = 100,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stabilizing solution of the LQR algebraic Riccati equation.

    Kleinman-Newton iteration: M_k solves the Lyapunov equation of
    A + B K_k with weight Q + K_k^T R K_k, then K_{k+1} = -R^-1 B^T M_k.

    Args:
        A, B: System matrices (n, n), (n, m)
        Q, R: Weights
        K0: Stabilizing initial gain (computed when omitted)
        max_iter: Newton iteration budget

    Returns:
        (M, K) with K = -R^-1 B^T M
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    R_inv, _ = _input_coupling(B, R)
    K = initial_stabilizing_gain(A, B, Q, R) if K0 is None else np.asarray(K0, dtype=float)
    bound = ARE_RESIDUAL * (1.0 + np.linalg.norm(Q))

    history = []
    for iteration in range(1, max_iter + 1):
        M = solve_lyapunov(A + B @ K, Q + K.T @ R @ K)
        K_next = -R_inv @ B.T @ M
        change = np.linalg.norm(K_next - K) / max(np.linalg.norm(K), 1e-300)
        history.append(float(change))
        K = K_next
        if change < 1e-13 or are_residual(A, B, Q, R, M) < 1e-3 * bound:
            break
    else:
        raise ConvergenceError(f"Newton iteration did not converge in {max_iter} steps", history)

    M = solve_lyapunov(A + B @ K, Q + K.T @ R @ K)
    K = -R_inv @ B.T @ M
    residual = are_residual(A, B, Q, R, M)
    if residual > bound:
        raise ConvergenceError(f"ARE residual {residual:.3e} above {bound:.3e}", history)
    logger.debug(f"LQR converged in {iteration} Newton steps (residual {residual:.2e})")
    return M, K


# =========================================================================
# INFINITE-HORIZON MCV
# =========================================================================
def care_residuals(
    A: np.ndarray,
    B: np.ndarray,
    G: np.ndarray,
    W: np.ndarray,
    cost: CostSpec,
    M: np.ndarray,
    H: np.ndarray,
) -> Tuple[float, float]:
    """Frobenius norms of the two coupled algebraic Riccati equations."""
    _, S = _input_coupling(B, cost.R)
    gamma = cost.gamma
    noise = G @ W @ G.T
    r1 = A.T @ M + M @ A + cost.Q - M @ S @ M + gamma ** 2 * H @ S @ H
    r2 = A.T @ H + H @ A - M @ S @ H - H @ S @ M - 2.0 * gamma * H @ S @ H + 4.0 * M @ noise @ M
    return float(np.linalg.norm(r1)), float(np.linalg.norm(r2))


def mcv_infinite(
    A: np.ndarray,
    B: np.ndarray,
    G: np.ndarray,
    W: np.ndarray,
    cost: CostSpec,
    eps: float = 1e-9,
    max_iter: int = 200,
    K0: Optional[np.ndarray] = None,
    residual_tol: float = 1e-6,
) -> MCVSolution:
    """
    Iterative infinite-horizon MCV control.

    Starting from a stabilizing K_0, repeat:
      (A+BK_k)^T M_k + M_k (A+BK_k) + K_k^T R K_k + Q = 0
      (A+BK_k)^T H_k + H_k (A+BK_k) + 4 M_k G W G^T M_k = 0
      K_{k+1} = -R^-1 B^T (M_k + gamma H_k)
    until ||K_{k+1} - K_k|| / ||K_k|| <= eps.

    Args:
        A, B, G: Linear model
        W: Turbulence covariance
        cost: Weights and gamma
        eps: Relative gain-change threshold
        max_iter: Iteration budget
        K0: Initial stabilizing gain (LQR sweep when omitted)
        residual_tol: Relative CARE residual accepted on exit

    Returns:
        MCVSolution
    """
    if not eps > 0:
        raise ConfigError(f"must be positive, got {eps}", key="solver.eps")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    G = np.atleast_2d(np.asarray(G, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    R_inv, _ = _input_coupling(B, cost.R)
    noise = G @ W @ G.T
    gamma = cost.gamma

    K = initial_stabilizing_gain(A, B, cost.Q, cost.R) if K0 is None else np.asarray(K0, dtype=float)
    sigmas: List[float] = []

    for iteration in range(1, max_iter + 1):
        A_cl = A + B @ K
        try:
            M = solve_lyapunov(A_cl, K.T @ cost.R @ K + cost.Q)
            H = solve_lyapunov(A_cl, 4.0 * M @ noise @ M)
        except InstabilityError as e:
            raise InstabilityError(
                f"MCV iteration {iteration} lost stability (gamma={gamma:g}): {e}",
                max_real_part=e.max_real_part,
            ) from e

        K_next = -R_inv @ B.T @ (M + gamma * H)
        sigma = float(np.linalg.norm(K_next - K) / max(np.linalg.norm(K), 1e-300))
        sigmas.append(sigma)
        logger.debug(f"MCV iteration {iteration}: sigma={sigma:.3e}")
        K = K_next
        if sigma <= eps:
            break
    else:
        raise ConvergenceError(
            f"MCV iteration did not reach sigma <= {eps:g} in {max_iter} iterations "
            f"(last sigma {sigmas[-1]:.3e})",
            sigmas,
        )

    abscissa = spectral_abscissa(A + B @ K)
    if abscissa >= 0.0:
        raise InstabilityError(
            f"converged MCV gain is not stabilizing (gamma={gamma:g})", max_real_part=abscissa
        )

    residuals = care_residuals(A, B, G, W, cost, M, H)
    bound = residual_tol * (1.0 + np.linalg.norm(cost.Q))
    if max(residuals) > bound:
        raise ConvergenceError(
            f"CARE residuals {residuals[0]:.3e}, {residuals[1]:.3e} above {bound:.3e}", sigmas
        )
    if len(sigmas) >= 3 and not (sigmas[-3] > sigmas[-2] > sigmas[-1]):
        logger.warning(f"MCV gain change not monotone over the last 3 iterations: {sigmas[-3:]}")

    logger.info(f"MCV gain converged in {iteration} iterations (gamma={gamma:g})")
    return MCVSolution(0.5 * (M + M.T), 0.5 * (H + H.T), K, iteration, residuals, sigmas)


# =========================================================================
# FINITE-HORIZON MCV
# =========================================================================
def _schedule(name: str, X: np.ndarray, knots: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        return np.broadcast_to(X, (knots,) + X.shape)
    if X.ndim != 3 or X.shape[0] != knots:
        raise ConfigError(f"expected {knots} knots, got shape {X.shape}", key=name)
    return X


def mcv_finite(
    A_of_t: np.ndarray,
    B_of_t: np.ndarray,
    G: np.ndarray,
    W: np.ndarray,
    cost: CostSpec,
    t_f: float,
    dt: float,
    substeps: int = 1,
) -> GainSchedule:
    """
    Finite-horizon MCV gains.

    Integrates the coupled Riccati ODEs backward from M(t_f) = Q_f,
    H(t_f) = 0 with RK4, then evaluates K(t) = -R^-1 B(t)^T (M + gamma H)
    on the grid. A(t), B(t) are linearly interpolated between knots at the
    internal RK4 stages.

    Args:
        A_of_t: A on the grid (N+1, n, n), or one (n, n) for time-invariant
        B_of_t: B on the grid (N+1, n, m), or one (n, m)
        G, W: Noise injection and covariance
        cost: Weights (Q, R, Q_f) and gamma
        t_f: Horizon, s
        dt: Grid step, s; must divide t_f
        substeps: RK4 steps per grid interval

    Returns:
        GainSchedule with gains, M(t) and H(t) on the grid
    """
    if not (dt > 0 and t_f > 0):
        raise ConfigError(f"dt={dt} and t_f={t_f} must be positive", key="run.dt")
    n_steps = int(round(t_f / dt))
    if n_steps < 1 or abs(n_steps * dt - t_f) > 1e-9 * max(1.0, t_f):
        raise ConfigError(f"dt={dt} does not divide t_f={t_f}", key="run.dt")
    knots = n_steps + 1

    A_s = _schedule("A_of_t", A_of_t, knots)
    B_s = _schedule("B_of_t", B_of_t, knots)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    R_inv = np.linalg.inv(cost.R)
    noise = G @ W @ G.T
    gamma = cost.gamma
    Q = cost.Q

    def rates(A, S, M, H):
        """Derivatives with respect to backward time tau = t_f - t."""
        HSH = H @ S @ H
        dM = A.T @ M + M @ A + Q - M @ S @ M + gamma ** 2 * HSH
        dH = A.T @ H + H @ A + 4.0 * M @ noise @ M - M @ S @ H - H @ S @ M - 2.0 * gamma * HSH
        return dM, dH

    def model_at(k, alpha):
        """A, S at fraction alpha of the way from knot k back to knot k-1."""
        A = (1.0 - alpha) * A_s[k] + alpha * A_s[k - 1]
        B = (1.0 - alpha) * B_s[k] + alpha * B_s[k - 1]
        return A, B @ R_inv @ B.T

    n = Q.shape[0]
    M_traj = np.empty((knots, n, n))
    H_traj = np.empty((knots, n, n))
    M = cost.Q_f.copy()
    H = np.zeros((n, n))
    M_traj[-1], H_traj[-1] = M, H

    h = dt / substeps
    for k in range(n_steps, 0, -1):
        for sub in range(substeps):
            a0 = sub / substeps
            a_half = (sub + 0.5) / substeps
            a1 = (sub + 1.0) / substeps
            A0, S0 = model_at(k, a0)
            Ah, Sh = model_at(k, a_half)
            A1, S1 = model_at(k, a1)

            k1 = rates(A0, S0, M, H)
            k2 = rates(Ah, Sh, M + 0.5 * h * k1[0], H + 0.5 * h * k1[1])
            k3 = rates(Ah, Sh, M + 0.5 * h * k2[0], H + 0.5 * h * k2[1])
            k4 = rates(A1, S1, M + h * k3[0], H + h * k3[1])
            M = M + (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            H = H + (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            M = 0.5 * (M + M.T)
            H = 0.5 * (H + H.T)

        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(H))):
            t_fail = (k - 1) * dt
            raise HorizonError(
                f"backward Riccati sweep blew up at t={t_fail:.4g} s; "
                "shorten the horizon, reduce gamma or refine the step",
                time=t_fail,
            )
        M_traj[k - 1], H_traj[k - 1] = M, H

    gains = np.empty((knots, R_inv.shape[0], n))
    for k in range(knots):
        gains[k] = -R_inv @ B_s[k].T @ (M_traj[k] + gamma * H_traj[k])

    logger.info(f"Finite-horizon sweep done: {knots} knots over {t_f:g} s (gamma={gamma:g})")
    return GainSchedule(np.arange(knots) * dt, gains, M_traj, H_traj)


def lqr_finite(
    A_of_t: np.ndarray,
    B_of_t: np.ndarray,
    cost: CostSpec,
    t_f: float,
    dt: float,
    substeps: int = 1,
) -> GainSchedule:
    """Finite-horizon LQR: the gamma = 0 case of ``mcv_finite``."""
    n = cost.Q.shape[0]
    return mcv_finite(
        A_of_t, B_of_t, np.zeros((n, 1)), np.zeros((1, 1)), cost.with_gamma(0.0), t_f, dt, substeps
    )
