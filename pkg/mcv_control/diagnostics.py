"""
Self-Verification Suites
========================

Numerical health checks behind the ``check`` command:

- Jacobian: analytic (A, B) against central finite differences
- Lyapunov: Kronecker solve against scipy's Bartels-Stewart solver
- Riccati: ARE / CARE residuals, closed-loop stability, gamma=0 and W=0
  reductions on the scenario's design model
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.linalg import solve_continuous_are, solve_continuous_lyapunov

from .dynamics import INPUT_DIM, STATE_DIM, Params, linearize, state_derivative
from .exceptions import MCVError
from .riccati import (
    care_residuals,
    is_hurwitz,
    lqr_finite,
    mcv_finite,
    mcv_infinite,
    solve_lqr,
    solve_lyapunov,
    spectral_abscissa,
)
from .sim import DESIGN_COORDS, Scenario, design_model, design_noise

logger = logging.getLogger(__name__)

JACOBIAN_TOLERANCE = 1e-5
LYAPUNOV_TOLERANCE = 1e-9
REDUCTION_TOLERANCE = 1e-8
CARE_TOLERANCE = 1e-6
CHECK_GAMMAS = (0.25, 0.75, 1.25)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check: the measured value against its threshold."""

    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


def _result(name: str, value: float, threshold: float, detail: str = "") -> CheckResult:
    passed = bool(np.isfinite(value) and value < threshold)
    log = logger.info if passed else logger.error
    log(f"{name}: {value:.3e} (threshold {threshold:.1e}) {'ok' if passed else 'FAILED'}")
    return CheckResult(name, passed, float(value), threshold, detail)


def _failure(name: str, threshold: float, error: Exception) -> CheckResult:
    logger.error(f"{name}: {error}")
    return CheckResult(name, False, float("nan"), threshold, str(error))


# =========================================================================
# JACOBIAN
# =========================================================================
def finite_difference_jacobians(
    x: np.ndarray,
    u: np.ndarray,
    v_w: np.ndarray,
    params: Params,
    step: float = 1e-6,
):
    """Central-difference (A, B) of ``state_derivative``, step scaled per component."""

    def column(f: Callable[[np.ndarray], np.ndarray], z: np.ndarray, i: int) -> np.ndarray:
        h = step * max(1.0, abs(z[i]))
        plus, minus = z.copy(), z.copy()
        plus[i] += h
        minus[i] -= h
        return (f(plus) - f(minus)) / (2.0 * h)

    A = np.column_stack([
        column(lambda z: state_derivative(z, u, v_w, params), x, i) for i in range(STATE_DIM)
    ])
    B = np.column_stack([
        column(lambda z: state_derivative(x, z, v_w, params), u, i) for i in range(INPUT_DIM)
    ])
    return A, B


def random_nominal(rng: np.random.Generator, min_speed: float = 0.1):
    """Random unit-quaternion state with ||v|| >= min_speed, input and wind."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    direction = rng.standard_normal(3)
    v = direction / np.linalg.norm(direction) * rng.uniform(min_speed, 5.0)
    x = np.concatenate([rng.uniform(-5.0, 5.0, 3), q, v])
    u = np.append(rng.uniform(-2.0, 2.0, 3), rng.uniform(0.0, 20.0))
    return x, u, rng.uniform(-3.0, 3.0, 3)


def relative_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    return float(np.max(np.abs(analytic - reference)) / max(1.0, np.max(np.abs(reference))))


def jacobian_check(
    params: Optional[Params] = None,
    n_points: int = 100,
    seed: int = 0,
    perturbation: float = 0.0,
) -> CheckResult:
    """
    Max relative error of ``linearize`` against finite differences.

    Args:
        params: Vehicle parameters (defaults when None)
        n_points: Random nominal points
        seed: Generator seed
        perturbation: Added to every analytic A entry (mutation hook)
    """
    params = params or Params()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        x, u, v_w = random_nominal(rng)
        A, B = linearize(x, u, params, v_w=v_w)
        A = A + perturbation
        A_fd, B_fd = finite_difference_jacobians(x, u, v_w, params)
        worst = max(worst, relative_error(A, A_fd), relative_error(B, B_fd))
    return _result("jacobian", worst, JACOBIAN_TOLERANCE, f"{n_points} random nominal points")


# =========================================================================
# LYAPUNOV
# =========================================================================
def random_stable(rng: np.random.Generator, n: int) -> np.ndarray:
    A = rng.standard_normal((n, n))
    return A - (spectral_abscissa(A) + rng.uniform(0.5, 2.0)) * np.eye(n)


def lyapunov_check(n_systems: int = 50, seed: int = 0, max_dim: int = 10) -> CheckResult:
    """Max Frobenius distance between ``solve_lyapunov`` and scipy's solver."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_systems):
        n = int(rng.integers(1, max_dim + 1))
        A = random_stable(rng, n)
        F = rng.standard_normal((n, n))
        Q = F @ F.T
        X = solve_lyapunov(A, Q)
        X_ref = solve_continuous_lyapunov(A.T, -Q)
        worst = max(worst, float(np.linalg.norm(X - X_ref)) / (1.0 + np.linalg.norm(X_ref)))
    return _result("lyapunov", worst, LYAPUNOV_TOLERANCE, f"{n_systems} random stable systems")


# =========================================================================
# RICCATI
# =========================================================================
def riccati_checks(scenario: Scenario, gammas: Sequence[float] = CHECK_GAMMAS) -> List[CheckResult]:
    """ARE/CARE residuals and reductions on the scenario's design model."""
    results: List[CheckResult] = []
    A, B = design_model(scenario, scenario.references[0])
    G, W = design_noise(scenario)
    cost = scenario.cost.restricted(DESIGN_COORDS).with_gamma(0.0)
    q_norm = 1.0 + np.linalg.norm(cost.Q)

    try:
        M, K = solve_lqr(A, B, cost.Q, cost.R)
        M_ref = solve_continuous_are(A, B, cost.Q, cost.R)
        results.append(_result(
            "lqr_vs_scipy", float(np.linalg.norm(M - M_ref) / (1.0 + np.linalg.norm(M_ref))),
            REDUCTION_TOLERANCE,
        ))
    except MCVError as e:
        results.append(_failure("lqr_vs_scipy", REDUCTION_TOLERANCE, e))
        return results

    for gamma in gammas:
        name = f"care_gamma_{gamma:g}"
        try:
            sol = mcv_infinite(A, B, G, W, cost.with_gamma(gamma))
            r1, r2 = care_residuals(A, B, G, W, cost.with_gamma(gamma), sol.M, sol.H)
            stable = is_hurwitz(A + B @ sol.K)
            results.append(_result(
                name, max(r1, r2) / q_norm if stable else float("inf"), CARE_TOLERANCE,
                f"r1={r1:.3e} r2={r2:.3e} abscissa={spectral_abscissa(A + B @ sol.K):.3e}",
            ))
        except MCVError as e:
            results.append(_failure(name, CARE_TOLERANCE, e))

    def gain_gap(K_other):
        return float(np.linalg.norm(K_other - K) / np.linalg.norm(K))

    try:
        sol = mcv_infinite(A, B, G, W, cost.with_gamma(0.0))
        results.append(_result("reduction_gamma_0", gain_gap(sol.K), REDUCTION_TOLERANCE))
    except MCVError as e:
        results.append(_failure("reduction_gamma_0", REDUCTION_TOLERANCE, e))

    try:
        sol = mcv_infinite(A, B, G, np.zeros_like(W), cost.with_gamma(max(gammas)))
        results.append(_result("reduction_w_0", gain_gap(sol.K), REDUCTION_TOLERANCE))
    except MCVError as e:
        results.append(_failure("reduction_w_0", REDUCTION_TOLERANCE, e))

    try:
        horizon, dt = 1.0, scenario.dt
        finite = mcv_finite(A, B, G, np.zeros_like(W), cost.with_gamma(max(gammas)), horizon, dt)
        lqr = lqr_finite(A, B, cost, horizon, dt)
        gap = float(np.max(np.abs(finite.gains - lqr.gains)))
        h_norm = float(np.max(np.linalg.norm(finite.H_traj, axis=(1, 2))))
        results.append(_result("finite_w_0_gain_gap", gap, REDUCTION_TOLERANCE))
        results.append(_result("finite_w_0_h_norm", h_norm, 1e-10))
    except MCVError as e:
        results.append(_failure("finite_w_0_gain_gap", REDUCTION_TOLERANCE, e))

    return results


def run_checks(scenario: Scenario, jacobian_perturbation: float = 0.0, seed: int = 0) -> List[CheckResult]:
    """All suites in order: Jacobian, Lyapunov, Riccati."""
    results = [jacobian_check(scenario.params, seed=seed, perturbation=jacobian_perturbation)]
    try:
        results.append(lyapunov_check(seed=seed))
    except MCVError as e:
        results.append(_failure("lyapunov", LYAPUNOV_TOLERANCE, e))
    results.extend(riccati_checks(scenario))
    return results
