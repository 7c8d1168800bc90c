"""
Closed-Loop Simulation and Monte Carlo Metrics
==============================================

Pipeline:
1. Reference states x_n(t) on the control grid (identity attitude,
   v = -mean wind + p_dot_n)
2. Linearize the dynamics along the reference, design LQR / MCV gains
3. Step the nonlinear dynamics under u = u0 + K(t) (x - x_n(t)) with wind
   drawn once per control step
4. Aggregate tracking-error variance / RMSE per reference point and the
   empirical mean and variance of the quadratic cost across runs

Controllers are designed on the 9 coordinates left after removing q_w.
At the identity reference attitude with zero nominal body rate q_w is a
decoupled, uncontrollable zero mode; the gain gets a zero column there.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import binomtest

from .dynamics import (
    INPUT_DIM,
    P_SLICE,
    QW_INDEX,
    STATE_DIM,
    V_SLICE,
    Params,
    State,
    linearize,
    noise_injection,
    rk4_step,
)
from .exceptions import (
    ConfigError,
    DivergedRunError,
    MonteCarloAbortedError,
    NumericalBlowupError,
)
from .riccati import CostSpec, GainSchedule, lqr_finite, mcv_finite, mcv_infinite, solve_lqr
from .trajectory import PolyTrajectory, reference_state
from .wind import WindSource, controller_noise_model

logger = logging.getLogger(__name__)

DESIGN_COORDS = tuple(i for i in range(STATE_DIM) if i != QW_INDEX)
DIVERGENCE_RADIUS = 1e4
MASK64 = (1 << 64) - 1


class ControllerKind(str, Enum):
    """Which gain design a run uses."""

    LQR = "lqr"
    LQR_FINITE = "lqr_finite"
    MCV_INFINITE = "mcv_infinite"
    MCV_FINITE = "mcv_finite"

    @property
    def finite(self) -> bool:
        return self in (ControllerKind.LQR_FINITE, ControllerKind.MCV_FINITE)


# =========================================================================
# SCENARIO
# =========================================================================
@dataclass(frozen=True, eq=False)
class Scenario:
    """
    Everything a Monte Carlo experiment needs.

    Attributes:
        trajectory: Reference trajectory; the run covers its duration
        params: Vehicle parameters
        cost: Cost weights and gamma
        wind_source: Gaussian or replayed wind
        controller_kind: Gain design
        dt: Control and integration step, s
        x0: Initial state; None starts on the reference
        u0: Nominal input; None uses [0, 0, 0, m g]
        n_runs: Monte Carlo run count
        seed: Base seed for the per-run seed split
        workers: Process count for Monte Carlo (1 runs inline)
        linearization_speed_floor: Minimum nominal speed for linearization, m/s
        thrust_max: Optional upper thrust clamp, N
        solver_eps: Relative gain-change tolerance of the MCV iteration
        solver_max_iter: MCV iteration budget
        substeps: RK4 substeps per grid interval of the backward sweep
    """

    trajectory: PolyTrajectory
    params: Params
    cost: CostSpec
    wind_source: WindSource
    controller_kind: ControllerKind = ControllerKind.MCV_INFINITE
    dt: float = 0.01
    x0: Optional[State] = None
    u0: Optional[np.ndarray] = None
    n_runs: int = 50
    seed: int = 0
    workers: int = 1
    linearization_speed_floor: float = 1e-3
    thrust_max: Optional[float] = None
    solver_eps: float = 1e-9
    solver_max_iter: int = 200
    substeps: int = 1

    def __post_init__(self):
        object.__setattr__(self, "controller_kind", ControllerKind(self.controller_kind))
        if not self.dt > 0:
            raise ConfigError(f"must be positive, got {self.dt}", key="run.dt")
        steps = self.trajectory.duration / self.dt
        if abs(steps - round(steps)) > 1e-6 or round(steps) < 1:
            raise ConfigError(
                f"dt={self.dt} does not divide the trajectory duration {self.trajectory.duration:g} s",
                key="run.dt",
            )
        if self.n_runs < 1:
            raise ConfigError(f"must be >= 1, got {self.n_runs}", key="run.n_runs")
        if self.seed < 0:
            raise ConfigError(f"must be >= 0, got {self.seed}", key="run.seed")
        if self.u0 is not None:
            object.__setattr__(self, "u0", np.asarray(self.u0, dtype=float).reshape(INPUT_DIM))

    def with_changes(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def with_gamma(self, gamma: float) -> "Scenario":
        return replace(self, cost=self.cost.with_gamma(gamma))

    @property
    def n_steps(self) -> int:
        return int(round(self.trajectory.duration / self.dt))

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @cached_property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def nominal_input(self) -> np.ndarray:
        return self.params.hover_input() if self.u0 is None else self.u0

    @cached_property
    def mean_wind(self) -> np.ndarray:
        return self.wind_source.statistics().mean

    @cached_property
    def references(self) -> np.ndarray:
        """Reference states x_n(t_k) on the control grid, (N+1, 10)."""
        start = self.trajectory.start
        t_f = self.trajectory.t_f
        return np.array([
            reference_state(self.trajectory, min(start + t, t_f), self.mean_wind).vector
            for t in self.times
        ])

    def initial_state(self) -> np.ndarray:
        if self.x0 is None:
            return self.references[0].copy()
        return self.x0.vector.copy()


# =========================================================================
# CONTROLLER DESIGN
# =========================================================================
def linearization_point(scenario: Scenario, x_ref: np.ndarray) -> np.ndarray:
    """Reference state with the velocity floor applied on the x axis."""
    x_lin = np.array(x_ref, dtype=float)
    floor = scenario.linearization_speed_floor
    if np.linalg.norm(x_lin[V_SLICE]) < floor:
        x_lin[V_SLICE.start] += floor
    return x_lin


def design_model(scenario: Scenario, x_ref: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(A, B) on the design coordinates at one reference state."""
    A, B = linearize(
        linearization_point(scenario, x_ref),
        scenario.nominal_input,
        scenario.params,
        v_w=scenario.mean_wind,
    )
    keep = list(DESIGN_COORDS)
    return A[np.ix_(keep, keep)], B[keep, :]


def design_noise(scenario: Scenario) -> Tuple[np.ndarray, np.ndarray]:
    """(G, W) on the design coordinates."""
    G = noise_injection()[list(DESIGN_COORDS), :]
    return G, controller_noise_model(scenario.wind_source, scenario.dt).covariance


def build_controller(scenario: Scenario) -> GainSchedule:
    """
    Design the feedback gains for a scenario.

    Infinite-horizon kinds linearize at the reference state at t=0 and
    return a constant gain; finite-horizon kinds linearize at every grid
    knot and sweep the Riccati ODEs backward.

    Args:
        scenario: Scenario; ``cost.gamma`` is the variance weight

    Returns:
        GainSchedule on the full 10-dimensional state
    """
    kind = scenario.controller_kind
    cost = scenario.cost.restricted(DESIGN_COORDS)
    G, W = design_noise(scenario)

    if kind.finite:
        models = [design_model(scenario, x_ref) for x_ref in scenario.references]
        A_s = np.array([A for A, _ in models])
        B_s = np.array([B for _, B in models])
        if kind is ControllerKind.LQR_FINITE:
            schedule = lqr_finite(A_s, B_s, cost, scenario.duration, scenario.dt, scenario.substeps)
        else:
            schedule = mcv_finite(A_s, B_s, G, W, cost, scenario.duration, scenario.dt, scenario.substeps)
    else:
        A, B = design_model(scenario, scenario.references[0])
        if kind is ControllerKind.LQR:
            M, K = solve_lqr(A, B, cost.Q, cost.R)
            schedule = GainSchedule.constant(K, M)
        else:
            solution = mcv_infinite(
                A, B, G, W, cost, eps=scenario.solver_eps, max_iter=scenario.solver_max_iter
            )
            schedule = GainSchedule.constant(solution.K, solution.M, solution.H)

    logger.info(f"Built {kind.value} controller (gamma={scenario.cost.gamma:g}, {len(schedule.times)} knot(s))")
    return schedule.embedded(DESIGN_COORDS, STATE_DIM)


# =========================================================================
# SIMULATION
# =========================================================================
@dataclass(frozen=True, eq=False)
class RunLog:
    """
    Record of one closed-loop run, one row per grid time.

    Attributes:
        times: (N+1,), s
        states: (N+1, 10)
        inputs: (N+1, 4) applied inputs
        wind: (N+1, 3) wind sample held over each step, m/s
        references: (N+1, 10) reference states
        nominal_input: u0 (4,)
        seed: Run seed
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    wind: np.ndarray
    references: np.ndarray
    nominal_input: np.ndarray
    seed: Optional[int] = None

    @property
    def errors(self) -> np.ndarray:
        """Position tracking error p - p_n, (N+1, 3), m."""
        return self.states[:, P_SLICE] - self.references[:, P_SLICE]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def __len__(self) -> int:
        return len(self.times)


def splitmix64(i: int) -> int:
    """SplitMix64 output for counter ``i``."""
    z = (i + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_run_seed(seed: int, index: int) -> int:
    """Seed of Monte Carlo run ``index``: seed XOR splitmix64(index)."""
    return (int(seed) ^ splitmix64(index)) & MASK64


def run_seeds(scenario: Scenario) -> List[int]:
    return [derive_run_seed(scenario.seed, i) for i in range(scenario.n_runs)]


def simulate(scenario: Scenario, gains: GainSchedule, run_seed: Optional[int] = None) -> RunLog:
    """
    Run the nonlinear closed loop once.

    Args:
        scenario: Scenario
        gains: Schedule from ``build_controller``
        run_seed: Seed of this run's wind stream (scenario seed if None)

    Returns:
        RunLog over the whole horizon
    """
    if not gains.is_constant and gains.times[-1] < scenario.duration - 1e-9:
        raise ConfigError(
            f"gain schedule ends at {gains.times[-1]:g} s before the horizon {scenario.duration:g} s",
            key="run.dt",
        )
    seed = scenario.seed if run_seed is None else run_seed
    sampler = scenario.wind_source.sampler(seed, scenario.duration)
    times = scenario.times
    refs = scenario.references
    u0 = scenario.nominal_input
    n = len(times)

    states = np.empty((n, STATE_DIM))
    inputs = np.empty((n, INPUT_DIM))
    wind = np.empty((n, 3))
    x = scenario.initial_state()

    for k, t in enumerate(times):
        u = u0 + gains.gain_at(t) @ (x - refs[k])
        u[3] = max(u[3], 0.0)
        if scenario.thrust_max is not None:
            u[3] = min(u[3], scenario.thrust_max)
        v_w = sampler.sample(t)
        states[k], inputs[k], wind[k] = x, u, v_w
        if k == n - 1:
            break

        try:
            x = rk4_step(x, u, v_w, scenario.dt, scenario.params, t)
        except NumericalBlowupError as e:
            raise DivergedRunError(f"run diverged at t={t:.4g} s: {e}", time=t, state=x, seed=seed) from e
        if np.linalg.norm(x[P_SLICE] - refs[k + 1, P_SLICE]) > DIVERGENCE_RADIUS:
            raise DivergedRunError(
                f"tracking error exceeded {DIVERGENCE_RADIUS:g} m at t={times[k + 1]:.4g} s",
                time=float(times[k + 1]),
                state=x,
                seed=seed,
            )

    return RunLog(times.copy(), states, inputs, wind, refs.copy(), u0.copy(), seed)


def evaluate_cost(log: RunLog, cost: CostSpec) -> float:
    """
    Empirical quadratic cost of a run in error coordinates.

    J = dt * sum_{k<N} (dx_k^T Q dx_k + du_k^T R du_k) + dx_N^T Q_f dx_N

    Args:
        log: Completed run
        cost: Weights on the full state

    Returns:
        Nonnegative scalar cost
    """
    dx = log.states - log.references
    du = log.inputs - log.nominal_input
    running = np.einsum("ki,ij,kj->k", dx[:-1], cost.Q, dx[:-1]) + np.einsum(
        "ki,ij,kj->k", du[:-1], cost.R, du[:-1]
    )
    terminal = dx[-1] @ cost.Q_f @ dx[-1]
    return float(max(log.dt * running.sum() + terminal, 0.0))


# =========================================================================
# MONTE CARLO
# =========================================================================
@dataclass(frozen=True, eq=False)
class MetricsReport:
    """
    Cross-run statistics of one controller.

    Per-point arrays are (N+1, 3): one row per reference time, one column
    per axis. Variance is the unbiased estimate across runs; RMSE is
    sqrt(mean over runs of error^2).
    """

    times: np.ndarray
    variance: np.ndarray
    rmse: np.ndarray
    mean_error: np.ndarray
    costs: np.ndarray
    seeds: List[int]
    gamma: float = 0.0
    kind: ControllerKind = ControllerKind.MCV_INFINITE
    first_log: Optional[RunLog] = field(default=None, repr=False)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    @property
    def n_runs(self) -> int:
        return len(self.costs)

    @property
    def cost_mean(self) -> float:
        return float(np.mean(self.costs))

    @property
    def cost_var(self) -> float:
        return float(np.var(self.costs, ddof=1)) if self.n_runs > 1 else 0.0

    @property
    def objective(self) -> float:
        """Sample surrogate of E[J] + gamma Var[J]."""
        return self.cost_mean + self.gamma * self.cost_var

    def objective_samples(self, gamma: Optional[float] = None) -> np.ndarray:
        """Per-run J_i + gamma (J_i - mean J)^2."""
        gamma = self.gamma if gamma is None else gamma
        return self.costs + gamma * (self.costs - self.cost_mean) ** 2

    def time_averaged(self) -> Dict[str, np.ndarray]:
        """Per-axis horizon averages: variance, its sqrt, and RMSE over the horizon."""
        variance = self.variance.mean(axis=0)
        return {
            "variance": variance,
            "std": np.sqrt(variance),
            "rmse": np.sqrt(np.mean(self.rmse ** 2, axis=0)),
        }


def _run_one(args: Tuple[Scenario, GainSchedule, int, int]):
    scenario, gains, index, seed = args
    try:
        return index, simulate(scenario, gains, seed), None
    except DivergedRunError as e:
        return index, None, e


def _aggregate(scenario: Scenario, logs: List[RunLog], seeds: List[int]) -> MetricsReport:
    errors = np.stack([log.errors for log in logs])
    n = len(logs)
    variance = errors.var(axis=0, ddof=1) if n > 1 else np.zeros(errors.shape[1:])
    return MetricsReport(
        times=scenario.times.copy(),
        variance=variance,
        rmse=np.sqrt(np.mean(errors ** 2, axis=0)),
        mean_error=errors.mean(axis=0),
        costs=np.array([evaluate_cost(log, scenario.cost) for log in logs]),
        seeds=list(seeds),
        gamma=scenario.cost.gamma,
        kind=scenario.controller_kind,
        first_log=logs[0],
    )


def monte_carlo(
    scenario: Scenario,
    gains: GainSchedule,
    seeds: Optional[Sequence[int]] = None,
) -> MetricsReport:
    """
    Run ``scenario.n_runs`` independent closed-loop simulations.

    Args:
        scenario: Scenario
        gains: Feedback schedule shared by every run
        seeds: Explicit run seeds; defaults to the seed split of scenario.seed

    Returns:
        MetricsReport keyed by run index, independent of completion order
    """
    seeds = run_seeds(scenario) if seeds is None else [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ConfigError(f"Monte Carlo needs at least 2 runs, got {len(seeds)}", key="run.n_runs")

    jobs = [(scenario, gains, i, seed) for i, seed in enumerate(seeds)]
    logger.info(
        f"Monte Carlo: {len(jobs)} runs of {scenario.controller_kind.value} "
        f"(gamma={scenario.cost.gamma:g}, workers={scenario.workers})"
    )
    if scenario.workers > 1:
        with ProcessPoolExecutor(max_workers=scenario.workers) as executor:
            results = list(executor.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]

    results.sort(key=lambda r: r[0])
    failed = [e.seed for _, _, e in results if e is not None]
    if failed:
        for _, _, e in results:
            if e is not None:
                logger.error(f"Run with seed {e.seed} diverged at t={e.time:.4g} s")
        raise MonteCarloAbortedError(failed)

    return _aggregate(scenario, [log for _, log, _ in results], seeds)


@dataclass(frozen=True, eq=False)
class SweepReport:
    """Monte Carlo reports for a list of gamma values sharing one seed schedule."""

    gammas: List[float]
    reports: List[MetricsReport]
    schedules: List[GainSchedule] = field(default_factory=list)

    def summary(self, key: str) -> np.ndarray:
        """(len(gammas), 3) array of a ``MetricsReport.time_averaged`` entry."""
        return np.array([report.time_averaged()[key] for report in self.reports])


def gamma_sweep(
    scenario: Scenario,
    gammas: Sequence[float],
    kind: ControllerKind = ControllerKind.MCV_INFINITE,
) -> SweepReport:
    """
    Monte Carlo per gamma with common random numbers.

    Args:
        scenario: Base scenario; its cost gamma is replaced per entry
        gammas: Nonnegative, strictly increasing gamma values
        kind: Controller design used for every gamma

    Returns:
        SweepReport
    """
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ConfigError("gamma list is empty", key="cost.gammas")
    if min(gammas) < 0 or any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise ConfigError(f"must be nonnegative and increasing, got {gammas}", key="cost.gammas")

    seeds = run_seeds(scenario)
    reports, schedules = [], []
    for gamma in gammas:
        current = scenario.with_changes(cost=scenario.cost.with_gamma(gamma), controller_kind=kind)
        gains = build_controller(current)
        schedules.append(gains)
        reports.append(monte_carlo(current, gains, seeds))
        summary = reports[-1].time_averaged()
        logger.info(f"gamma={gamma:g}: mean variance per axis {np.array2string(summary['variance'], precision=4)}")
    return SweepReport(gammas, reports, schedules)


# =========================================================================
# COMPARISONS
# =========================================================================
@dataclass(frozen=True)
class SignTestResult:
    """One-sided sign test that ``a`` tends to be smaller than ``b``."""

    wins: int
    trials: int
    p_value: float


def paired_sign_test(a: Sequence[float], b: Sequence[float]) -> SignTestResult:
    """
    Paired one-sided sign test of H1: a_i < b_i more often than not.

    Ties are dropped.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ConfigError(f"paired samples differ in shape: {a.shape} vs {b.shape}")
    wins = int(np.sum(a < b))
    trials = int(np.sum(a != b))
    if trials == 0:
        return SignTestResult(0, 0, 1.0)
    p_value = float(binomtest(wins, trials, 0.5, alternative="greater").pvalue)
    return SignTestResult(wins, trials, p_value)


def compare_reports(baseline: MetricsReport, candidate: MetricsReport) -> Dict[str, np.ndarray]:
    """
    Per-point comparison of two reports on the same grid.

    Returns:
        variance_ratio: baseline / candidate variance, (N+1, 3); inf where
            only the candidate variance is 0
        candidate_not_worse: fraction of points with candidate variance
            <= baseline variance, per axis (3,)
    """
    base = baseline.variance
    cand = candidate.variance
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cand > 0, base / np.where(cand > 0, cand, 1.0), np.where(base > 0, np.inf, 1.0))
    return {
        "variance_ratio": ratio,
        "candidate_not_worse": np.mean(cand <= base, axis=0),
    }
