"""
MCV Control Package
===================

Minimum-cost-variance (MCV) and LQR control of a quadrotor tracking
reference trajectories in turbulent wind.

Modules:
- wind: Gaussian wind synthesis, trace replay and statistics
- dynamics: Quaternion quadrotor model, RK4 step, analytic linearization
- riccati: Lyapunov / Riccati solvers, infinite- and finite-horizon MCV gains
- trajectory: Hover points and minimum-snap references
- sim: Closed-loop runs, cost evaluation, Monte Carlo and gamma sweeps
- diagnostics: Self-verification suites
- exceptions: Error hierarchy with CLI exit codes

Usage:
    from mcv_control import Scenario, build_controller, monte_carlo

    gains = build_controller(scenario)
    report = monte_carlo(scenario, gains)
"""

from .exceptions import MCVError
from .dynamics import Input, LinearModel, Params, State, linearize, step
from .riccati import CostSpec, GainSchedule, MCVSolution, mcv_finite, mcv_infinite, solve_lqr
from .trajectory import PolyTrajectory, Waypoint, hover, min_snap, reference_state
from .wind import GaussianWind, ReplayWind, WindModel, WindTrace
from .sim import (
    ControllerKind,
    MetricsReport,
    RunLog,
    Scenario,
    SweepReport,
    build_controller,
    evaluate_cost,
    gamma_sweep,
    monte_carlo,
    simulate,
)

__all__ = [
    'MCVError',
    'Input',
    'LinearModel',
    'Params',
    'State',
    'linearize',
    'step',
    'CostSpec',
    'GainSchedule',
    'MCVSolution',
    'mcv_finite',
    'mcv_infinite',
    'solve_lqr',
    'PolyTrajectory',
    'Waypoint',
    'hover',
    'min_snap',
    'reference_state',
    'GaussianWind',
    'ReplayWind',
    'WindModel',
    'WindTrace',
    'ControllerKind',
    'MetricsReport',
    'RunLog',
    'Scenario',
    'SweepReport',
    'build_controller',
    'evaluate_cost',
    'gamma_sweep',
    'monte_carlo',
    'simulate',
]
