"""Small scenarios shared by the test modules."""

import os
import textwrap

import numpy as np

from mcv_control.dynamics import Params
from mcv_control.riccati import CostSpec
from mcv_control.sim import ControllerKind, Scenario
from mcv_control.trajectory import hover, line
from mcv_control.wind import GaussianWind, WindModel

Q_DIAG = [10, 10, 10, 1, 1, 1, 1, 0.1, 0.1, 0.1]
R_DIAG = [1, 5, 5, 0.1]
QF_DIAG = [20, 20, 20, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]
TURBULENCE = np.diag([0.5, 0.3, 0.05])


def cost(gamma=0.0):
    return CostSpec(np.diag(Q_DIAG), np.diag(R_DIAG), np.diag(QF_DIAG), gamma)


def hover_scenario(duration=1.0, n_runs=4, gamma=0.5, mean=(0.0, 0.0, 0.0), covariance=TURBULENCE, **changes):
    scenario = Scenario(
        trajectory=hover((1.0, 1.0, 8.0), duration),
        params=Params(),
        cost=cost(gamma),
        wind_source=GaussianWind(WindModel(np.asarray(mean), covariance), seed=7),
        controller_kind=ControllerKind.MCV_INFINITE,
        dt=0.01,
        n_runs=n_runs,
        seed=2024,
    )
    return scenario.with_changes(**changes) if changes else scenario


def line_scenario(duration=2.0, n_runs=4, gamma=0.75, **changes):
    scenario = Scenario(
        trajectory=line((0.0, 0.0, 4.0), (1.0, 0.0, 4.0), duration),
        params=Params(),
        cost=cost(gamma),
        wind_source=GaussianWind(WindModel(np.array([2.72, 1.752, -0.006]), TURBULENCE), seed=7),
        controller_kind=ControllerKind.MCV_FINITE,
        dt=0.01,
        n_runs=n_runs,
        seed=2024,
    )
    return scenario.with_changes(**changes) if changes else scenario


def write_toml(directory, name, body):
    path = os.path.join(directory, name)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(textwrap.dedent(body))
    return path
