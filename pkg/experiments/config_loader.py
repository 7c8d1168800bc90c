"""
Scenario Config Loader
======================

Reads a scenario TOML file, merges command-line overrides, validates the
document with ``ScenarioConfigSerializer`` and builds the library objects
(Scenario, wind source, trajectory) an experiment runs on.
"""

import os
import copy
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from django.conf import settings

from data_manager.csv_handler import read_trace
from mcv_control.dynamics import Params, State
from mcv_control.exceptions import ConfigError
from mcv_control.riccati import CostSpec
from mcv_control.sim import ControllerKind, Scenario
from mcv_control.trajectory import PolyTrajectory, Waypoint, circuit, hover, line, min_snap
from mcv_control.wind import GaussianWind, Interpolation, ReplayWind, WindModel, WindSource

from .serializers import ScenarioConfigSerializer, flatten_errors

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated scenario plus the settings that live outside Scenario."""

    name: str
    scenario: Scenario
    gammas: List[float]
    output_dir: str
    plots: bool
    data: Dict[str, Any]

    @property
    def wind_model(self) -> WindModel:
        wind = self.data['wind']
        return WindModel(wind['mean'], wind['covariance'])


def default_config_path(filename: str) -> str:
    return os.path.join(str(settings.MCV_SCENARIO_DIR), filename)


def read_config_file(path: str) -> Dict[str, Any]:
    """Parse a TOML file; syntax errors become ConfigError."""
    try:
        with open(path, 'rb') as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {path}: {e}") from e


def parse_gamma_list(text: str) -> List[float]:
    """'0,0.25,1.25' -> [0.0, 0.25, 1.25]"""
    try:
        values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ConfigError(f"not a comma-separated list of numbers: '{text}'", key='cost.gammas') from e
    if not values:
        raise ConfigError("empty gamma list", key='cost.gammas')
    return values


def apply_overrides(
    data: Dict[str, Any],
    out: Optional[str] = None,
    seed: Optional[int] = None,
    runs: Optional[int] = None,
    gammas: Optional[List[float]] = None,
) -> Dict[str, Any]:
    """Copy of ``data`` with command-line values written into their sections."""
    merged = copy.deepcopy(data)

    def section(name):
        value = merged.setdefault(name, {})
        if not isinstance(value, dict):
            raise ConfigError("must be a table", key=name)
        return value

    if out is not None:
        section('output')['dir'] = out
    if seed is not None:
        section('run')['seed'] = seed
    if runs is not None:
        section('run')['n_runs'] = runs
    if gammas is not None:
        section('cost')['gammas'] = gammas
        if len(gammas) == 1:
            section('cost')['gamma'] = gammas[0]
    return merged


def validate(data: Dict[str, Any], base_dir: str = '') -> Dict[str, Any]:
    """Validated document; the first error becomes a ConfigError naming its dotted key."""
    serializer = ScenarioConfigSerializer(data=data, context={'base_dir': base_dir})
    if not serializer.is_valid():
        errors = flatten_errors(serializer.errors)
        key, message = next(iter(sorted(errors.items())))
        if len(errors) > 1:
            logger.debug(f"Further config errors: {errors}")
        raise ConfigError(message, key=key or None)
    return serializer.validated_data


# =========================================================================
# BUILDERS
# =========================================================================
def build_params(vehicle: Dict[str, Any]) -> Params:
    return Params(
        m=vehicle['mass'],
        g=vehicle['gravity'],
        drag_mode=vehicle['drag_mode'],
        drag_formula=vehicle['drag_formula'],
        drag_matrix=vehicle['drag_matrix'],
        drag_uses_airspeed=vehicle['drag_uses_airspeed'],
    )


def build_cost(cost: Dict[str, Any]) -> CostSpec:
    return CostSpec(cost['q'], cost['r'], cost['qf'], cost['gamma'])


def build_wind(wind: Dict[str, Any], seed: int) -> WindSource:
    if wind['source'] == 'replay':
        return ReplayWind(
            read_trace(wind['trace']),
            mode=Interpolation(wind['interpolation']),
            randomize_offset=wind['randomize_offset'],
            intensity=wind['intensity'],
        )
    model = WindModel(wind['mean'], wind['covariance'])
    return GaussianWind(model, seed=seed, intensity=wind['intensity'])


def build_trajectory(traj: Dict[str, Any]) -> PolyTrajectory:
    kind = traj['kind']
    if kind == 'hover':
        return hover(traj['hover_point'], traj['duration'])
    if kind == 'line':
        return line(traj['start'], traj['end'], traj['duration'], traj['rest_to_rest'])
    if kind == 'circuit' and not traj['waypoints']:
        return circuit(segment_time=traj['segment_time'], rest_to_rest=traj['rest_to_rest'])
    return min_snap(
        [Waypoint(row[:3], row[3]) for row in traj['waypoints']],
        traj['rest_to_rest'],
    )


def build_scenario(data: Dict[str, Any]) -> Scenario:
    run = data['run']
    solver = data['solver']
    x0 = run['x0']
    return Scenario(
        trajectory=build_trajectory(data['trajectory']),
        params=build_params(data['vehicle']),
        cost=build_cost(data['cost']),
        wind_source=build_wind(data['wind'], run['seed']),
        controller_kind=ControllerKind(run['controller']),
        dt=run['dt'],
        x0=None if x0 is None else State.from_vector(np.asarray(x0, dtype=float)),
        u0=run['u0'],
        n_runs=run['n_runs'],
        seed=run['seed'],
        workers=run['workers'],
        linearization_speed_floor=run['linearization_speed_floor'],
        thrust_max=data['vehicle']['thrust_max'],
        solver_eps=solver['eps'],
        solver_max_iter=solver['max_iter'],
        substeps=solver['substeps'],
    )


def load_experiment(
    path: str,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    runs: Optional[int] = None,
    gammas: Optional[List[float]] = None,
) -> ExperimentConfig:
    """
    Load, override, validate and build one experiment.

    Args:
        path: Scenario TOML file
        out, seed, runs, gammas: Command-line overrides

    Returns:
        ExperimentConfig
    """
    raw = read_config_file(path)
    base_dir = str(Path(path).resolve().parent)
    data = validate(apply_overrides(raw, out, seed, runs, gammas), base_dir)
    name = Path(path).stem
    output_dir = data['output']['dir'] or os.path.join(str(settings.MCV_OUTPUT_DIR), name)

    scenario = build_scenario(data)
    logger.info(
        f"Loaded scenario '{name}': {data['trajectory']['kind']} over {scenario.duration:g} s, "
        f"{scenario.n_runs} runs, seed {scenario.seed}"
    )
    return ExperimentConfig(
        name=name,
        scenario=scenario,
        gammas=list(data['cost']['gammas']),
        output_dir=output_dir,
        plots=data['output']['plots'],
        data=data,
    )
