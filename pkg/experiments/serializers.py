"""
Scenario Config Serializers
===========================

Validation of scenario TOML documents with Django REST framework
serializers. One serializer per section; unknown keys are rejected in every
section and at the top level. Validated data keeps plain Python / numpy
values, turned into library objects by ``config_loader``.
"""

import os
from typing import Any, Dict

import numpy as np
from django.conf import settings
from rest_framework import serializers

from mcv_control.dynamics import INPUT_DIM, STATE_DIM, DragFormula, DragMode
from mcv_control.sim import ControllerKind
from mcv_control.trajectory import (
    CIRCUIT_SEGMENT_TIME,
    HOVER_POINT,
    LINE_DURATION,
    LINE_END,
    LINE_START,
)
from mcv_control.wind import Interpolation

DEFAULT_Q = [10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0, 0.1, 0.1, 0.1]
DEFAULT_R = [1.0, 5.0, 5.0, 0.1]
DEFAULT_QF = [20.0, 20.0, 20.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]
DEFAULT_GAMMAS = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25]
DEFAULT_WIND_MEAN = [2.72, 1.752, -0.006]
DEFAULT_WIND_COVARIANCE = [0.5, 0.3, 0.05]

TRAJECTORY_KINDS = ('hover', 'line', 'circuit', 'waypoints')
WIND_SOURCES = ('gaussian', 'replay')


# =========================================================================
# FIELDS
# =========================================================================
class VectorField(serializers.ListField):
    """Fixed-length list of floats."""

    def __init__(self, length: int, **kwargs):
        self.length = length
        super().__init__(child=serializers.FloatField(), min_length=length, max_length=length, **kwargs)

    def to_internal_value(self, data):
        return np.array(super().to_internal_value(data), dtype=float)

    def get_default(self):
        value = super().get_default()
        return None if value is None else np.array(value, dtype=float)


class MatrixField(serializers.Field):
    """Square matrix given as its diagonal (n numbers) or in full (n x n)."""

    default_error_messages = {
        'shape': 'Expected {n} numbers (diagonal) or an {n}x{n} nested list.',
        'symmetric': 'Matrix must be symmetric.',
        'finite': 'Matrix entries must be finite numbers.',
    }

    def __init__(self, size: int, **kwargs):
        self.size = size
        super().__init__(**kwargs)

    def get_default(self):
        return self.to_internal_value(super().get_default())

    def to_internal_value(self, data):
        try:
            values = np.array(data, dtype=float)
        except (TypeError, ValueError):
            self.fail('shape', n=self.size)
        if values.shape == (self.size,):
            values = np.diag(values)
        elif values.shape != (self.size, self.size):
            self.fail('shape', n=self.size)
        if not np.all(np.isfinite(values)):
            self.fail('finite')
        if np.max(np.abs(values - values.T)) > 1e-12:
            self.fail('symmetric')
        return values

    def to_representation(self, value):
        return np.asarray(value).tolist()


class InitialStateField(serializers.Field):
    """``"reference"`` or an explicit 10-component state [p, q, v]."""

    default_error_messages = {
        'invalid': f'Expected "reference" or {STATE_DIM} numbers.',
    }

    def get_default(self):
        return self.to_internal_value(super().get_default())

    def to_internal_value(self, data):
        if data == 'reference':
            return None
        try:
            values = np.array(data, dtype=float)
        except (TypeError, ValueError):
            self.fail('invalid')
        if values.shape != (STATE_DIM,) or not np.all(np.isfinite(values)):
            self.fail('invalid')
        if np.linalg.norm(values[3:7]) < 1e-12:
            raise serializers.ValidationError('Quaternion part must be nonzero.')
        return values

    def to_representation(self, value):
        return 'reference' if value is None else np.asarray(value).tolist()


# =========================================================================
# SECTIONS
# =========================================================================
class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare."""

    def to_internal_value(self, data):
        if not isinstance(data, dict):
            raise serializers.ValidationError({'non_field_errors': ['Expected a table of key/value pairs.']})
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError({key: ['Unknown key.'] for key in unknown})
        return super().to_internal_value(data)


class VehicleSerializer(StrictSerializer):
    mass = serializers.FloatField(default=1.0)
    gravity = serializers.FloatField(default=9.81, min_value=0.0)
    drag_mode = serializers.ChoiceField(choices=[m.value for m in DragMode], default=DragMode.FORMULA.value)
    drag_formula = serializers.ChoiceField(
        choices=[f.value for f in DragFormula], default=DragFormula.OFFSET.value
    )
    drag_matrix = MatrixField(3, default=[0.2, 0.2, 0.2])
    drag_uses_airspeed = serializers.BooleanField(default=False)
    thrust_max = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate_mass(self, value):
        if value <= 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    def validate_thrust_max(self, value):
        if value is not None and value <= 0:
            raise serializers.ValidationError('Must be positive.')
        return value


class CostSerializer(StrictSerializer):
    q = MatrixField(STATE_DIM, default=DEFAULT_Q)
    r = MatrixField(INPUT_DIM, default=DEFAULT_R)
    qf = MatrixField(STATE_DIM, default=DEFAULT_QF)
    gamma = serializers.FloatField(default=0.75, min_value=0.0)
    gammas = serializers.ListField(
        child=serializers.FloatField(min_value=0.0), min_length=1, default=DEFAULT_GAMMAS
    )

    def validate_gammas(self, value):
        if any(b <= a for a, b in zip(value, value[1:])):
            raise serializers.ValidationError('Must be strictly increasing.')
        return value

    def validate_r(self, value):
        if np.linalg.eigvalsh(value).min() <= 1e-10:
            raise serializers.ValidationError('Must be positive definite.')
        return value

    def _psd(self, value):
        if np.linalg.eigvalsh(value).min() < -1e-10:
            raise serializers.ValidationError('Must be positive semidefinite.')
        return value

    def validate_q(self, value):
        return self._psd(value)

    def validate_qf(self, value):
        return self._psd(value)


class WindSerializer(StrictSerializer):
    source = serializers.ChoiceField(choices=WIND_SOURCES, default='gaussian')
    mean = VectorField(3, default=DEFAULT_WIND_MEAN)
    covariance = MatrixField(3, default=DEFAULT_WIND_COVARIANCE)
    trace = serializers.CharField(required=False, allow_null=True, default=None)
    interpolation = serializers.ChoiceField(
        choices=[m.value for m in Interpolation], default=Interpolation.ZOH.value
    )
    randomize_offset = serializers.BooleanField(default=False)
    intensity = serializers.FloatField(default=None, allow_null=True, min_value=0.0)

    def validate_trace(self, value):
        if value is None:
            return None
        base_dir = self.context.get('base_dir', '')
        path = value if os.path.isabs(value) else os.path.join(base_dir, value)
        if not os.path.isfile(path):
            raise serializers.ValidationError(f"File not found: {path}")
        return path

    def validate(self, attrs):
        if attrs['source'] == 'replay' and not attrs.get('trace'):
            raise serializers.ValidationError({'trace': ['Required when source is "replay".']})
        return attrs


class TrajectorySerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=TRAJECTORY_KINDS, default='hover')
    hover_point = VectorField(3, default=list(HOVER_POINT))
    duration = serializers.FloatField(default=LINE_DURATION)
    start = VectorField(3, default=list(LINE_START))
    end = VectorField(3, default=list(LINE_END))
    segment_time = serializers.FloatField(default=CIRCUIT_SEGMENT_TIME)
    waypoints = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=4, max_length=4),
        required=False,
        default=list,
    )
    rest_to_rest = serializers.BooleanField(default=True)

    def validate_duration(self, value):
        if value <= 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    def validate_segment_time(self, value):
        if value <= 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    def validate(self, attrs):
        if attrs['kind'] == 'waypoints' and len(attrs['waypoints']) < 2:
            raise serializers.ValidationError(
                {'waypoints': ['At least 2 [x, y, z, t] rows required for kind "waypoints".']}
            )
        return attrs


class RunSerializer(StrictSerializer):
    dt = serializers.FloatField(default=0.01)
    n_runs = serializers.IntegerField(default=50, min_value=2)
    seed = serializers.IntegerField(default=lambda: settings.MCV_DEFAULT_SEED, min_value=0)
    workers = serializers.IntegerField(default=lambda: settings.MCV_WORKERS, min_value=1)
    x0 = InitialStateField(default='reference')
    u0 = VectorField(INPUT_DIM, required=False, allow_null=True, default=None)
    linearization_speed_floor = serializers.FloatField(default=1e-3, min_value=0.0)
    controller = serializers.ChoiceField(
        choices=[k.value for k in ControllerKind], default=ControllerKind.MCV_INFINITE.value
    )

    def validate_dt(self, value):
        if value <= 0:
            raise serializers.ValidationError('Must be positive.')
        return value


class SolverSerializer(StrictSerializer):
    eps = serializers.FloatField(default=1e-9)
    max_iter = serializers.IntegerField(default=200, min_value=1)
    substeps = serializers.IntegerField(default=1, min_value=1)

    def validate_eps(self, value):
        if value <= 0:
            raise serializers.ValidationError('Must be positive.')
        return value


class OutputSerializer(StrictSerializer):
    dir = serializers.CharField(required=False, allow_null=True, default=None)
    plots = serializers.BooleanField(default=True)


SECTIONS = {
    'vehicle': VehicleSerializer,
    'cost': CostSerializer,
    'wind': WindSerializer,
    'trajectory': TrajectorySerializer,
    'run': RunSerializer,
    'solver': SolverSerializer,
    'output': OutputSerializer,
}


class ScenarioConfigSerializer(StrictSerializer):
    """Whole scenario document; every section is optional."""

    vehicle = VehicleSerializer(required=False)
    cost = CostSerializer(required=False)
    wind = WindSerializer(required=False)
    trajectory = TrajectorySerializer(required=False)
    run = RunSerializer(required=False)
    solver = SolverSerializer(required=False)
    output = OutputSerializer(required=False)

    def to_internal_value(self, data):
        if isinstance(data, dict):
            data = {**{name: {} for name in SECTIONS}, **data}
        return super().to_internal_value(data)


def flatten_errors(errors: Any, prefix: str = '') -> Dict[str, str]:
    """{"run": {"dt": ["Must be positive."]}} -> {"run.dt": "Must be positive."}"""
    flat: Dict[str, str] = {}
    if isinstance(errors, dict):
        for key, value in errors.items():
            name = prefix if key == 'non_field_errors' else (f"{prefix}.{key}" if prefix else str(key))
            flat.update(flatten_errors(value, name))
    elif isinstance(errors, list):
        if errors and all(isinstance(e, str) for e in errors):
            flat[prefix] = ' '.join(str(e) for e in errors)
        else:
            for i, value in enumerate(errors):
                flat.update(flatten_errors(value, f"{prefix}[{i}]" if value else prefix))
    else:
        flat[prefix] = str(errors)
    return flat
