import os
import tempfile

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from experiments.config_loader import (
    apply_overrides,
    build_scenario,
    default_config_path,
    load_experiment,
    parse_gamma_list,
    read_config_file,
    validate,
)
from experiments.serializers import flatten_errors
from mcv_control.exceptions import ConfigError
from mcv_control.sim import ControllerKind, build_controller, design_noise
from mcv_control.wind import GaussianWind, ReplayWind

from .helpers import write_toml


class ValidateTest(SimpleTestCase):
    def assertConfigError(self, data, key, base_dir=''):
        with self.assertRaises(ConfigError) as ctx:
            validate(data, base_dir)
        self.assertEqual(ctx.exception.key, key)
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_empty_document_gets_defaults(self):
        data = validate({})
        np.testing.assert_array_equal(np.diag(data['cost']['q']), [10, 10, 10, 1, 1, 1, 1, 0.1, 0.1, 0.1])
        self.assertEqual(data['cost']['r'].shape, (4, 4))
        self.assertEqual(data['cost']['gammas'], [0.0, 0.25, 0.5, 0.75, 1.0, 1.25])
        self.assertIsNone(data['run']['x0'])
        self.assertEqual(data['run']['seed'], settings.MCV_DEFAULT_SEED)
        self.assertEqual(data['trajectory']['kind'], 'hover')
        np.testing.assert_array_equal(data['wind']['mean'], [2.72, 1.752, -0.006])
        self.assertIsNone(data['wind']['intensity'])

    def test_full_matrix_accepted(self):
        cov = [[0.5, 0.1, 0.0], [0.1, 0.3, 0.0], [0.0, 0.0, 0.05]]
        data = validate({'wind': {'covariance': cov}})
        np.testing.assert_array_equal(data['wind']['covariance'], cov)

    def test_unknown_top_level_key(self):
        self.assertConfigError({'bogus': {}}, 'bogus')

    def test_unknown_section_key(self):
        self.assertConfigError({'run': {'dtt': 0.01}}, 'run.dtt')

    def test_nonpositive_dt(self):
        self.assertConfigError({'run': {'dt': -0.01}}, 'run.dt')

    def test_single_run_rejected(self):
        self.assertConfigError({'run': {'n_runs': 1}}, 'run.n_runs')

    def test_gammas_must_increase(self):
        self.assertConfigError({'cost': {'gammas': [0.5, 0.25]}}, 'cost.gammas')

    def test_negative_gamma(self):
        self.assertConfigError({'cost': {'gamma': -1.0}}, 'cost.gamma')

    def test_asymmetric_matrix(self):
        self.assertConfigError({'wind': {'covariance': [[1, 1, 0], [0, 1, 0], [0, 0, 1]]}}, 'wind.covariance')

    def test_r_must_be_positive_definite(self):
        self.assertConfigError({'cost': {'r': [1, 1, 1, 0]}}, 'cost.r')

    def test_wrong_vector_length(self):
        self.assertConfigError({'wind': {'mean': [1, 2]}}, 'wind.mean')

    def test_replay_needs_trace(self):
        self.assertConfigError({'wind': {'source': 'replay'}}, 'wind.trace')

    def test_missing_trace_file(self):
        self.assertConfigError({'wind': {'source': 'replay', 'trace': 'nope.csv'}}, 'wind.trace')

    def test_waypoints_need_two_rows(self):
        self.assertConfigError({'trajectory': {'kind': 'waypoints', 'waypoints': [[0, 0, 0, 0]]}}, 'trajectory.waypoints')

    def test_bad_initial_state(self):
        self.assertConfigError({'run': {'x0': [0, 0, 0]}}, 'run.x0')

    def test_flatten_errors(self):
        flat = flatten_errors({'run': {'dt': ['Must be positive.']}, 'cost': {'non_field_errors': ['Bad.']}})
        self.assertEqual(flat, {'run.dt': 'Must be positive.', 'cost': 'Bad.'})


class OverrideTest(SimpleTestCase):
    def test_overrides_land_in_sections(self):
        data = {'run': {'seed': 1}}
        merged = apply_overrides(data, out='/tmp/x', seed=9, runs=3, gammas=[0.5])
        self.assertEqual(merged['run'], {'seed': 9, 'n_runs': 3})
        self.assertEqual(merged['cost'], {'gammas': [0.5], 'gamma': 0.5})
        self.assertEqual(merged['output'], {'dir': '/tmp/x'})
        self.assertEqual(data, {'run': {'seed': 1}})

    def test_gamma_list_parsing(self):
        self.assertEqual(parse_gamma_list('0, 0.25,1.25'), [0.0, 0.25, 1.25])
        with self.assertRaises(ConfigError):
            parse_gamma_list('0,a')
        with self.assertRaises(ConfigError):
            parse_gamma_list(' , ')


class LoadExperimentTest(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = tmp.name

    def test_shipped_scenarios_validate(self):
        for name in ('hover.toml', 'line.toml', 'circuit.toml'):
            data = validate(read_config_file(default_config_path(name)))
            scenario = build_scenario(data)
            self.assertGreater(scenario.n_steps, 0)

    def test_hover_scenario(self):
        config = load_experiment(default_config_path('hover.toml'), out=self.dir)
        scenario = config.scenario
        self.assertEqual(config.name, 'hover')
        self.assertEqual(config.output_dir, self.dir)
        self.assertEqual(config.gammas, [0.0, 0.25, 0.5, 0.75, 1.0, 1.25])
        self.assertEqual(scenario.n_steps, 1000)
        self.assertEqual(scenario.controller_kind, ControllerKind.MCV_INFINITE)
        self.assertIsInstance(scenario.wind_source, GaussianWind)
        np.testing.assert_allclose(scenario.references[0, :3], [1.0, 1.0, 8.0])

    def test_circuit_initial_state(self):
        config = load_experiment(default_config_path('circuit.toml'), out=self.dir)
        np.testing.assert_allclose(config.scenario.initial_state(), [0, 0, 0, 1, 0, 0, 0, 0.001, 0, 0])
        self.assertAlmostEqual(config.scenario.duration, 20.0)

    @override_settings(MCV_OUTPUT_DIR='/tmp/mcv-results')
    def test_default_output_dir_uses_stem(self):
        path = write_toml(self.dir, 'mine.toml', """
            [trajectory]
            duration = 1.0
        """)
        config = load_experiment(path)
        self.assertEqual(config.output_dir, os.path.join('/tmp/mcv-results', 'mine'))

    def test_replay_trace_resolved_next_to_config(self):
        with open(os.path.join(self.dir, 'gusts.csv'), 'w', encoding='utf-8') as f:
            f.write("t,wx,wy,wz\n" + "".join(f"{t},1,0,0\n" for t in range(20)))
        path = write_toml(self.dir, 'replay.toml', """
            [wind]
            source = "replay"
            trace = "gusts.csv"
            randomize_offset = true

            [trajectory]
            duration = 2.0
        """)
        config = load_experiment(path, out=self.dir)
        self.assertIsInstance(config.scenario.wind_source, ReplayWind)
        np.testing.assert_allclose(config.scenario.mean_wind, [1.0, 0.0, 0.0])

    def test_cli_gamma_override(self):
        config = load_experiment(default_config_path('line.toml'), out=self.dir, gammas=[0.25], runs=3, seed=1)
        self.assertEqual(config.scenario.cost.gamma, 0.25)
        self.assertEqual(config.scenario.n_runs, 3)
        self.assertEqual(config.scenario.seed, 1)

    def test_invalid_toml(self):
        path = write_toml(self.dir, 'broken.toml', "[run\ndt = 1\n")
        with self.assertRaises(ConfigError):
            load_experiment(path)


class ShippedControllerTest(SimpleTestCase):
    """Every shipped scenario has a controller for each design its command builds."""

    def test_hover_gamma_sweep_designs(self):
        config = load_experiment(default_config_path('hover.toml'))
        for gamma in config.gammas:
            schedule = build_controller(config.scenario.with_gamma(gamma))
            self.assertTrue(schedule.is_constant)
            self.assertTrue(np.all(np.isfinite(schedule.gains)))

    def test_tracking_designs(self):
        for name in ('line.toml', 'circuit.toml'):
            scenario = load_experiment(default_config_path(name)).scenario
            for kind in (ControllerKind.LQR_FINITE, ControllerKind.MCV_FINITE):
                schedule = build_controller(scenario.with_changes(controller_kind=kind))
                self.assertEqual(schedule.gains.shape, (scenario.n_steps + 1, 4, 10))
                self.assertTrue(np.all(np.isfinite(schedule.gains)), f"{name} {kind.value}")

    def test_design_intensity_is_covariance_times_dt(self):
        scenario = load_experiment(default_config_path('hover.toml')).scenario
        _, W = design_noise(scenario)
        np.testing.assert_allclose(W, 0.01 * np.diag([0.5, 0.3, 0.05]))
