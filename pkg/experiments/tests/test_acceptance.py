"""
Long Monte Carlo reproductions of the closed-loop trends.

Tagged slow; run with ``python manage.py test --tag slow`` or skip with
``--exclude-tag slow``.
"""

import numpy as np
from django.test import SimpleTestCase, tag

from experiments.config_loader import default_config_path, load_experiment
from mcv_control.sim import (
    ControllerKind,
    build_controller,
    compare_reports,
    gamma_sweep,
    monte_carlo,
    paired_sign_test,
    run_seeds,
    simulate,
)

RUNS = 50


@tag('slow')
class HoverSweepAcceptanceTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        config = load_experiment(default_config_path('hover.toml'), runs=RUNS)
        cls.scenario = config.scenario
        cls.sweep = gamma_sweep(cls.scenario, [0.0, 0.25, 0.5, 0.75, 1.0, 1.25])

    def test_variance_decreases_with_gamma(self):
        variance = self.sweep.summary('variance')
        for axis in (0, 1):
            for low, high in zip(variance[:-1, axis], variance[1:, axis]):
                self.assertLessEqual(high, 1.05 * low)
            self.assertLess(variance[-1, axis], 0.6 * variance[0, axis])

    def test_quaternion_stays_unit(self):
        for report in self.sweep.reports:
            norms = np.linalg.norm(report.first_log.states[:, 3:7], axis=1)
            self.assertLess(np.max(np.abs(norms - 1.0)), 1e-9)

    def test_objective_beats_lqr(self):
        gamma = 1.25
        mcv = self.sweep.reports[-1]
        lqr_scenario = self.scenario.with_changes(controller_kind=ControllerKind.LQR)
        lqr = monte_carlo(lqr_scenario, build_controller(lqr_scenario), run_seeds(self.scenario))
        self.assertLessEqual(mcv.objective, lqr.cost_mean + gamma * lqr.cost_var)
        test = paired_sign_test(mcv.objective_samples(gamma), lqr.objective_samples(gamma))
        self.assertLess(test.p_value, 0.05)


@tag('slow')
class LineTrackingAcceptanceTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        config = load_experiment(default_config_path('line.toml'), runs=RUNS)
        scenario = config.scenario
        seeds = run_seeds(scenario)
        cls.reports = {}
        for kind in (ControllerKind.LQR_FINITE, ControllerKind.MCV_FINITE):
            current = scenario.with_changes(controller_kind=kind)
            cls.reports[kind] = monte_carlo(current, build_controller(current), seeds)

    def test_mcv_variance_not_worse(self):
        result = compare_reports(self.reports[ControllerKind.LQR_FINITE], self.reports[ControllerKind.MCV_FINITE])
        self.assertGreaterEqual(result['candidate_not_worse'][0], 0.9)
        self.assertGreaterEqual(result['candidate_not_worse'][1], 0.9)
        ratio = result['variance_ratio'][:, 0]
        self.assertGreaterEqual(np.max(ratio[np.isfinite(ratio)]), 1.5)

    def test_quaternion_stays_unit(self):
        for report in self.reports.values():
            norms = np.linalg.norm(report.first_log.states[:, 3:7], axis=1)
            self.assertLess(np.max(np.abs(norms - 1.0)), 1e-9)


@tag('slow')
class CircuitAcceptanceTest(SimpleTestCase):
    def test_circuit_run_completes(self):
        config = load_experiment(default_config_path('circuit.toml'), runs=2)
        scenario = config.scenario.with_changes(controller_kind=ControllerKind.MCV_FINITE)
        log = simulate(scenario, build_controller(scenario))
        self.assertEqual(len(log), scenario.n_steps + 1)
        self.assertTrue(np.all(np.isfinite(log.states)))
