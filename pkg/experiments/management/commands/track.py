import numpy as np

from data_manager.csv_handler import ResultWriter
from data_manager.plots import track_plots
from mcv_control.exceptions import ConfigError
from mcv_control.sim import ControllerKind, build_controller, compare_reports, monte_carlo, paired_sign_test, run_seeds

from ._common import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Trajectory tracking: finite-horizon MCV against finite-horizon LQR'

    default_scenario = 'line.toml'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--dump-gains', action='store_true', help='Write M/H/K schedules')
        parser.add_argument('--no-plots', action='store_true', help='Skip HTML plots')

    def run(self, options):
        if options.get('gamma') and ',' in options['gamma']:
            raise ConfigError("track takes a single gamma value", key='cost.gamma')
        config = self.load(options)
        scenario = config.scenario
        gamma = scenario.cost.gamma
        seeds = run_seeds(scenario)

        writer = ResultWriter(config.output_dir)
        reports = {}
        for label, kind in (('lqr', ControllerKind.LQR_FINITE), ('mcv', ControllerKind.MCV_FINITE)):
            current = scenario.with_changes(controller_kind=kind)
            gains = build_controller(current)
            reports[label] = monte_carlo(current, gains, seeds)
            writer.write_metrics(reports[label], label)
            writer.write_costs(reports[label], label)
            writer.write_runlog(reports[label].first_log, label)
            if options['dump_gains']:
                writer.write_gains(gains, label)
        writer.write_comparison(reports['lqr'], reports['mcv'])

        if config.plots and not options['no_plots']:
            track_plots(config.output_dir)

        comparison = compare_reports(reports['lqr'], reports['mcv'])
        ratio = comparison['variance_ratio']
        not_worse = comparison['candidate_not_worse']
        for axis, i in (('x', 0), ('y', 1), ('z', 2)):
            self.stdout.write(
                f"{axis}: MCV variance <= LQR at {100 * not_worse[i]:.1f}% of points, "
                f"max LQR/MCV ratio {np.max(ratio[np.isfinite(ratio[:, i]), i], initial=0.0):.3g}"
            )
        lqr, mcv = reports['lqr'], reports['mcv']
        test = paired_sign_test(mcv.objective_samples(gamma), lqr.objective_samples(gamma))
        self.stdout.write(
            f"objective E[J]+gamma Var[J] (gamma={gamma:g}): LQR {lqr.cost_mean + gamma * lqr.cost_var:.6g}, "
            f"MCV {mcv.objective:.6g}; sign test {test.wins}/{test.trials}, p={test.p_value:.3g}"
        )
        self.stdout.write(self.style.SUCCESS(f"Tracking comparison written to {config.output_dir}"))
