from data_manager.csv_handler import ResultWriter, gamma_label, sweep_frame
from data_manager.plots import hover_plots
from mcv_control.sim import gamma_sweep

from ._common import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Hover gamma sweep: Monte Carlo variance and RMSE per gamma at a fixed point'

    default_scenario = 'hover.toml'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--dump-gains', action='store_true', help='Write M/H/K per gamma')
        parser.add_argument('--no-plots', action='store_true', help='Skip HTML plots')

    def run(self, options):
        config = self.load(options)
        scenario = config.scenario
        sweep = gamma_sweep(scenario, config.gammas, kind=scenario.controller_kind)

        writer = ResultWriter(config.output_dir)
        writer.write_sweep(sweep)
        labels = []
        for gamma, report, schedule in zip(sweep.gammas, sweep.reports, sweep.schedules):
            label = gamma_label(gamma)
            labels.append(label)
            writer.write_metrics(report, f"gamma_{label}")
            writer.write_costs(report, f"gamma_{label}")
            writer.write_runlog(report.first_log, f"gamma_{label}")
            if options['dump_gains']:
                writer.write_gains(schedule, f"gamma_{label}")

        if config.plots and not options['no_plots']:
            hover_plots(config.output_dir, labels)

        self.table(sweep_frame(sweep))
        self.stdout.write(self.style.SUCCESS(
            f"Hover sweep over {len(sweep.gammas)} gamma value(s) written to {config.output_dir}"
        ))
