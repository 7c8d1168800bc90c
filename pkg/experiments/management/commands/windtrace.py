from data_manager.data_generators import DEFAULT_PERIOD, generate_wind_trace

from ._common import ExperimentCommand, output_path


class Command(ExperimentCommand):
    help = 'Write a synthetic Gaussian wind trace drawn from the scenario [wind] model'

    default_scenario = 'hover.toml'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--samples', type=int, default=3600, help='Number of samples')
        parser.add_argument('--period', type=float, default=DEFAULT_PERIOD, help='Sample spacing, s')
        parser.add_argument('--output', help='Trace file name inside the output directory (default: wind_trace.csv)')

    def run(self, options):
        config = self.load(options)
        path = output_path(config.output_dir, options.get('output') or 'wind_trace.csv', key='output')
        trace = generate_wind_trace(
            config.wind_model,
            path,
            samples=options['samples'],
            period=options['period'],
            seed=config.scenario.seed,
        )
        self.stdout.write(self.style.SUCCESS(
            f"Wrote {len(trace)} samples ({trace.span:g} s) to {path}"
        ))
