import numpy as np
from django.conf import settings

from data_manager.csv_handler import TraceCSVHandler
from mcv_control.wind import WindModel

from ._common import ExperimentCommand, output_path


def wind_section(model: WindModel) -> str:
    """``[wind]`` TOML section for a Gaussian model."""

    def fmt(values):
        return '[' + ', '.join(f"{v:.12g}" for v in values) + ']'

    rows = ',\n    '.join(fmt(row) for row in model.covariance)
    return (
        "[wind]\n"
        "source = \"gaussian\"\n"
        f"mean = {fmt(model.mean)}\n"
        f"covariance = [\n    {rows},\n]\n"
    )


class Command(ExperimentCommand):
    help = 'Estimate wind mean and covariance from a trace file (t,wx,wy,wz)'

    def add_arguments(self, parser):
        parser.add_argument('trace_file', help='Wind trace CSV')
        parser.add_argument('--out', help='Output directory (default: MCV_OUTPUT_DIR)')
        parser.add_argument(
            '--write-config', help='File name inside the output directory for the estimate as a [wind] TOML section'
        )

    def run(self, options):
        handler = TraceCSVHandler(options['trace_file'])
        trace = handler.load()
        model = handler.get_statistics()

        with np.printoptions(precision=6, suppress=True):
            self.stdout.write(f"samples: {len(trace)} over {trace.span:g} s")
            self.stdout.write(f"mean: {model.mean}")
            self.stdout.write(f"covariance:\n{model.covariance}")

        if options.get('write_config'):
            out = options.get('out') or str(settings.MCV_OUTPUT_DIR)
            path = output_path(out, options['write_config'], key='write-config')
            with open(path, 'w', encoding='utf-8', newline='\n') as f:
                f.write(wind_section(model))
            self.stdout.write(self.style.SUCCESS(f"Wrote wind section to {path}"))
