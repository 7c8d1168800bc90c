import pandas as pd
from django.core.management.base import CommandError

from mcv_control.diagnostics import run_checks

from ._common import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Self-verification: Jacobian, Lyapunov and Riccati suites'

    default_scenario = 'hover.toml'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--jacobian-perturbation', type=float, default=0.0,
            help='Added to every analytic A entry before the Jacobian comparison',
        )

    def run(self, options):
        config = self.load(options)
        results = run_checks(
            config.scenario,
            jacobian_perturbation=options['jacobian_perturbation'],
            seed=config.scenario.seed,
        )

        table = pd.DataFrame([
            {
                'check': r.name,
                'value': f"{r.value:.3e}",
                'threshold': f"{r.threshold:.1e}",
                'status': 'PASS' if r.passed else 'FAIL',
                'detail': r.detail,
            }
            for r in results
        ])
        self.stdout.write(table.to_string(index=False))

        failed = [r.name for r in results if not r.passed]
        if failed:
            raise CommandError(f"{len(failed)} check(s) failed: {', '.join(failed)}", returncode=1)
        self.stdout.write(self.style.SUCCESS(f"All {len(results)} checks passed"))
