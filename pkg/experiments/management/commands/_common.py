"""
Shared plumbing for the experiment commands: common flags, config
loading and the mapping from library errors to exit codes.
"""

import logging
import os

from django.core.management.base import BaseCommand, CommandError

from experiments.config_loader import ExperimentConfig, default_config_path, load_experiment, parse_gamma_list
from mcv_control.exceptions import ConfigError, MCVError

logger = logging.getLogger(__name__)

IO_EXIT_CODE = 5


def output_path(output_dir: str, name: str, key: str) -> str:
    """
    Resolve a file name inside the output directory.

    Raises:
        ConfigError: ``name`` is absolute or escapes ``output_dir``
    """
    if os.path.isabs(name):
        raise ConfigError(f"must be relative to the output directory, got {name}", key=key)
    root = os.path.realpath(output_dir)
    path = os.path.realpath(os.path.join(root, name))
    if os.path.commonpath([root, path]) != root:
        raise ConfigError(f"escapes the output directory {output_dir}: {name}", key=key)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    return path


class ExperimentCommand(BaseCommand):
    """
    Base for scenario-driven commands.

    Subclasses set ``default_scenario`` and implement ``run(options)``.
    """

    default_scenario = 'hover.toml'
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('--config', help=f"Scenario TOML file (default: {self.default_scenario})")
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--seed', type=int, help='Base seed')
        parser.add_argument('--runs', type=int, help='Monte Carlo run count')
        parser.add_argument('--gamma', help='Comma-separated gamma list, e.g. 0,0.5,1.25')

    def handle(self, *args, **options):
        try:
            self.run(options)
        except MCVError as e:
            logger.debug("Command failed", exc_info=True)
            raise CommandError(str(e), returncode=e.exit_code) from e
        except OSError as e:
            raise CommandError(f"I/O error: {e}", returncode=IO_EXIT_CODE) from e

    def run(self, options):
        raise NotImplementedError

    def load(self, options) -> ExperimentConfig:
        gammas = parse_gamma_list(options['gamma']) if options.get('gamma') else None
        return load_experiment(
            options.get('config') or default_config_path(self.default_scenario),
            out=options.get('out'),
            seed=options.get('seed'),
            runs=options.get('runs'),
            gammas=gammas,
        )

    def table(self, df):
        self.stdout.write(df.to_string(index=False, float_format=lambda v: f"{v:.6g}"))
