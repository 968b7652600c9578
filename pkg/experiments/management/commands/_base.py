"""
Shared option handling for the scenario commands.
"""

import logging

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import TdmpcError
from experiments.services import ScenarioRunner, exit_code, load_config

logger = logging.getLogger(__name__)


class ScenarioCommand(BaseCommand):
    """Base for commands that take --config/--preset and write to --out."""

    def add_scenario_arguments(self, parser, multiple=False):
        action = 'append' if multiple else 'store'
        parser.add_argument(
            '--config',
            action=action,
            help='Path to a scenario JSON document'
        )
        parser.add_argument(
            '--preset',
            action=action,
            help='Name of a shipped preset under experiments/presets'
        )
        parser.add_argument(
            '--out',
            type=str,
            default=None,
            help='Output directory (default TDMPC_OUTPUT_DIR/<scenario name>)'
        )

    def load(self, options):
        """The single scenario selected by --config or --preset."""
        return load_config(path=options.get('config'), preset=options.get('preset'))

    def load_many(self, options):
        """Scenarios from repeated --config and --preset options, configs first."""
        configs = [load_config(path=path) for path in options.get('config') or []]
        configs += [load_config(preset=name) for name in options.get('preset') or []]
        return configs

    def runner(self, config, options):
        return ScenarioRunner(config, output_dir=options.get('out'))

    def banner(self, title):
        self.stdout.write(self.style.SUCCESS('=' * 80))
        self.stdout.write(self.style.SUCCESS(title))
        self.stdout.write(self.style.SUCCESS('=' * 80 + '\n'))

    def fail(self, error: TdmpcError):
        """Report a lab error and raise the CommandError carrying its exit code."""
        code = exit_code(error)
        label = {1: 'Rejected', 2: 'Refused', 3: 'Failed'}[code]
        logger.error(f"{label}: {error}")
        self.stderr.write(self.style.ERROR(f"❌ {label}: {error}"))
        raise CommandError(str(error), returncode=code)
