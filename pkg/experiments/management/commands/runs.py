"""
List recent entries of the scenario run ledger.
Usage: python manage.py runs [--limit 20] [--status completed] [--command simulate]
"""

from django.core.management.base import BaseCommand

from experiments.models import ScenarioRun


class Command(BaseCommand):
    help = 'List recent scenario runs with status, J_T and R'

    def add_arguments(self, parser):
        parser.add_argument(
            '--limit',
            type=int,
            default=20,
            help='Number of runs to show (default: 20)'
        )
        parser.add_argument(
            '--status',
            choices=[choice for choice, _ in ScenarioRun.STATUS_CHOICES],
            help='Only show runs with this status'
        )
        parser.add_argument(
            '--command',
            dest='run_command',
            help='Only show runs of this command'
        )

    def handle(self, *args, **options):
        runs = ScenarioRun.objects.all()
        if options['status']:
            runs = runs.filter(status=options['status'])
        if options['run_command']:
            runs = runs.filter(command=options['run_command'])

        self.stdout.write(self.style.SUCCESS('=' * 80))
        self.stdout.write(self.style.SUCCESS('🗂️  SCENARIO RUNS'))
        self.stdout.write(self.style.SUCCESS('=' * 80 + '\n'))

        shown = list(runs[:options['limit']])
        if not shown:
            self.stdout.write("No runs recorded")
            return

        for run in shown:
            cost = f"{run.total_cost:.6f}" if run.total_cost is not None else '-'
            regret = f"{run.suboptimality:.3e}" if run.suboptimality is not None else '-'
            taint = ' ⚠️ uncertified' if run.uncertified else ''
            self.stdout.write(
                f"#{run.id} {run.created_at:%Y-%m-%d %H:%M:%S} {run.command:<13} "
                f"{run.preset or '-':<26} {run.status:<10} J_T={cost} R={regret}{taint}"
            )
            if run.error_message:
                self.stdout.write(f"   {run.error_message}")

        self.stdout.write(f"\nShowing {len(shown)} of {runs.count()} runs")
