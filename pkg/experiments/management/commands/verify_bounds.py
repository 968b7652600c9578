"""
Check every proven bound of a certified scenario against a fresh simulation.
Usage: python manage.py verify_bounds --preset scalar_certified [--out DIR]
"""

from core.exceptions import TdmpcError
from experiments.services import BoundVerifier, track_run
from simulation.reports import write_json
from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = ('Verify theoretical bounds against simulation '
            '(the verify-bounds command; Django command names use underscores)')

    def add_arguments(self, parser):
        self.add_scenario_arguments(parser)

    def handle(self, *args, **options):
        try:
            config = self.load(options)
            runner = self.runner(config, options)
            with track_run('verify_bounds', config, runner.output_dir) as run:
                reports = BoundVerifier(runner).verify()
                path = write_json({'scenario': config.name,
                                   'reports': [report.to_dict() for report in reports]},
                                  runner.output_dir / 'bounds.json', config.hash, runner.decisions)
                run.summary = {report.kind: report.satisfied for report in reports}
                run.save()
        except TdmpcError as e:
            self.fail(e)

        self.banner(f'📐 BOUND VERIFICATION: {config.name}')
        for report in reports:
            if report.satisfied:
                self.stdout.write(self.style.SUCCESS(
                    f"✅ {report.kind}: satisfied (margin {report.margin:.3e})"))
            else:
                index = report.first_failure
                self.stdout.write(self.style.ERROR(
                    f"❌ {report.kind}: violated at index {index} "
                    f"(bound {report.theoretical[index]:.6e} < observed {report.empirical[index]:.6e})"
                ))
        self.stdout.write(f"\nReport: {path}")
