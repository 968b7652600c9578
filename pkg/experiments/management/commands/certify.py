"""
Compute the certificate report of a scenario.
Usage: python manage.py certify --preset pendulum_tdmpc [--out DIR] [--dump-qp]
"""

from core.exceptions import TdmpcError
from experiments.services import record_certificates, track_run
from simulation.reports import write_json
from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Compute stability and suboptimality certificates for a scenario'

    def add_arguments(self, parser):
        self.add_scenario_arguments(parser)
        parser.add_argument(
            '--dump-qp',
            action='store_true',
            help='Include the condensed QP matrices in the report'
        )

    def handle(self, *args, **options):
        try:
            config = self.load(options)
            runner = self.runner(config, options)
            with track_run('certify', config, runner.output_dir) as run:
                certs = runner.certify()
                report = runner.certificate_report(certs, dump_qp=options['dump_qp'])
                path = write_json(report, runner.output_dir / 'certificates.json',
                                  config.hash, runner.decisions)
                record_certificates(run, certs)
        except TdmpcError as e:
            self.fail(e)

        self.banner(f'🔒 CERTIFICATES: {config.name}')
        for cert in certs:
            self.stdout.write(f"N = {cert.N}")
            self.stdout.write(f"   beta: {cert.beta:.6f}   eta: {cert.eta:.6f}")
            self.stdout.write(f"   ell*: {cert.ell_star:.3f}   ell_min: {cert.ell_min}")
            self.stdout.write(f"   r_N: {cert.r_N:.6e}   c_terminal: {cert.c_terminal:.6e}")
            if cert.certified:
                self.stdout.write(f"   ell: {cert.ell}   tau: {cert.tau:.6e}   epsilon: {cert.epsilon:.9f}")
            elif config.mode == 'optimal':
                self.stdout.write("   (optimal mode, no budget)")
            else:
                self.stdout.write(self.style.WARNING("   ⚠️  budget not above ell*, uncertified"))
        self.stdout.write(f"\n✅ Report: {path}")
