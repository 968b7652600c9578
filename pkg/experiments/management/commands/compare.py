"""
Compare two runs of the same plant, cost, x0 and T.
Usage: python manage.py compare --preset pendulum_tdmpc --preset pendulum_dimsumpc_budget [--out DIR]
"""

from pathlib import Path

from django.conf import settings

from core.exceptions import ConfigError, TdmpcError
from experiments.services import THETA_THRESHOLD, ScenarioRunner, compare_runs, track_run
from simulation.reports import write_json
from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Paired cost, suboptimality and compute metrics of two scenarios'

    def add_arguments(self, parser):
        self.add_scenario_arguments(parser, multiple=True)
        parser.add_argument(
            '--threshold',
            type=float,
            default=THETA_THRESHOLD,
            help='Convergence threshold on |x_1| for the first-index metric'
        )

    def handle(self, *args, **options):
        try:
            configs = self.load_many(options)
            if len(configs) != 2:
                raise ConfigError(f"compare needs exactly two scenarios, got {len(configs)}")
            first, second = configs
            out = Path(options['out']) if options['out'] else \
                Path(settings.TDMPC_OUTPUT_DIR) / f'compare_{first.name}_{second.name}'

            with track_run('compare', first, out) as run:
                results = []
                for config in configs:
                    runner = ScenarioRunner(config, output_dir=out / config.name)
                    result = runner.simulate()
                    runner.write_artifacts(result)
                    results.append(result)
                comparison = compare_runs(results[0], results[1], options['threshold'])
                comparison['scenarios'] = [first.name, second.name]
                comparison['config_hashes'] = [first.hash, second.hash]
                path = write_json(comparison, out / 'comparison.json',
                                  f'{first.hash}+{second.hash}', results[0].decisions)
                run.summary = {'delta_J_T': comparison['delta_J_T'],
                               'flop_ratio': comparison['flop_ratio']}
                run.save()
        except TdmpcError as e:
            self.fail(e)

        self.banner(f'⚖️  COMPARISON: {first.name} vs {second.name}')
        for label, side in (('First', comparison['first']), ('Second', comparison['second'])):
            self.stdout.write(f"{label} ({side['mode']}):")
            self.stdout.write(f"   J_T: {side['J_T']:.9f}")
            if 'R' in side:
                self.stdout.write(f"   R: {side['R']:.6e}")
            self.stdout.write(f"   flop_proxy: {side['total_flop_proxy']}")
            self.stdout.write(f"   |x_1| <= {comparison['threshold']:g} from step: "
                              f"{side['first_index_theta_below']}\n")
        self.stdout.write(f"Delta J_T (second - first): {comparison['delta_J_T']:.6e}")
        if comparison['flop_ratio'] is not None:
            self.stdout.write(f"Flop ratio (second / first): {comparison['flop_ratio']:.4f}")
        self.stdout.write(f"\n✅ Report: {path}")
