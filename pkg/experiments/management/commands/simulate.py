"""
Run a closed-loop scenario and write trajectory.csv, optimal.csv and summary.json.
Usage: python manage.py simulate --preset pendulum_tdmpc [--out DIR] [--repeat N]
"""

from core.exceptions import ConfigError, TdmpcError
from experiments.services import record_result, track_run
from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Simulate a scenario in closed loop'
    modes = ('optimal', 'tdmpc', 'dimsumpc')

    def add_arguments(self, parser):
        self.add_scenario_arguments(parser)
        parser.add_argument(
            '--repeat',
            type=int,
            default=1,
            help='Repeat the run and average the per-step wall time'
        )

    def handle(self, *args, **options):
        try:
            config = self.load(options)
            if config.mode not in self.modes:
                raise ConfigError(f"mode '{config.mode}' is not accepted by this command",
                                  {'mode': [f"expected one of {', '.join(self.modes)}"]})
            if options['repeat'] < 1:
                raise ConfigError("--repeat must be at least 1")
            runner = self.runner(config, options)
            with track_run(self.command_name, config, runner.output_dir) as run:
                result = runner.simulate_repeated(options['repeat'])
                summary = runner.write_artifacts(result)
                record_result(run, result, summary)
        except TdmpcError as e:
            self.fail(e)

        trajectory = result.trajectory
        self.banner(f'📈 {trajectory.mode.upper()} RUN: {config.name}')
        self.stdout.write(f"Steps: {trajectory.T}")
        self.stdout.write(f"J_T: {trajectory.total_cost:.9f}")
        if result.reference is not None:
            self.stdout.write(f"J_T optimal: {result.reference.total_cost:.9f}")
            self.stdout.write(f"R: {result.suboptimality:.6e}")
        self.stdout.write(f"PGM iterations: {sum(trajectory.iter_counts)}")
        if trajectory.switch_steps:
            self.stdout.write(f"Horizon switches at: {', '.join(map(str, trajectory.switch_steps))}")
        if result.uncertified:
            self.stdout.write(self.style.WARNING("⚠️  Uncertified budgets: bounds do not apply"))
        self.stdout.write(f"\n✅ Artifacts in {runner.output_dir}")

    @property
    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]
