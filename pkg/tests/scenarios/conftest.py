"""
Shared closed-loop runs of the shipped presets. The pendulum runs are long,
so every scenario module reuses the same session-scoped results.
"""
import pytest

from experiments.services import ScenarioRunner, load_config


def simulate_preset(name, tmp_path_factory):
    runner = ScenarioRunner(load_config(preset=name),
                            output_dir=str(tmp_path_factory.mktemp(name)))
    return runner, runner.simulate()


@pytest.fixture(scope="session")
def pendulum_tdmpc_run(tmp_path_factory):
    """TD-MPC with N=15 and ell=5000 from x0 = [-pi/4, pi/5]."""
    return simulate_preset('pendulum_tdmpc', tmp_path_factory)[1]


@pytest.fixture(scope="session")
def pendulum_dimsumpc_run(tmp_path_factory):
    """Horizons 15 -> 10 -> 8 -> 2 at k = 15, 25, 40 with ell=5000."""
    return simulate_preset('pendulum_dimsumpc', tmp_path_factory)[1]


@pytest.fixture(scope="session")
def pendulum_budget_run(tmp_path_factory):
    """Single switch to N=2 at k=15 with the per-step flop_proxy of N=15, ell=5000."""
    return simulate_preset('pendulum_dimsumpc_budget', tmp_path_factory)[1]


@pytest.fixture(scope="session")
def scalar_certified_run(tmp_path_factory):
    return simulate_preset('scalar_certified', tmp_path_factory)
