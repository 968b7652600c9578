"""
Inverted pendulum reproduction runs: horizon reduction at fixed budget and
horizon reduction under a matched compute budget.
"""
import math

import numpy as np
import pytest

from experiments.services import compare_runs
from simulation.services import matched_budget

THETA_TOL = 1e-3


def settling_index(trajectory, threshold=THETA_TOL):
    """First k after which |theta| stays below threshold for the rest of the run."""
    theta = np.abs(trajectory.state_array()[:, 0])
    above = np.nonzero(theta > threshold)[0]
    if above.size == 0:
        return 0
    if above[-1] == len(theta) - 1:
        return None
    return int(above[-1]) + 1


class TestHorizonReduction:
    """TD-MPC at N=15 against Dim-SuMPC 15 -> 10 -> 8 -> 2, both with ell=5000."""

    def test_switches_happen_at_schedule(self, pendulum_dimsumpc_run):
        trajectory = pendulum_dimsumpc_run.trajectory
        assert trajectory.switch_steps == [15, 25, 40]
        assert trajectory.horizon_at_step[14] == 15
        assert trajectory.horizon_at_step[15] == 10
        assert trajectory.horizon_at_step[25] == 8
        assert trajectory.horizon_at_step[-1] == 2

    def test_both_stabilize(self, pendulum_tdmpc_run, pendulum_dimsumpc_run):
        for result in (pendulum_tdmpc_run, pendulum_dimsumpc_run):
            trajectory = result.trajectory
            assert trajectory.T == 150
            assert abs(trajectory.states[-1][0]) < THETA_TOL

    def test_inputs_stay_in_box(self, pendulum_tdmpc_run, pendulum_dimsumpc_run):
        for result in (pendulum_tdmpc_run, pendulum_dimsumpc_run):
            assert np.all(np.abs(result.trajectory.input_array()) <= 1.0 + 1e-12)

    def test_flop_proxy_drops_with_horizon(self, pendulum_dimsumpc_run):
        trajectory = pendulum_dimsumpc_run.trajectory
        m, n = 1, 2

        def h_term_per_iteration(k):
            size = trajectory.horizon_at_step[k] * m
            return (trajectory.flop_proxy[k] - size * n) / trajectory.iter_counts[k]

        for k in trajectory.switch_steps:
            before, after = trajectory.horizon_at_step[k - 1], trajectory.horizon_at_step[k]
            ratio = h_term_per_iteration(k) / h_term_per_iteration(k - 1)
            assert ratio == pytest.approx((after * m) ** 2 / (before * m) ** 2)

    def test_suboptimality_is_finite(self, pendulum_tdmpc_run, pendulum_dimsumpc_run):
        assert math.isfinite(pendulum_tdmpc_run.suboptimality)
        assert pendulum_tdmpc_run.suboptimality >= -1e-6
        assert math.isfinite(pendulum_dimsumpc_run.suboptimality)
        assert pendulum_dimsumpc_run.suboptimality > 0.0

    def test_overrides_are_flagged(self, pendulum_dimsumpc_run):
        assert pendulum_dimsumpc_run.trajectory.metadata['schedule']['allow_uncertified']


class TestMatchedComputeBudget:
    """TD-MPC (N=15, ell=5000) against Dim-SuMPC switching to N=2 with a matched budget."""

    def test_cumulative_compute_matches_tdmpc(self, pendulum_tdmpc_run, pendulum_budget_run):
        comparison = compare_runs(pendulum_tdmpc_run, pendulum_budget_run)
        assert 0.9 <= comparison['flop_ratio'] <= 1.1
        assert comparison['second']['cumulative_flop_proxy'][-1] == \
            comparison['second']['total_flop_proxy']

    def test_settles_strictly_earlier(self, pendulum_tdmpc_run, pendulum_budget_run):
        tdmpc = settling_index(pendulum_tdmpc_run.trajectory)
        reduced = settling_index(pendulum_budget_run.trajectory)
        assert reduced is not None
        assert tdmpc is not None
        assert reduced < tdmpc

    def test_budget_applies_after_switch(self, pendulum_budget_run):
        trajectory = pendulum_budget_run.trajectory
        ell = matched_budget(5000, 15, 2, 1, 2)
        assert trajectory.switch_steps == [15]
        assert set(trajectory.iter_counts[:15]) == {5000}
        assert set(trajectory.iter_counts[15:]) == {ell}
        assert trajectory.metadata['schedule']['budgets'] == [5000, ell]

    def test_per_step_compute_is_matched(self, pendulum_budget_run):
        flops = pendulum_budget_run.trajectory.flop_proxy
        assert set(flops[15:]) == {flops[15]}
        assert flops[15] == pytest.approx(flops[0], rel=1e-5)
