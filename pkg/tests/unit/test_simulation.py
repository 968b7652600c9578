"""
Unit tests for the closed-loop simulator, schedules and trajectory artifacts.
"""
import numpy as np
import pytest

from certificates.services import compute_certificates, with_budget
from condensing.services import build_condensed, spectral_data
from core.exceptions import ModelConstructionError, ScenarioMismatchError, ScheduleError
from plants.services import solve_dare
from simulation.reports import read_trajectory_csv, trajectory_summary, write_trajectory_csv
from simulation.services import (
    CombinedState, DimSchedule, cumulative_suboptimality_curve, flop_proxy,
    incurred_suboptimality, matched_budget, run_dim_sumpc, run_optimal, run_tdmpc, warm_start,
)
from solvers.services import BoxSet


@pytest.fixture(scope="module")
def optimal_run(scalar_model, scalar_cost, scalar_qp, unit_box):
    qp, spectral = scalar_qp
    return run_optimal(scalar_model, scalar_cost, qp, unit_box, [5.0], 15, spectral=spectral)


@pytest.fixture(scope="module")
def tdmpc_run(scalar_model, scalar_cost, scalar_qp, unit_box):
    qp, spectral = scalar_qp
    return run_tdmpc(scalar_model, scalar_cost, qp, spectral, unit_box, [5.0], None, 15, 2)


class TestRunOptimal:
    """Optimal MPC loop."""

    def test_lengths(self, optimal_run):
        assert optimal_run.T == 15
        assert len(optimal_run.states) == 16
        assert len(optimal_run.stage_costs) == 15
        assert optimal_run.flop_proxy == [0] * 15

    def test_respects_input_box(self, optimal_run):
        assert np.all(np.abs(optimal_run.input_array()) <= 1.0 + 1e-12)

    def test_first_input_saturates(self, optimal_run):
        assert optimal_run.inputs[0][0] == pytest.approx(-1.0)

    def test_converges(self, optimal_run):
        assert abs(optimal_run.states[-1][0]) < 1e-6

    def test_total_cost(self, optimal_run, scalar_cost):
        x_T = optimal_run.states[-1]
        expected = sum(optimal_run.stage_costs) + float(x_T @ scalar_cost.P @ x_T)
        assert optimal_run.total_cost == pytest.approx(expected)

    def test_zero_state_stays_at_origin(self, scalar_model, scalar_cost, scalar_qp, unit_box):
        qp, spectral = scalar_qp
        trajectory = run_optimal(scalar_model, scalar_cost, qp, unit_box, [0.0], 5)
        assert trajectory.total_cost == 0.0
        assert all(x[0] == 0.0 for x in trajectory.states)

    def test_rejects_empty_horizon(self, scalar_model, scalar_cost, scalar_qp, unit_box):
        qp, _ = scalar_qp
        with pytest.raises(ModelConstructionError):
            run_optimal(scalar_model, scalar_cost, qp, unit_box, [1.0], 0)


class TestRunTdmpc:
    """Time-distributed loop with a per-step budget."""

    def test_reconstruction(self, tdmpc_run, scalar_model):
        assert tdmpc_run.reconstruction_error(scalar_model) <= 1e-10

    def test_iteration_accounting(self, tdmpc_run, scalar_qp):
        qp, _ = scalar_qp
        assert tdmpc_run.iter_counts == [2] * 15
        assert tdmpc_run.flop_proxy == [flop_proxy(2, qp)] * 15
        assert flop_proxy(2, qp) == 2 * 9 + 3

    def test_diagnostics_recorded(self, tdmpc_run):
        assert len(tdmpc_run.V_values) == 15
        assert len(tdmpc_run.d_norms) == 15
        assert all(np.isnan(value) for value in tdmpc_run.lyapunov_values)

    def test_iterates_feasible(self, tdmpc_run, unit_box):
        for x, z in zip(tdmpc_run.states, tdmpc_run.z_history):
            CombinedState(x=x, z=z).check(unit_box)

    def test_time_varying_budgets(self, scalar_model, scalar_cost, scalar_qp, unit_box):
        qp, spectral = scalar_qp
        budgets = [1, 2, 3, 4, 5]
        trajectory = run_tdmpc(scalar_model, scalar_cost, qp, spectral, unit_box, [1.0], None,
                               5, budgets, diagnostics=False)
        assert trajectory.iter_counts == budgets
        assert trajectory.V_values == []

    def test_budget_list_length(self, scalar_model, scalar_cost, scalar_qp, unit_box):
        qp, spectral = scalar_qp
        with pytest.raises(ModelConstructionError):
            run_tdmpc(scalar_model, scalar_cost, qp, spectral, unit_box, [1.0], None, 5, [1, 2])

    def test_large_budget_tracks_optimal(self, scalar_model, scalar_cost, scalar_qp, unit_box,
                                         optimal_run):
        qp, spectral = scalar_qp
        trajectory = run_tdmpc(scalar_model, scalar_cost, qp, spectral, unit_box, [5.0], None,
                               15, 500, diagnostics=False)
        assert incurred_suboptimality(trajectory, optimal_run) == pytest.approx(0.0, abs=1e-8)

    def test_deterministic(self, scalar_model, scalar_cost, scalar_qp, unit_box, tdmpc_run):
        qp, spectral = scalar_qp
        again = run_tdmpc(scalar_model, scalar_cost, qp, spectral, unit_box, [5.0], None, 15, 2)
        assert again.same_contents(tdmpc_run)


class TestSuboptimality:

    def test_curve_ends_at_incurred_suboptimality(self, tdmpc_run, optimal_run):
        curve = cumulative_suboptimality_curve(tdmpc_run, optimal_run)
        assert len(curve) == 16
        assert curve[-1] == pytest.approx(incurred_suboptimality(tdmpc_run, optimal_run))

    def test_mismatched_initial_state(self, scalar_model, scalar_cost, scalar_qp, unit_box,
                                      optimal_run):
        qp, spectral = scalar_qp
        other = run_tdmpc(scalar_model, scalar_cost, qp, spectral, unit_box, [1.0], None, 15, 2,
                          diagnostics=False)
        with pytest.raises(ScenarioMismatchError):
            incurred_suboptimality(other, optimal_run)

    def test_mismatched_cost(self, scalar_model, scalar_qp, unit_box, optimal_run):
        qp, _ = scalar_qp
        heavier = solve_dare(scalar_model, [[5.0]], [[1.0]])
        other = run_optimal(scalar_model, heavier, qp, unit_box, [5.0], 15)
        with pytest.raises(ScenarioMismatchError):
            incurred_suboptimality(other, optimal_run)


class TestDimSchedule:
    """Schedule validation."""

    def test_integer_budget_broadcasts(self):
        schedule = DimSchedule(horizons=(15, 10, 8, 2), switch_times=(15, 25, 40), budgets=5000)
        assert schedule.budgets == (5000, 5000, 5000, 5000)
        assert schedule.p == 3
        assert [schedule.phase_at(k) for k in (0, 14, 15, 30, 40)] == [0, 0, 1, 2, 3]

    @pytest.mark.parametrize('horizons, switches, budgets', [
        ((15, 15), (5,), 10),
        ((2, 15), (5,), 10),
        ((15, 2), (), 10),
        ((15, 10, 2), (8, 8), 10),
        ((15, 2), (0,), 10),
        ((15, 2), (5,), (10,)),
        ((15, 2), (5,), 0),
    ])
    def test_rejects_invalid(self, horizons, switches, budgets):
        with pytest.raises(ScheduleError):
            DimSchedule(horizons=horizons, switch_times=switches, budgets=budgets)

    def test_to_dict(self):
        schedule = DimSchedule(horizons=(3, 2), switch_times=(4,), budgets=(7, 9))
        assert schedule.to_dict()['budgets'] == [7, 9]

    def test_per_step_phase_budgets(self):
        schedule = DimSchedule(horizons=(3, 2), switch_times=(3,), budgets=([4, 6, 5], 7))
        assert schedule.budgets == ((4, 6, 5), 7)
        assert schedule.min_budget(0) == 4
        assert schedule.first_budget(0) == 4
        assert [schedule.budget_at(0, i) for i in range(3)] == [4, 6, 5]
        assert schedule.budget_at(1, 40) == 7
        assert schedule.to_dict()['budgets'] == [[4, 6, 5], 7]

    def test_per_step_budgets_must_cover_phase(self):
        with pytest.raises(ScheduleError):
            DimSchedule(horizons=(3, 2), switch_times=(3,), budgets=([4, 6], 7))
        schedule = DimSchedule(horizons=(3, 2), switch_times=(3,), budgets=(4, [5, 5]))
        schedule.check_length(5)
        with pytest.raises(ScheduleError):
            schedule.check_length(6)
        with pytest.raises(ScheduleError):
            schedule.budget_at(1, 2)

    def test_matched_budget(self):
        ell = matched_budget(5000, 15, 2, 1, 2)
        assert ell == 281257
        reference = 5000 * 15 ** 2 + 15 * 2
        assert abs(ell * 2 ** 2 + 2 * 2 - reference) <= 2 ** 2
        assert matched_budget(10, 3, 3, 1, 1) == 10
        assert matched_budget(1, 1, 3, 1, 1) == 1

    def test_certified_schedule(self, scalar_model, scalar_cost, unit_box):
        schedule = DimSchedule.certified(scalar_model, scalar_cost, unit_box, [3, 2, 1],
                                         np.array([3.0]))
        assert schedule.horizons == (3, 2, 1)
        assert len(schedule.switch_times) == 2
        assert schedule.switch_times[0] < schedule.switch_times[1]
        assert all(ell >= 1 for ell in schedule.budgets)


class TestWarmStart:

    def test_truncate(self):
        np.testing.assert_array_equal(warm_start(np.arange(6.0), 2, 2, 'truncate'), [0, 1, 2, 3])

    def test_zero_pad(self):
        np.testing.assert_array_equal(warm_start(np.arange(6.0), 2, 2, 'zero_pad'), [2, 3, 4, 5])
        np.testing.assert_array_equal(warm_start(np.arange(4.0), 2, 2, 'zero_pad'), [2, 3, 0, 0])

    def test_cold(self):
        np.testing.assert_array_equal(warm_start(np.arange(6.0), 2, 1, 'cold'), [0, 0])

    def test_unknown_mode(self):
        with pytest.raises(ModelConstructionError):
            warm_start(np.zeros(2), 1, 1, 'reuse')


class TestRunDimSumpc:

    def test_switches_shrink_horizon(self, scalar_model, scalar_cost, unit_box):
        schedule = DimSchedule(horizons=(3, 2, 1), switch_times=(3, 6), budgets=(4, 4, 4),
                               allow_uncertified=True)
        trajectory = run_dim_sumpc(scalar_model, scalar_cost, unit_box, [5.0], schedule, 10)
        assert trajectory.switch_steps == [3, 6]
        assert trajectory.horizon_at_step == [3, 3, 3, 2, 2, 2, 1, 1, 1, 1]
        assert [z.size for z in trajectory.z_history] == [3, 3, 3, 2, 2, 2, 1, 1, 1, 1]
        assert trajectory.reconstruction_error(scalar_model) <= 1e-10

    def test_switch_beyond_run(self, scalar_model, scalar_cost, unit_box):
        schedule = DimSchedule(horizons=(3, 2), switch_times=(20,), budgets=4,
                               allow_uncertified=True)
        with pytest.raises(ScheduleError):
            run_dim_sumpc(scalar_model, scalar_cost, unit_box, [1.0], schedule, 10)

    def test_per_step_budgets_drive_iterations(self, scalar_model, scalar_cost, unit_box):
        schedule = DimSchedule(horizons=(3, 2), switch_times=(3,),
                               budgets=([2, 3, 4], [5, 6, 7, 8]), allow_uncertified=True)
        trajectory = run_dim_sumpc(scalar_model, scalar_cost, unit_box, [2.0], schedule, 7)
        assert trajectory.iter_counts == [2, 3, 4, 5, 6, 7, 8]
        assert trajectory.flop_proxy[0] == flop_proxy(2, build_condensed(scalar_model,
                                                                         scalar_cost, 3))

    def test_per_step_budgets_must_cover_run(self, scalar_model, scalar_cost, unit_box):
        schedule = DimSchedule(horizons=(3, 2), switch_times=(3,), budgets=(4, [5, 6]),
                               allow_uncertified=True)
        with pytest.raises(ScheduleError):
            run_dim_sumpc(scalar_model, scalar_cost, unit_box, [1.0], schedule, 7)

    def test_certified_per_step_budgets(self, scalar_model, scalar_cost, unit_box):
        """tau is selected at the smallest budget of a phase, so every step keeps the decrease."""
        base = DimSchedule.certified(scalar_model, scalar_cost, unit_box, [3, 2], np.array([1.0]))
        ell0, ell1 = base.budgets
        k1 = base.switch_times[0]
        first_phase = [ell0 + (k % 3) for k in range(k1)]
        schedule = DimSchedule(horizons=(3, 2), switch_times=(k1,), budgets=(first_phase, ell1))
        trajectory = run_dim_sumpc(scalar_model, scalar_cost, unit_box, [1.0], schedule,
                                   k1 + 5, kappa_mode='gram')
        assert not trajectory.metadata['uncertified']
        assert trajectory.iter_counts[:k1] == first_phase

        qp = build_condensed(scalar_model, scalar_cost, 3)
        cert = with_budget(compute_certificates(scalar_model, scalar_cost, qp, spectral_data(qp),
                                                unit_box, kappa_mode='gram'),
                           ell0, first_phase[0])
        values = trajectory.lyapunov_values
        for k in range(k1 - 1):
            assert values[k + 1] <= cert.epsilon * values[k] + 1e-8

    def test_uncertified_budget_needs_override(self, pendulum_model, pendulum_cost, unit_box):
        schedule = DimSchedule(horizons=(15, 2), switch_times=(5,), budgets=1)
        with pytest.raises(ScheduleError, match="allow_uncertified"):
            run_dim_sumpc(pendulum_model, pendulum_cost, unit_box, [0.1, 0.0], schedule, 10)


class TestTrajectoryArtifacts:

    def test_csv_rows_and_provenance(self, tdmpc_run, optimal_run, tmp_path):
        path = write_trajectory_csv(tdmpc_run, tmp_path / 'run.csv', 'abc123',
                                    decisions=['cold start'], reference=optimal_run)
        text = path.read_text()
        assert text.startswith('# config_hash: abc123\n# decision: cold start\n')
        rows = read_trajectory_csv(path)
        assert len(rows) == 16
        assert 'wall_time_us' not in rows[0]
        assert float(rows[-1]['cum_cost']) == pytest.approx(tdmpc_run.total_cost)
        assert float(rows[-1]['cum_suboptimality']) == pytest.approx(
            incurred_suboptimality(tdmpc_run, optimal_run))
        assert rows[-1]['u_1'] == ''

    def test_summary(self, tdmpc_run, optimal_run):
        summary = trajectory_summary(tdmpc_run, optimal_run)
        assert summary['T'] == 15
        assert summary['total_iterations'] == 30
        assert summary['R'] == pytest.approx(incurred_suboptimality(tdmpc_run, optimal_run))

    def test_first_index_below(self, optimal_run):
        k = optimal_run.first_index_below(1e-3)
        assert k is not None
        assert abs(optimal_run.states[k][0]) <= 1e-3
        assert all(abs(x[0]) > 1e-3 for x in optimal_run.states[:k])


class TestCombinedState:

    def test_rejects_infeasible_iterate(self):
        with pytest.raises(ModelConstructionError):
            CombinedState(x=np.zeros(1), z=np.array([5.0])).check(BoxSet.symmetric(1.0))
