"""
Unit tests for the bound formulas and BoundReport comparison.
"""
import dataclasses

import numpy as np
import pytest

from certificates.bounds import (
    DimPhase, bound_delta_mu, bound_delta_mu_fixed, bound_dim_sumpc, bound_optimal_state,
    bound_state, bound_state_fixed, bound_suboptimality, bound_suboptimality_fixed, compare,
    dim_sumpc_constants, rate_products,
)
from certificates.services import compute_certificates, epsilon_rate, with_budget
from condensing.services import build_condensed, spectral_data
from core.exceptions import CertificateError, ModelConstructionError


@pytest.fixture(scope="module")
def certified(scalar_model, scalar_cost, scalar_qp, unit_box):
    qp, spectral = scalar_qp
    cert = compute_certificates(scalar_model, scalar_cost, qp, spectral, unit_box,
                                kappa_mode='gram')
    return with_budget(cert, cert.ell_min)


@pytest.fixture(scope="module")
def short_certified(scalar_model, scalar_cost, unit_box):
    qp = build_condensed(scalar_model, scalar_cost, 2)
    cert = compute_certificates(scalar_model, scalar_cost, qp, spectral_data(qp), unit_box,
                                kappa_mode='gram')
    return with_budget(cert, cert.ell_min)


class TestCompare:
    """BoundReport construction."""

    def test_satisfied(self):
        report = compare('state_norm', [1.0, 0.5, 0.25], [0.9, 0.5, 0.0])
        assert report.satisfied
        assert report.first_failure is None
        assert report.margin == pytest.approx(0.0)

    def test_reports_first_failure(self):
        report = compare('delta_mu', [1.0, 0.5, 0.25], [0.9, 0.6, 0.3])
        assert not report.satisfied
        assert report.first_failure == 1
        data = report.to_dict()
        assert data['failing_values'] == {'index': 1, 'theoretical': 0.5, 'empirical': 0.6}

    def test_scalar_report(self):
        data = compare('suboptimality_fixed', 2.0, 1.0).to_dict()
        assert data['theoretical'] == 2.0
        assert data['satisfied']

    def test_slack(self):
        assert compare('state_norm', [1.0], [1.0 + 1e-12]).satisfied
        assert not compare('state_norm', [1.0], [1.0 + 1e-6]).satisfied

    def test_rejects_unknown_kind(self):
        with pytest.raises(ModelConstructionError):
            compare('regret', [1.0], [1.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ModelConstructionError):
            compare('state_norm', [1.0, 2.0], [1.0])


class TestTdmpcBounds:
    """Formulas for fixed and time-varying budgets."""

    def test_rate_products_start_at_one(self, certified):
        products = rate_products(certified, certified.ell, 4)
        assert products[0] == 1.0
        np.testing.assert_allclose(products, certified.epsilon ** np.arange(5))

    def test_varying_matches_fixed_for_constant_budget(self, certified):
        for k in range(6):
            assert bound_delta_mu(certified, 2.0, certified.ell, k) == pytest.approx(
                bound_delta_mu_fixed(certified, 2.0, k))
            assert bound_state(certified, 2.0, certified.ell, k, product='proof') == \
                pytest.approx(bound_state_fixed(certified, 2.0, k))
            assert bound_state(certified, 2.0, certified.ell, k) == pytest.approx(
                bound_state_fixed(certified, 2.0, k) * certified.epsilon)

    def test_state_bound_at_first_step(self, certified):
        """k=0 with eps_{-1} = 1 keeps the single factor eps_0."""
        expected = certified.h0 * certified.P_inv_sqrt_norm * 1.5 * certified.epsilon
        assert bound_state(certified, 1.5, certified.ell, 0) == pytest.approx(expected)
        assert bound_state(certified, 1.5, certified.ell, 0, product='proof') == \
            pytest.approx(certified.h0 * certified.P_inv_sqrt_norm * 1.5)

    def test_state_bound_uses_budget_of_current_step(self, certified):
        budgets = [certified.ell, certified.ell + 10]
        expected = (certified.h0 * certified.P_inv_sqrt_norm
                    * epsilon_rate(certified, certified.ell)
                    * epsilon_rate(certified, certified.ell + 10))
        assert bound_state(certified, 1.0, budgets, 1) == pytest.approx(expected)
        with pytest.raises(ModelConstructionError):
            bound_state(certified, 1.0, budgets[:1], 1)

    def test_unknown_state_product_is_rejected(self, certified):
        with pytest.raises(ModelConstructionError):
            bound_state(certified, 1.0, certified.ell, 2, product='closed')

    def test_larger_budgets_tighten_bounds(self, certified):
        fixed = [certified.ell] * 11
        varying = [certified.ell + 5 * i for i in range(11)]
        assert bound_state(certified, 1.0, varying, 10) <= bound_state(certified, 1.0, fixed, 10)

    def test_budget_below_tau_selection_is_refused(self, certified):
        if certified.ell > 1:
            with pytest.raises(CertificateError):
                bound_state(certified, 1.0, [certified.ell - 1] * 4, 3)

    def test_zero_state_gives_zero_bounds(self, certified):
        assert bound_delta_mu(certified, 0.0, certified.ell, 3) == 0.0
        assert bound_state(certified, 0.0, certified.ell, 3) == 0.0
        assert bound_optimal_state(certified, 0.0, 3) == 0.0

    def test_optimal_state_decays_with_beta(self, certified):
        ratio = bound_optimal_state(certified, 1.0, 4) / bound_optimal_state(certified, 1.0, 3)
        assert ratio == pytest.approx(certified.beta)

    def test_suboptimality_sum_below_geometric(self, certified):
        bound = bound_suboptimality(certified, 1.5, certified.ell, 30)
        assert 0.0 < bound.finite_sum <= bound.geometric
        assert bound.epsilon_bar == pytest.approx(certified.epsilon)
        assert bound.geometric == pytest.approx(bound_suboptimality_fixed(certified, 1.5))

    def test_corrupted_constant_is_caught(self, certified):
        """A shrunken cbar makes an honest suboptimality fail the comparison."""
        bound = bound_suboptimality(certified, 1.0, certified.ell, 10)
        corrupted = dataclasses.replace(certified, cbar=certified.cbar * 1e-6)
        shrunk = bound_suboptimality(corrupted, 1.0, certified.ell, 10)
        report = compare('suboptimality_varying', shrunk.finite_sum, bound.finite_sum * 0.5)
        assert not report.satisfied
        assert report.first_failure == 0


class TestDimSumpcBound:

    def test_single_phase_reduces_to_geometric_form(self, certified):
        bound = bound_dim_sumpc([DimPhase(certified, 0)], 1.0, 20)
        expected = certified.cbar / (1.0 - certified.epsilon)
        assert bound == pytest.approx(expected)

    def test_two_phases(self, certified, short_certified):
        phases = [DimPhase(certified, 0), DimPhase(short_certified, 5)]
        constants = dim_sumpc_constants(phases)
        assert constants['cbar_m'] == max(certified.cbar, short_certified.cbar)
        assert constants['epsilon_low'] == max(certified.epsilon, short_certified.epsilon)
        assert len(constants['d_bars']) == 1
        assert bound_dim_sumpc(phases, 1.0, 20) > 0.0

    def test_first_phase_must_start_at_zero(self, certified):
        with pytest.raises(ModelConstructionError):
            bound_dim_sumpc([DimPhase(certified, 3)], 1.0, 20)

    def test_switch_beyond_horizon(self, certified, short_certified):
        with pytest.raises(ModelConstructionError):
            bound_dim_sumpc([DimPhase(certified, 0), DimPhase(short_certified, 30)], 1.0, 20)

    def test_phase_without_budget(self, scalar_model, scalar_cost, scalar_qp, unit_box):
        qp, spectral = scalar_qp
        cert = compute_certificates(scalar_model, scalar_cost, qp, spectral, unit_box)
        with pytest.raises(CertificateError):
            dim_sumpc_constants([DimPhase(cert, 0)])
