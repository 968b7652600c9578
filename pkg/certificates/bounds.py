"""
Theoretical bounds on input deviation, state norm and incurred suboptimality,
and their comparison against measured trajectories.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from core.exceptions import CertificateError, ModelConstructionError
from .services import CertificateSet, epsilon_rate, h_value

logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-9

BOUND_KINDS = (
    'delta_mu',
    'state_norm',
    'suboptimality_fixed',
    'suboptimality_varying',
    'dim_sumpc',
    'optimal_state',
)

Budgets = Union[int, Sequence[int]]


@dataclass(frozen=True)
class BoundReport:
    """Theoretical vs empirical values; satisfied iff empirical <= theoretical + slack everywhere."""
    kind: str
    theoretical: Tuple[float, ...]
    empirical: Tuple[float, ...]
    satisfied: bool
    margin: float
    first_failure: Optional[int] = None

    def to_dict(self) -> dict:
        data = {
            'kind': self.kind,
            'satisfied': self.satisfied,
            'margin': self.margin,
            'first_failure': self.first_failure,
        }
        if len(self.theoretical) == 1:
            data['theoretical'] = self.theoretical[0]
            data['empirical'] = self.empirical[0]
        else:
            data['theoretical'] = list(self.theoretical)
            data['empirical'] = list(self.empirical)
        if self.first_failure is not None:
            data['failing_values'] = {
                'index': self.first_failure,
                'theoretical': self.theoretical[self.first_failure],
                'empirical': self.empirical[self.first_failure],
            }
        return data


def compare(kind: str, theoretical, empirical, slack: float = BOUND_SLACK) -> BoundReport:
    if kind not in BOUND_KINDS:
        raise ModelConstructionError(f"Unknown bound kind '{kind}'")
    theoretical = np.atleast_1d(np.asarray(theoretical, dtype=float))
    empirical = np.atleast_1d(np.asarray(empirical, dtype=float))
    if theoretical.shape != empirical.shape:
        raise ModelConstructionError(
            f"{kind}: {theoretical.size} theoretical values for {empirical.size} empirical ones"
        )
    gaps = theoretical - empirical
    failing = np.flatnonzero(empirical > theoretical + slack)
    report = BoundReport(
        kind=kind,
        theoretical=tuple(float(v) for v in theoretical),
        empirical=tuple(float(v) for v in empirical),
        satisfied=failing.size == 0,
        margin=float(gaps.min()) if gaps.size else math.inf,
        first_failure=int(failing[0]) if failing.size else None,
    )
    if not report.satisfied:
        logger.warning(
            f"Bound '{kind}' violated at index {report.first_failure}: "
            f"empirical {empirical[report.first_failure]:.6e} > "
            f"theoretical {theoretical[report.first_failure]:.6e}"
        )
    return report


def _budget_list(budgets: Budgets, length: int) -> List[int]:
    if isinstance(budgets, (int, np.integer)):
        return [int(budgets)] * length
    budgets = [int(b) for b in budgets]
    if len(budgets) < length:
        raise ModelConstructionError(f"Need {length} budgets, got {len(budgets)}")
    return budgets


def _require_budget(cert: CertificateSet, budgets: List[int]):
    if cert.tau is None:
        raise CertificateError("certificates carry no budget", hint="declare ell first")
    if budgets and min(budgets) < cert.ell:
        raise CertificateError(
            f"tau was selected for ell={cert.ell} but the schedule dips to {min(budgets)}",
            hint="select tau at the minimum budget of the schedule",
        )


def rate_products(cert: CertificateSet, budgets: Budgets, k: int) -> np.ndarray:
    """prod_{i=-1}^{j-1} eps_i for j = 0..k, with eps_{-1} = 1."""
    budgets = _budget_list(budgets, k)
    _require_budget(cert, budgets[:k])
    rates = np.array([epsilon_rate(cert, ell) for ell in budgets[:k]])
    return np.concatenate(([1.0], np.cumprod(rates)))


def bound_delta_mu(cert: CertificateSet, x0_norm_W: float, budgets: Budgets, k: int) -> float:
    """b0 ||x0||_W prod_{i=-1}^{k-1} eps_i + c ||x0||_W beta^k."""
    product = rate_products(cert, budgets, k)[k]
    return cert.b0 * x0_norm_W * product + cert.c_delta_mu * x0_norm_W * cert.beta ** k


STATE_PRODUCTS = ('displayed', 'proof')


def bound_state(cert: CertificateSet, x0_norm_W: float, budgets: Budgets, k: int,
                product: str = 'displayed') -> float:
    """
    h0 ||P^-1/2|| ||x0||_W prod_{i=-1}^{k} eps_i.

    The 'displayed' product runs through eps_k and needs k + 1 budgets. The
    'proof' product stops at eps_{k-1} and equals bound_state_fixed for a
    constant budget; it is larger by the factor 1 / eps_k.

    Raises:
        ModelConstructionError: unknown product
    """
    if product not in STATE_PRODUCTS:
        raise ModelConstructionError(
            f"Unknown state-bound product '{product}' (expected one of {STATE_PRODUCTS})"
        )
    last = k + 1 if product == 'displayed' else k
    factor = rate_products(cert, budgets, last)[last]
    return cert.h0 * cert.P_inv_sqrt_norm * x0_norm_W * factor


def bound_delta_mu_fixed(cert: CertificateSet, x0_norm_W: float, k: int) -> float:
    """b ||x0||_W eps^k + c ||x0||_W beta^k with a single budget ell."""
    b = cert.c_delta_mu * h_value(cert, cert.ell)
    return (b * x0_norm_W * cert.epsilon ** k
            + cert.c_delta_mu * x0_norm_W * cert.beta ** k)


def bound_state_fixed(cert: CertificateSet, x0_norm_W: float, k: int) -> float:
    """h ||P^-1/2|| ||x0||_W eps^k with a single budget ell."""
    return h_value(cert, cert.ell) * cert.P_inv_sqrt_norm * x0_norm_W * cert.epsilon ** k


def bound_optimal_state(cert: CertificateSet, x0_norm_W: float, k: int) -> float:
    """||x*_k|| <= ||x0||_W beta^k / sqrt(lambda-(P)) for the optimal loop."""
    return x0_norm_W * cert.beta ** k / math.sqrt(cert.lamP_min)


@dataclass(frozen=True)
class SuboptimalityBound:
    finite_sum: float
    geometric: float
    cbar: float
    epsilon_bar: float

    def to_dict(self) -> dict:
        return {
            'finite_sum': self.finite_sum,
            'geometric': self.geometric,
            'cbar': self.cbar,
            'epsilon_bar': self.epsilon_bar,
        }


def bound_suboptimality(cert: CertificateSet, x0_norm_W: float, budgets: Budgets,
                        T: int) -> SuboptimalityBound:
    """
    cbar ||x0||_W^2 sum_{k=0}^{T} prod_{i=-1}^{k-1} eps_i^2 <= cbar ||x0||_W^2 / (1 - epsbar^2).

    epsbar is the rate at the minimum budget over the T steps.
    """
    budgets = _budget_list(budgets, T)[:T]
    products = rate_products(cert, budgets, T)
    scale = cert.cbar * x0_norm_W ** 2
    finite_sum = float(scale * np.sum(products ** 2))

    epsilon_bar = epsilon_rate(cert, min(budgets)) if budgets else cert.epsilon
    geometric = float(scale / (1.0 - epsilon_bar ** 2))
    if finite_sum > geometric * (1.0 + 1e-12) + 1e-300:
        raise CertificateError(
            f"finite-sum bound {finite_sum:.6e} exceeds its geometric closure {geometric:.6e}"
        )
    return SuboptimalityBound(finite_sum=finite_sum, geometric=geometric,
                              cbar=cert.cbar, epsilon_bar=epsilon_bar)


def bound_suboptimality_fixed(cert: CertificateSet, x0_norm_W: float) -> float:
    """cbar ||x0||_W^2 / (1 - eps^2) for a single budget ell."""
    return cert.cbar * x0_norm_W ** 2 / (1.0 - cert.epsilon ** 2)


@dataclass(frozen=True)
class DimPhase:
    """Certificates of one Dim-SuMPC phase and its switch time (0 for the first)."""
    cert: CertificateSet
    k_switch: int


def dim_sumpc_constants(phases: Sequence[DimPhase]) -> dict:
    """cbar_m, epsilon_low (the largest phase rate) and d_i for i >= 1."""
    if not phases:
        raise ModelConstructionError("at least one phase is required")
    for phase in phases:
        if phase.cert.tau is None:
            raise CertificateError(f"phase N={phase.cert.N} carries no budget")
    d_bars = [
        h_value(p.cert, p.cert.ell) ** 2 * p.cert.lamW_max * p.cert.P_inv_sqrt_norm ** 2
        for p in phases[1:]
    ]
    return {
        'cbar_m': max(p.cert.cbar for p in phases),
        'epsilon_low': max(p.cert.epsilon for p in phases),
        'h_bar': max(h_value(p.cert, p.cert.ell) for p in phases),
        'd_bars': d_bars,
    }


def bound_dim_sumpc(phases: Sequence[DimPhase], x0_norm_W0: float, T: int) -> float:
    """
    cbar_m ||x0||_{W0}^2 / (1 - epsilon_low) * sum_j eps_j^(2 k_j) prod_{i=1}^{j} d_i.

    phases[0] is the initial horizon with k_switch = 0.
    """
    if phases and phases[0].k_switch != 0:
        raise ModelConstructionError("the first phase must start at k = 0")
    if any(p.k_switch > T for p in phases):
        raise ModelConstructionError(f"switch times must not exceed T={T}")
    constants = dim_sumpc_constants(phases)

    total = 0.0
    carried = 1.0
    for j, phase in enumerate(phases):
        if j >= 1:
            carried *= constants['d_bars'][j - 1]
        total += phase.cert.epsilon ** (2 * phase.k_switch) * carried
    return float(constants['cbar_m'] * x0_norm_W0 ** 2 / (1.0 - constants['epsilon_low']) * total)
