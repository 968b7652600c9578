"""
Stability and rate certificates of suboptimal MPC with ell PGM iterations per step.

compute_certificates() gathers every constant for one horizon. Budget-dependent
fields (tau, epsilon, h0, c_delta_mu, b0, cbar) are filled in when a budget is
declared, otherwise they stay None.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from condensing.linalg import (
    inv_sqrt_norm, spectral_norm, sym_inv_sqrt, sym_sqrt, weighted_eig_bounds,
)
from condensing.services import CondensedQp, SpectralData
from core.exceptions import CertificateError, ModelConstructionError, ScheduleError
from core.utils import round_sig
from plants.services import CostSpec, LtiModel
from solvers.services import BoxSet, solve_optimal

logger = logging.getLogger(__name__)

KAPPA_MODES = ('symmetrized', 'gram')
KJ_VARIANTS = ('proof', 'displayed')
TAU_SHRINK = 1e-9
BOUNDARY_BAND = 1e-8
PSI_TOL = 1e-10


@dataclass(frozen=True)
class CertificateSet:
    """Certified constants for one horizon N (and, optionally, one budget)."""
    N: int
    alpha: float
    eta: float
    L: float
    beta: float
    sigma: float
    omega: float
    kappa: float
    kappa_mode: str
    c_terminal: float
    d: float
    r_N: float
    ell_star: float
    lamW_Q_min: float
    lamW_P_min: float
    lamP_W_max: float
    lamW_max: float
    lamP_min: float
    lamP_max: float
    lamQ_min: float
    H_inv_sqrt_norm: float
    W_inv_sqrt_norm: float
    P_inv_sqrt_norm: float
    lipschitz_P: float
    norm_R: float
    norm_Qbar: float
    ell: Optional[int] = None
    ell0: Optional[int] = None
    tau: Optional[float] = None
    tau_interval: Optional[Tuple[float, float]] = None
    epsilon: Optional[float] = None
    h0: Optional[float] = None
    c_delta_mu: Optional[float] = None
    b0: Optional[float] = None
    cbar: Optional[float] = None
    decisions: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def ell_min(self) -> int:
        """Smallest integer budget strictly above ell_star (and at least 1)."""
        return max(1, math.floor(self.ell_star) + 1)

    @property
    def sigma_radius(self) -> float:
        """(1 - beta) r_N / sigma, the iterate-error radius of Sigma_N."""
        return (1.0 - self.beta) * self.r_N / self.sigma

    @property
    def certified(self) -> bool:
        return self.tau is not None

    def to_report(self) -> dict:
        """Every constant rounded to 12 significant digits, glossary field names."""
        report = {}
        for name in ('beta', 'sigma', 'omega', 'kappa', 'eta', 'alpha', 'L', 'ell_star',
                     'c_terminal', 'd', 'r_N', 'tau', 'epsilon', 'h0', 'c_delta_mu', 'b0',
                     'cbar', 'lamW_Q_min', 'lamW_P_min', 'lamP_W_max', 'lamW_max'):
            value = getattr(self, name)
            report[name] = None if value is None else round_sig(value)
        report['N'] = self.N
        report['ell'] = self.ell
        report['ell0'] = self.ell0
        report['ell_min'] = self.ell_min
        report['kappa_mode'] = self.kappa_mode
        report['sigma_radius'] = round_sig(self.sigma_radius)
        report['tau_interval'] = (
            None if self.tau_interval is None else [round_sig(v) for v in self.tau_interval]
        )
        report['decisions'] = list(self.decisions)
        return report


def terminal_level(cost: CostSpec, box: BoxSet) -> float:
    """
    Largest c with {x : ||x||_P^2 <= c} inside {x : -K x in U}.

    For each row k_i of K the support of |k_i^T x| over the ellipsoid is
    sqrt(c k_i^T P^-1 k_i), hence c = min_i min(u_i+, -u_i-)^2 / (k_i^T P^-1 k_i).
    """
    P_inv = np.linalg.inv(cost.P)
    level = math.inf
    for i, row in enumerate(cost.K):
        spread = float(row @ P_inv @ row)
        if spread <= 0.0:
            continue
        reach = min(box.upper[i], -box.lower[i])
        level = min(level, reach ** 2 / spread)
    return level


def _kappa(qp: CondensedQp, model: LtiModel, cost: CostSpec, H_inv_sqrt: np.ndarray,
           H_norm: float, lamP_W_max: float, mode: str) -> float:
    P_inv_sqrt = sym_inv_sqrt(cost.P)
    GBbar = qp.G @ qp.Bbar
    first = H_norm * spectral_norm(H_inv_sqrt @ qp.G @ (model.A - np.eye(model.n)) @ P_inv_sqrt)

    if mode == 'symmetrized':
        lamH_max = weighted_eig_bounds(qp.H, GBbar)[1]
    elif mode == 'gram':
        lamH_max = weighted_eig_bounds(qp.H, GBbar.T @ np.linalg.solve(qp.H, GBbar))[1]
    else:
        raise ModelConstructionError(
            f"Unknown kappa mode '{mode}' (choose from {', '.join(KAPPA_MODES)})"
        )
    second = H_norm * math.sqrt(max(0.0, lamH_max) * max(0.0, lamP_W_max - 1.0))
    return float(first + second)


def ell_star_value(beta: float, sigma: float, omega: float, kappa: float, eta: float) -> float:
    """Smallest budget threshold; 0 when eta = 0 (one step is exact)."""
    if eta <= 0.0:
        return 0.0
    denominator = sigma * kappa + omega * (1.0 - beta)
    if denominator <= 0.0:
        raise CertificateError(
            f"sigma*kappa + omega*(1-beta) = {denominator:.3e} is not positive"
        )
    return (math.log(1.0 - beta) - math.log(denominator)) / math.log(eta)


def compute_certificates(model: LtiModel, cost: CostSpec, qp: CondensedQp,
                         spectral: SpectralData, box: BoxSet, ell: Optional[int] = None,
                         ell0: Optional[int] = None,
                         kappa_mode: str = 'symmetrized') -> CertificateSet:
    """
    Compute beta, sigma, omega, kappa, c, d, r_N and ell_star for the QP's horizon.

    Args:
        model, cost, qp, spectral, box: one design at a single horizon
        ell: declared (minimum) budget; fills tau, epsilon and the bound constants
        ell0: budget of the first step, for h0 (defaults to ell)
        kappa_mode: 'symmetrized' uses sym(G Bbar), 'gram' uses (G Bbar)^T H^-1 (G Bbar)

    Raises:
        CertificateError: W >= P violated, degenerate beta, unbounded terminal
            level, or a declared budget at or below ell_star
    """
    W, P, Q = qp.W, cost.P, cost.Q

    lamW_Q_min = weighted_eig_bounds(W, Q)[0]
    if not 0.0 < lamW_Q_min < 1.0:
        logger.error(f"lambda_W-(Q) = {lamW_Q_min:.6e} is outside (0, 1)")
        raise CertificateError(
            f"lambda_W-(Q) = {lamW_Q_min:.6e} must lie in (0, 1)",
            hint="beta would not be a contraction rate; check that W differs from Q",
        )
    beta = math.sqrt(1.0 - lamW_Q_min)

    H_inv_sqrt = sym_inv_sqrt(qp.H)
    H_norm = inv_sqrt_norm(qp.H)
    sigma = spectral_norm(sym_sqrt(W) @ qp.Bbar)
    omega = 1.0 + H_norm * spectral_norm(H_inv_sqrt @ qp.G @ qp.Bbar)

    lamP_W_max = weighted_eig_bounds(P, W)[1]
    if lamP_W_max < 1.0 - 1e-12:
        logger.error(f"lambda_P+(W) = {lamP_W_max:.6e} < 1")
        raise CertificateError(
            f"lambda_P+(W) = {lamP_W_max:.6e} is below 1",
            hint="W >= P must hold for the kappa certificate",
        )
    kappa = _kappa(qp, model, cost, H_inv_sqrt, H_norm, lamP_W_max, kappa_mode)

    c_terminal = terminal_level(cost, box)
    if not math.isfinite(c_terminal) or c_terminal <= 0.0:
        raise CertificateError(
            f"terminal level c = {c_terminal} is not a positive finite number",
            hint="certificates need finite input bounds and a non-zero LQR gain",
        )
    lamP = np.linalg.eigvalsh(P)
    lamQ_min = float(np.linalg.eigvalsh(Q)[0])
    d = c_terminal * lamQ_min / float(lamP[-1])
    r_N = math.sqrt(qp.N * d + c_terminal)

    ell_star = ell_star_value(beta, sigma, omega, kappa, spectral.eta)

    P_inv_sqrt = sym_inv_sqrt(P)
    cert = CertificateSet(
        N=qp.N,
        alpha=spectral.alpha,
        eta=spectral.eta,
        L=spectral.L,
        beta=beta,
        sigma=sigma,
        omega=omega,
        kappa=kappa,
        kappa_mode=kappa_mode,
        c_terminal=c_terminal,
        d=d,
        r_N=r_N,
        ell_star=ell_star,
        lamW_Q_min=lamW_Q_min,
        lamW_P_min=weighted_eig_bounds(W, P)[0],
        lamP_W_max=lamP_W_max,
        lamW_max=float(np.linalg.eigvalsh(W)[-1]),
        lamP_min=float(lamP[0]),
        lamP_max=float(lamP[-1]),
        lamQ_min=lamQ_min,
        H_inv_sqrt_norm=H_norm,
        W_inv_sqrt_norm=inv_sqrt_norm(W),
        P_inv_sqrt_norm=inv_sqrt_norm(P),
        lipschitz_P=H_norm * spectral_norm(H_inv_sqrt @ qp.G @ P_inv_sqrt),
        norm_R=spectral_norm(cost.R),
        norm_Qbar=max(spectral_norm(Q), spectral_norm(P)),
        decisions=(
            'W assembled as Ahat^T Hhat Ahat',
            f'kappa uses the {kappa_mode} lambda_H+ term',
            f'DARE solved by Riccati iteration in {cost.iterations} iterations',
            'tau minimizes epsilon at the minimum declared budget',
        ),
    )
    logger.info(
        f"Certificates for N={qp.N}: beta={beta:.6f}, eta={spectral.eta:.9f}, "
        f"ell*={ell_star:.3f}, r_N={r_N:.6f}"
    )

    if ell is not None:
        cert = with_budget(cert, ell, ell0)
    return cert


def with_budget(cert: CertificateSet, ell: int, ell0: Optional[int] = None) -> CertificateSet:
    """Return a copy of cert with tau, epsilon and bound constants for budget ell."""
    ell = int(ell)
    if ell <= cert.ell_star:
        logger.error(f"Budget ell={ell} is not above ell*={cert.ell_star:.3f}")
        raise CertificateError(
            f"budget below ell*: ell={ell} <= ell*={cert.ell_star:.6f}",
            hint=f"increase ell above ell* = {cert.ell_star:.6f} (ell >= {cert.ell_min})",
        )
    ell0 = ell if ell0 is None else int(ell0)

    interval = tau_interval(cert.beta, cert.sigma, cert.omega, cert.kappa, cert.eta, ell)
    tau = select_tau(cert.beta, cert.sigma, cert.omega, cert.kappa, cert.eta, ell)
    cert = replace(cert, ell=ell, ell0=ell0, tau=tau, tau_interval=interval)

    h0 = h_value(cert, ell0)
    c_delta_mu = max(1.0 / tau, cert.lipschitz_P)
    b0 = c_delta_mu * h0
    cbar = max(
        cert.norm_R * (b0 + c_delta_mu) * ((b0 + c_delta_mu) + 2.0 * cert.L / math.sqrt(cert.lamP_min)),
        cert.norm_Qbar * (cert.P_inv_sqrt_norm ** 2 * h0 ** 2 + 1.0 / cert.lamP_min),
    )
    return replace(cert, epsilon=epsilon_rate(cert, ell), h0=h0, c_delta_mu=c_delta_mu,
                   b0=b0, cbar=cbar)


def tau_interval(beta: float, sigma: float, omega: float, kappa: float, eta: float,
                 ell: int) -> Tuple[float, float]:
    """
    Open interval of tau satisfying (beta-1) + tau eta^ell kappa < 0 and
    sigma + (eta^ell omega - 1) tau < 0.

    Raises:
        CertificateError: the interval is empty
    """
    decay = eta ** ell
    if decay * omega >= 1.0:
        raise CertificateError(
            f"budget below ell*: eta^ell * omega = {decay * omega:.6e} >= 1",
            hint="increase ell",
        )
    lower = sigma / (1.0 - decay * omega)
    upper = math.inf if decay * kappa == 0.0 else (1.0 - beta) / (decay * kappa)
    if lower >= upper:
        raise CertificateError(
            f"budget below ell*: empty tau interval ({lower:.6e}, {upper:.6e})",
            hint="increase ell",
        )
    return lower, upper


def select_tau(beta: float, sigma: float, omega: float, kappa: float, eta: float,
               ell: int) -> float:
    """
    tau minimizing epsilon(tau) = max{beta + tau kappa eta^ell, (sigma + tau eta^ell omega)/tau}.

    The first argument increases in tau and the second decreases, so the
    minimizer is where they cross. When eta^ell kappa = 0 the rate is
    max{beta, sigma/tau} and tau = sigma/beta attains beta.
    """
    lower, upper = tau_interval(beta, sigma, omega, kappa, eta, ell)
    decay = eta ** ell

    if decay * kappa == 0.0:
        return max(sigma / beta, lower * (1.0 + TAU_SHRINK))

    def crossing(tau):
        return beta + tau * kappa * decay - sigma / tau - decay * omega

    root = brentq(crossing, lower, upper, xtol=1e-300, rtol=1e-12)
    width = upper - lower
    return float(min(max(root, lower + TAU_SHRINK * width), upper - TAU_SHRINK * width))


def epsilon_rate(cert: CertificateSet, ell_k: int) -> float:
    """max{beta + tau kappa eta^ell_k, (sigma + tau eta^ell_k omega) / tau}."""
    if cert.tau is None:
        raise CertificateError("tau has not been selected", hint="declare a budget first")
    if ell_k <= cert.ell_star:
        raise CertificateError(
            f"budget below ell*: ell={ell_k} <= ell*={cert.ell_star:.6f}",
            hint=f"increase ell above ell* = {cert.ell_star:.6f}",
        )
    decay = cert.eta ** ell_k
    return max(cert.beta + cert.tau * cert.kappa * decay,
               (cert.sigma + cert.tau * decay * cert.omega) / cert.tau)


def h_value(cert: CertificateSet, ell: int) -> float:
    """h = 1 + tau eta^ell L ||W^-1/2||."""
    if cert.tau is None:
        raise CertificateError("tau has not been selected", hint="declare a budget first")
    return 1.0 + cert.tau * cert.eta ** ell * cert.L * cert.W_inv_sqrt_norm


@dataclass(frozen=True)
class Membership:
    in_gamma: bool
    in_sigma: bool
    psi: float
    dist: float
    indeterminate: bool = False

    def to_dict(self) -> dict:
        return {
            'in_gamma': self.in_gamma,
            'in_sigma': self.in_sigma,
            'psi': self.psi,
            'dist': self.dist,
            'indeterminate': self.indeterminate,
        }


def value_function(qp: CondensedQp, spectral: SpectralData, x: np.ndarray, box: BoxSet,
                   tol: float = PSI_TOL):
    """V(x) = J_N(x, mu*(x)); returns (V, mu*)."""
    mu = solve_optimal(qp, spectral, x, box, tol)
    return max(qp.cost(x, mu), 0.0), mu


def region_membership(cert: CertificateSet, qp: CondensedQp, spectral: SpectralData,
                      x: np.ndarray, z: np.ndarray, box: BoxSet) -> Membership:
    """Membership of x in Gamma_N and of (x, z) in Sigma_N."""
    x = np.asarray(x, dtype=float)
    V, mu = value_function(qp, spectral, x, box)
    psi = math.sqrt(V)
    dist = float(np.linalg.norm(np.asarray(z, dtype=float) - mu))

    in_gamma = psi <= cert.r_N
    in_sigma = in_gamma and dist <= cert.sigma_radius
    indeterminate = (abs(psi - cert.r_N) <= BOUNDARY_BAND
                     or abs(dist - cert.sigma_radius) <= BOUNDARY_BAND)
    if indeterminate:
        logger.warning(
            f"Membership is boundary-indeterminate: psi={psi:.12e}, r_N={cert.r_N:.12e}, "
            f"dist={dist:.12e}"
        )
    return Membership(in_gamma=in_gamma, in_sigma=in_sigma, psi=psi, dist=dist,
                      indeterminate=indeterminate)


def switch_time(cert_prev: CertificateSet, N_j: int, x0_norm_W: float,
                ell: Optional[int] = None, variant: str = 'proof',
                cert_next: Optional[CertificateSet] = None) -> int:
    """
    Steps after which V(x_k) <= N_j d + c is guaranteed from Sigma_{N_{j-1}}.

    Args:
        cert_prev: certificates of the current horizon N_{j-1}, with tau selected
        N_j: next (shorter) horizon
        x0_norm_W: ||x_0||_{W_{j-1}}
        ell: budget of the current phase (defaults to cert_prev.ell)
        variant: 'proof' uses h(N_{j-1}); 'displayed' uses h(N_j) from cert_next

    Returns:
        ceil(max(0, k_j))
    """
    if N_j >= cert_prev.N:
        raise ScheduleError(f"Next horizon {N_j} must be shorter than {cert_prev.N}")
    if variant not in KJ_VARIANTS:
        raise ModelConstructionError(
            f"Unknown k_j variant '{variant}' (choose from {', '.join(KJ_VARIANTS)})"
        )
    ell = cert_prev.ell if ell is None else int(ell)
    if ell is None:
        raise CertificateError("no budget declared for the current phase")

    epsilon = epsilon_rate(cert_prev, ell)
    if epsilon >= 1.0:
        raise CertificateError(f"epsilon = {epsilon:.6e} is not below 1")
    if x0_norm_W <= 0.0:
        return 0

    if variant == 'proof':
        h = h_value(cert_prev, ell)
    else:
        if cert_next is None:
            raise ModelConstructionError("the displayed k_j variant needs the next horizon's certificates")
        h = h_value(cert_next, ell)

    target = cert_prev.lamW_P_min * (N_j * cert_prev.d + cert_prev.c_terminal)
    k = (math.log(target) - 2.0 * math.log(h * x0_norm_W)) / (2.0 * math.log(epsilon))
    k_j = max(0, math.ceil(k - 1e-9))
    logger.info(f"Switch N={cert_prev.N} -> {N_j}: k_j={k_j} ({variant} variant, raw {k:.3f})")
    return k_j
