"""
Condensed parametric QP of the horizon-N MPC problem.

The predicted states are eliminated so that
    J_N(x, nu) = ||(x, nu)||_M^2 = x^T W x + 2 nu^T G x + nu^T H nu.
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.exceptions import ModelConstructionError
from core.utils import sym
from plants.services import CostSpec, LtiModel
from .linalg import inv_sqrt_norm, is_symmetric, spectral_norm, sym_inv_sqrt

logger = logging.getLogger(__name__)

PSD_TOL = 1e-9
IDENTITY_TOL = 1e-9
IDENTITY_SEED = 0


@dataclass(frozen=True, eq=False)
class CondensedQp:
    N: int
    n: int
    m: int
    H: np.ndarray
    G: np.ndarray
    W: np.ndarray
    Bbar: np.ndarray
    M: np.ndarray
    Ahat: np.ndarray
    Bhat: np.ndarray
    Hhat: np.ndarray

    @property
    def size(self) -> int:
        """Nm, the number of decision variables."""
        return self.N * self.m

    def cost(self, x: np.ndarray, nu: np.ndarray) -> float:
        """||(x, nu)||_M^2."""
        return float(x @ self.W @ x + 2.0 * nu @ self.G @ x + nu @ self.H @ nu)

    def gradient(self, x: np.ndarray, nu: np.ndarray) -> np.ndarray:
        """grad_nu J_N = 2 (H nu + G x)."""
        return 2.0 * (self.H @ nu + self.G @ x)

    def first_input(self, nu: np.ndarray) -> np.ndarray:
        """S nu, the block applied to the plant."""
        return np.asarray(nu[:self.m], dtype=float).copy()

    def to_dict(self) -> dict:
        return {
            'N': self.N,
            'n': self.n,
            'm': self.m,
            'H': self.H.tolist(),
            'G': self.G.tolist(),
            'W': self.W.tolist(),
            'Bbar': self.Bbar.tolist(),
            'M': self.M.tolist(),
        }


@dataclass(frozen=True)
class SpectralData:
    """Step size, PGM contraction factor and Lipschitz constant of mu*."""
    alpha: float
    eta: float
    lamH_min: float
    lamH_max: float
    L: float

    def to_dict(self) -> dict:
        return {
            'alpha': self.alpha,
            'eta': self.eta,
            'lamH_min': self.lamH_min,
            'lamH_max': self.lamH_max,
            'L': self.L,
        }


def prediction_matrices(model: LtiModel, N: int):
    """
    Stacked prediction xi = Ahat x + Bhat nu over xi_0 .. xi_N.

    Returns:
        (Ahat, Bhat) of shapes ((N+1)n, n) and ((N+1)n, Nm)
    """
    n, m = model.n, model.m
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(model.A @ powers[-1])

    Ahat = np.vstack(powers)
    Bhat = np.zeros(((N + 1) * n, N * m))
    for i in range(1, N + 1):
        for j in range(i):
            Bhat[i * n:(i + 1) * n, j * m:(j + 1) * m] = powers[i - 1 - j] @ model.B
    return Ahat, Bhat


def build_condensed(model: LtiModel, cost: CostSpec, N: int) -> CondensedQp:
    """
    Assemble H, G, W, Bbar and M for horizon N.

    Hhat = blkdiag(I_N (x) Q, P) already carries the stage-0 weight Q, so
    W = Ahat^T Hhat Ahat = Q + sum_{i=1}^{N-1} (A^i)^T Q A^i + (A^N)^T P A^N.

    Raises:
        ModelConstructionError: N < 1, mismatched dimensions, a violated
            H > 0, W >= Q, W >= P invariant or a condensed cost that
            disagrees with the rollout
    """
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ModelConstructionError(f"Horizon N must be a positive integer, got {N!r}")
    N = int(N)
    n, m = model.n, model.m
    if cost.Q.shape != (n, n) or cost.P.shape != (n, n) or cost.R.shape != (m, m):
        raise ModelConstructionError(
            f"Cost weights do not match the model: Q {cost.Q.shape}, R {cost.R.shape}, "
            f"P {cost.P.shape} for n={n}, m={m}"
        )

    Ahat, Bhat = prediction_matrices(model, N)
    Hhat = np.zeros(((N + 1) * n, (N + 1) * n))
    Hhat[:N * n, :N * n] = np.kron(np.eye(N), cost.Q)
    Hhat[N * n:, N * n:] = cost.P

    H = sym(Bhat.T @ Hhat @ Bhat + np.kron(np.eye(N), cost.R))
    G = Bhat.T @ Hhat @ Ahat
    W = sym(Ahat.T @ Hhat @ Ahat)
    M = np.block([[W, G.T], [G, H]])

    S = np.zeros((m, N * m))
    S[:, :m] = np.eye(m)
    Bbar = model.B @ S

    _check_invariants(H, W, cost)

    qp = CondensedQp(N=N, n=n, m=m, H=H, G=G, W=W, Bbar=Bbar, M=M,
                     Ahat=Ahat, Bhat=Bhat, Hhat=Hhat)
    check_cost_identity(qp, model, cost)
    logger.info(f"Built condensed QP for N={N} ({N * m} decision variables)")
    return qp


def _check_invariants(H: np.ndarray, W: np.ndarray, cost: CostSpec):
    if not is_symmetric(H):
        raise ModelConstructionError("H is not symmetric")
    lamH = np.linalg.eigvalsh(H)
    if lamH[0] <= 0.0:
        raise ModelConstructionError(f"H is not positive definite (lambda_min {lamH[0]:.3e})")

    scale = max(spectral_norm(W), 1.0)
    for name, weight in (('Q', cost.Q), ('P', cost.P)):
        lam_min = np.linalg.eigvalsh(sym(W - weight))[0]
        if lam_min < -PSD_TOL * scale:
            raise ModelConstructionError(
                f"W - {name} is not positive semidefinite (lambda_min {lam_min:.3e})"
            )


def check_cost_identity(qp: CondensedQp, model: LtiModel, cost: CostSpec,
                        seed: int = IDENTITY_SEED, samples: int = 1):
    """
    Compare ||(x, nu)||_M^2 with the forward rollout on seeded (x, nu) pairs.

    Raises:
        ModelConstructionError: the condensed cost disagrees with the rollout
    """
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        x = rng.normal(size=qp.n)
        nu = rng.uniform(-1.0, 1.0, size=qp.size)
        condensed = qp.cost(x, nu)
        rolled = rollout_cost(model, cost, x, nu)
        scale = max(1.0, abs(x @ qp.W @ x), abs(2.0 * nu @ qp.G @ x), abs(nu @ qp.H @ nu))
        if abs(condensed - rolled) > IDENTITY_TOL * scale:
            raise ModelConstructionError(
                f"Condensed cost {condensed:.12e} disagrees with the rollout {rolled:.12e} "
                f"for N={qp.N}"
            )


def spectral_data(qp: CondensedQp) -> SpectralData:
    """alpha = 1/(l+ + l-), eta = (l+ - l-)/(l+ + l-), L = ||H^-1/2|| ||H^-1/2 G||."""
    lam = np.linalg.eigvalsh(qp.H)
    lam_min, lam_max = float(lam[0]), float(lam[-1])
    H_inv_sqrt = sym_inv_sqrt(qp.H)
    L = inv_sqrt_norm(qp.H) * spectral_norm(H_inv_sqrt @ qp.G)
    return SpectralData(
        alpha=1.0 / (lam_max + lam_min),
        eta=(lam_max - lam_min) / (lam_max + lam_min),
        lamH_min=lam_min,
        lamH_max=lam_max,
        L=float(L),
    )


def rollout_cost(model: LtiModel, cost: CostSpec, x: np.ndarray, nu: np.ndarray) -> float:
    """J_N(x, nu) by forward simulation of the predicted states."""
    m = model.m
    N = len(nu) // m
    xi = np.asarray(x, dtype=float)
    total = 0.0
    for i in range(N):
        v = nu[i * m:(i + 1) * m]
        total += xi @ cost.Q @ xi + v @ cost.R @ v
        xi = model.A @ xi + model.B @ v
    return float(total + xi @ cost.P @ xi)
