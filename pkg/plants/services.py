"""
Plant models: discrete LTI construction, discretization, DARE and LQR gain.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from core.exceptions import CertificateError, ModelConstructionError
from core.utils import as_matrix, sym

logger = logging.getLogger(__name__)

PD_TOL = 1e-12
DARE_REL_TOL = 1e-12
DARE_MAX_ITER = 100_000
DARE_RESIDUAL_TOL = 1e-9


def _frozen(mat: np.ndarray) -> np.ndarray:
    mat = np.array(mat, dtype=float)
    mat.setflags(write=False)
    return mat


def is_stabilizable(A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> bool:
    """PBH rank test on every eigenvalue with |lambda| >= 1."""
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) < 1.0 - tol:
            continue
        pbh = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        if np.linalg.matrix_rank(pbh, tol=tol * max(1.0, np.linalg.norm(pbh))) < n:
            return False
    return True


@dataclass(frozen=True, eq=False)
class LtiModel:
    """
    Discrete plant x_{k+1} = A x_k + B u_k.

    Matrices are stored read-only; stabilizability is recorded at construction.
    """
    A: np.ndarray
    B: np.ndarray
    stabilizable: bool = field(init=False)

    def __post_init__(self):
        A = as_matrix(self.A, 'A')
        B = as_matrix(self.B, 'B')
        if A.shape[0] != A.shape[1]:
            raise ModelConstructionError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ModelConstructionError(
                f"B must have {A.shape[0]} rows to match A, got {B.shape}"
            )
        object.__setattr__(self, 'A', _frozen(A))
        object.__setattr__(self, 'B', _frozen(B))
        object.__setattr__(self, 'stabilizable', is_stabilizable(A, B))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.A @ x + self.B @ u

    def to_dict(self) -> dict:
        return {'A': self.A.tolist(), 'B': self.B.tolist()}


def check_positive_definite(mat: np.ndarray, name: str) -> np.ndarray:
    """Return the symmetric part of mat after checking lambda_min > PD_TOL."""
    if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(mat).max())):
        raise ModelConstructionError(f"{name} must be symmetric")
    mat = sym(mat)
    lam_min = float(np.linalg.eigvalsh(mat)[0])
    if lam_min <= PD_TOL:
        raise ModelConstructionError(
            f"{name} must be positive definite (smallest eigenvalue {lam_min:.3e})"
        )
    return mat


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Stage weights Q, R together with the DARE solution P and LQR gain K."""
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    K: np.ndarray
    iterations: int = 0

    def __post_init__(self):
        for name in ('Q', 'R', 'P', 'K'):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def dare_residual(self, model: LtiModel) -> float:
        """||P - (Q + K^T R K + (A-BK)^T P (A-BK))||."""
        Acl = model.A - model.B @ self.K
        rhs = self.Q + self.K.T @ self.R @ self.K + Acl.T @ self.P @ Acl
        return float(np.linalg.norm(self.P - rhs, 2))

    def closed_loop_radius(self, model: LtiModel) -> float:
        return float(max(abs(np.linalg.eigvals(model.A - model.B @ self.K))))

    def to_dict(self) -> dict:
        return {key: getattr(self, key).tolist() for key in ('Q', 'R', 'P', 'K')}


def discretize_zoh(Ac, Bc, Ts: float) -> LtiModel:
    """
    Exact zero-order-hold discretization.

    exp([[Ac, Bc], [0, 0]] * Ts) = [[A, B], [0, I]], evaluated with
    scipy's scaling-and-squaring Pade matrix exponential.
    """
    if not Ts > 0:
        raise ModelConstructionError(f"Ts must be positive, got {Ts}")
    Ac = as_matrix(Ac, 'Ac')
    n = Ac.shape[0]
    if Ac.shape != (n, n):
        raise ModelConstructionError(f"Ac must be square, got {Ac.shape}")
    Bc = as_matrix(Bc, 'Bc')
    if Bc.shape[0] != n:
        raise ModelConstructionError(f"Bc must have {n} rows, got {Bc.shape}")
    m = Bc.shape[1]

    augmented = np.zeros((n + m, n + m))
    augmented[:n, :n] = Ac
    augmented[:n, n:] = Bc
    exponential = scipy.linalg.expm(augmented * Ts)

    return LtiModel(A=exponential[:n, :n], B=exponential[:n, n:])


def discretize_euler(Ac, Bc, Ts: float) -> LtiModel:
    """Forward Euler: A = I + Ac*Ts, B = Bc*Ts."""
    if not Ts > 0:
        raise ModelConstructionError(f"Ts must be positive, got {Ts}")
    Ac = as_matrix(Ac, 'Ac')
    if Ac.shape[0] != Ac.shape[1]:
        raise ModelConstructionError(f"Ac must be square, got {Ac.shape}")
    Bc = as_matrix(Bc, 'Bc')
    if Bc.shape[0] != Ac.shape[0]:
        raise ModelConstructionError(f"Bc must have {Ac.shape[0]} rows, got {Bc.shape}")
    return LtiModel(A=np.eye(Ac.shape[0]) + Ac * Ts, B=Bc * Ts)


DISCRETIZERS = {
    'zoh': discretize_zoh,
    'euler': discretize_euler,
}


def discretize(Ac, Bc, Ts: float, method: str = 'zoh') -> LtiModel:
    try:
        discretizer = DISCRETIZERS[method]
    except KeyError:
        raise ModelConstructionError(
            f"Unknown discretization '{method}' (choose from {', '.join(DISCRETIZERS)})"
        )
    return discretizer(Ac, Bc, Ts)


def lqr_gain(model: LtiModel, P: np.ndarray, R: np.ndarray) -> np.ndarray:
    """K = (R + B^T P B)^-1 B^T P A."""
    A, B = model.A, model.B
    return np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)


def solve_dare(model: LtiModel, Q, R) -> CostSpec:
    """
    Solve the standard DARE by fixed-point Riccati iteration.

    P_{t+1} = Q + A^T P_t A - A^T P_t B (R + B^T P_t B)^-1 B^T P_t A, from P_0 = Q,
    until the relative change drops below 1e-12.

    Raises:
        CertificateError: model not stabilizable, iteration cap reached, or the
            converged P fails the residual / closed-loop stability checks
        ModelConstructionError: Q or R not symmetric positive definite
    """
    Q = check_positive_definite(as_matrix(Q, 'Q', (model.n, model.n)), 'Q')
    R = check_positive_definite(as_matrix(R, 'R', (model.m, model.m)), 'R')

    if not model.stabilizable:
        logger.error("Refusing DARE: (A, B) is not stabilizable")
        raise CertificateError(
            "(A, B) is not stabilizable",
            hint="check the PBH rank of the unstable modes",
        )

    A, B = model.A, model.B
    P = Q.copy()
    change = np.inf
    iterations = 0
    while iterations < DARE_MAX_ITER:
        iterations += 1
        BtPA = B.T @ P @ A
        P_next = sym(Q + A.T @ P @ A - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA))
        change = np.linalg.norm(P_next - P) / max(np.linalg.norm(P_next), 1e-300)
        P = P_next
        if not np.all(np.isfinite(P)):
            raise CertificateError("Riccati iteration diverged", residual=float('inf'))
        if change <= DARE_REL_TOL:
            break
    else:
        raise CertificateError(
            f"Riccati iteration did not converge in {DARE_MAX_ITER} iterations",
            residual=float(change),
        )

    K = lqr_gain(model, P, R)
    cost = CostSpec(Q=Q, R=R, P=P, K=K, iterations=iterations)

    residual = cost.dare_residual(model)
    if residual > DARE_RESIDUAL_TOL * np.linalg.norm(P, 2):
        raise CertificateError("DARE residual above tolerance", residual=residual)
    radius = cost.closed_loop_radius(model)
    if radius >= 1.0 - 1e-9:
        raise CertificateError(f"LQR closed loop not stable (spectral radius {radius:.6f})")

    logger.info(f"DARE converged in {iterations} iterations, rho(A-BK)={radius:.6f}")
    return cost
