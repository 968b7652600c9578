"""
Weighted eigenvalues and matrix square roots used by the certificates.
"""

from typing import Tuple

import numpy as np
import scipy.linalg

from core.exceptions import ModelConstructionError, NumericalError
from core.utils import sym

SYMMETRY_TOL = 1e-10
CONDITION_FLOOR = 1e-12


def is_symmetric(mat: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    scale = max(np.linalg.norm(mat, 2), 1.0)
    return np.linalg.norm(mat - mat.T, 2) <= tol * scale


def _require_positive_definite(Mw: np.ndarray, name: str = 'Mw') -> np.ndarray:
    if Mw.ndim != 2 or Mw.shape[0] != Mw.shape[1]:
        raise ModelConstructionError(f"{name} must be square, got {Mw.shape}")
    if not is_symmetric(Mw):
        raise ModelConstructionError(f"{name} must be symmetric")
    Mw = sym(Mw)
    lam = np.linalg.eigvalsh(Mw)
    if lam[0] <= 0.0:
        raise ModelConstructionError(
            f"{name} must be positive definite (smallest eigenvalue {lam[0]:.3e})"
        )
    return Mw


def sym_inv_sqrt(Mw: np.ndarray) -> np.ndarray:
    """
    Symmetric inverse square root X with X Mw X = I.

    Raises:
        NumericalError: smallest eigenvalue <= 1e-12 * largest
    """
    Mw = _require_positive_definite(np.asarray(Mw, dtype=float))
    lam, vecs = np.linalg.eigh(Mw)
    if lam[0] <= CONDITION_FLOOR * lam[-1]:
        raise NumericalError(
            f"matrix too ill-conditioned for an inverse square root "
            f"(eigenvalues {lam[0]:.3e} .. {lam[-1]:.3e})"
        )
    return sym((vecs / np.sqrt(lam)) @ vecs.T)


def sym_sqrt(Mw: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (negative round-off clipped)."""
    lam, vecs = np.linalg.eigh(sym(np.asarray(Mw, dtype=float)))
    return sym((vecs * np.sqrt(np.clip(lam, 0.0, None))) @ vecs.T)


def weighted_eig_bounds(Mw: np.ndarray, X: np.ndarray) -> Tuple[float, float]:
    """
    Extreme eigenvalues of Mw^-1/2 sym(X) Mw^-1/2.

    Solved as the generalized symmetric problem sym(X) v = lambda Mw v, which
    scipy whitens with a Cholesky factor of Mw. X is symmetrized only when it
    is not symmetric already.

    Returns:
        (lo, hi) with lo ||v||_Mw^2 <= ||v||_X^2 <= hi ||v||_Mw^2
    """
    Mw = _require_positive_definite(np.asarray(Mw, dtype=float))
    X = np.asarray(X, dtype=float)
    if X.shape != Mw.shape:
        raise ModelConstructionError(f"X must have shape {Mw.shape}, got {X.shape}")
    X = sym(X)
    lam = scipy.linalg.eigh(X, Mw, eigvals_only=True)
    return float(lam[0]), float(lam[-1])


def spectral_norm(mat: np.ndarray) -> float:
    return float(np.linalg.norm(mat, 2))


def inv_sqrt_norm(Mw: np.ndarray) -> float:
    """||Mw^-1/2|| = 1 / sqrt(lambda_min(Mw))."""
    return float(1.0 / np.sqrt(np.linalg.eigvalsh(sym(Mw))[0]))
