import hashlib
import json
from typing import Any, Sequence

import numpy as np

from core.exceptions import ModelConstructionError


def as_matrix(value: Any, name: str, shape: Sequence[int] = None) -> np.ndarray:
    """
    Convert a row-major nested list (or scalar) to a 2D float array.

    Args:
        value: Nested list, array or scalar
        name: Matrix name used in error messages
        shape: Expected shape, or None to accept any 2D shape

    Returns:
        Float array with ndim == 2
    """
    try:
        mat = np.array(value, dtype=float, ndmin=2)
    except (TypeError, ValueError) as e:
        raise ModelConstructionError(f"{name} is not a numeric matrix: {e}")
    if mat.ndim != 2:
        raise ModelConstructionError(f"{name} must be 2D, got {mat.ndim} dimensions")
    if shape is not None and mat.shape != tuple(shape):
        raise ModelConstructionError(f"{name} must have shape {tuple(shape)}, got {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ModelConstructionError(f"{name} contains non-finite entries")
    return mat


def as_vector(value: Any, name: str, size: int = None) -> np.ndarray:
    """Convert a list (or scalar) to a 1D float array of the given size."""
    try:
        vec = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    except (TypeError, ValueError) as e:
        raise ModelConstructionError(f"{name} is not a numeric vector: {e}")
    if size is not None and vec.size != size:
        raise ModelConstructionError(f"{name} must have {size} entries, got {vec.size}")
    return vec


def sym(mat: np.ndarray) -> np.ndarray:
    """Symmetric part (M + M^T) / 2."""
    return 0.5 * (mat + mat.T)


def canonical_json(data: Any) -> str:
    """JSON text with sorted keys and no whitespace, used for hashing."""
    return json.dumps(data, sort_keys=True, separators=(',', ':'), default=to_jsonable)


def config_hash(data: Any) -> str:
    """sha256 of the canonical JSON form of a config."""
    return hashlib.sha256(canonical_json(data).encode('utf-8')).hexdigest()


def to_jsonable(value: Any) -> Any:
    """json.dumps default hook for numpy values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def round_sig(value: float, digits: int = 12) -> float:
    """Round to a number of significant digits (report formatting)."""
    if value == 0 or not np.isfinite(value):
        return float(value)
    return float(f"{value:.{digits}g}")
