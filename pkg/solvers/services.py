"""
Projected gradient method on the condensed QP, plus two exact oracles.

- PgmOperator / pgm_step / pgm_iterate: the operator T(x, nu) and its powers
- solve_optimal: mu*(x) certified by the PGM fixed-point residual
- active_set_enumerate: brute-force KKT enumeration for tiny instances
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import LinAlgError, solve

from condensing.services import CondensedQp, SpectralData
from core.exceptions import ModelConstructionError, OracleError, SolverError
from core.utils import as_vector

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-12
ENUMERATION_LIMIT = 12
EXTRA_ITERATIONS = 10_000
ACTIVE_SET_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Per-input interval constraint lower <= u <= upper, containing the origin."""
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = as_vector(self.lower, 'lower')
        upper = as_vector(self.upper, 'upper', lower.size)
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ModelConstructionError("Box bounds must not be NaN")
        if np.any(lower > 0.0) or np.any(upper < 0.0):
            raise ModelConstructionError(
                f"Box must contain the origin: lower={lower.tolist()}, upper={upper.tolist()}"
            )
        if np.any(lower >= upper):
            raise ModelConstructionError("Box bounds must satisfy lower < upper elementwise")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @classmethod
    def symmetric(cls, bound, m: int = 1) -> 'BoxSet':
        bound = np.broadcast_to(np.asarray(bound, dtype=float), (m,))
        return cls(lower=-bound, upper=bound)

    @property
    def m(self) -> int:
        return self.lower.size

    def bounds(self, N: int):
        """Stacked bounds of N = U^N."""
        return np.tile(self.lower, N), np.tile(self.upper, N)

    def project(self, nu: np.ndarray) -> np.ndarray:
        nu = np.asarray(nu, dtype=float)
        if nu.size % self.m:
            raise ModelConstructionError(
                f"Input vector length {nu.size} is not a multiple of m={self.m}"
            )
        lo, hi = self.bounds(nu.size // self.m)
        return np.clip(nu, lo, hi)

    def contains(self, nu: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
        lo, hi = self.bounds(np.asarray(nu).size // self.m)
        return bool(np.all(nu >= lo - tol) and np.all(nu <= hi + tol))

    def to_dict(self) -> dict:
        return {'lower': self.lower.tolist(), 'upper': self.upper.tolist()}


def project(nu: np.ndarray, box: BoxSet) -> np.ndarray:
    """Euclidean projection onto U^N: blockwise clamp."""
    return box.project(nu)


@dataclass
class PgmOperator:
    """
    T(x, nu) = Pi[nu - alpha * 2 (H nu + G x)] with the step matrix cached.

    Each H-product is counted in `h_products` so callers can account compute.
    """
    qp: CondensedQp
    spectral: SpectralData
    box: BoxSet
    h_products: int = 0
    g_products: int = 0
    last_count: int = 0
    _step_matrix: np.ndarray = field(init=False, repr=False)
    _lower: np.ndarray = field(init=False, repr=False)
    _upper: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.box.m != self.qp.m:
            raise ModelConstructionError(
                f"Box has {self.box.m} inputs but the QP has m={self.qp.m}"
            )
        step = 2.0 * self.spectral.alpha
        self._step_matrix = np.eye(self.qp.size) - step * self.qp.H
        self._lower, self._upper = self.box.bounds(self.qp.N)

    def offset(self, x: np.ndarray) -> np.ndarray:
        """2 alpha G x, the state-dependent part of the step."""
        self.g_products += 1
        return 2.0 * self.spectral.alpha * (self.qp.G @ x)

    def feasible(self, nu: np.ndarray) -> np.ndarray:
        nu = np.asarray(nu, dtype=float)
        if nu.size != self.qp.size:
            raise ModelConstructionError(
                f"Input vector must have {self.qp.size} entries, got {nu.size}"
            )
        violation = max(np.max(self._lower - nu), np.max(nu - self._upper), 0.0)
        if violation > FEASIBILITY_TOL:
            nu = np.clip(nu, self._lower, self._upper)
        return nu

    def step(self, x: np.ndarray, nu: np.ndarray) -> np.ndarray:
        return self.iterate(x, nu, 1)

    def iterate(self, x: np.ndarray, nu: np.ndarray, ell: int,
                record: Optional[List[float]] = None,
                exit_tol: Optional[float] = None) -> np.ndarray:
        """
        ell-fold composition of T; appends ||nu_{i+1} - nu_i|| to record.

        With exit_tol the loop stops early once a step moves less than exit_tol;
        `last_count` holds the number of steps actually taken. Without record
        or exit_tol, an iterate that repeats bit for bit (a fixed point or a
        cycle) ends the loop with the exact ell-th iterate, and all ell steps
        are counted.
        """
        if ell < 1:
            raise ModelConstructionError(f"Iteration count must be >= 1, got {ell}")
        nu = self.feasible(nu)
        offset = self.offset(x)
        step_matrix, lower, upper = self._step_matrix, self._lower, self._upper
        if record is None and exit_tol is None:
            nu = self._iterate_to_budget(step_matrix, offset, lower, upper, nu, ell)
            count = ell
        else:
            count = 0
            for _ in range(ell):
                nu_next = np.clip(step_matrix @ nu - offset, lower, upper)
                count += 1
                distance = float(np.linalg.norm(nu_next - nu))
                if record is not None:
                    record.append(distance)
                nu = nu_next
                if exit_tol is not None and distance <= exit_tol:
                    break
        self.h_products += count
        self.last_count = count
        return nu

    @staticmethod
    def _iterate_to_budget(step_matrix: np.ndarray, offset: np.ndarray, lower: np.ndarray,
                           upper: np.ndarray, nu: np.ndarray, ell: int) -> np.ndarray:
        history = [nu]
        seen = {nu.tobytes(): 0}
        for done in range(1, ell + 1):
            nu = np.clip(step_matrix @ nu - offset, lower, upper)
            key = nu.tobytes()
            start = seen.get(key)
            if start is not None:
                # iterates repeat with period done - start from index start on
                return history[start + (ell - start) % (done - start)]
            seen[key] = done
            history.append(nu)
        return nu

    def residual(self, x: np.ndarray, nu: np.ndarray) -> float:
        """Fixed-point residual ||T(x, nu) - nu||."""
        nu_next = np.clip(self._step_matrix @ nu - 2.0 * self.spectral.alpha * (self.qp.G @ x),
                          self._lower, self._upper)
        return float(np.linalg.norm(nu_next - nu))


def pgm_step(qp: CondensedQp, spectral: SpectralData, x: np.ndarray, nu: np.ndarray,
             box: BoxSet) -> np.ndarray:
    """One projected gradient step from nu (projected first if infeasible)."""
    return PgmOperator(qp, spectral, box).step(np.asarray(x, dtype=float), nu)


def pgm_iterate(qp: CondensedQp, spectral: SpectralData, x: np.ndarray, nu0: np.ndarray,
                box: BoxSet, ell: int, record: Optional[List[float]] = None) -> np.ndarray:
    """T^ell(x, nu0)."""
    return PgmOperator(qp, spectral, box).iterate(np.asarray(x, dtype=float), nu0, ell, record)


def _kkt_violation(qp: CondensedQp, x: np.ndarray, nu: np.ndarray,
                   lower: np.ndarray, upper: np.ndarray) -> float:
    """Largest violation of the box-QP optimality conditions at nu."""
    g = qp.H @ nu + qp.G @ x
    at_lower = np.isclose(nu, lower, rtol=0.0, atol=1e-12)
    at_upper = np.isclose(nu, upper, rtol=0.0, atol=1e-12)
    free = ~(at_lower | at_upper)
    worst = 0.0
    if np.any(free):
        worst = max(worst, float(np.max(np.abs(g[free]))))
    if np.any(at_lower):
        worst = max(worst, float(np.max(-g[at_lower], initial=0.0)))
    if np.any(at_upper):
        worst = max(worst, float(np.max(g[at_upper], initial=0.0)))
    return worst


def _primal_dual_active_set(qp: CondensedQp, x: np.ndarray, box: BoxSet,
                            nu0: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
    """
    Primal-dual active-set iteration for min nu^T H nu + 2 nu^T G x over the box.

    Returns the KKT point, or None when the active sets cycle.
    """
    lower, upper = box.bounds(qp.N)
    H, Gx = qp.H, qp.G @ x
    lam_H = np.linalg.eigvalsh(H)
    c = 0.5 * (lam_H[-1] + lam_H[0])

    if nu0 is None:
        nu = np.clip(solve(H, -Gx, assume_a='pos'), lower, upper)
    else:
        nu = np.clip(np.asarray(nu0, dtype=float), lower, upper)
    lam = -(H @ nu + Gx)

    previous = None
    for _ in range(ACTIVE_SET_MAX_ITER):
        up = lam + c * (nu - upper) > 0.0
        lo = (lam + c * (nu - lower) < 0.0) & ~up
        key = (up.tobytes(), lo.tobytes())
        if key == previous:
            break
        previous = key

        free = ~(up | lo)
        nu = np.where(up, upper, np.where(lo, lower, 0.0))
        if np.any(free):
            fixed = ~free
            rhs = -Gx[free] - H[np.ix_(free, fixed)] @ nu[fixed]
            nu[free] = solve(H[np.ix_(free, free)], rhs, assume_a='pos')
        lam = np.where(free, 0.0, -(H @ nu + Gx))
    else:
        return None

    if not np.all(np.isfinite(nu)):
        return None
    scale = max(1.0, float(np.max(np.abs(Gx), initial=0.0)))
    if not box.contains(nu, 1e-9) or _kkt_violation(qp, x, np.clip(nu, lower, upper),
                                                     lower, upper) > 1e-8 * scale:
        return None
    return np.clip(nu, lower, upper)


def solve_optimal(qp: CondensedQp, spectral: SpectralData, x: np.ndarray, box: BoxSet,
                  tol: float, nu0: Optional[np.ndarray] = None,
                  method: str = 'active_set') -> np.ndarray:
    """
    mu*(x), returned once the PGM fixed-point residual ||T(x,nu) - nu|| <= tol.

    With method='active_set' the PGM phase starts from a primal-dual
    active-set solution (and usually stops at once); with method='pgm' it
    starts from nu0 (or 0). The PGM phase is capped at
    ceil(log(tol/D)/log(eta)) + 10^4 iterations, D the initial residual.

    Raises:
        SolverError: iteration cap exceeded
    """
    if not tol > 0:
        raise ModelConstructionError(f"tol must be positive, got {tol}")
    x = np.asarray(x, dtype=float)
    operator = PgmOperator(qp, spectral, box)

    nu = None
    if method == 'active_set':
        nu = _primal_dual_active_set(qp, x, box, nu0)
        if nu is None:
            logger.warning("Active-set phase did not settle; continuing with PGM only")
    elif method != 'pgm':
        raise ModelConstructionError(f"Unknown solve method '{method}'")
    if nu is None:
        nu = operator.feasible(np.zeros(qp.size) if nu0 is None else nu0)

    residual = operator.residual(x, nu)
    if residual <= tol:
        return nu

    eta = spectral.eta
    if eta <= 0.0:
        cap = 1 + EXTRA_ITERATIONS
    elif eta < 1.0:
        cap = max(0, math.ceil(math.log(tol / residual) / math.log(eta))) + EXTRA_ITERATIONS
    else:
        cap = EXTRA_ITERATIONS

    chunk = 100
    done = 0
    while done < cap:
        nu = operator.iterate(x, nu, min(chunk, cap - done))
        done += min(chunk, cap - done)
        residual = operator.residual(x, nu)
        if residual <= tol:
            return nu

    raise SolverError(f"PGM did not reach tol={tol:.1e} in {cap} iterations", residual=residual)


def active_set_enumerate(qp: CondensedQp, x: np.ndarray, box: BoxSet) -> np.ndarray:
    """
    Exhaustive KKT enumeration over {lower, free, upper}^(Nm).

    Ties between passing candidates go to the smaller objective, then to the
    lexicographically smaller vector.

    Raises:
        OracleError: Nm > 12, or no assignment passes the KKT checks
    """
    size = qp.size
    if size > ENUMERATION_LIMIT:
        raise OracleError(f"Enumeration limited to Nm <= {ENUMERATION_LIMIT}, got {size}")

    x = np.asarray(x, dtype=float)
    lower, upper = box.bounds(qp.N)
    H, Gx = qp.H, qp.G @ x
    scale = max(1.0, float(np.max(np.abs(H))), float(np.max(np.abs(Gx), initial=0.0)))
    tol = 1e-9 * scale

    candidates = []
    for assignment in itertools.product((-1, 0, 1), repeat=size):
        pattern = np.array(assignment)
        at_lower, at_upper, free = pattern == -1, pattern == 1, pattern == 0
        if np.any(np.isinf(lower[at_lower])) or np.any(np.isinf(upper[at_upper])):
            continue

        nu = np.zeros(size)
        nu[at_lower] = lower[at_lower]
        nu[at_upper] = upper[at_upper]
        if np.any(free):
            fixed = ~free
            rhs = -Gx[free] - H[np.ix_(free, fixed)] @ nu[fixed]
            try:
                nu[free] = solve(H[np.ix_(free, free)], rhs, assume_a='pos')
            except LinAlgError:
                continue
            if np.any(nu[free] < lower[free] - tol) or np.any(nu[free] > upper[free] + tol):
                continue

        g = H @ nu + Gx
        if np.any(g[at_lower] < -tol) or np.any(g[at_upper] > tol):
            continue
        nu = np.clip(nu, lower, upper)
        candidates.append((float(nu @ H @ nu + 2.0 * nu @ Gx), tuple(nu), nu))

    if not candidates:
        raise OracleError("No active-set assignment satisfies the KKT conditions")

    best = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= best + 1e-10 * max(1.0, abs(best))]
    return min(tied, key=lambda c: c[1])[2]
