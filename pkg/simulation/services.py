"""
Closed-loop simulation of optimal MPC, TD-MPC and Dim-SuMPC.

Every run returns a Trajectory. Diagnostic solves of mu*(x_k) (for V, psi,
the Lyapunov value and d_k) happen outside the timed section and are not
counted in flop_proxy.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from certificates.services import (
    CertificateSet, compute_certificates, region_membership, switch_time, with_budget,
)
from condensing.services import CondensedQp, SpectralData, build_condensed, spectral_data
from core.exceptions import (
    CertificateError, ModelConstructionError, ScenarioMismatchError, ScheduleError, SolverError,
)
from core.utils import as_vector, config_hash
from plants.services import CostSpec, LtiModel
from solvers.services import BoxSet, PgmOperator, pgm_iterate, solve_optimal

logger = logging.getLogger(__name__)

WARM_START_MODES = ('truncate', 'zero_pad', 'cold')
SWITCH_MODES = ('offline', 'online')
RECONSTRUCTION_TOL = 1e-10
OPTIMALITY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class CombinedState:
    """Plant state x together with the optimizer iterate z."""
    x: np.ndarray
    z: np.ndarray

    def check(self, box: BoxSet):
        if not box.contains(self.z):
            raise ModelConstructionError("optimizer iterate lies outside the input box")


@dataclass(eq=False)
class Trajectory:
    """
    One closed-loop run over T steps.

    Per-step lists (inputs, diagnostics, timing) have T entries; states has T+1.
    """
    mode: str
    states: List[np.ndarray] = field(default_factory=list)
    inputs: List[np.ndarray] = field(default_factory=list)
    z_history: List[np.ndarray] = field(default_factory=list)
    stage_costs: List[float] = field(default_factory=list)
    terminal_cost: float = 0.0
    V_values: List[float] = field(default_factory=list)
    psi_values: List[float] = field(default_factory=list)
    lyapunov_values: List[float] = field(default_factory=list)
    d_norms: List[float] = field(default_factory=list)
    iter_counts: List[int] = field(default_factory=list)
    horizon_at_step: List[int] = field(default_factory=list)
    step_wall_time: List[float] = field(default_factory=list)
    flop_proxy: List[int] = field(default_factory=list)
    switch_steps: List[int] = field(default_factory=list)
    metadata: Dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.inputs)

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]

    @property
    def total_cost(self) -> float:
        """J_T = sum of stage costs + ||x_T||_P^2."""
        return float(sum(self.stage_costs) + self.terminal_cost)

    def state_array(self) -> np.ndarray:
        return np.array(self.states)

    def input_array(self) -> np.ndarray:
        return np.array(self.inputs)

    def reconstruction_error(self, model: LtiModel) -> float:
        """max_k ||x_{k+1} - (A x_k + B u_k)||."""
        worst = 0.0
        for k, u in enumerate(self.inputs):
            predicted = model.A @ self.states[k] + model.B @ u
            worst = max(worst, float(np.linalg.norm(self.states[k + 1] - predicted)))
        return worst

    def check_reconstruction(self, model: LtiModel):
        error = self.reconstruction_error(model)
        if error > RECONSTRUCTION_TOL:
            raise ModelConstructionError(f"trajectory violates x+ = Ax + Bu by {error:.3e}")

    def first_index_below(self, threshold: float, component: int = 0) -> Optional[int]:
        """First k with |x_k[component]| <= threshold, or None."""
        for k, x in enumerate(self.states):
            if abs(x[component]) <= threshold:
                return k
        return None

    def same_contents(self, other: 'Trajectory') -> bool:
        """Bit-identical states, inputs and iterates (timings excluded)."""
        if self.T != other.T:
            return False
        pairs = zip(self.states + self.inputs + self.z_history,
                    other.states + other.inputs + other.z_history)
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in pairs)


PhaseBudget = Union[int, Tuple[int, ...]]


def _phase_budget(budget) -> PhaseBudget:
    if isinstance(budget, (int, np.integer)):
        return int(budget)
    return tuple(int(b) for b in budget)


@dataclass(frozen=True)
class DimSchedule:
    """
    Horizons N_0 > N_1 > ... > N_p, switch times k_1 < ... < k_p and the budgets of each phase.

    A phase budget is one ell for every step of the phase or a tuple with one
    ell per step. Budgets below a phase's ell_star are rejected by
    validate_budgets() unless allow_uncertified is set.
    """
    horizons: Tuple[int, ...]
    switch_times: Tuple[int, ...]
    budgets: Tuple[PhaseBudget, ...]
    allow_uncertified: bool = False
    switch_mode: str = 'offline'

    def __post_init__(self):
        horizons = tuple(int(N) for N in self.horizons)
        switch_times = tuple(int(k) for k in self.switch_times)
        budgets = self.budgets
        if isinstance(budgets, (int, np.integer)):
            budgets = (int(budgets),) * len(horizons)
        budgets = tuple(_phase_budget(b) for b in budgets)
        object.__setattr__(self, 'horizons', horizons)
        object.__setattr__(self, 'switch_times', switch_times)
        object.__setattr__(self, 'budgets', budgets)

        if not horizons:
            raise ScheduleError("schedule needs at least one horizon")
        if any(N < 1 for N in horizons):
            raise ScheduleError(f"horizons must be positive, got {list(horizons)}")
        if any(a <= b for a, b in zip(horizons, horizons[1:])):
            raise ScheduleError(f"horizons must strictly decrease, got {list(horizons)}")
        if self.switch_mode not in SWITCH_MODES:
            raise ScheduleError(f"unknown switch mode '{self.switch_mode}'")
        if self.switch_mode == 'offline' and len(switch_times) != len(horizons) - 1:
            raise ScheduleError(
                f"{len(horizons) - 1} switch times expected, got {len(switch_times)}"
            )
        if any(k < 1 for k in switch_times):
            raise ScheduleError(f"switch times must be >= 1, got {list(switch_times)}")
        if any(a >= b for a, b in zip(switch_times, switch_times[1:])):
            raise ScheduleError(f"switch times must strictly increase, got {list(switch_times)}")
        if len(budgets) != len(horizons):
            raise ScheduleError(f"{len(horizons)} budgets expected, got {len(budgets)}")
        for j, budget in enumerate(budgets):
            steps = budget if isinstance(budget, tuple) else (budget,)
            if not steps or any(b < 1 for b in steps):
                raise ScheduleError(f"budgets of phase {j} must be >= 1, got {budget}")
            if isinstance(budget, tuple) and self.switch_mode == 'offline' and \
                    j + 1 < len(horizons):
                length = switch_times[j] - (switch_times[j - 1] if j else 0)
                if len(budget) != length:
                    raise ScheduleError(
                        f"phase {j} lasts {length} steps but has {len(budget)} budgets"
                    )

    @property
    def p(self) -> int:
        return len(self.horizons) - 1

    def phase_at(self, k: int) -> int:
        return sum(1 for switch in self.switch_times if k >= switch)

    def min_budget(self, j: int) -> int:
        """Smallest ell of phase j; tau and epsilon of the phase are selected for it."""
        budget = self.budgets[j]
        return min(budget) if isinstance(budget, tuple) else budget

    def first_budget(self, j: int) -> int:
        budget = self.budgets[j]
        return budget[0] if isinstance(budget, tuple) else budget

    def budget_at(self, j: int, step: int) -> int:
        """
        ell for the step-th step (from 0) of phase j.

        Raises:
            ScheduleError: a per-step list ran out before the phase ended
        """
        budget = self.budgets[j]
        if not isinstance(budget, tuple):
            return budget
        if step >= len(budget):
            raise ScheduleError(
                f"phase {j} (N={self.horizons[j]}) has {len(budget)} per-step budgets "
                f"but runs for at least {step + 1} steps"
            )
        return budget[step]

    def check_length(self, T: int):
        """
        Raises:
            ScheduleError: the last phase's per-step budgets do not cover the run up to T
        """
        last = self.budgets[-1]
        if self.switch_mode != 'offline' or not isinstance(last, tuple):
            return
        length = T - (self.switch_times[-1] if self.switch_times else 0)
        if len(last) != length:
            raise ScheduleError(
                f"last phase runs {length} steps up to T={T} but has {len(last)} budgets"
            )

    def validate_budgets(self, certs: Sequence[CertificateSet]) -> bool:
        """
        True when every budget exceeds its phase's ell_star.

        Raises:
            ScheduleError: an uncertified budget without allow_uncertified
        """
        certified = True
        for j, (N, cert) in enumerate(zip(self.horizons, certs)):
            ell = self.min_budget(j)
            if ell <= cert.ell_star:
                certified = False
                if not self.allow_uncertified:
                    raise ScheduleError(
                        f"budget {ell} for N={N} is not above ell*={cert.ell_star:.3f}; "
                        f"set allow_uncertified to run it anyway"
                    )
                logger.warning(f"Uncertified budget {ell} for N={N} (ell*={cert.ell_star:.3f})")
        return certified

    @classmethod
    def certified(cls, model: LtiModel, cost: CostSpec, box: BoxSet, horizons: Sequence[int],
                  x0: np.ndarray, kappa_mode: str = 'gram', kj_variant: str = 'proof',
                  switch_mode: str = 'offline') -> 'DimSchedule':
        """
        Schedule with budgets just above ell_star and switch times from switch_time().

        Phase j runs with ell_j = max(ell_min(N_j), ell_min(N_{j+1})) so that the
        budget certifies both the current design and the next one. In offline
        mode every k_j is evaluated from x0 and made strictly increasing; in
        online mode switch times are re-evaluated during the run.
        """
        horizons = [int(N) for N in horizons]
        base = [
            compute_certificates(model, cost, qp, spectral_data(qp), box, kappa_mode=kappa_mode)
            for qp in (build_condensed(model, cost, N) for N in horizons)
        ]
        budgets = []
        for j, cert in enumerate(base):
            ell = cert.ell_min
            if j + 1 < len(base):
                ell = max(ell, base[j + 1].ell_min)
            budgets.append(ell)

        if switch_mode == 'online':
            return cls(horizons=tuple(horizons), switch_times=(), budgets=tuple(budgets),
                       switch_mode='online')

        certs = [with_budget(cert, ell) for cert, ell in zip(base, budgets)]
        x0 = np.asarray(x0, dtype=float)
        switch_times = []
        for j in range(1, len(horizons)):
            W_prev = build_condensed(model, cost, horizons[j - 1]).W
            k_j = switch_time(certs[j - 1], horizons[j], math.sqrt(x0 @ W_prev @ x0),
                              budgets[j - 1], variant=kj_variant,
                              cert_next=certs[j])
            k_j = max(k_j, 1, switch_times[-1] + 1 if switch_times else 1)
            switch_times.append(k_j)
        logger.info(f"Certified schedule: horizons={horizons}, k={switch_times}, ell={budgets}")
        return cls(horizons=tuple(horizons), switch_times=tuple(switch_times),
                   budgets=tuple(budgets))

    def to_dict(self) -> dict:
        return {
            'horizons': list(self.horizons),
            'switch_times': list(self.switch_times),
            'budgets': [list(b) if isinstance(b, tuple) else b for b in self.budgets],
            'allow_uncertified': self.allow_uncertified,
            'switch_mode': self.switch_mode,
        }


def _budget_sequence(budgets: Union[int, Sequence[int]], T: int) -> List[int]:
    if isinstance(budgets, (int, np.integer)):
        budgets = [int(budgets)] * T
    budgets = [int(b) for b in budgets]
    if len(budgets) != T:
        raise ModelConstructionError(f"budgets must have T={T} entries, got {len(budgets)}")
    if any(b < 1 for b in budgets):
        raise ModelConstructionError("budgets must be >= 1")
    return budgets


def _cost_signature(cost: CostSpec) -> str:
    return config_hash({'Q': cost.Q, 'R': cost.R, 'P': cost.P})


def _start(mode: str, cost: CostSpec, x0: np.ndarray, T: int) -> Trajectory:
    if T < 1:
        raise ModelConstructionError(f"T must be >= 1, got {T}")
    return Trajectory(
        mode=mode,
        states=[x0.copy()],
        metadata={'x0': x0.tolist(), 'T': T, 'cost_signature': _cost_signature(cost)},
    )


def _finish(trajectory: Trajectory, model: LtiModel, cost: CostSpec) -> Trajectory:
    x_T = trajectory.states[-1]
    trajectory.terminal_cost = float(x_T @ cost.P @ x_T)
    trajectory.check_reconstruction(model)
    logger.info(
        f"{trajectory.mode} run finished: T={trajectory.T}, J_T={trajectory.total_cost:.9e}"
    )
    return trajectory


def _stage_cost(cost: CostSpec, x: np.ndarray, u: np.ndarray) -> float:
    return float(x @ cost.Q @ x + u @ cost.R @ u)


def _record_diagnostics(trajectory: Trajectory, qp: CondensedQp, spectral: SpectralData,
                        box: BoxSet, x: np.ndarray, z: np.ndarray, tau: Optional[float],
                        tol: float, step: int):
    try:
        mu = solve_optimal(qp, spectral, x, box, tol)
    except SolverError as e:
        e.step = step
        raise
    V = max(qp.cost(x, mu), 0.0)
    psi = math.sqrt(V)
    d_norm = float(np.linalg.norm(z - mu))
    trajectory.V_values.append(V)
    trajectory.psi_values.append(psi)
    trajectory.d_norms.append(d_norm)
    trajectory.lyapunov_values.append(psi + tau * d_norm if tau is not None else math.nan)


def run_optimal(model: LtiModel, cost: CostSpec, qp: CondensedQp, box: BoxSet,
                x0, T: int, tol: float = 1e-10,
                spectral: Optional[SpectralData] = None) -> Trajectory:
    """
    Optimal MPC: u_k = S mu*(x_k).

    flop_proxy is not tracked for the optimal loop (reported as 0).

    Raises:
        SolverError: with the failing step index attached
    """
    x = as_vector(x0, 'x0', model.n)
    spectral = spectral or spectral_data(qp)
    trajectory = _start('optimal', cost, x, T)
    trajectory.metadata.update({'N': qp.N, 'tol': tol})

    mu = None
    for k in range(T):
        started = time.perf_counter()
        try:
            mu = solve_optimal(qp, spectral, x, box, tol, nu0=mu)
        except SolverError as e:
            e.step = k
            raise
        u = qp.first_input(mu)
        x_next = model.A @ x + model.B @ u
        elapsed = (time.perf_counter() - started) * 1e6

        V = max(qp.cost(x, mu), 0.0)
        trajectory.inputs.append(u)
        trajectory.z_history.append(mu)
        trajectory.stage_costs.append(_stage_cost(cost, x, u))
        trajectory.V_values.append(V)
        trajectory.psi_values.append(math.sqrt(V))
        trajectory.lyapunov_values.append(math.sqrt(V))
        trajectory.d_norms.append(0.0)
        trajectory.iter_counts.append(0)
        trajectory.horizon_at_step.append(qp.N)
        trajectory.step_wall_time.append(elapsed)
        trajectory.flop_proxy.append(0)
        trajectory.states.append(x_next)
        x = x_next

    return _finish(trajectory, model, cost)


def run_tdmpc(model: LtiModel, cost: CostSpec, qp: CondensedQp, spectral: SpectralData,
              box: BoxSet, x0, z_init, T: int, budgets: Union[int, Sequence[int]],
              tau: Optional[float] = None, diagnostics: bool = True,
              oracle_tol: float = 1e-10, exit_tol: Optional[float] = None) -> Trajectory:
    """
    Time-distributed MPC: z_k = T^{ell_k}(x_k, z_{k-1}), u_k = S z_k.

    Args:
        z_init: z_{-1}, or None for the cold start 0
        budgets: one ell for every step, or a list of T budgets
        tau: Lyapunov weight for the recorded L(s_k); NaN when omitted
        diagnostics: record V, psi, L and ||d_k|| through an exact solve per step
        exit_tol: stop a step's iterations early once they stall below this distance
    """
    x = as_vector(x0, 'x0', model.n)
    budgets = _budget_sequence(budgets, T)
    z = np.zeros(qp.size) if z_init is None else as_vector(z_init, 'z_init', qp.size)
    operator = PgmOperator(qp, spectral, box)
    z = operator.feasible(z)

    trajectory = _start('tdmpc', cost, x, T)
    trajectory.metadata.update({'N': qp.N, 'budgets_min': min(budgets), 'tau': tau})
    for k in range(T):
        _tdmpc_step(trajectory, model, cost, qp, spectral, box, operator, k, budgets[k],
                    tau, diagnostics, oracle_tol, exit_tol, x, z)
        x, z = trajectory.states[-1], trajectory.z_history[-1]

    return _finish(trajectory, model, cost)


def _tdmpc_step(trajectory: Trajectory, model: LtiModel, cost: CostSpec, qp: CondensedQp,
                spectral: SpectralData, box: BoxSet, operator: PgmOperator, k: int, ell: int,
                tau: Optional[float], diagnostics: bool, oracle_tol: float,
                exit_tol: Optional[float], x: np.ndarray, z: np.ndarray):
    started = time.perf_counter()
    z = operator.iterate(x, z, ell, exit_tol=exit_tol)
    u = qp.first_input(z)
    x_next = model.A @ x + model.B @ u
    elapsed = (time.perf_counter() - started) * 1e6
    used = operator.last_count

    if diagnostics:
        _record_diagnostics(trajectory, qp, spectral, box, x, z, tau, oracle_tol, k)
    trajectory.inputs.append(u)
    trajectory.z_history.append(z)
    trajectory.stage_costs.append(_stage_cost(cost, x, u))
    trajectory.iter_counts.append(used)
    trajectory.horizon_at_step.append(qp.N)
    trajectory.step_wall_time.append(elapsed)
    trajectory.flop_proxy.append(flop_proxy(used, qp))
    trajectory.states.append(x_next)


def flop_proxy(ell: int, qp: CondensedQp) -> int:
    """ell H-products of (Nm)^2 plus one G x product of Nm * n."""
    return ell * qp.size ** 2 + qp.size * qp.n


def matched_budget(ell_ref: int, N_ref: int, N: int, m: int, n: int) -> int:
    """
    Budget at horizon N whose per-step flop_proxy is closest to ell_ref
    iterations at horizon N_ref (never below 1).
    """
    size_ref, size = N_ref * m, N * m
    reference = ell_ref * size_ref ** 2 + size_ref * n
    return max(1, int(math.floor((reference - size * n) / size ** 2 + 0.5)))


def warm_start(z: np.ndarray, m: int, N_next: int, mode: str = 'truncate') -> np.ndarray:
    """
    Iterate for the next, shorter horizon.

    truncate keeps the first N_next blocks; zero_pad shifts out the applied
    block, appends a zero block and keeps N_next blocks; cold restarts at 0.
    """
    size = N_next * m
    if mode == 'truncate':
        return z[:size].copy()
    if mode == 'zero_pad':
        shifted = np.concatenate((z[m:], np.zeros(m)))
        return shifted[:size].copy()
    if mode == 'cold':
        return np.zeros(size)
    raise ModelConstructionError(
        f"Unknown warm-start mode '{mode}' (choose from {', '.join(WARM_START_MODES)})"
    )


@dataclass
class _Phase:
    N: int
    qp: CondensedQp
    spectral: SpectralData
    operator: PgmOperator
    cert: Optional[CertificateSet]


def run_dim_sumpc(model: LtiModel, cost: CostSpec, box: BoxSet, x0, schedule: DimSchedule,
                  T: int, warm_start_mode: str = 'truncate', z_init=None,
                  diagnostics: bool = True, oracle_tol: float = 1e-10,
                  kappa_mode: str = 'symmetrized', kj_variant: str = 'proof') -> Trajectory:
    """
    Dim-SuMPC: TD-MPC steps with the horizon shortened at each switch time.

    The condensed QP is rebuilt at every switch and the iterate re-initialized
    by warm_start(). Starting outside Sigma_{N_0} only logs a warning.

    Raises:
        ScheduleError: uncertified budgets without allow_uncertified, or an
            offline switch time beyond T
    """
    if warm_start_mode not in WARM_START_MODES:
        raise ModelConstructionError(f"Unknown warm-start mode '{warm_start_mode}'")
    x = as_vector(x0, 'x0', model.n)

    phases = []
    for N in schedule.horizons:
        qp = build_condensed(model, cost, N)
        spectral = spectral_data(qp)
        phases.append(_Phase(N=N, qp=qp, spectral=spectral,
                             operator=PgmOperator(qp, spectral, box), cert=None))
    base_certs = _phase_certificates(model, cost, box, phases, kappa_mode)
    certified = schedule.validate_budgets(base_certs) if base_certs else False
    for j, (phase, cert) in enumerate(zip(phases, base_certs)):
        if schedule.min_budget(j) > cert.ell_star:
            phase.cert = with_budget(cert, schedule.min_budget(j), schedule.first_budget(j))

    if schedule.switch_mode == 'offline' and any(k > T for k in schedule.switch_times):
        raise ScheduleError(f"switch times {list(schedule.switch_times)} exceed T={T}")
    schedule.check_length(T)

    first = phases[0]
    z = np.zeros(first.qp.size) if z_init is None else as_vector(z_init, 'z_init', first.qp.size)
    z = first.operator.feasible(z)
    if first.cert is not None:
        membership = region_membership(first.cert, first.qp, first.spectral, x,
                                       pgm_iterate(first.qp, first.spectral, x, z, box,
                                                   schedule.budget_at(0, 0)), box)
        if not membership.in_sigma:
            logger.warning(
                f"Initial state is outside Sigma_N for N={first.N} "
                f"(psi={membership.psi:.6f}, r_N={first.cert.r_N:.6f})"
            )

    trajectory = _start('dimsumpc', cost, x, T)
    trajectory.metadata.update({
        'schedule': schedule.to_dict(),
        'warm_start': warm_start_mode,
        'uncertified': not certified,
    })

    switch_times = list(schedule.switch_times)
    if schedule.switch_mode == 'online' and schedule.p > 0:
        switch_times = [_online_switch(phases, 0, 0, x, schedule, kj_variant)]

    j = 0
    phase_start = 0
    for k in range(T):
        while j < schedule.p and j < len(switch_times) and k >= switch_times[j]:
            j += 1
            phase_start = k
            z = warm_start(z, model.m, phases[j].N, warm_start_mode)
            trajectory.switch_steps.append(k)
            logger.info(f"Step {k}: horizon {phases[j - 1].N} -> {phases[j].N}")
            if schedule.switch_mode == 'online' and j < schedule.p:
                switch_times.append(_online_switch(phases, j, k, x, schedule, kj_variant))

        phase = phases[j]
        tau = phase.cert.tau if phase.cert is not None else None
        ell = schedule.budget_at(j, k - phase_start)
        _tdmpc_step(trajectory, model, cost, phase.qp, phase.spectral, box, phase.operator,
                    k, ell, tau, diagnostics, oracle_tol, None, x, z)
        x, z = trajectory.states[-1], trajectory.z_history[-1]

    trajectory.metadata['switch_times'] = list(trajectory.switch_steps)
    return _finish(trajectory, model, cost)


def _phase_certificates(model: LtiModel, cost: CostSpec, box: BoxSet, phases: List[_Phase],
                        kappa_mode: str) -> List[CertificateSet]:
    certs = []
    for phase in phases:
        try:
            certs.append(compute_certificates(model, cost, phase.qp, phase.spectral, box,
                                              kappa_mode=kappa_mode))
        except CertificateError as e:
            logger.warning(f"No certificates for N={phase.N}: {e}")
            return []
    return certs


def _online_switch(phases: List[_Phase], j: int, k: int, x: np.ndarray,
                   schedule: DimSchedule, kj_variant: str) -> int:
    """Absolute switch step k_{j+1}, evaluated at entry to phase j from the current state."""
    current, upcoming = phases[j], phases[j + 1]
    if current.cert is None:
        raise ScheduleError(f"online switching needs certified budgets (phase N={current.N})")
    x_norm = math.sqrt(x @ current.qp.W @ x)
    delay = switch_time(current.cert, upcoming.N, x_norm, schedule.min_budget(j),
                        variant=kj_variant, cert_next=upcoming.cert)
    return k + max(1, delay)


def _check_shared_scenario(sub: Trajectory, opt: Trajectory):
    if sub.T != opt.T:
        raise ScenarioMismatchError(f"horizon mismatch: T={sub.T} vs T={opt.T}")
    if not np.array_equal(sub.x0, opt.x0):
        raise ScenarioMismatchError(f"x0 mismatch: {sub.x0.tolist()} vs {opt.x0.tolist()}")
    signatures = (sub.metadata.get('cost_signature'), opt.metadata.get('cost_signature'))
    if signatures[0] != signatures[1]:
        raise ScenarioMismatchError("trajectories use different Q, R, P")


def incurred_suboptimality(sub: Trajectory, opt: Trajectory) -> float:
    """J_T(sub) - J_T(opt)."""
    _check_shared_scenario(sub, opt)
    gap = sub.total_cost - opt.total_cost
    if gap < -OPTIMALITY_TOL:
        logger.warning(f"Benchmark is worse than the suboptimal run by {-gap:.3e}")
    return float(gap)


def cumulative_suboptimality_curve(sub: Trajectory, opt: Trajectory) -> List[float]:
    """
    Partial sums of the stage-cost differences for k < T, with the terminal
    difference added at k = T; T+1 entries, the last equal to the incurred
    suboptimality.
    """
    _check_shared_scenario(sub, opt)
    differences = np.array(sub.stage_costs) - np.array(opt.stage_costs)
    curve = list(np.cumsum(differences))
    curve.append(curve[-1] + sub.terminal_cost - opt.terminal_cost)
    return [float(v) for v in curve]
