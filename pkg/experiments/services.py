"""
Scenario loading, execution and bound verification behind the management commands.
"""

import json
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings
from django.utils import timezone

from certificates.bounds import (
    BoundReport, DimPhase, bound_delta_mu, bound_dim_sumpc, bound_optimal_state,
    bound_state, bound_suboptimality, bound_suboptimality_fixed, compare,
)
from certificates.services import CertificateSet, compute_certificates, with_budget
from condensing.services import CondensedQp, SpectralData, build_condensed, spectral_data
from core.exceptions import (
    CertificateError, ConfigError, ModelConstructionError, NumericalError,
    OracleError, ScenarioMismatchError, ScheduleError, SolverError, TdmpcError,
)
from core.utils import config_hash, to_jsonable
from plants.presets import CONTINUOUS_PLANTS
from plants.services import CostSpec, LtiModel, discretize, solve_dare
from simulation.reports import trajectory_summary, write_json, write_trajectory_csv
from simulation.services import (
    DimSchedule, Trajectory, cumulative_suboptimality_curve, incurred_suboptimality,
    matched_budget, run_dim_sumpc, run_optimal, run_tdmpc,
)
from solvers.services import BoxSet
from .forms import AUTO_BUDGET, MATCHED_BUDGET, ScenarioConfigForm
from .models import CertificateRecord, ScenarioRun

logger = logging.getLogger(__name__)

JSON_FIELDS = ('plant', 'cost', 'box', 'x0', 'budget', 'schedule')
THETA_THRESHOLD = 1e-3
# state bound checked with k rate factors at step k
STATE_PRODUCT = 'proof'

EXIT_CODES = {
    ConfigError: 1,
    ModelConstructionError: 1,
    ScheduleError: 1,
    ScenarioMismatchError: 1,
    CertificateError: 2,
    SolverError: 3,
    OracleError: 3,
    NumericalError: 3,
}


def exit_code(error: TdmpcError) -> int:
    """CLI exit code for a lab error (3 for anything unclassified)."""
    for error_type, code in EXIT_CODES.items():
        if isinstance(error, error_type):
            return code
    return 3


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario; `document` is the normalized JSON form."""
    document: dict
    preset: str = ''

    @property
    def name(self) -> str:
        return self.document['name']

    @property
    def mode(self) -> str:
        return self.document['mode']

    @property
    def hash(self) -> str:
        return config_hash(self.document)

    def get(self, key, default=None):
        return self.document.get(key, default)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.document))


def form_data(document: dict) -> dict:
    """Form payload for a config document: nested parts go in as JSON text."""
    data = {}
    for key, value in document.items():
        data[key] = json.dumps(value) if key in JSON_FIELDS else value
    return data


def parse_config(document: dict, preset: str = '') -> ScenarioConfig:
    """
    Validate a config document.

    Raises:
        ConfigError: with the per-field errors of the form
    """
    if not isinstance(document, dict):
        raise ConfigError("config must be a JSON object")
    form = ScenarioConfigForm(data=form_data(document))
    if not form.is_valid():
        errors = {name: list(problems) for name, problems in form.errors.items()}
        logger.error(f"Rejected config '{document.get('name', '?')}': {errors}")
        raise ConfigError(f"invalid scenario config '{document.get('name', '?')}'", errors)
    return ScenarioConfig(document=form.normalized(), preset=preset)


def preset_path(name: str) -> Path:
    return Path(getattr(settings, 'TDMPC_PRESET_DIR')) / f'{name}.json'


def available_presets() -> List[str]:
    return sorted(path.stem for path in Path(settings.TDMPC_PRESET_DIR).glob('*.json'))


def load_config(path: Optional[str] = None, preset: Optional[str] = None) -> ScenarioConfig:
    """Read and validate a config file or a shipped preset."""
    if (path is None) == (preset is None):
        raise ConfigError("give exactly one of a config path or a preset name")
    source = Path(path) if path else preset_path(preset)
    if not source.exists():
        raise ConfigError(
            f"config not found: {source}"
            + (f" (presets: {', '.join(available_presets())})" if preset else '')
        )
    try:
        with open(source) as handle:
            document = json.load(handle)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source} is not valid JSON: {e}")
    return parse_config(document, preset=preset or '')


@dataclass
class Design:
    """Plant, weights and box of a scenario, plus per-horizon QPs built on demand."""
    model: LtiModel
    cost: CostSpec
    box: BoxSet
    kappa_mode: str
    _qps: Dict[int, Tuple[CondensedQp, SpectralData]] = field(default_factory=dict)
    _certs: Dict[int, CertificateSet] = field(default_factory=dict)

    def qp(self, N: int) -> Tuple[CondensedQp, SpectralData]:
        if N not in self._qps:
            qp = build_condensed(self.model, self.cost, N)
            self._qps[N] = (qp, spectral_data(qp))
        return self._qps[N]

    def certificates(self, N: int) -> CertificateSet:
        """Budget-free certificates of horizon N."""
        if N not in self._certs:
            qp, spectral = self.qp(N)
            self._certs[N] = compute_certificates(self.model, self.cost, qp, spectral, self.box,
                                                  kappa_mode=self.kappa_mode)
        return self._certs[N]

    def x_norm_W(self, x: np.ndarray, N: int) -> float:
        W = self.qp(N)[0].W
        return math.sqrt(float(x @ W @ x))


def build_model(plant: dict) -> LtiModel:
    if plant['kind'] == 'discrete':
        return LtiModel(A=plant['A'], B=plant['B'])
    if 'preset' in plant:
        Ac, Bc = CONTINUOUS_PLANTS[plant['preset']](**plant['params'])
    else:
        Ac, Bc = plant['Ac'], plant['Bc']
    return discretize(Ac, Bc, plant['Ts'], plant['discretization'])


def build_design(config: ScenarioConfig) -> Design:
    model = build_model(config.get('plant'))
    cost = solve_dare(model, config.get('cost')['Q'], config.get('cost')['R'])
    box = BoxSet(lower=config.get('box')['lower'], upper=config.get('box')['upper'])
    return Design(model=model, cost=cost, box=box, kappa_mode=config.get('kappa_mode'))


@dataclass
class RunResult:
    trajectory: Trajectory
    reference: Optional[Trajectory]
    certificates: List[CertificateSet]
    uncertified: bool
    decisions: List[str]

    @property
    def suboptimality(self) -> Optional[float]:
        if self.reference is None:
            return None
        return incurred_suboptimality(self.trajectory, self.reference)


class ScenarioRunner:
    """Run one validated scenario: certify, simulate and write artifacts."""

    def __init__(self, config: ScenarioConfig, output_dir: Optional[str] = None):
        """
        Args:
            config: Validated scenario
            output_dir: Artifact directory (default TDMPC_OUTPUT_DIR/<name>)
        """
        self.config = config
        base = Path(output_dir) if output_dir else Path(
            getattr(settings, 'TDMPC_OUTPUT_DIR', 'results')) / config.name
        self.output_dir = base
        self.design = build_design(config)
        self.solver_tol = config.get('solver_tol', getattr(settings, 'TDMPC_SOLVER_TOL', 1e-10))
        self.oracle_tol = config.get('oracle_tol', getattr(settings, 'TDMPC_ORACLE_TOL', 1e-12))
        self._schedule = None

    @property
    def decisions(self) -> List[str]:
        return [
            'W assembled as Ahat^T Hhat Ahat',
            'PGM step nu - alpha * 2 (H nu + G x), alpha = 1/(lambda+ + lambda-)',
            f"kappa mode: {self.config.get('kappa_mode')}",
            f"k_j variant: {self.config.get('kj_variant')}",
            f"warm start at horizon switch: {self.config.get('warm_start')}",
            f'DARE by Riccati iteration ({self.design.cost.iterations} iterations)',
            'diagnostic mu* solves excluded from timing and flop_proxy',
        ]

    def horizons(self) -> List[int]:
        if self.config.mode == 'dimsumpc':
            return list(self.config.get('schedule')['horizons'])
        return [self.config.get('horizon')]

    def resolve_budget(self, N: int):
        """Configured TD-MPC budget, with 'auto' resolved to ell_min, the first integer above ell*."""
        budget = self.config.get('budget')
        if budget == AUTO_BUDGET:
            return self.design.certificates(N).ell_min
        return budget

    def certify(self) -> List[CertificateSet]:
        """
        Certificates for every horizon of the scenario.

        Declared budgets above ell_star are attached; uncertified budgets are
        reported without tau unless allow_uncertified is off, in which case
        they are refused.
        """
        certs = []
        for j, N in enumerate(self.horizons()):
            cert = self.design.certificates(N)
            budget = self._declared_budget(j, N)
            if budget is not None:
                if budget > cert.ell_star:
                    cert = with_budget(cert, budget, self._first_budget(j, N))
                elif not self.config.get('allow_uncertified'):
                    raise CertificateError(
                        f"budget below ell*: ell={budget} <= ell*={cert.ell_star:.6f} for N={N}",
                        hint=f"increase ell above ell* = {cert.ell_star:.6f} "
                             f"or set allow_uncertified",
                    )
                else:
                    logger.warning(f"Budget {budget} for N={N} is uncertified (ell*={cert.ell_star:.3f})")
            certs.append(cert)
        return certs

    def _declared_budget(self, j: int, N: int) -> Optional[int]:
        mode = self.config.mode
        if mode == 'tdmpc':
            budget = self.resolve_budget(N)
            return min(budget) if isinstance(budget, list) else budget
        if mode == 'dimsumpc':
            return self.schedule().min_budget(j)
        return None

    def _first_budget(self, j: int, N: int) -> Optional[int]:
        if self.config.mode == 'tdmpc':
            budget = self.resolve_budget(N)
            return budget[0] if isinstance(budget, list) else budget
        if self.config.mode == 'dimsumpc':
            return self.schedule().first_budget(j)
        return None

    def schedule(self) -> DimSchedule:
        declared = self.config.get('schedule')
        if self._schedule is None:
            if declared['certified']:
                self._schedule = DimSchedule.certified(
                    self.design.model, self.design.cost, self.design.box, declared['horizons'],
                    np.array(self.config.get('x0')), kappa_mode=self.config.get('kappa_mode'),
                    kj_variant=self.config.get('kj_variant'), switch_mode=declared['switch_mode'],
                )
            else:
                self._schedule = DimSchedule(
                    horizons=tuple(declared['horizons']),
                    switch_times=tuple(declared['switch_times']),
                    budgets=tuple(self._phase_budgets(declared)),
                    allow_uncertified=self.config.get('allow_uncertified'),
                    switch_mode=declared['switch_mode'],
                )
        return self._schedule

    def _phase_budgets(self, declared: dict) -> list:
        """Declared phase budgets with 'matched' resolved against the first phase's flop_proxy."""
        horizons, budgets = declared['horizons'], declared['budgets']
        first = budgets[0][0] if isinstance(budgets[0], list) else budgets[0]
        model = self.design.model
        resolved = []
        for N, budget in zip(horizons, budgets):
            if budget == MATCHED_BUDGET:
                budget = matched_budget(first, horizons[0], N, model.m, model.n)
                logger.info(f"Matched budget for N={N}: ell={budget} "
                            f"(ell={first} at N={horizons[0]})")
            resolved.append(budget)
        return resolved

    def certificate_report(self, certs: List[CertificateSet], dump_qp: bool = False) -> dict:
        report = {
            'scenario': self.config.name,
            'plant': self.design.model.to_dict(),
            'lqr': self.design.cost.to_dict(),
            'dare_iterations': self.design.cost.iterations,
            'certificates': [cert.to_report() for cert in certs],
        }
        if self.config.mode == 'dimsumpc':
            report['schedule'] = self.schedule().to_dict()
            report['kj_variant'] = self.config.get('kj_variant')
        if dump_qp:
            report['condensed'] = {str(N): self.design.qp(N)[0].to_dict() for N in self.horizons()}
        return report

    def run_reference(self, N: int) -> Trajectory:
        """Optimal MPC benchmark with the scenario's initial horizon."""
        qp, spectral = self.design.qp(N)
        return run_optimal(self.design.model, self.design.cost, qp, self.design.box,
                           self.config.get('x0'), self.config.get('T'), tol=self.oracle_tol,
                           spectral=spectral)

    def simulate(self, with_reference: bool = True) -> RunResult:
        """Run the configured mode; TD-MPC and Dim-SuMPC runs get an optimal reference."""
        mode = self.config.mode
        design = self.design
        x0, T = self.config.get('x0'), self.config.get('T')
        certs = self.certify()
        N0 = self.horizons()[0]

        if mode == 'optimal':
            trajectory = self.run_reference(N0)
            return RunResult(trajectory, None, certs, False, self.decisions)

        uncertified = any(not cert.certified for cert in certs)
        if mode == 'tdmpc':
            qp, spectral = design.qp(N0)
            trajectory = run_tdmpc(design.model, design.cost, qp, spectral, design.box, x0,
                                   None, T, self.resolve_budget(N0), tau=certs[0].tau,
                                   oracle_tol=self.solver_tol)
        else:
            trajectory = run_dim_sumpc(design.model, design.cost, design.box, x0,
                                       self.schedule(), T,
                                       warm_start_mode=self.config.get('warm_start'),
                                       oracle_tol=self.solver_tol,
                                       kappa_mode=self.config.get('kappa_mode'),
                                       kj_variant=self.config.get('kj_variant'))
        trajectory.metadata['uncertified'] = uncertified
        reference = self.run_reference(N0) if with_reference else None
        return RunResult(trajectory, reference, certs, uncertified, self.decisions)

    def simulate_repeated(self, repeat: int) -> RunResult:
        """
        Run the scenario `repeat` times and average the per-step wall time.

        Raises:
            NumericalError: a repeat produced different trajectory contents
        """
        result = self.simulate()
        if repeat <= 1:
            return result
        totals = np.array(result.trajectory.step_wall_time)
        for attempt in range(1, repeat):
            again = self.simulate(with_reference=False)
            if not again.trajectory.same_contents(result.trajectory):
                raise NumericalError(f"repeat {attempt} diverged from the first run")
            totals += np.array(again.trajectory.step_wall_time)
        result.trajectory.step_wall_time = list(totals / repeat)
        result.trajectory.metadata['repeat'] = repeat
        logger.info(f"Averaged wall time over {repeat} runs")
        return result

    def write_artifacts(self, result: RunResult) -> dict:
        """Trajectory CSV and summary JSON; returns the summary."""
        summary = trajectory_summary(result.trajectory, result.reference)
        summary['scenario'] = self.config.name
        summary['certificates'] = [cert.to_report() for cert in result.certificates]
        summary['uncertified'] = result.uncertified
        write_trajectory_csv(result.trajectory, self.output_dir / 'trajectory.csv',
                             self.config.hash, result.decisions, reference=result.reference)
        if result.reference is not None:
            write_trajectory_csv(result.reference, self.output_dir / 'optimal.csv',
                                 self.config.hash, result.decisions)
        write_json(summary, self.output_dir / 'summary.json', self.config.hash, result.decisions)
        return summary


def compare_runs(first: RunResult, second: RunResult,
                 threshold: float = THETA_THRESHOLD) -> dict:
    """
    Paired metrics of two runs of the same plant, cost, x0 and T.

    Raises:
        ScenarioMismatchError: the runs do not share a scenario
    """
    a, b = first.trajectory, second.trajectory
    if a.T != b.T or not np.array_equal(a.x0, b.x0) or \
            a.metadata.get('cost_signature') != b.metadata.get('cost_signature'):
        raise ScenarioMismatchError("compared scenarios must share plant, cost, x0 and T")

    def side(result: RunResult) -> dict:
        trajectory = result.trajectory
        data = {
            'mode': trajectory.mode,
            'J_T': trajectory.total_cost,
            'cumulative_flop_proxy': np.cumsum(trajectory.flop_proxy).tolist(),
            'total_flop_proxy': int(sum(trajectory.flop_proxy)),
            'total_iterations': int(sum(trajectory.iter_counts)),
            'total_wall_time_us': float(sum(trajectory.step_wall_time)),
            'first_index_theta_below': trajectory.first_index_below(threshold),
        }
        if result.reference is not None:
            data['R'] = incurred_suboptimality(trajectory, result.reference)
            data['R_curve'] = cumulative_suboptimality_curve(trajectory, result.reference)
        return data

    return {
        'threshold': threshold,
        'first': side(first),
        'second': side(second),
        'delta_J_T': b.total_cost - a.total_cost,
        'flop_ratio': (sum(b.flop_proxy) / sum(a.flop_proxy)) if sum(a.flop_proxy) else None,
    }


class BoundVerifier:
    """Compare every applicable theoretical bound with a fresh simulation."""

    def __init__(self, runner: ScenarioRunner):
        self.runner = runner

    def verify(self) -> List[BoundReport]:
        """
        Raises:
            CertificateError: the scenario is optimal-only or uses uncertified budgets
        """
        config = self.runner.config
        if config.mode == 'optimal':
            raise CertificateError("bounds apply to suboptimal runs",
                                   hint="use mode 'tdmpc' or 'dimsumpc'")
        if config.get('allow_uncertified'):
            raise CertificateError(
                "bounds are only proven for certified budgets",
                hint="remove allow_uncertified and raise the budgets above ell*",
            )
        result = self.runner.simulate()
        if result.uncertified:
            raise CertificateError("budget below ell*", hint="raise the budgets above ell*")

        if config.mode == 'dimsumpc':
            return self._dim_sumpc_reports(result)
        return self._tdmpc_reports(result)

    def _tdmpc_reports(self, result: RunResult) -> List[BoundReport]:
        cert = result.certificates[0]
        sub, opt = result.trajectory, result.reference
        x0 = sub.x0
        x0_norm_W = self.runner.design.x_norm_W(x0, cert.N)
        budgets = self.runner.resolve_budget(cert.N)
        T = sub.T
        budget_list = budgets if isinstance(budgets, list) else [budgets] * T

        delta_theory = [bound_delta_mu(cert, x0_norm_W, budget_list, k) for k in range(T)]
        delta_empirical = [float(np.linalg.norm(sub.z_history[k] - opt.z_history[k]))
                           for k in range(T)]
        state_theory = [bound_state(cert, x0_norm_W, budget_list, k, product=STATE_PRODUCT)
                        for k in range(T + 1)]
        state_empirical = [float(np.linalg.norm(x)) for x in sub.states]
        optimal_theory = [bound_optimal_state(cert, x0_norm_W, k) for k in range(T + 1)]
        optimal_empirical = [float(np.linalg.norm(x)) for x in opt.states]

        suboptimality = bound_suboptimality(cert, x0_norm_W, budget_list, T)
        R = incurred_suboptimality(sub, opt)

        reports = [
            compare('delta_mu', delta_theory, delta_empirical),
            compare('state_norm', state_theory, state_empirical),
            compare('suboptimality_varying', suboptimality.finite_sum, R),
            compare('optimal_state', optimal_theory, optimal_empirical),
        ]
        if len(set(budget_list)) == 1:
            reports.append(compare('suboptimality_fixed',
                                   bound_suboptimality_fixed(cert, x0_norm_W), R))
        return reports

    def _dim_sumpc_reports(self, result: RunResult) -> List[BoundReport]:
        sub, opt = result.trajectory, result.reference
        switch_steps = [0] + list(sub.switch_steps)
        phases = [DimPhase(cert=cert, k_switch=k)
                  for cert, k in zip(result.certificates, switch_steps)]
        x0_norm_W0 = self.runner.design.x_norm_W(sub.x0, phases[0].cert.N)
        bound = bound_dim_sumpc(phases, x0_norm_W0, sub.T)
        R = incurred_suboptimality(sub, opt)
        return [compare('dim_sumpc', bound, R)]


@contextmanager
def track_run(command: str, config: Optional[ScenarioConfig] = None, output_dir: str = ''):
    """
    Record a command invocation in the ScenarioRun ledger.

    The yielded run is marked completed on exit, refused on CertificateError
    and failed on any other error (which is re-raised).
    """
    run = ScenarioRun.objects.create(
        command=command,
        preset=config.preset if config else '',
        mode=config.mode if config else '',
        config=config.to_dict() if config else {},
        config_hash=config.hash if config else '',
        status='processing',
        output_dir=str(output_dir),
    )
    try:
        yield run
    except CertificateError as e:
        run.status = 'refused'
        run.error_message = str(e)
        run.completed_at = timezone.now()
        run.save()
        raise
    except Exception as e:
        run.status = 'failed'
        run.error_message = str(e)
        run.completed_at = timezone.now()
        run.save()
        raise
    else:
        run.status = 'completed'
        run.completed_at = timezone.now()
        run.save()


def record_result(run: ScenarioRun, result: RunResult, summary: dict):
    run.uncertified = result.uncertified
    run.total_cost = result.trajectory.total_cost
    run.suboptimality = result.suboptimality
    run.summary = _finite(json.loads(json.dumps(summary, default=to_jsonable)))
    run.save()
    record_certificates(run, result.certificates)


def record_certificates(run: ScenarioRun, certs: List[CertificateSet]):
    for cert in certs:
        CertificateRecord.objects.update_or_create(
            run=run,
            horizon=cert.N,
            defaults={
                'ell': cert.ell,
                'ell_star': cert.ell_star,
                'epsilon': cert.epsilon,
                'report': _finite(cert.to_report()),
            },
        )


def _finite(value):
    """Replace non-finite floats by None so the document fits a JSON column."""
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_finite(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value
