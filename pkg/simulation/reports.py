"""
CSV and JSON artifacts for trajectories and certificate reports.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional

from core.utils import to_jsonable
from .services import Trajectory, cumulative_suboptimality_curve

logger = logging.getLogger(__name__)

TIMING_COLUMNS = ('wall_time_us',)


def trajectory_columns(n: int, m: int) -> List[str]:
    return (
        ['k']
        + [f'x_{i + 1}' for i in range(n)]
        + [f'u_{i + 1}' for i in range(m)]
        + ['V', 'psi', 'lyapunov', 'd_norm', 'ell_k', 'horizon', 'stage_cost', 'cum_cost',
           'cum_suboptimality', 'flop_proxy', 'wall_time_us']
    )


def _cell(values: list, k: int):
    if k >= len(values):
        return ''
    value = values[k]
    if isinstance(value, float) and math.isnan(value):
        return ''
    return repr(float(value)) if isinstance(value, float) else value


def trajectory_rows(trajectory: Trajectory, reference: Optional[Trajectory] = None):
    """
    One row per step k = 0..T; the row k = T carries x_T and the terminal cost.

    cum_suboptimality is filled only when a reference (optimal) trajectory is given.
    """
    n = trajectory.states[0].size
    m = trajectory.inputs[0].size if trajectory.inputs else 0
    curve = cumulative_suboptimality_curve(trajectory, reference) if reference is not None else []

    cumulative = 0.0
    for k, x in enumerate(trajectory.states):
        last = k == trajectory.T
        stage = trajectory.terminal_cost if last else trajectory.stage_costs[k]
        cumulative += stage
        row = [k] + [repr(float(v)) for v in x]
        row += [''] * m if last else [repr(float(v)) for v in trajectory.inputs[k]]
        row += [
            _cell(trajectory.V_values, k),
            _cell(trajectory.psi_values, k),
            _cell(trajectory.lyapunov_values, k),
            _cell(trajectory.d_norms, k),
            _cell(trajectory.iter_counts, k),
            _cell(trajectory.horizon_at_step, k),
            repr(float(stage)),
            repr(float(cumulative)),
            _cell(curve, k),
            _cell(trajectory.flop_proxy, k),
            _cell(trajectory.step_wall_time, k),
        ]
        yield row


def write_trajectory_csv(trajectory: Trajectory, path: Path, config_hash: str,
                         decisions: Iterable[str] = (),
                         reference: Optional[Trajectory] = None) -> Path:
    """Write the trajectory CSV, prefixed by '#' provenance lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = trajectory.states[0].size
    m = trajectory.inputs[0].size if trajectory.inputs else 0

    with open(path, 'w', newline='') as handle:
        handle.write(f'# config_hash: {config_hash}\n')
        for decision in decisions:
            handle.write(f'# decision: {decision}\n')
        writer = csv.writer(handle)
        writer.writerow(trajectory_columns(n, m))
        for row in trajectory_rows(trajectory, reference):
            writer.writerow(row)

    logger.info(f"Wrote {trajectory.T + 1} rows to {path}")
    return path


def read_trajectory_csv(path: Path, drop_timing: bool = True) -> List[dict]:
    """Rows of a trajectory CSV as dicts (timing columns removed by default)."""
    with open(path, newline='') as handle:
        lines = [line for line in handle if not line.startswith('#')]
    rows = list(csv.DictReader(lines))
    if drop_timing:
        for row in rows:
            for column in TIMING_COLUMNS:
                row.pop(column, None)
    return rows


def trajectory_summary(trajectory: Trajectory, reference: Optional[Trajectory] = None) -> dict:
    summary = {
        'mode': trajectory.mode,
        'T': trajectory.T,
        'J_T': trajectory.total_cost,
        'terminal_cost': trajectory.terminal_cost,
        'final_state': trajectory.states[-1].tolist(),
        'total_iterations': int(sum(trajectory.iter_counts)),
        'total_flop_proxy': int(sum(trajectory.flop_proxy)),
        'total_wall_time_us': float(sum(trajectory.step_wall_time)),
        'switch_steps': list(trajectory.switch_steps),
        'metadata': trajectory.metadata,
    }
    if reference is not None:
        curve = cumulative_suboptimality_curve(trajectory, reference)
        summary['R'] = curve[-1]
        summary['J_T_optimal'] = reference.total_cost
    return summary


def write_json(data: dict, path: Path, config_hash: str, decisions: Iterable[str] = ()) -> Path:
    """Write a JSON report with the provenance fields merged in."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {'config_hash': config_hash, 'decisions': list(decisions), **data}
    with open(path, 'w') as handle:
        json.dump(document, handle, indent=2, sort_keys=True, default=to_jsonable)
    logger.info(f"Wrote report {path}")
    return path
