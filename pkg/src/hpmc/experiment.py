"""Clock-experiment harness: scheduling, closed-loop simulation and logging.

Each target forms an independent block that starts with the arm at rest in
the home posture and alternates home->target and target->home movements,
one per target period. Blocks are laid end to end on a common time axis.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import BACK, OUT, MovementRecord, movement_metrics, split_movements
from .arm import ArmState, IntegrationError, geometric_jacobian, link_points, step_dynamics
from .config import ExperimentConfig, config_to_flat
from .motor import StackState, control_tick
from .planner import planner_init, planner_step, set_target
from .posture import UnreachableTargetError, solve_posture

__all__ = [
    "SAMPLE_COLUMNS",
    "INT_COLUMNS",
    "ExperimentResult",
    "run_block",
    "run_experiment",
    "write_samples",
    "read_samples",
    "write_manifest",
    "file_sha256",
    "empty_samples",
]

log = logging.getLogger(__name__)

SAMPLE_COLUMNS = [
    "t", "movement_id", "target_id", "phase",
    "xt", "yt",
    "xd", "yd", "vxd", "vyd",
    "x", "y", "vx", "vy",
    "q1", "q2", "q3", "dq1", "dq2", "dq3",
    "tau1", "tau2", "tau3",
    "tmax1", "tmax2", "tmax3",
    "wa_x", "wa_y", "wfa_x", "wfa_y", "wh_x", "wh_y",
]
INT_COLUMNS = {"movement_id", "target_id", "phase"}


def empty_samples() -> dict:
    return {c: np.zeros(0, dtype=int if c in INT_COLUMNS else float) for c in SAMPLE_COLUMNS}


@dataclass
class ExperimentResult:
    samples: dict  # column name -> array
    records: list[MovementRecord]

    @property
    def n_samples(self) -> int:
        return len(self.samples["t"])


def run_block(config: ExperimentConfig, target_id: int) -> tuple[dict, list[MovementRecord]]:
    """Simulate every movement of one target's block."""
    arm, stack, planner = config.arm, config.stack, config.planner
    home = config.home()
    target = config.targets()[target_id]
    angle = math.atan2(target[1] - home[1], target[0] - home[0])
    w_t = config.task_unit_vector(angle)
    dt = stack.dt
    n_ticks = config.ticks_per_movement
    per_block = config.movements_per_target
    first_movement = target_id * per_block
    tick0 = first_movement * n_ticks

    rows = np.zeros((per_block * n_ticks, len(SAMPLE_COLUMNS)))
    n_rows = 0
    records = []

    def at_rest(point, t):
        post = solve_posture(point, w_t, arm, config.elbow_branch)
        return ArmState.at_rest(post.Q_d, t), post.Q_d

    state, q_prev = at_rest(home, tick0 * dt)
    plan = planner_init(home)
    stack_state = StackState()

    for m in range(per_block):
        movement_id = first_movement + m
        phase = OUT if m % 2 == 0 else BACK
        goal = target if phase == OUT else home
        plan = set_target(plan, goal)
        start = n_rows
        try:
            for k in range(n_ticks):
                tick = tick0 + m * n_ticks + k
                post = solve_posture(
                    plan.X_d, w_t, arm, config.elbow_branch, q_prev, config.max_joint_step
                )
                q_prev = post.Q_d
                out, stack_state = control_tick(stack, arm, stack_state, state, plan.X_d, post)
                hand = link_points(arm, state.q)[2]
                v = geometric_jacobian(arm, state.q)[:2] @ state.dq
                rows[n_rows] = (
                    tick / stack.control_rate, movement_id, target_id, phase,
                    goal[0], goal[1],
                    plan.X_d[0], plan.X_d[1], plan.V_d[0], plan.V_d[1],
                    hand[0], hand[1], v[0], v[1],
                    *state.q, *state.dq,
                    *out.tau_applied, *out.T_max,
                    *out.W_Ld[:, :2].ravel(),
                )
                n_rows += 1
                state = step_dynamics(
                    arm, state, out.tau_applied, None, dt, rtol=config.rtol, atol=config.atol
                )
                plan = planner_step(planner, plan, dt)
        except (IntegrationError, UnreachableTargetError) as e:
            log.warning("movement %d aborted: %s", movement_id, e)
            # restart the next movement from rest at this movement's goal
            next_tick = tick0 + (m + 1) * n_ticks
            state, q_prev = at_rest(goal, next_tick * dt)
            plan = set_target(planner_init(goal), goal)
            stack_state = StackState()
        block = _columns(rows[start:n_rows])
        records.append(
            movement_metrics(block, n_ticks, config.r_threshold, dt=dt)
            if n_rows - start >= 10 else _aborted_record(movement_id, target_id, phase)
        )
    return _columns(rows[:n_rows]), records


def _aborted_record(movement_id, target_id, phase) -> MovementRecord:
    return MovementRecord(movement_id, target_id, phase, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, False)


def _columns(rows: np.ndarray) -> dict:
    out = {}
    for i, c in enumerate(SAMPLE_COLUMNS):
        col = rows[:, i]
        out[c] = col.astype(int) if c in INT_COLUMNS else col.copy()
    return out


def _concat(blocks) -> dict:
    if not blocks:
        return empty_samples()
    return {c: np.concatenate([b[c] for b in blocks]) for c in SAMPLE_COLUMNS}


def _run_block_args(args):
    return run_block(*args)


def run_experiment(config: ExperimentConfig, targets=None) -> ExperimentResult:
    """Run the clock experiment; ``targets`` optionally restricts the blocks."""
    ids = list(range(config.n_targets)) if targets is None else list(targets)
    jobs = [(config, t) for t in ids]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_block_args, jobs))
    else:
        results = [run_block(*j) for j in jobs]
    samples = _concat([r[0] for r in results])
    records = [rec for r in results for rec in r[1]]
    return ExperimentResult(samples, records)


# ----------------------------------------------------------------------------
# persistence


def write_samples(samples: dict, path) -> Path:
    """Write samples as comma-separated text with a header row.

    Floats use 17 significant digits so a read-back is exact.
    """
    path = Path(path)
    n = len(samples["t"])
    fmt = ["%d" if c in INT_COLUMNS else "%.17g" for c in SAMPLE_COLUMNS]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(",".join(SAMPLE_COLUMNS) + "\n")
            if n:
                data = np.column_stack([np.asarray(samples[c], dtype=float) for c in SAMPLE_COLUMNS])
                np.savetxt(fh, data, fmt=fmt, delimiter=",")
    except OSError as e:
        raise OSError(f"cannot write samples to {path}: {e}") from e
    return path


class SampleFileError(ValueError):
    pass


def read_samples(path) -> dict:
    path = Path(path)
    try:
        fh = open(path)
    except OSError as e:
        raise OSError(f"cannot read samples from {path}: {e}") from e
    with fh:
        header = fh.readline().strip().split(",")
        if header != SAMPLE_COLUMNS:
            raise SampleFileError(f"{path}: header does not match the sample schema")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(SAMPLE_COLUMNS):
                raise SampleFileError(
                    f"{path}: row {lineno} has {len(parts)} fields, expected {len(SAMPLE_COLUMNS)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise SampleFileError(f"{path}: row {lineno} has a non-numeric field") from None
    if not rows:
        return empty_samples()
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        bad = int(np.nonzero(~np.all(np.isfinite(data), axis=1))[0][0]) + 2
        raise SampleFileError(f"{path}: row {bad} has a non-finite value")
    return _columns(data)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(config: ExperimentConfig, files, path) -> Path:
    path = Path(path)
    manifest = {
        "tool": "hpmc",
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config_to_flat(config),
        "files": {Path(f).name: file_sha256(f) for f in files},
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def records_from_samples(samples: dict, config: ExperimentConfig) -> list[MovementRecord]:
    """Recompute movement records from logged samples."""
    return [
        movement_metrics(m, config.ticks_per_movement, config.r_threshold, dt=config.stack.dt)
        for m in split_movements(samples)
    ]
