"""Post-hoc analysis of reaching movements.

Covers the peak-to-mean speed ratio (r), tracking errors, the minimum-jerk
and harmonic point-to-point references, per-target aggregation and the
figure-data files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

__all__ = [
    "MINIMUM_JERK",
    "HARMONIC",
    "R_MINIMUM_JERK",
    "R_HARMONIC",
    "DegenerateSeriesError",
    "ReferenceTrajectory",
    "MovementRecord",
    "GroupStats",
    "AggregateStats",
    "reference_eval",
    "trim_window",
    "r_value",
    "rmse",
    "movement_metrics",
    "aggregate",
    "pearson",
    "shape_correlations",
    "directional_manipulability",
    "target_manipulability",
    "emit_plot_data",
    "summary_report",
]

MINIMUM_JERK = "minimum-jerk"
HARMONIC = "harmonic"

R_MINIMUM_JERK = 1.875
R_HARMONIC = math.pi / 2.0
# harmonic r value quoted alongside the minimum-jerk one in the source study
R_HARMONIC_QUOTED = 1.596

OUT, BACK = 0, 1
PHASE_NAMES = {OUT: "home->target", BACK: "target->home"}


class DegenerateSeriesError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceTrajectory:
    kind: str
    D: float
    delta_t: float

    def __post_init__(self):
        if self.kind not in (MINIMUM_JERK, HARMONIC):
            raise ValueError(f"unknown reference kind {self.kind!r}")
        if not (self.D > 0.0 and self.delta_t > 0.0):
            raise ValueError("D and delta_t must be positive")


def reference_eval(ref: ReferenceTrajectory, t):
    """Position and velocity of the reference at time(s) ``t`` in [0, delta_t]."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > ref.delta_t):
        raise ValueError(f"t outside [0, {ref.delta_t}]")
    s = t_arr / ref.delta_t
    if ref.kind == MINIMUM_JERK:
        pos = ref.D * (10 * s**3 - 15 * s**4 + 6 * s**5)
        vel = ref.D / ref.delta_t * (30 * s**2 - 60 * s**3 + 30 * s**4)
    else:
        w = math.pi / ref.delta_t
        pos = 0.5 * ref.D * (np.sin(w * t_arr - math.pi / 2) + 1.0)
        vel = 0.5 * ref.D * w * np.cos(w * t_arr - math.pi / 2)
    if np.ndim(t) == 0:
        return float(pos), float(vel)
    return pos, vel


def trim_window(speed, threshold: float = 0.01) -> tuple[int, int]:
    """Slice bounds ``[i, j)`` dropping leading/trailing samples below
    ``threshold * max(speed)``."""
    speed = np.asarray(speed, dtype=float)
    peak = speed.max() if speed.size else 0.0
    if not peak > 0.0:
        raise DegenerateSeriesError("speed series has no positive sample")
    keep = speed >= threshold * peak
    i = int(np.argmax(keep))
    j = len(speed) - int(np.argmax(keep[::-1]))
    return i, j


def r_value(speed, threshold: float = 0.01) -> float:
    """Peak over mean speed inside the trimmed movement window."""
    speed = np.asarray(speed, dtype=float)
    if speed.size < 10:
        raise DegenerateSeriesError(f"need at least 10 samples, got {speed.size}")
    i, j = trim_window(speed, threshold)
    w = speed[i:j]
    return float(w.max() / w.mean())


def rmse(a, b) -> float:
    """Root mean square of the Euclidean row-wise difference."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if d.ndim == 1:
        return float(np.sqrt(np.mean(d * d)))
    return float(np.sqrt(np.mean(np.sum(d * d, axis=1))))


@dataclass(frozen=True)
class MovementRecord:
    movement_id: int
    target_id: int
    phase: int
    r_planned: float
    r_executed: float
    rmse_pos: float
    rmse_vel: float
    peak_speed: float
    settle_time: float
    final_error: float
    complete: bool

    @property
    def direction(self) -> str:
        return PHASE_NAMES[self.phase]


RECORD_FIELDS = [f.name for f in fields(MovementRecord)]


def movement_metrics(
    m: dict,
    expected_len: int | None = None,
    r_threshold: float = 0.01,
    settle_tol: float = 1e-3,
    dt: float = 1e-3,
) -> MovementRecord:
    """Metrics for one movement from its sample columns.

    ``m`` maps column names (see ``experiment.SAMPLE_COLUMNS``) to arrays
    covering a single movement. The settle time is the time from movement
    start after which the hand stays within ``settle_tol`` of the target;
    it equals the window length if the hand is outside at the last sample.
    """
    n = len(m["t"])
    complete = expected_len is None or n == expected_len
    Xd = np.column_stack([m["xd"], m["yd"]])
    Vd = np.column_stack([m["vxd"], m["vyd"]])
    X = np.column_stack([m["x"], m["y"]])
    V = np.column_stack([m["vx"], m["vy"]])
    Xt = np.column_stack([m["xt"], m["yt"]])
    sp_d = np.hypot(Vd[:, 0], Vd[:, 1])
    sp = np.hypot(V[:, 0], V[:, 1])
    try:
        r_p = r_value(sp_d, r_threshold)
        r_e = r_value(sp, r_threshold)
    except DegenerateSeriesError:
        r_p = r_e = 1.0
        complete = False
    err = np.hypot(*(X - Xt).T)
    outside = np.nonzero(err > settle_tol)[0]
    if outside.size == 0:
        settle = 0.0
    elif outside[-1] == n - 1:
        settle = n * dt
    else:
        settle = (outside[-1] + 1) * dt
    return MovementRecord(
        movement_id=int(m["movement_id"][0]),
        target_id=int(m["target_id"][0]),
        phase=int(m["phase"][0]),
        r_planned=r_p,
        r_executed=r_e,
        rmse_pos=rmse(Xd, X),
        rmse_vel=rmse(Vd, V),
        peak_speed=float(sp.max()),
        settle_time=float(settle),
        final_error=float(err[-1]),
        complete=bool(complete),
    )


# ----------------------------------------------------------------------------
# aggregation

STAT_METRICS = ("r_planned", "r_executed", "rmse_pos", "rmse_vel")


@dataclass(frozen=True)
class GroupStats:
    n: int
    mean: dict
    std: dict


@dataclass(frozen=True)
class AggregateStats:
    overall: GroupStats
    per_target: dict  # target_id -> GroupStats


def _group(records) -> GroupStats:
    if not records:
        raise ValueError("empty group")
    mean, std = {}, {}
    for k in STAT_METRICS:
        v = np.array([getattr(r, k) for r in records])
        mean[k] = float(v.mean())
        std[k] = float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return GroupStats(len(records), mean, std)


def aggregate(records, targets=None) -> AggregateStats:
    """Mean and sample standard deviation overall and per target.

    Incomplete movements are left out. ``targets`` lists the target ids that
    must be present; an empty requested group raises ``ValueError``.
    """
    good = [r for r in records if r.complete]
    if not good:
        raise ValueError("no complete movements to aggregate")
    ids = sorted({r.target_id for r in good}) if targets is None else list(targets)
    per = {}
    for t in ids:
        group = [r for r in good if r.target_id == t]
        if not group:
            raise ValueError(f"no complete movements for target {t}")
        per[t] = _group(group)
    return AggregateStats(_group(good), per)


# ----------------------------------------------------------------------------
# profile shape


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float) - np.mean(a)
    b = np.asarray(b, dtype=float) - np.mean(b)
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0.0 else 0.0


def reference_speed_on_window(speed, kind: str, threshold: float = 0.01, dt: float = 1e-3):
    """Reference speed fitted to the trimmed window of ``speed``.

    Returns ``(window_slice, reference_speed)``; the reference spans the
    window with the same travelled distance.
    """
    i, j = trim_window(speed, threshold)
    n = j - i
    duration = max(n - 1, 1) * dt
    dist = float(np.sum(speed[i:j]) * dt)
    ref = ReferenceTrajectory(kind, max(dist, 1e-12), duration)
    _, v = reference_eval(ref, np.clip(np.arange(n) * dt, 0.0, duration))
    return slice(i, j), v


def shape_correlations(m: dict, threshold: float = 0.01, dt: float = 1e-3) -> dict:
    """Pearson correlations of planned/executed speed with the references.

    All four comparisons share one grid: the trimmed window of the planned
    speed. The references span that window and cover the planned distance,
    so the executed profile is judged on the time base it was asked to
    follow rather than on its own, possibly longer, settling tail.
    """
    sp_d = np.hypot(m["vxd"], m["vyd"])
    sp = np.hypot(m["vx"], m["vy"])
    out = {}
    for kind, name in ((HARMONIC, "harmonic"), (MINIMUM_JERK, "minjerk")):
        sl, ref = reference_speed_on_window(sp_d, kind, threshold, dt)
        out[f"planned_vs_{name}"] = pearson(sp_d[sl], ref)
        out[f"executed_vs_{name}"] = pearson(sp[sl], ref)
    return out


# ----------------------------------------------------------------------------
# manipulability


def directional_manipulability(arm, q, direction) -> float:
    """Length of the hand velocity ellipse along a unit ``direction``."""
    from .posture import posture_objective

    return math.sqrt(posture_objective(q, direction, arm))


def target_manipulability(config) -> dict:
    """Per target: ellipses at the home and target postures and the mean
    directional manipulability along the reach direction."""
    from .arm import manipulability_ellipsoid
    from .posture import solve_posture

    home = config.home()
    out = {}
    for k, tgt in enumerate(config.targets()):
        u = (tgt - home) / np.linalg.norm(tgt - home)
        w_t = config.task_unit_vector(math.atan2(u[1], u[0]))
        entry = {}
        dirs = []
        for where, point in (("home", home), ("target", tgt)):
            post = solve_posture(point, w_t, config.arm, config.elbow_branch)
            entry[where] = (point, post.Q_d, manipulability_ellipsoid(config.arm, post.Q_d))
            dirs.append(directional_manipulability(config.arm, post.Q_d, u))
        entry["directional"] = float(np.mean(dirs))
        out[k] = entry
    return out


# ----------------------------------------------------------------------------
# output files


def _write_csv(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.12g" % v


def emit_plot_data(records, samples: dict, out_dir, config) -> list[Path]:
    """Write the per-figure data files and return their paths.

    * ``fig3_r_values.csv``: per-target r statistics.
    * ``fig4_rmse.csv``: per-target tracking errors with directional
      manipulability.
    * ``fig5_ellipses.csv`` / ``fig5_paths.csv``: manipulability ellipses
      at home and target postures, and one hand path per target.
    * ``fig6_overlay.csv``: mean outward speed profiles per target with the
      minimum-jerk and harmonic references on the same time grid.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = aggregate(records)
    manip = target_manipulability(config)
    written = []

    p = out_dir / "fig3_r_values.csv"
    _write_csv(
        p,
        ["target", "n", "r_planned_mean", "r_planned_std", "r_executed_mean", "r_executed_std"],
        [
            (t + 1, g.n, g.mean["r_planned"], g.std["r_planned"], g.mean["r_executed"], g.std["r_executed"])
            for t, g in stats.per_target.items()
        ],
    )
    written.append(p)

    p = out_dir / "fig4_rmse.csv"
    _write_csv(
        p,
        ["target", "n", "rmse_pos_mean", "rmse_pos_std", "rmse_vel_mean", "rmse_vel_std",
         "directional_manipulability"],
        [
            (t + 1, g.n, g.mean["rmse_pos"], g.std["rmse_pos"], g.mean["rmse_vel"], g.std["rmse_vel"],
             manip[t]["directional"])
            for t, g in stats.per_target.items()
        ],
    )
    written.append(p)

    rows = []
    for t, entry in manip.items():
        for where in ("home", "target"):
            point, q, ell = entry[where]
            rows.append((t + 1, where, point[0], point[1], q[0], q[1], q[2], ell.axes[0], ell.axes[1],
                         ell.directions[0, 0], ell.directions[1, 0], int(ell.degenerate)))
    p = out_dir / "fig5_ellipses.csv"
    _write_csv(
        p,
        ["target", "location", "x", "y", "q1", "q2", "q3", "axis_major", "axis_minor",
         "major_dir_x", "major_dir_y", "degenerate"],
        rows,
    )
    written.append(p)

    movements = split_movements(samples)
    first_out = {}
    for m in movements:
        t = int(m["target_id"][0])
        if int(m["phase"][0]) == OUT and t not in first_out:
            first_out[t] = m
    rows = []
    for t in sorted(first_out):
        m = first_out[t]
        t0 = m["t"][0]
        for k in range(len(m["t"])):
            rows.append((t + 1, m["t"][k] - t0, m["x"][k], m["y"][k], m["xd"][k], m["yd"][k]))
    p = out_dir / "fig5_paths.csv"
    _write_csv(p, ["target", "t", "x", "y", "xd", "yd"], rows)
    written.append(p)

    rows = []
    complete_ids = {r.movement_id for r in records if r.complete}
    for t in sorted(stats.per_target):
        outs = [m for m in movements if int(m["target_id"][0]) == t and int(m["phase"][0]) == OUT
                and int(m["movement_id"][0]) in complete_ids]
        if not outs:
            continue
        n = min(len(m["t"]) for m in outs)
        sp_d = np.mean([np.hypot(m["vxd"][:n], m["vyd"][:n]) for m in outs], axis=0)
        sp = np.mean([np.hypot(m["vx"][:n], m["vy"][:n]) for m in outs], axis=0)
        dist = float(np.hypot(outs[0]["xt"][0] - outs[0]["xd"][0], outs[0]["yt"][0] - outs[0]["yd"][0]))
        # the band is released at the first tick; the planned window end
        # gives the movement duration
        _, j = trim_window(sp_d, config.r_threshold)
        duration = j * 1e-3
        tt = np.arange(n) * 1e-3
        refs = {}
        for kind in (MINIMUM_JERK, HARMONIC):
            ref = ReferenceTrajectory(kind, max(dist, 1e-12), duration)
            _, v = reference_eval(ref, np.minimum(tt, duration))
            refs[kind] = np.where(tt > duration, 0.0, v)
        for k in range(n):
            rows.append((t + 1, tt[k], sp_d[k], sp[k], refs[MINIMUM_JERK][k], refs[HARMONIC][k]))
    p = out_dir / "fig6_overlay.csv"
    _write_csv(p, ["target", "t", "planned_speed", "executed_speed", "minjerk_speed", "harmonic_speed"], rows)
    written.append(p)
    return written


def split_movements(samples: dict) -> list[dict]:
    """Split sample columns into one dict per contiguous movement id."""
    ids = np.asarray(samples["movement_id"])
    if ids.size == 0:
        return []
    cuts = np.nonzero(np.diff(ids) != 0)[0] + 1
    bounds = np.concatenate([[0], cuts, [ids.size]])
    return [
        {k: v[a:b] for k, v in samples.items()}
        for a, b in zip(bounds[:-1], bounds[1:])
    ]


def summary_report(records, stats: AggregateStats | None = None, r_threshold: float = 0.01) -> str:
    stats = stats or aggregate(records)
    o = stats.overall
    n_all = len(records)
    n_bad = sum(not r.complete for r in records)
    lines = [
        f"movements: {n_all} ({n_all - n_bad} complete, {n_bad} excluded)",
        f"r window: samples below {100 * r_threshold:g}% of peak speed trimmed at both ends",
        f"r planned : {o.mean['r_planned']:.3f} +- {o.std['r_planned']:.3f}"
        f"   (analytic harmonic {R_HARMONIC:.4f}; quoted harmonic {R_HARMONIC_QUOTED})",
        f"r executed: {o.mean['r_executed']:.3f} +- {o.std['r_executed']:.3f}"
        f"   (minimum jerk {R_MINIMUM_JERK})",
        f"position RMSE: {1e3 * o.mean['rmse_pos']:.3f} +- {1e3 * o.std['rmse_pos']:.3f} mm",
        f"velocity RMSE: {o.mean['rmse_vel']:.4f} +- {o.std['rmse_vel']:.4f} m/s",
        "",
        "target  n    r_planned        r_executed       rmse_pos[mm]     rmse_vel[m/s]",
    ]
    for t, g in stats.per_target.items():
        lines.append(
            f"{t + 1:>6d} {g.n:>3d}  {g.mean['r_planned']:.3f}+-{g.std['r_planned']:.3f}"
            f"   {g.mean['r_executed']:.3f}+-{g.std['r_executed']:.3f}"
            f"   {1e3 * g.mean['rmse_pos']:.3f}+-{1e3 * g.std['rmse_pos']:.3f}"
            f"   {g.mean['rmse_vel']:.4f}+-{g.std['rmse_vel']:.4f}"
        )
    return "\n".join(lines) + "\n"


def write_records(records, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(",".join(RECORD_FIELDS) + "\n")
        for r in records:
            vals = []
            for k in RECORD_FIELDS:
                v = getattr(r, k)
                if isinstance(v, bool):
                    vals.append(str(int(v)))
                elif isinstance(v, int):
                    vals.append(str(v))
                else:
                    vals.append(repr(float(v)))
            fh.write(",".join(vals) + "\n")
    return path


def read_records(path) -> list[MovementRecord]:
    path = Path(path)
    out = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != RECORD_FIELDS:
            raise ValueError(f"{path}: unexpected record header {header}")
        for line in fh:
            parts = line.strip().split(",")
            kw = {}
            for k, v in zip(RECORD_FIELDS, parts):
                if k in ("movement_id", "target_id", "phase"):
                    kw[k] = int(v)
                elif k == "complete":
                    kw[k] = bool(int(v))
                else:
                    kw[k] = float(v)
            out.append(MovementRecord(**kw))
    return out

