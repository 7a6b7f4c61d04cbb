"""Experiment configuration: defaults, INI-style files and dotted overrides.

A config file uses sections whose names prefix the keys::

    [experiment]
    cycles_per_target = 5

    [planner]
    a_max = 1.0

which addresses ``experiment.cycles_per_target`` and ``planner.a_max``.
Tuples are comma separated. Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .arm import ArmParams
from .fic import ForceProfile
from .motor import StackParams
from .planner import PlannerParams

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_overrides",
    "config_from_flat",
    "config_to_flat",
    "config_to_text",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    clock_center: tuple[float, float] = (0.3, 0.0)
    clock_radius: float = 0.1
    n_targets: int = 8
    cycles_per_target: int = 100
    target_period: float = 1.0
    home_policy: str = "center"
    seed: int = 0
    # unit task direction per movement: "target" (home -> target) or "x, y"
    task_direction: str = "target"
    elbow_branch: int = 1
    max_joint_step: float = 0.02
    rtol: float = 1e-8
    atol: float = 1e-10
    workers: int = 1
    r_threshold: float = 0.01
    arm: ArmParams = field(default_factory=ArmParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    stack: StackParams = field(default_factory=StackParams)

    def __post_init__(self):
        if not self.clock_radius > 0.0:
            raise ConfigError("experiment.clock_radius must be positive")
        if self.n_targets < 1:
            raise ConfigError("experiment.n_targets must be at least 1")
        if self.cycles_per_target < 1:
            raise ConfigError("experiment.cycles_per_target must be at least 1")
        if not self.target_period > 0.0:
            raise ConfigError("experiment.target_period must be positive")
        ticks = self.target_period * self.stack.control_rate
        if abs(ticks - round(ticks)) > 1e-9:
            raise ConfigError("experiment.target_period must be a whole number of control ticks")
        if self.home_policy != "center":
            raise ConfigError("experiment.home_policy supports only 'center'")
        if self.elbow_branch not in (1, -1):
            raise ConfigError("experiment.elbow_branch must be 1 or -1")
        if not 0.0 <= self.r_threshold <= 0.05:
            raise ConfigError("experiment.r_threshold must lie in [0, 0.05]")
        if self.workers < 1:
            raise ConfigError("experiment.workers must be at least 1")
        self.task_unit_vector(0.0)  # validates task_direction
        # the whole clock, with the wrist pulled back along any direction,
        # must stay inside the reachable annulus
        lA, lFA, lH = self.arm.link_lengths
        c = math.hypot(*self.clock_center)
        if c + self.clock_radius + lH >= lA + lFA or c - self.clock_radius - lH <= abs(lA - lFA):
            raise ConfigError("clock circle is not inside the reachable annulus")

    @property
    def ticks_per_movement(self) -> int:
        return int(round(self.target_period * self.stack.control_rate))

    @property
    def movements_per_target(self) -> int:
        return 2 * self.cycles_per_target

    @property
    def n_movements(self) -> int:
        return self.n_targets * self.movements_per_target

    def home(self) -> np.ndarray:
        return np.array(self.clock_center, dtype=float)

    def targets(self) -> np.ndarray:
        """Target k (0-based) sits at angle 2*pi*k/n counterclockwise from +x."""
        ang = 2.0 * np.pi * np.arange(self.n_targets) / self.n_targets
        return self.home() + self.clock_radius * np.column_stack([np.cos(ang), np.sin(ang)])

    def task_unit_vector(self, angle: float) -> np.ndarray:
        if self.task_direction == "target":
            return np.array([math.cos(angle), math.sin(angle)])
        try:
            v = np.array([float(s) for s in self.task_direction.split(",")])
        except ValueError:
            raise ConfigError(f"bad experiment.task_direction {self.task_direction!r}") from None
        if v.shape != (2,) or not np.linalg.norm(v) > 0.0:
            raise ConfigError(f"bad experiment.task_direction {self.task_direction!r}")
        return v / np.linalg.norm(v)


# ----------------------------------------------------------------------------
# flat key schema

def _f(s):
    return float(s)


def _i(s):
    f = float(s)
    if f != int(f):
        raise ValueError(f"not an integer: {s}")
    return int(f)


def _t3(s):
    v = tuple(float(x) for x in s.split(","))
    if len(v) != 3:
        raise ValueError(f"expected 3 comma-separated numbers, got {s!r}")
    return v


def _t2(s):
    v = tuple(float(x) for x in s.split(","))
    if len(v) != 2:
        raise ValueError(f"expected 2 comma-separated numbers, got {s!r}")
    return v


def _opt_t3(s):
    return None if s.strip().lower() in ("", "none", "rod") else _t3(s)


def _str(s):
    return s.strip()


_EXPERIMENT_KEYS = {
    "clock_center": _t2,
    "clock_radius": _f,
    "n_targets": _i,
    "cycles_per_target": _i,
    "target_period": _f,
    "home_policy": _str,
    "seed": _i,
    "task_direction": _str,
    "elbow_branch": _i,
    "max_joint_step": _f,
    "rtol": _f,
    "atol": _f,
    "workers": _i,
    "r_threshold": _f,
}
_ARM_KEYS = {
    "link_lengths": _t3,
    "link_masses": _t3,
    "link_inertias": _opt_t3,
    "com_offsets": _opt_t3,
    "joint_damping": _t3,
    "joint_torque_limits": _t3,
    "tip_offset": _f,
}
_PLANNER_KEYS = {"M_d": _f, "a_max": _f, "planner_rate": _f, "stiffness": _f}
_LINKS = ("arm", "forearm", "hand")
_STACK_KEYS = {
    **{f"{link}_{k}": _f for link in _LINKS for k in ("K0", "x_b", "F_max")},
    "joint_x1": _t3,
    "joint_x2": _t3,
    "tmax_jacobian": _str,
}
SCHEMA = {
    "experiment": _EXPERIMENT_KEYS,
    "arm": _ARM_KEYS,
    "planner": _PLANNER_KEYS,
    "stack": _STACK_KEYS,
}


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_to_flat(cfg: ExperimentConfig) -> dict[str, str]:
    """Every configurable value as ``section.key -> text``."""
    out = {}
    for name in _EXPERIMENT_KEYS:
        out[f"experiment.{name}"] = _fmt(getattr(cfg, name))
    for name in _ARM_KEYS:
        out[f"arm.{name}"] = _fmt(getattr(cfg.arm, name))
    for name in _PLANNER_KEYS:
        out[f"planner.{name}"] = _fmt(getattr(cfg.planner, name))
    for link, prof in zip(_LINKS, cfg.stack.roa_profiles):
        out[f"stack.{link}_K0"] = _fmt(prof.K0)
        out[f"stack.{link}_x_b"] = _fmt(prof.x_b)
        out[f"stack.{link}_F_max"] = _fmt(prof.F_max)
    out["stack.joint_x1"] = _fmt(cfg.stack.joint_x1)
    out["stack.joint_x2"] = _fmt(cfg.stack.joint_x2)
    out["stack.tmax_jacobian"] = cfg.stack.tmax_jacobian
    return out


def config_to_text(cfg: ExperimentConfig) -> str:
    flat = config_to_flat(cfg)
    lines = []
    for section in SCHEMA:
        lines.append(f"[{section}]")
        for key, val in flat.items():
            s, k = key.split(".", 1)
            if s == section:
                lines.append(f"{k} = {val}")
        lines.append("")
    return "\n".join(lines)


def _parse_value(key: str, text: str):
    if "." not in key:
        raise ConfigError(f"config key {key!r} needs a section prefix")
    section, name = key.split(".", 1)
    try:
        parser = SCHEMA[section][name]
    except KeyError:
        raise ConfigError(f"unknown config key {key!r}") from None
    try:
        return parser(text)
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {e}") from None


def config_from_flat(values: dict[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = base or ExperimentConfig()
    parsed = {k: _parse_value(k, v) for k, v in values.items()}
    groups: dict[str, dict] = {s: {} for s in SCHEMA}
    for key, val in parsed.items():
        s, k = key.split(".", 1)
        groups[s][k] = val
    try:
        arm = replace(base.arm, **groups["arm"]) if groups["arm"] else base.arm
        if "link_lengths" in groups["arm"] or "link_masses" in groups["arm"]:
            # rod defaults follow changed geometry unless given explicitly
            for k in ("link_inertias", "com_offsets"):
                if k not in groups["arm"]:
                    arm = replace(arm, **{k: None})
        planner = replace(base.planner, **groups["planner"]) if groups["planner"] else base.planner
        st = dict(groups["stack"])
        profiles = list(base.stack.roa_profiles)
        for i, link in enumerate(_LINKS):
            upd = {k: st.pop(f"{link}_{k}") for k in ("K0", "x_b", "F_max") if f"{link}_{k}" in st}
            if upd:
                profiles[i] = ForceProfile(**{**profiles[i].__dict__, **upd})
        stack = replace(base.stack, roa_profiles=tuple(profiles), **st)
        return replace(base, arm=arm, planner=planner, stack=stack, **groups["experiment"])
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None


def parse_overrides(items) -> dict[str, str]:
    """``["a.b=1", ...]`` to a dict; later duplicates win."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read(path)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    return {f"{s}.{k}": v for s in cp.sections() for k, v in cp.items(s)}


def load_config(path=None, overrides=None) -> ExperimentConfig:
    values = read_config_file(path) if path is not None else {}
    values.update(overrides or {})
    return config_from_flat(values)

