"""Elastic-band reference generator.

A virtual point mass is pulled toward the current target by one FIC spring
per task-space axis; its double-integrated motion is the planned hand
reference. Released from rest at distance D with a saturated spring, each
axis performs half a harmonic oscillation and stops on the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fic import FicState, ForceProfile, fic_effort

__all__ = [
    "PlannerParams",
    "PlannerState",
    "planner_init",
    "planner_step",
    "set_target",
    "harmonic_duration",
]


@dataclass(frozen=True)
class PlannerParams:
    M_d: float = 1.0
    a_max: float = 1.0
    planner_rate: float = 1000.0
    # slope of the linear part of the band force, N/m
    stiffness: float = 1000.0

    def __post_init__(self):
        if not self.M_d > 0.0:
            raise ValueError("M_d must be positive")
        if not self.a_max > 0.0:
            raise ValueError("a_max must be positive")
        if not self.planner_rate >= 100.0:
            raise ValueError("planner_rate must be at least 100 Hz")
        if not self.stiffness > 0.0:
            raise ValueError("stiffness must be positive")

    @property
    def F_max(self) -> float:
        return self.M_d * self.a_max

    @property
    def dt(self) -> float:
        return 1.0 / self.planner_rate

    @property
    def profile(self) -> ForceProfile:
        return ForceProfile.linear(self.stiffness, self.F_max)


@dataclass(frozen=True)
class PlannerState:
    X_d: np.ndarray
    V_d: np.ndarray
    X_t: np.ndarray
    fic: tuple[FicState, FicState] = field(default=(FicState(), FicState()))
    # band acceleration at X_d; None until evaluated after a target switch
    A_d: np.ndarray | None = None


def planner_init(X0) -> PlannerState:
    """Planner at rest on ``X0`` with the target set to the same point."""
    X0 = np.array(X0, dtype=float).reshape(2)
    return PlannerState(X0.copy(), np.zeros(2), X0.copy())


def set_target(state: PlannerState, X_t_new) -> PlannerState:
    X_t_new = np.array(X_t_new, dtype=float).reshape(2)
    if np.array_equal(X_t_new, state.X_t):
        return state
    return replace(state, X_t=X_t_new, fic=(FicState(), FicState()), A_d=None)


def _band_acceleration(params, fic, X, V, X_t):
    profile = params.profile
    A = np.empty(2)
    out = []
    for ax in range(2):
        effort, st = fic_effort(profile, fic[ax], X[ax] - X_t[ax], V[ax])
        A[ax] = effort / params.M_d
        out.append(st)
    return A, (out[0], out[1])


def planner_step(params: PlannerParams, state: PlannerState, dt: float | None = None) -> PlannerState:
    """Advance the band by one tick (kick-drift-kick, one force evaluation)."""
    dt = params.dt if dt is None else dt
    fic = state.fic
    A = state.A_d
    if A is None:
        A, fic = _band_acceleration(params, fic, state.X_d, state.V_d, state.X_t)
    V_half = state.V_d + 0.5 * dt * A
    X = state.X_d + dt * V_half
    A_new, fic = _band_acceleration(params, fic, X, V_half, state.X_t)
    V = V_half + 0.5 * dt * A_new
    return PlannerState(X, V, state.X_t, fic, A_new)


def harmonic_duration(params: PlannerParams, distance: float) -> float:
    """Duration of a saturated half-cycle from rest over ``distance`` (per axis)."""
    return math.pi * math.sqrt(params.M_d * distance / (2.0 * params.F_max))
