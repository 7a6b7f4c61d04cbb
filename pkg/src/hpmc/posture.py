"""Posture selection for the reaching task.

The hand link is aligned with the expected interaction direction and the
shoulder/elbow pair is solved in closed form, which keeps the hand on the
planned point while orienting the chain against the interaction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arm import ArmParams, geometric_jacobian, link_points, wrap_angle

__all__ = [
    "UnreachableTargetError",
    "PostureTarget",
    "wrist_target",
    "arm_ik",
    "solve_posture",
    "posture_objective",
    "DEFAULT_MAX_JOINT_STEP",
]

DEFAULT_MAX_JOINT_STEP = 0.02  # rad per 1 ms tick
_EPS = 1e-9


class UnreachableTargetError(ValueError):
    pass


@dataclass(frozen=True)
class PostureTarget:
    X_W: np.ndarray
    X_A: np.ndarray
    X_H: np.ndarray
    Q_d: np.ndarray
    phi_Wt: float
    rate_limited: bool = False


def wrist_target(X_d, W_t, l_H: float) -> tuple[np.ndarray, float]:
    """Wrist point one hand-length behind ``X_d`` along the task direction.

    Returns ``(X_W, phi_Wt)``.
    """
    W_t = np.asarray(W_t, dtype=float)
    n = math.hypot(W_t[0], W_t[1])
    if not abs(n - 1.0) < 1e-9:
        raise ValueError(f"task direction must be a unit vector, |W_t| = {n}")
    phi = math.atan2(W_t[1], W_t[0])
    X_d = np.asarray(X_d, dtype=float)
    return np.array([X_d[0] - l_H * math.cos(phi), X_d[1] - l_H * math.sin(phi)]), phi


def arm_ik(
    X_W,
    phi_Wt: float,
    params: ArmParams,
    elbow_branch: int = 1,
    Q_prev=None,
    max_step: float | None = None,
) -> PostureTarget:
    """Closed-form shoulder/elbow angles placing the wrist at ``X_W``.

    ``elbow_branch=+1`` selects the solution with a positive elbow angle.
    The third joint aligns the hand link with ``phi_Wt``. When ``Q_prev``
    and ``max_step`` are given, each joint change is clamped to
    ``max_step`` and the result is flagged as rate limited.
    """
    if elbow_branch not in (1, -1):
        raise ValueError("elbow_branch must be +1 or -1")
    lA, lFA, lH = params.link_lengths
    if params.tip_offset != 0.0:
        raise NotImplementedError("closed-form posture assumes a zero hand tip offset")
    x, y = float(X_W[0]), float(X_W[1])
    r2 = x * x + y * y
    r = math.sqrt(r2)
    if r > lA + lFA - _EPS or r < abs(lA - lFA) + _EPS:
        raise UnreachableTargetError(
            f"wrist target ({x:.6f}, {y:.6f}) at distance {r:.6f} m outside the"
            f" reachable annulus [{abs(lA - lFA):.6f}, {lA + lFA:.6f}]"
        )
    c2 = (r2 - lA * lA - lFA * lFA) / (2.0 * lA * lFA)
    c2 = max(-1.0, min(1.0, c2))
    q2 = elbow_branch * math.acos(c2)
    q1 = math.atan2(y, x) - math.atan2(lFA * math.sin(q2), lA + lFA * math.cos(q2))
    q3 = phi_Wt - q1 - q2
    Q = np.array([wrap_angle(q1), q2, wrap_angle(q3)])

    limited = False
    if Q_prev is not None:
        Q_prev = np.asarray(Q_prev, dtype=float)
        # unwrap toward the previous posture so the step is the short way round
        Q = Q_prev + (Q - Q_prev + math.pi) % (2.0 * math.pi) - math.pi
        if max_step is not None:
            dQ = Q - Q_prev
            if np.any(np.abs(dQ) > max_step):
                limited = True
                Q = Q_prev + np.clip(dQ, -max_step, max_step)

    elbow, wrist, hand, _ = link_points(params, Q)
    return PostureTarget(wrist, elbow, hand, Q, phi_Wt, limited)


def solve_posture(
    X_d,
    W_t,
    params: ArmParams,
    elbow_branch: int = 1,
    Q_prev=None,
    max_step: float | None = None,
) -> PostureTarget:
    """Wrist target followed by the closed-form arm solution."""
    X_W, phi = wrist_target(X_d, W_t, params.link_lengths[2])
    return arm_ik(X_W, phi, params, elbow_branch, Q_prev, max_step)


def posture_objective(q, W_t, params: ArmParams) -> float:
    """Squared length of the hand velocity ellipse along ``W_t``."""
    W_t = np.asarray(W_t, dtype=float)
    Jv = geometric_jacobian(params, q)[:2]
    return float(W_t @ Jv @ Jv.T @ W_t)
