"""Lower control hierarchy: region of attraction, joints' coordination and
joint torque controllers, evaluated once per control tick.

Link order throughout is (arm, forearm, hand), i.e. the elbow, wrist and
hand end-points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .arm import ArmParams, ArmState, Wrench2, link_points, point_jacobian
from .fic import FicState, ForceProfile, TANH, fic_effort, tanh_force, two_plateau_force
from .posture import PostureTarget

__all__ = [
    "StackParams",
    "StackState",
    "ControlOutput",
    "region_of_attraction",
    "joints_coordination",
    "joint_controllers",
    "control_tick",
]

PARTIAL = "partial"
LITERAL = "literal"


def _default_roa():
    # stiff enough for sub-millimetre tracking of 0.1 m reaches
    p = ForceProfile.tanh(K0=6000.0, x_b=0.008, F_max=50.0)
    return (p, p, p)


@dataclass(frozen=True)
class StackParams:
    roa_profiles: tuple[ForceProfile, ForceProfile, ForceProfile] = field(default_factory=_default_roa)
    joint_x1: tuple[float, float, float] = (0.0005, 0.0005, 0.0005)
    joint_x2: tuple[float, float, float] = (0.005, 0.005, 0.005)
    control_rate: float = 1000.0
    # how the arm/forearm rows of the torque-limit law pick their Jacobian
    tmax_jacobian: str = PARTIAL

    def __post_init__(self):
        if len(self.roa_profiles) != 3 or any(p.variant != TANH for p in self.roa_profiles):
            raise ValueError("roa_profiles needs three tanh-saturated profiles")
        for a, b in zip(self.joint_x1, self.joint_x2):
            if not 0.0 < a < b:
                raise ValueError("joint breakpoints need 0 < x_1 < x_2")
        if self.control_rate != 1000.0:
            raise ValueError("control_rate is fixed at 1000 Hz")
        if self.tmax_jacobian not in (PARTIAL, LITERAL):
            raise ValueError(f"tmax_jacobian must be {PARTIAL!r} or {LITERAL!r}")

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate


@dataclass(frozen=True)
class StackState:
    roa_fic: tuple[tuple[FicState, FicState], ...] = ((FicState(), FicState()),) * 3
    joint_fic: tuple[FicState, FicState, FicState] = (FicState(),) * 3
    # previous link targets (3x2) and joint targets, for target-rate estimates
    prev_targets: np.ndarray | None = None
    prev_Q_d: np.ndarray | None = None


@dataclass(frozen=True)
class ControlOutput:
    tau_applied: np.ndarray
    W_Ld: np.ndarray  # rows arm, forearm, hand; columns fx, fy, mz
    T_d: np.ndarray
    T_max: np.ndarray
    Q_d: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _link_velocities(params: ArmParams, q, dq) -> np.ndarray:
    return np.array([(point_jacobian(params, q, k) @ dq)[:2] for k in range(3)])


def region_of_attraction(
    params: StackParams,
    arm: ArmParams,
    arm_state: ArmState,
    posture: PostureTarget,
    X_d,
    fic_states=None,
    target_rates=None,
):
    """Per-link task-space FIC wrenches pulling elbow, wrist and hand to their targets.

    Returns ``(W_Ld, Q_d, fic_states)`` where ``W_Ld`` is 3x3 (rows arm,
    forearm, hand).
    """
    if fic_states is None:
        fic_states = StackState().roa_fic
    targets = np.array([posture.X_A, posture.X_W, np.asarray(X_d, dtype=float)])
    if target_rates is None:
        target_rates = np.zeros((3, 2))
    elbow, wrist, hand, _ = link_points(arm, arm_state.q)
    points = (elbow, wrist, hand)
    vel = _link_velocities(arm, arm_state.q, arm_state.dq)
    W = np.zeros((3, 3))
    new_states = []
    for k in range(3):
        prof = params.roa_profiles[k]
        force = lambda e, p=prof: tanh_force(p.K0, p.x_b, p.F_max, e)  # noqa: E731
        pair = []
        for ax in range(2):
            err = points[k][ax] - targets[k][ax]
            d_err = vel[k][ax] - target_rates[k][ax]
            f, st = fic_effort(force, fic_states[k][ax], err, d_err)
            W[k, ax] = f
            pair.append(st)
        new_states.append((pair[0], pair[1]))
    return W, posture.Q_d, tuple(new_states)


def joints_coordination(
    W_Ld,
    W_measured,
    arm_state: ArmState,
    arm: ArmParams,
    tmax_jacobian: str = PARTIAL,
):
    """Desired joint torques from the hand wrench and the live torque limits.

    ``T_d = J^T (2 W_d - W)`` with ``W_d`` the hand row of ``W_Ld``. The
    limits take the smaller of the actuator maximum and the torque each
    link's wrench needs at its own joint (twice that for the hand).
    """
    W_Ld = np.asarray(W_Ld, dtype=float)
    if isinstance(W_measured, Wrench2):
        W_measured = W_measured.as_array()
    W_measured = np.zeros(3) if W_measured is None else np.asarray(W_measured, dtype=float)
    q = arm_state.q
    J = point_jacobian(arm, q, 2)
    T_d = J.T @ (2.0 * W_Ld[2] - W_measured)
    if tmax_jacobian == PARTIAL:
        J1 = point_jacobian(arm, q, 0)
        J2 = point_jacobian(arm, q, 1)
    else:
        J1 = J2 = J
    T_A = arm.joint_torque_limits
    T_max = np.array([
        min(T_A[0], abs(J1[:, 0] @ W_Ld[0])),
        min(T_A[1], abs(J2[:, 1] @ W_Ld[1])),
        min(T_A[2], 2.0 * abs(J[:, 2] @ W_Ld[2])),
    ])
    return T_d, T_max


def joint_controllers(
    params: StackParams,
    arm_state: ArmState,
    Q_d,
    T_d,
    T_max,
    fic_states=None,
    Q_d_rate=None,
):
    """Two-plateau FIC per joint driving ``q`` toward ``Q_d``.

    The first plateau sits at ``|T_d|`` (capped by ``T_max``) between the
    breakpoints ``x_1`` and ``x_2``; the profile then ramps to ``T_max`` at
    ``2 x_2``. Returns ``(tau, fic_states)``.
    """
    if fic_states is None:
        fic_states = StackState().joint_fic
    if Q_d_rate is None:
        Q_d_rate = np.zeros(3)
    tau = np.zeros(3)
    new_states = []
    for i in range(3):
        t_max = float(T_max[i])
        f_mid = min(abs(float(T_d[i])), t_max)
        x1, x2 = params.joint_x1[i], params.joint_x2[i]
        force = lambda e, a=f_mid, b=t_max, c=x1, d=x2: two_plateau_force(a, b, c, d, e)  # noqa: E731
        err = math.remainder(arm_state.q[i] - Q_d[i], 2.0 * math.pi)
        d_err = arm_state.dq[i] - Q_d_rate[i]
        f, st = fic_effort(force, fic_states[i], err, d_err)
        tau[i] = max(-t_max, min(t_max, f))
        new_states.append(st)
    return tau, tuple(new_states)


def control_tick(
    params: StackParams,
    arm: ArmParams,
    stack_state: StackState,
    arm_state: ArmState,
    X_d,
    posture: PostureTarget,
    W_measured=None,
) -> tuple[ControlOutput, StackState]:
    """Run the whole stack for one 1 kHz tick."""
    dt = params.dt
    X_d = np.asarray(X_d, dtype=float)
    targets = np.array([posture.X_A, posture.X_W, X_d])
    if stack_state.prev_targets is None:
        target_rates = np.zeros((3, 2))
        Q_rate = np.zeros(3)
    else:
        target_rates = (targets - stack_state.prev_targets) / dt
        Q_rate = (posture.Q_d - stack_state.prev_Q_d) / dt

    W_Ld, Q_d, roa_fic = region_of_attraction(
        params, arm, arm_state, posture, X_d, stack_state.roa_fic, target_rates
    )
    T_d, T_max = joints_coordination(W_Ld, W_measured, arm_state, arm, params.tmax_jacobian)
    tau, joint_fic = joint_controllers(
        params, arm_state, Q_d, T_d, T_max, stack_state.joint_fic, Q_rate
    )
    out = ControlOutput(
        tau_applied=tau,
        W_Ld=W_Ld,
        T_d=T_d,
        T_max=T_max,
        Q_d=Q_d,
        diagnostics={
            "targets": targets,
            "target_rates": target_rates,
            "rate_limited": posture.rate_limited,
            "roa_phase": tuple(s.phase for pair in roa_fic for s in pair),
            "joint_phase": tuple(s.phase for s in joint_fic),
        },
    )
    return out, StackState(roa_fic, joint_fic, targets, posture.Q_d.copy())
