"""Planar 3-link arm: kinematics, manipulability and forward dynamics.

Joint angles are relative (each measured from the previous link); with all
angles at zero the chain lies stretched along +x from the shoulder at the
origin. Links are modelled as uniform slender rods unless inertias and COM
offsets are given explicitly. The plane is horizontal, so gravity is absent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .integrate import IntegrationError, dopri45_advance

__all__ = [
    "ArmParams",
    "ArmState",
    "Pose2",
    "Wrench2",
    "Ellipse",
    "IntegrationError",
    "wrap_angle",
    "forward_kinematics",
    "link_points",
    "point_jacobian",
    "geometric_jacobian",
    "manipulability_ellipsoid",
    "mass_matrix",
    "mass_matrix_partials",
    "coriolis_matrix",
    "velocity_product_torques",
    "kinetic_energy",
    "joint_accelerations",
    "step_dynamics",
]


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.atan2(math.sin(a), math.cos(a))
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    phi: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y})")
        if self.phi is not None:
            object.__setattr__(self, "phi", wrap_angle(self.phi))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Wrench2:
    fx: float = 0.0
    fy: float = 0.0
    mz: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.fx, self.fy, self.mz)):
            raise ValueError("non-finite wrench")

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.mz])


def _triple(v, name) -> tuple[float, float, float]:
    t = tuple(float(a) for a in v)
    if len(t) != 3:
        raise ValueError(f"{name} needs 3 entries, got {len(t)}")
    return t


@dataclass(frozen=True)
class ArmParams:
    """Geometric and inertial description of the arm.

    ``link_inertias`` and ``com_offsets`` default to the slender-rod values
    m*l**2/12 and l/2. ``tip_offset`` shifts the hand point perpendicular to
    the last link (positive to the left of the link direction).
    """

    link_lengths: tuple[float, float, float] = (0.282, 0.269, 0.044)
    link_masses: tuple[float, float, float] = (4.0, 2.5, 1.0)
    link_inertias: tuple[float, float, float] | None = None
    com_offsets: tuple[float, float, float] | None = None
    joint_damping: tuple[float, float, float] = (0.1, 0.1, 0.1)
    joint_torque_limits: tuple[float, float, float] = (60.0, 40.0, 10.0)
    tip_offset: float = 0.0

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        lengths = _triple(self.link_lengths, "link_lengths")
        masses = _triple(self.link_masses, "link_masses")
        set_("link_lengths", lengths)
        set_("link_masses", masses)
        if self.link_inertias is None:
            set_("link_inertias", tuple(m * l * l / 12.0 for m, l in zip(masses, lengths)))
        else:
            set_("link_inertias", _triple(self.link_inertias, "link_inertias"))
        if self.com_offsets is None:
            set_("com_offsets", tuple(l / 2.0 for l in lengths))
        else:
            set_("com_offsets", _triple(self.com_offsets, "com_offsets"))
        set_("joint_damping", _triple(self.joint_damping, "joint_damping"))
        set_("joint_torque_limits", _triple(self.joint_torque_limits, "joint_torque_limits"))
        set_("tip_offset", float(self.tip_offset))

        for name in ("link_lengths", "link_masses", "link_inertias"):
            if any(not (v > 0.0 and math.isfinite(v)) for v in getattr(self, name)):
                raise ValueError(f"{name} must be strictly positive: {getattr(self, name)}")
        for name in ("joint_damping", "joint_torque_limits"):
            if any(not (v >= 0.0 and math.isfinite(v)) for v in getattr(self, name)):
                raise ValueError(f"{name} must be non-negative: {getattr(self, name)}")
        if any(v < 0.0 for v in self.com_offsets):
            raise ValueError("com_offsets must be non-negative")

    @property
    def reach(self) -> float:
        """Distance from shoulder to wrist at full extension of joints 1-2."""
        return self.link_lengths[0] + self.link_lengths[1]


@dataclass(frozen=True)
class ArmState:
    q: np.ndarray
    dq: np.ndarray
    t: float = 0.0
    # suggested first internal step for the next integration call
    step_hint: float | None = field(default=None, compare=False)

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(3)
        dq = np.array(self.dq, dtype=float).reshape(3)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(dq)) and math.isfinite(self.t)):
            raise ValueError("ArmState entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "dq", dq)

    @classmethod
    def at_rest(cls, q: Sequence[float], t: float = 0.0) -> "ArmState":
        return cls(np.asarray(q, dtype=float), np.zeros(3), t)


# ----------------------------------------------------------------------------
# kinematics


def link_points(params: ArmParams, q) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return (elbow, wrist, hand, absolute link angles) as arrays."""
    l1, l2, l3 = params.link_lengths
    t1 = q[0]
    t2 = t1 + q[1]
    t3 = t2 + q[2]
    c1, s1 = math.cos(t1), math.sin(t1)
    c2, s2 = math.cos(t2), math.sin(t2)
    c3, s3 = math.cos(t3), math.sin(t3)
    ex, ey = l1 * c1, l1 * s1
    wx, wy = ex + l2 * c2, ey + l2 * s2
    off = params.tip_offset
    hx = wx + l3 * c3 - off * s3
    hy = wy + l3 * s3 + off * c3
    return (
        np.array([ex, ey]),
        np.array([wx, wy]),
        np.array([hx, hy]),
        np.array([t1, t2, t3]),
    )


def forward_kinematics(params: ArmParams, q) -> tuple[Pose2, Pose2, Pose2]:
    """Poses of the elbow, wrist and hand end-points.

    Each pose carries the absolute orientation of the link it terminates.
    """
    elbow, wrist, hand, th = link_points(params, q)
    return (
        Pose2(elbow[0], elbow[1], th[0]),
        Pose2(wrist[0], wrist[1], th[1]),
        Pose2(hand[0], hand[1], th[2]),
    )


def _joint_positions(params: ArmParams, q) -> np.ndarray:
    elbow, wrist, _, _ = link_points(params, q)
    return np.array([[0.0, 0.0], elbow, wrist])


def point_jacobian(params: ArmParams, q, link: int) -> np.ndarray:
    """3x3 geometric Jacobian of the end-point of ``link`` (0, 1 or 2).

    Rows are (vx, vy, omega); columns of joints distal to ``link`` are zero.
    """
    pts = link_points(params, q)
    p = pts[link]
    joints = _joint_positions(params, q)
    J = np.zeros((3, 3))
    for j in range(link + 1):
        r = p - joints[j]
        J[0, j] = -r[1]
        J[1, j] = r[0]
        J[2, j] = 1.0
    return J


def geometric_jacobian(params: ArmParams, q) -> np.ndarray:
    """Hand Jacobian mapping joint rates to (xdot, ydot, phidot)."""
    return point_jacobian(params, q, 2)


@dataclass(frozen=True)
class Ellipse:
    axes: np.ndarray  # semi-axis lengths, major first
    directions: np.ndarray  # unit axis directions as columns, matching ``axes``
    degenerate: bool

    @property
    def volume(self) -> float:
        return float(np.prod(self.axes))


def manipulability_ellipsoid(params: ArmParams, q) -> Ellipse:
    """Translational velocity ellipse of the hand from the eigenpairs of Jv Jv^T."""
    Jv = geometric_jacobian(params, q)[:2]
    w, v = np.linalg.eigh(Jv @ Jv.T)
    w = w[::-1]
    v = v[:, ::-1]
    degenerate = bool(w[-1] < 1e-12)
    return Ellipse(np.sqrt(np.clip(w, 0.0, None)), v, degenerate)


# ----------------------------------------------------------------------------
# dynamics


def _geometry(params: ArmParams, q):
    """Joint positions, COM positions and absolute link unit vectors."""
    l = params.link_lengths
    r = params.com_offsets
    th = (q[0], q[0] + q[1], q[0] + q[1] + q[2])
    u = [(math.cos(a), math.sin(a)) for a in th]
    p = [(0.0, 0.0)]
    for k in range(2):
        p.append((p[k][0] + l[k] * u[k][0], p[k][1] + l[k] * u[k][1]))
    c = [(p[k][0] + r[k] * u[k][0], p[k][1] + r[k] * u[k][1]) for k in range(3)]
    return p, c, u


def mass_matrix(params: ArmParams, q) -> np.ndarray:
    p, c, _ = _geometry(params, q)
    m = params.link_masses
    inert = params.link_inertias
    M = np.zeros((3, 3))
    for i in range(3):
        for j in range(i, 3):
            s = 0.0
            for k in range(j, 3):
                ax, ay = c[k][0] - p[i][0], c[k][1] - p[i][1]
                bx, by = c[k][0] - p[j][0], c[k][1] - p[j][1]
                s += m[k] * (ax * bx + ay * by) + inert[k]
            M[i, j] = M[j, i] = s
    return M


def mass_matrix_partials(params: ArmParams, q) -> np.ndarray:
    """dM[s] = dM/dq_s, shape (3, 3, 3)."""
    p, c, _ = _geometry(params, q)
    m = params.link_masses
    p = np.array(p)
    c = np.array(c)
    perp = lambda v: np.array([-v[1], v[0]])  # noqa: E731
    dM = np.zeros((3, 3, 3))
    for s in range(3):
        for k in range(3):
            if s > k:
                continue
            # derivative of the vector joint_i -> com_k with respect to q_s
            dv = [perp(c[k] - p[max(i, s)]) for i in range(3)]
            for i in range(k + 1):
                for j in range(k + 1):
                    vi = c[k] - p[i]
                    vj = c[k] - p[j]
                    dM[s, i, j] += m[k] * (dv[i] @ vj + vi @ dv[j])
    return dM


def coriolis_matrix(params: ArmParams, q, dq) -> np.ndarray:
    """Christoffel-symbol Coriolis/centrifugal matrix C(q, dq)."""
    dM = mass_matrix_partials(params, q)
    C = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            C[i, j] = 0.5 * sum(
                (dM[k, i, j] + dM[j, i, k] - dM[i, j, k]) * dq[k] for k in range(3)
            )
    return C


def velocity_product_torques(params: ArmParams, q, dq) -> np.ndarray:
    """h(q, dq) = C(q, dq) dq, evaluated directly from link accelerations."""
    return np.array(_dyn_terms(params, q, dq)[1])


def _dyn_terms(params: ArmParams, q, dq):
    # unrolled for speed; mass_matrix is the readable reference
    l1, l2, _ = params.link_lengths
    r1, r2, r3 = params.com_offsets
    m1, m2, m3 = params.link_masses
    i1, i2, i3 = params.link_inertias
    t1 = q[0]
    t2 = t1 + q[1]
    t3 = t2 + q[2]
    ux1, uy1 = math.cos(t1), math.sin(t1)
    ux2, uy2 = math.cos(t2), math.sin(t2)
    ux3, uy3 = math.cos(t3), math.sin(t3)
    p1x, p1y = l1 * ux1, l1 * uy1
    p2x, p2y = p1x + l2 * ux2, p1y + l2 * uy2
    # vectors from joint i to COM k
    d11x, d11y = r1 * ux1, r1 * uy1
    d22x, d22y = r2 * ux2, r2 * uy2
    d21x, d21y = p1x + d22x, p1y + d22y
    d33x, d33y = r3 * ux3, r3 * uy3
    d32x, d32y = l2 * ux2 + d33x, l2 * uy2 + d33y
    d31x, d31y = p2x + d33x, p2y + d33y
    w1 = dq[0]
    w2 = w1 + dq[1]
    w3 = w2 + dq[2]
    s1, s2, s3 = w1 * w1, w2 * w2, w3 * w3
    # COM accelerations with zero joint accelerations
    a1x, a1y = -r1 * s1 * ux1, -r1 * s1 * uy1
    bx, by = -l1 * s1 * ux1, -l1 * s1 * uy1
    a2x, a2y = bx - r2 * s2 * ux2, by - r2 * s2 * uy2
    bx, by = bx - l2 * s2 * ux2, by - l2 * s2 * uy2
    a3x, a3y = bx - r3 * s3 * ux3, by - r3 * s3 * uy3
    g3 = m3 * (d33x * a3y - d33y * a3x)
    g2 = m2 * (d22x * a2y - d22y * a2x) + m3 * (d32x * a3y - d32y * a3x)
    g1 = (m1 * (d11x * a1y - d11y * a1x) + m2 * (d21x * a2y - d21y * a2x)
          + m3 * (d31x * a3y - d31y * a3x))
    M33 = m3 * (d33x * d33x + d33y * d33y) + i3
    M23 = m3 * (d32x * d33x + d32y * d33y) + i3
    M13 = m3 * (d31x * d33x + d31y * d33y) + i3
    M22 = m2 * (d22x * d22x + d22y * d22y) + i2 + m3 * (d32x * d32x + d32y * d32y) + i3
    M12 = (m2 * (d21x * d22x + d21y * d22y) + i2
           + m3 * (d31x * d32x + d31y * d32y) + i3)
    M11 = (m1 * (d11x * d11x + d11y * d11y) + i1 + m2 * (d21x * d21x + d21y * d21y) + i2
           + m3 * (d31x * d31x + d31y * d31y) + i3)
    M = ((M11, M12, M13), (M12, M22, M23), (M13, M23, M33))
    p = ((0.0, 0.0), (p1x, p1y), (p2x, p2y))
    u = ((ux1, uy1), (ux2, uy2), (ux3, uy3))
    return M, (g1, g2, g3), p, u


def kinetic_energy(params: ArmParams, q, dq) -> float:
    dq = np.asarray(dq, dtype=float)
    return 0.5 * float(dq @ mass_matrix(params, q) @ dq)


def _solve3(M, b):
    # Cholesky on a 3x3 SPD matrix
    a11 = math.sqrt(M[0][0])
    a21 = M[1][0] / a11
    a31 = M[2][0] / a11
    a22 = math.sqrt(M[1][1] - a21 * a21)
    a32 = (M[2][1] - a31 * a21) / a22
    a33 = math.sqrt(M[2][2] - a31 * a31 - a32 * a32)
    y1 = b[0] / a11
    y2 = (b[1] - a21 * y1) / a22
    y3 = (b[2] - a31 * y1 - a32 * y2) / a33
    x3 = y3 / a33
    x2 = (y2 - a32 * x3) / a22
    x1 = (y1 - a21 * x2 - a31 * x3) / a11
    return x1, x2, x3


def joint_accelerations(params: ArmParams, q, dq, tau, wrench=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Solve M(q) qdd = tau + J^T W - C(q, dq) dq - D dq for qdd."""
    return np.array(_qdd(params, q, dq, tau, wrench))


def _qdd(params, q, dq, tau, wrench):
    M, h, p, u = _dyn_terms(params, q, dq)
    d = params.joint_damping
    fx, fy, mz = wrench
    b = [tau[i] - h[i] - d[i] * dq[i] for i in range(3)]
    if fx or fy or mz:
        l3 = params.link_lengths[2]
        off = params.tip_offset
        hx = p[2][0] + l3 * u[2][0] - off * u[2][1]
        hy = p[2][1] + l3 * u[2][1] + off * u[2][0]
        for i in range(3):
            rx, ry = hx - p[i][0], hy - p[i][1]
            b[i] += rx * fy - ry * fx + mz
    return _solve3(M, b)


def step_dynamics(
    params: ArmParams,
    state: ArmState,
    tau,
    external_wrench: Wrench2 | None = None,
    dt_target: float = 1e-3,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> ArmState:
    """Advance the arm by exactly ``dt_target`` under constant joint torques.

    Uses an embedded Dormand-Prince 4(5) pair with internal steps clamped to
    [1e-5, 1e-3] s. Raises ``IntegrationError`` if the tolerance cannot be
    met at the minimum step.
    """
    if not (1e-5 - 1e-15 <= dt_target <= 1e-3 + 1e-15):
        raise ValueError(f"dt_target {dt_target} outside [1e-5, 1e-3] s")
    tau = tuple(float(v) for v in tau)
    if not all(math.isfinite(v) for v in tau):
        raise ValueError("non-finite torque")
    w = (0.0, 0.0, 0.0) if external_wrench is None else (
        external_wrench.fx, external_wrench.fy, external_wrench.mz)

    def rhs(_t, y):
        qdd = _qdd(params, y[:3], y[3:], tau, w)
        return (y[3], y[4], y[5], qdd[0], qdd[1], qdd[2])

    y0 = [*state.q, *state.dq]
    h0 = state.step_hint or dt_target
    y1, h_next = dopri45_advance(
        rhs, state.t, y0, dt_target, h0, hmin=1e-5, hmax=1e-3, rtol=rtol, atol=atol
    )
    return ArmState(y1[:3], y1[3:], state.t + dt_target, step_hint=h_next)
