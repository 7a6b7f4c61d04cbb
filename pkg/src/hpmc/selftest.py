"""Fast invariant checks shared by the ``selftest`` command and the tests.

Each check returns a :class:`CheckResult`; none of them needs a full
experiment run.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .analysis import (
    HARMONIC,
    MINIMUM_JERK,
    R_HARMONIC,
    R_MINIMUM_JERK,
    ReferenceTrajectory,
    r_value,
    reference_eval,
)
from .arm import ArmParams, ArmState, kinetic_energy, link_points, point_jacobian, step_dynamics
from .fic import ForceProfile, fic_effort, fic_energy_audit, stored_energy, FicState
from .posture import arm_ik

__all__ = [
    "CheckResult",
    "check_fk_ik",
    "check_jacobian",
    "check_energy_drift",
    "check_fic_passivity",
    "check_r_oracles",
    "run_selftest",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.2f} s)"


def _random_reachable_wrists(params: ArmParams, n: int, rng) -> np.ndarray:
    lA, lFA, _ = params.link_lengths
    r_lo, r_hi = abs(lA - lFA), lA + lFA
    # keep a small margin from both boundaries of the annulus
    r = rng.uniform(r_lo + 0.02 * (r_hi - r_lo), r_hi - 0.02 * (r_hi - r_lo), n)
    a = rng.uniform(-math.pi, math.pi, n)
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def check_fk_ik(
    params: ArmParams | None = None,
    fk_params: ArmParams | None = None,
    n: int = 500,
    tol: float = 1e-9,
    seed: int = 0,
) -> CheckResult:
    """Forward kinematics of the closed-form solution returns the request.

    ``fk_params`` lets a caller evaluate forward kinematics with a different
    model than the solver used, which must make the check fail.
    """
    t0 = time.perf_counter()
    params = params or ArmParams()
    fk_params = fk_params or params
    rng = np.random.default_rng(seed)
    wrists = _random_reachable_wrists(params, n, rng)
    phis = rng.uniform(-math.pi, math.pi, n)
    worst = 0.0
    for X_W, phi in zip(wrists, phis):
        for branch in (1, -1):
            post = arm_ik(X_W, phi, params, branch)
            _, wrist, hand, th = link_points(fk_params, post.Q_d)
            lH = params.link_lengths[2]
            hand_req = X_W + lH * np.array([math.cos(phi), math.sin(phi)])
            worst = max(
                worst,
                float(np.hypot(*(wrist - X_W))),
                float(np.hypot(*(hand - hand_req))),
            )
    return CheckResult(
        "FK(IK(x)) identity", worst < tol, f"max error {worst:.2e} m over {n} poses x 2 branches",
        time.perf_counter() - t0,
    )


def check_jacobian(params: ArmParams | None = None, n: int = 1000, tol: float = 1e-5, seed: int = 1) -> CheckResult:
    """Analytic point Jacobians against central finite differences."""
    t0 = time.perf_counter()
    params = params or ArmParams()
    rng = np.random.default_rng(seed)
    h = 1e-6
    worst = 0.0
    for _ in range(n):
        q = rng.uniform(-math.pi, math.pi, 3)
        for link in range(3):
            J = point_jacobian(params, q, link)
            fd = np.zeros((3, 3))
            for j in range(3):
                dq = np.zeros(3)
                dq[j] = h
                pp = link_points(params, q + dq)
                pm = link_points(params, q - dq)
                fd[:2, j] = (pp[link] - pm[link]) / (2 * h)
                fd[2, j] = (pp[3][link] - pm[3][link]) / (2 * h)
            scale = max(1.0, float(np.abs(J).max()))
            worst = max(worst, float(np.abs(J - fd).max()) / scale)
    return CheckResult(
        "Jacobian vs finite differences", worst < tol, f"max relative error {worst:.2e} over {n} postures",
        time.perf_counter() - t0,
    )


def check_energy_drift(params: ArmParams | None = None, duration: float = 1.0, tol: float = 1e-6) -> CheckResult:
    """Undamped, unforced plant conserves kinetic energy."""
    t0 = time.perf_counter()
    params = params or ArmParams()
    params = ArmParams(
        link_lengths=params.link_lengths,
        link_masses=params.link_masses,
        link_inertias=params.link_inertias,
        com_offsets=params.com_offsets,
        joint_damping=(0.0, 0.0, 0.0),
        joint_torque_limits=params.joint_torque_limits,
    )
    state = ArmState(np.array([0.3, 1.2, -0.7]), np.array([1.5, -2.0, 3.0]), 0.0)
    e0 = kinetic_energy(params, state.q, state.dq)
    worst = 0.0
    for _ in range(int(round(duration * 1000))):
        state = step_dynamics(params, state, (0.0, 0.0, 0.0))
        worst = max(worst, abs(kinetic_energy(params, state.q, state.dq) - e0) / e0)
    rate = worst / duration
    return CheckResult(
        "plant energy drift", rate < tol, f"relative drift {rate:.2e} per s (E0 = {e0:.3f} J)",
        time.perf_counter() - t0,
    )


def _excursion_trace(rng, n_legs: int, amp: float, step: float):
    """Piecewise-linear error path starting and ending at zero."""
    pts = [0.0]
    sign = rng.choice((-1.0, 1.0))
    for k in range(n_legs - 1):
        if k % 2 == 0:
            pts.append(pts[-1] + sign * rng.uniform(0.2, 1.0) * amp)
        else:
            # partial return, possibly crossing zero
            pts.append(pts[-1] * rng.uniform(-0.5, 0.9))
    pts.append(0.0)
    errs, rates = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        m = max(2, int(abs(b - a) / step))
        seg = np.linspace(a, b, m, endpoint=False)
        errs.extend(seg)
        rates.extend([b - a] * m)
    errs.append(0.0)
    rates.append(0.0)
    return np.array(errs), np.array(rates)


def check_fic_passivity(n: int = 100, tol: float = 1e-9, seed: int = 2) -> CheckResult:
    """Net work from the controller over closed excursions is at most ``tol`` E."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    profiles = [
        ForceProfile.linear(K0=500.0, F_max=20.0),
        ForceProfile.tanh(K0=500.0, x_b=0.05, F_max=50.0),
        ForceProfile.two_plateau(F_mid=5.0, F_max=20.0, x_1=0.01, x_2=0.05),
    ]
    worst = -math.inf
    for i in range(n):
        prof = profiles[i % len(profiles)]
        amp = rng.uniform(0.01, 0.2)
        errs, rates = _excursion_trace(rng, int(rng.integers(2, 8)), amp, amp * 1e-4)
        state = FicState()
        trace = []
        for e, r in zip(errs, rates):
            f, state = fic_effort(prof, state, float(e), float(r))
            trace.append((float(e), f))
        work = fic_energy_audit(trace)
        energy = stored_energy(prof, float(np.abs(errs).max()))
        worst = max(worst, work / energy)
    return CheckResult(
        "FIC net work over excursions", worst <= tol,
        f"max net work / stored energy {worst:.3e} over {n} traces", time.perf_counter() - t0,
    )


def check_r_oracles(tol: float = 1e-3) -> CheckResult:
    t0 = time.perf_counter()
    out = {}
    for kind in (MINIMUM_JERK, HARMONIC):
        ref = ReferenceTrajectory(kind, 0.1, 0.7)
        _, v = reference_eval(ref, np.linspace(0.0, 0.7, 100001))
        out[kind] = r_value(v, 0.0)
    ok = abs(out[MINIMUM_JERK] - R_MINIMUM_JERK) <= tol and abs(out[HARMONIC] - R_HARMONIC) <= tol
    return CheckResult(
        "r oracles", ok,
        f"minimum jerk {out[MINIMUM_JERK]:.5f}, harmonic {out[HARMONIC]:.5f}",
        time.perf_counter() - t0,
    )


def run_selftest(params: ArmParams | None = None, fk_params: ArmParams | None = None) -> list[CheckResult]:
    return [
        check_fk_ik(params, fk_params),
        check_jacobian(params),
        check_energy_drift(params),
        check_fic_passivity(),
        check_r_oracles(),
    ]
