"""Force profiles and the divergence/convergence state machine."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpmc.fic import (
    CONVERGENCE,
    DIVERGENCE,
    FicState,
    ForceProfile,
    InvalidProfileError,
    fic_effort,
    fic_energy_audit,
    profile_force,
    stored_energy,
    tanh_force,
    two_plateau_force,
)
from hpmc.selftest import check_fic_passivity

LIN = ForceProfile.linear(K0=100.0, F_max=20.0)
TANH = ForceProfile.tanh(K0=500.0, x_b=0.05, F_max=50.0)
TWO = ForceProfile.two_plateau(F_mid=5.0, F_max=20.0, x_1=0.01, x_2=0.05)
PROFILES = [LIN, TANH, TWO]


# ---------------------------------------------------------------------------
# profiles


def test_linear_region():
    assert profile_force(LIN, 0.05) == pytest.approx(5.0)
    assert profile_force(LIN, 1.0) == 20.0
    assert profile_force(LIN, -1.0) == -20.0


def test_tanh_knee_continuity():
    K0, x_b = TANH.K0, TANH.x_b
    F0 = 0.95 * K0 * x_b
    assert profile_force(TANH, 0.95 * x_b) == pytest.approx(F0, rel=1e-15)
    assert profile_force(TANH, 0.95 * x_b * (1 + 1e-12)) == pytest.approx(F0, rel=1e-9)


def test_tanh_saturates_at_f_max():
    assert profile_force(TANH, 10.0) == pytest.approx(50.0, rel=1e-12)
    assert profile_force(TANH, 1e6) <= 50.0


def test_tanh_matches_closed_form_above_knee():
    e = 0.07
    F0 = 0.95 * 500 * 0.05
    expected = F0 + (50 - F0) * math.tanh((e - 0.95 * 0.05) / (0.1353 * 0.05))
    assert tanh_force(500.0, 0.05, 50.0, e) == pytest.approx(expected, rel=1e-15)


def test_two_plateau_breakpoints():
    assert profile_force(TWO, 0.005) == pytest.approx(2.5)
    assert profile_force(TWO, 0.01) == pytest.approx(5.0)
    assert profile_force(TWO, 0.03) == 5.0
    assert profile_force(TWO, 0.05) == 5.0
    assert profile_force(TWO, 0.075) == pytest.approx(12.5)
    assert profile_force(TWO, 0.1) == pytest.approx(20.0)
    assert profile_force(TWO, 5.0) == 20.0
    assert two_plateau_force(5.0, 20.0, 0.01, 0.05, -0.03) == -5.0


@pytest.mark.parametrize("prof", PROFILES)
def test_profiles_odd_and_continuous(prof):
    # scan well past every breakpoint
    e = np.linspace(-0.3, 0.3, 10001)
    f = np.array([profile_force(prof, x) for x in e])
    assert np.array_equal(f, [-profile_force(prof, -x) for x in e])
    # a step of 6e-5 in error moves the force by at most K0 * step
    slope = max(prof.K0, prof.F_max / 0.01)
    assert np.abs(np.diff(f)).max() <= slope * (e[1] - e[0]) * (1 + 1e-9)


@given(st.floats(-1.0, 1.0, allow_nan=False))
def test_profiles_bounded(e):
    for prof in PROFILES:
        assert abs(profile_force(prof, e)) <= prof.F_max


@pytest.mark.parametrize(
    "make",
    [
        lambda: ForceProfile("cubic"),
        lambda: ForceProfile.linear(K0=-1.0, F_max=1.0),
        lambda: ForceProfile.linear(K0=1.0, F_max=0.0),
        lambda: ForceProfile.tanh(K0=2000.0, x_b=0.05, F_max=50.0),  # K0 > F_max/x_b
        lambda: ForceProfile.two_plateau(F_mid=1.0, F_max=2.0, x_1=0.05, x_2=0.01),
        lambda: ForceProfile.two_plateau(F_mid=3.0, F_max=2.0, x_1=0.01, x_2=0.05),
    ],
)
def test_invalid_profiles_rejected(make):
    with pytest.raises(InvalidProfileError):
        make()


# ---------------------------------------------------------------------------
# state machine


def test_zero_error_zero_effort():
    f, s = fic_effort(LIN, FicState(), 0.0, 0.0)
    assert f == 0.0 and s.phase == DIVERGENCE


def test_divergence_tracks_max_error():
    s = FicState()
    for e in (0.01, 0.02, 0.03):
        f, s = fic_effort(LIN, s, e, 1.0)
        assert f == pytest.approx(-profile_force(LIN, e))
    assert s.x_max == pytest.approx(0.03) and s.sign == 1


def test_convergence_midpoint_spring():
    s = FicState()
    _, s = fic_effort(LIN, s, 0.1, 1.0)
    f, s = fic_effort(LIN, s, 0.1, -1.0)
    assert s.phase == CONVERGENCE
    # starts at -F(x_max), zero at the midpoint, +F(x_max) at the crossing
    assert f == pytest.approx(-profile_force(LIN, 0.1))
    f, s = fic_effort(LIN, s, 0.05, -1.0)
    assert f == pytest.approx(0.0, abs=1e-15)
    f, s = fic_effort(LIN, s, 1e-12, -1.0)
    assert f == pytest.approx(profile_force(LIN, 0.1), rel=1e-9)


def test_zero_crossing_resets():
    s = FicState()
    _, s = fic_effort(LIN, s, 0.1, 1.0)
    _, s = fic_effort(LIN, s, 0.05, -1.0)
    f, s = fic_effort(LIN, s, -0.01, -1.0)
    assert s.phase == DIVERGENCE and s.sign == -1 and s.x_max == pytest.approx(0.01)
    assert f == pytest.approx(-profile_force(LIN, -0.01))


def test_reentry_from_convergence():
    s = FicState()
    _, s = fic_effort(LIN, s, 0.1, 1.0)
    _, s = fic_effort(LIN, s, 0.06, -1.0)
    f, s = fic_effort(LIN, s, 0.07, 1.0)
    assert s.phase == DIVERGENCE and s.x_max == pytest.approx(0.07)
    assert f == pytest.approx(-profile_force(LIN, 0.07))


def test_deadband_keeps_divergence_at_turning_point():
    s = FicState()
    _, s = fic_effort(LIN, s, 0.1, 1.0)
    _, s = fic_effort(LIN, s, 0.1, -1e-12)
    assert s.phase == DIVERGENCE


def test_accepts_plain_callable():
    f, _ = fic_effort(lambda e: 3.0 * e, FicState(), 0.5, 1.0)
    assert f == -1.5


def test_release_from_rest_is_half_cycle_harmonic():
    # point mass under the convergence law, integrated finely; oracle is
    # x(t) = (x_max/2)(cos(w t) + 1), w = sqrt(2 F(x_max) / (x_max m))
    m, x_max = 2.0, 0.1
    prof = TANH
    w = math.sqrt(2 * profile_force(prof, x_max) / (x_max * m))
    s = FicState()
    _, s = fic_effort(prof, s, x_max, 1.0)
    x, v, dt = x_max, 0.0, 1e-5
    t, peak, worst = 0.0, 0.0, 0.0
    f, s = fic_effort(prof, s, x, -1.0)
    while t < math.pi / w - dt / 2:
        v += 0.5 * dt * f / m
        x += dt * v
        f, s = fic_effort(prof, s, x, v if v != 0.0 else -1.0)
        v += 0.5 * dt * f / m
        t += dt
        peak = max(peak, abs(v))
        worst = max(worst, abs(x - 0.5 * x_max * (math.cos(w * t) + 1)))
    assert worst < 1e-6 * x_max
    assert abs(x) < 1e-6 * x_max
    assert abs(v) < 1e-3 * peak
    assert peak == pytest.approx(0.5 * x_max * w, rel=1e-6)


def test_stored_energy_linear():
    assert stored_energy(LIN, 0.1) == pytest.approx(0.5 * 100 * 0.01, rel=1e-9)
    assert stored_energy(LIN, 0.0) == 0.0


# ---------------------------------------------------------------------------
# energy audit


def _run(prof, errs):
    s = FicState()
    trace = []
    prev = errs[0]
    for e in errs:
        f, s = fic_effort(prof, s, float(e), float(e - prev))
        trace.append((float(e), f))
        prev = e
    return trace


def test_audit_empty_trace():
    assert fic_energy_audit([]) == 0.0


def test_out_and_back_linear_returns_no_energy():
    # analytic: divergence absorbs E; the midpoint spring does zero net work
    # over x_max -> 0, so the controller injects -E over the excursion
    errs = np.concatenate([np.linspace(0, 0.1, 20001), np.linspace(0.1, 0, 20001)[1:]])
    work = fic_energy_audit(_run(LIN, errs))
    E = stored_energy(LIN, 0.1)
    assert work <= 1e-9 * E
    # first-order sampling error at the phase switch: one step of 5e-6
    assert work == pytest.approx(-E, rel=1e-4)


def test_saturated_sinusoid_is_passive():
    t = np.linspace(0, 3, 30001)
    errs = 0.2 * np.sin(2 * math.pi * t) * np.exp(-0.3 * t)
    errs[-1] = 0.0
    work = fic_energy_audit(_run(TANH, errs))
    assert work <= 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.001, 0.3), min_size=1, max_size=6), st.sampled_from(PROFILES))
def test_random_excursions_passive(peaks, prof):
    # piecewise monotone out-and-back legs with alternating sign
    pts = [0.0]
    for k, p in enumerate(peaks):
        pts += [p * (-1) ** k, 0.0]
    errs = np.concatenate([np.linspace(a, b, 2001)[:-1] for a, b in zip(pts[:-1], pts[1:])] + [[0.0]])
    trace = _run(prof, errs)
    work = fic_energy_audit(trace)
    E = max(stored_energy(prof, p) for p in peaks)
    assert work <= 1e-9 * E
    assert max(abs(f) for _, f in trace) <= 2 * prof.F_max


def test_selftest_passivity_check():
    assert check_fic_passivity(n=20).passed


def test_deterministic_state_sequence():
    errs = np.sin(np.linspace(0, 10, 5000)) * 0.1
    assert _run(TWO, errs) == _run(TWO, errs)
