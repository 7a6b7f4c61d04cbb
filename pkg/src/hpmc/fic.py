"""Fractal impedance controller (FIC) primitive.

A scalar FIC pushes an error back toward zero. While the error grows
(divergence) it applies a bounded force profile; once the error turns back
(convergence) it switches to a linear spring centred at half of the largest
error reached, so the plant arrives at zero error with the velocity it had
at the turning point removed. Sign convention: ``err`` is measured as
``current - desired`` and the returned effort acts on the plant, so a
positive error produces a negative effort.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

__all__ = [
    "LINEAR",
    "TANH",
    "TWO_PLATEAU",
    "DIVERGENCE",
    "CONVERGENCE",
    "InvalidProfileError",
    "ForceProfile",
    "FicState",
    "profile_force",
    "tanh_force",
    "two_plateau_force",
    "fic_effort",
    "fic_energy_audit",
    "stored_energy",
]

LINEAR = "linear-saturated"
TANH = "tanh-saturated"
TWO_PLATEAU = "two-plateau"

DIVERGENCE = "divergence"
CONVERGENCE = "convergence"

# turning-point detection threshold on err * d_err
DEADBAND = 1e-9

# shape constants of the tanh-saturated profile
_KNEE = 0.95
_WIDTH = 0.1353


class InvalidProfileError(ValueError):
    pass


@dataclass(frozen=True)
class ForceProfile:
    variant: str
    K0: float = 0.0
    F_max: float = 1.0
    x_b: float | None = None
    F_mid: float | None = None
    x_1: float | None = None
    x_2: float | None = None

    def __post_init__(self):
        if self.variant not in (LINEAR, TANH, TWO_PLATEAU):
            raise InvalidProfileError(f"unknown profile variant {self.variant!r}")
        if not (self.F_max > 0.0 and math.isfinite(self.F_max)):
            raise InvalidProfileError(f"F_max must be positive, got {self.F_max}")
        if self.variant in (LINEAR, TANH) and not (self.K0 >= 0.0 and math.isfinite(self.K0)):
            raise InvalidProfileError(f"K0 must be non-negative, got {self.K0}")
        if self.variant == TANH:
            if self.x_b is None or not self.x_b > 0.0:
                raise InvalidProfileError("tanh-saturated profile needs x_b > 0")
            if self.K0 > self.F_max / self.x_b * (1.0 + 1e-12):
                raise InvalidProfileError(
                    f"K0={self.K0} exceeds F_max/x_b={self.F_max / self.x_b}"
                )
        if self.variant == TWO_PLATEAU:
            if self.x_1 is None or self.x_2 is None or not (0.0 < self.x_1 < self.x_2):
                raise InvalidProfileError("two-plateau profile needs 0 < x_1 < x_2")
            if self.F_mid is None or not (0.0 <= self.F_mid <= self.F_max):
                raise InvalidProfileError("two-plateau profile needs 0 <= F_mid <= F_max")

    @classmethod
    def linear(cls, K0: float, F_max: float) -> "ForceProfile":
        return cls(LINEAR, K0=K0, F_max=F_max)

    @classmethod
    def tanh(cls, K0: float, x_b: float, F_max: float) -> "ForceProfile":
        return cls(TANH, K0=K0, F_max=F_max, x_b=x_b)

    @classmethod
    def two_plateau(cls, F_mid: float, F_max: float, x_1: float, x_2: float) -> "ForceProfile":
        return cls(TWO_PLATEAU, F_max=F_max, F_mid=F_mid, x_1=x_1, x_2=x_2)

    def __call__(self, err: float) -> float:
        return profile_force(self, err)


def tanh_force(K0: float, x_b: float, F_max: float, err: float) -> float:
    a = abs(err)
    knee = _KNEE * x_b
    if a <= knee:
        return K0 * err
    F0 = K0 * knee
    f = F0 + (F_max - F0) * math.tanh((a - knee) / (_WIDTH * x_b))
    return f if err > 0 else -f


def two_plateau_force(F_mid: float, F_max: float, x_1: float, x_2: float, err: float) -> float:
    a = abs(err)
    if a <= x_1:
        f = F_mid * a / x_1
    elif a <= x_2:
        f = F_mid
    elif a < 2.0 * x_2:
        f = F_mid + (F_max - F_mid) * (a - x_2) / x_2
    else:
        f = F_max
    return f if err >= 0 else -f


def profile_force(profile: ForceProfile, err: float) -> float:
    """Restoring effort magnitude with the sign of ``err`` (an odd function)."""
    v = profile.variant
    if v == LINEAR:
        f = profile.K0 * err
        return max(-profile.F_max, min(profile.F_max, f))
    if v == TANH:
        return tanh_force(profile.K0, profile.x_b, profile.F_max, err)
    return two_plateau_force(profile.F_mid, profile.F_max, profile.x_1, profile.x_2, err)


class FicState(NamedTuple):
    phase: str = DIVERGENCE
    x_max: float = 0.0
    sign: int = 0


def fic_effort(force, state: FicState, err: float, d_err: float) -> tuple[float, FicState]:
    """One FIC update.

    ``force`` is a ForceProfile or any odd callable ``err -> effort``. The
    divergence branch returns ``-F(err)``; the convergence branch returns the
    midpoint spring ``-(2 F(x_max) / x_max) (err - sign x_max / 2)``. The
    state resets to a fresh divergence whenever the error reaches or crosses
    zero, and re-enters divergence from the current error when the error
    grows again during convergence.
    """
    phase, x_max, sign = state
    a = abs(err)
    s = 1 if err > 0.0 else (-1 if err < 0.0 else 0)
    if s == 0 or s != sign:
        # zero crossing, or first excursion
        phase, x_max, sign = DIVERGENCE, 0.0, s
    rate = err * d_err
    if phase == DIVERGENCE:
        if rate < -DEADBAND and x_max > 0.0:
            phase = CONVERGENCE
    elif rate > DEADBAND or a > x_max:
        phase, x_max = DIVERGENCE, 0.0

    if phase == DIVERGENCE:
        if a > x_max:
            x_max = a
        effort = -force(err)
    else:
        fm = abs(force(x_max))
        effort = -(2.0 * fm / x_max) * (err - sign * 0.5 * x_max)
    return effort, FicState(phase, x_max, sign)


def stored_energy(force, err: float, n: int = 2001) -> float:
    """Integral of |F| from 0 to |err| (the divergence work at that error)."""
    a = abs(err)
    if a == 0.0:
        return 0.0
    total = 0.0
    prev = abs(force(0.0))
    for i in range(1, n):
        cur = abs(force(a * i / (n - 1)))
        total += 0.5 * (prev + cur) * a / (n - 1)
        prev = cur
    return total


def fic_energy_audit(trace: Iterable[tuple[float, float]]) -> float:
    """Net work injected into the plant over a sampled (err, effort) trace.

    Trapezoidal estimate of the integral of effort d(err). For a fixed
    target, d(err) is the plant displacement, so a passive controller yields
    a non-positive value over any excursion that returns to zero error.
    """
    work = 0.0
    prev = None
    for err, effort in trace:
        if prev is not None:
            work += 0.5 * (prev[1] + effort) * (err - prev[0])
        prev = (err, effort)
    return work
