"""Embedded Dormand-Prince 5(4) integrator with clamped adaptive steps."""

from __future__ import annotations

import math

import numpy as np


class IntegrationError(RuntimeError):
    """Step control could not meet the tolerance at the minimum step."""


# Dormand & Prince (1980) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# difference between 5th and embedded 4th order weights
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def dopri45_advance(f, t0, y0, span, h0, hmin, hmax, rtol, atol):
    """Integrate ``y' = f(t, y)`` from ``t0`` to exactly ``t0 + span``.

    Internal steps are kept within ``[hmin, hmax]``; only the final step may
    be shorter so that the end time is hit exactly. Returns the end state and
    the step size suggested for a continuation.

    The state is handled as a list of floats, which is much faster than
    numpy for the handful of entries a small rigid-body model has. ``f``
    must return a sequence of the same length.
    """
    t = 0.0
    y = [float(v) for v in y0]
    n = len(y)
    rng = range(n)
    h = min(max(h0, hmin), hmax)
    k = [None] * 7
    k[0] = f(t0, y)
    h_suggest = h
    while t < span:
        remaining = span - t
        last = h >= remaining * (1.0 - 1e-12)
        step = remaining if last else h
        for i in range(1, 7):
            terms = [(step * a, k[j]) for j, a in enumerate(_A[i]) if a != 0.0]
            yi = [y[m] + sum(c * kj[m] for c, kj in terms) for m in rng]
            k[i] = f(t0 + t + _C[i] * step, yi)
        y_new = yi  # row 7 of the tableau equals the 5th-order weights (FSAL)
        eterms = [(step * e, k[j]) for j, e in enumerate(_E) if e != 0.0]
        acc = 0.0
        for m in rng:
            ev = sum(c * kj[m] for c, kj in eterms)
            sc = atol + rtol * max(abs(y[m]), abs(y_new[m]))
            acc += (ev / sc) ** 2
        err = math.sqrt(acc / n)
        if err <= 1.0:
            t = span if last else t + step
            y = y_new
            k[0] = k[6]
            factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, _SAFETY * err ** -0.2)
            if not last:
                h = min(hmax, max(hmin, step * factor))
                h_suggest = h
            else:
                # a shortened final step says little about the next one
                h_suggest = min(hmax, max(hmin, max(h, step * factor) if step < h else step * factor))
        else:
            if step <= hmin * (1.0 + 1e-12):
                raise IntegrationError(
                    f"error norm {err:.3g} exceeds tolerance at minimum step {hmin:g} s"
                    f" (t = {t0 + t:.6f} s)"
                )
            factor = max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            h = max(hmin, step * factor)
    return np.array(y), h_suggest
