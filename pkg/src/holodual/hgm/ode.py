"""Dormand-Prince 5(4) integrator with PI step-size control.

Written in-house rather than taken from :func:`scipy.integrate.solve_ivp`
because the HGM needs three things the library call does not offer together:
many independent states advanced with one shared step sequence, exact stops at
segment ends without dense-output interpolation, and a step size that carries
over from one path segment to the next.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import StepUnderflowError

__all__ = ["OdeResult", "dopri45"]

# Butcher tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
_A_PAD = np.zeros((7, 6))
for _i, _row in enumerate(_A):
    _A_PAD[_i, :len(_row)] = _row

SAFETY = 0.9
MIN_FACTOR, MAX_FACTOR = 0.2, 5.0
# PI gains for a 5th-order pair (Gustafsson)
_ALPHA, _BETA = 0.7 / 5, 0.4 / 5


@dataclass
class OdeResult:
    y: np.ndarray
    h_last: float
    steps: int
    rejected: int


def _error_norm(err, y_old, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.max(np.abs(err) / scale))


def dopri45(rhs: Callable[[float, np.ndarray], np.ndarray], y0, t0: float, t1: float,
            rtol: float = 1e-10, atol: float = 1e-12, h0: float | None = None,
            h_floor: float | None = None) -> OdeResult:
    """Integrate ``y' = rhs(t, y)`` from `t0` to exactly `t1`.

    `y0` may have any shape; the error norm is the max over all components,
    so batched states share one step sequence.  The FSAL property is used.

    Raises
    ------
    StepUnderflowError
        If an accepted step would have to be shorter than ``h_floor``
        (default ``1e-14 * |t1 - t0|``).
    """
    y = np.array(y0, dtype=float, copy=True)
    span = t1 - t0
    if span == 0:
        return OdeResult(y, h0 or 0.0, 0, 0)
    direction = np.sign(span)
    length = abs(span)
    floor = 1e-14 * length if h_floor is None else h_floor
    h = min(abs(h0) if h0 else 0.01 * length, length)
    t = t0
    k1 = rhs(t, y)
    K = np.empty((7,) + y.shape)
    err_prev = 1.0
    steps = rejected = 0
    while direction * (t1 - t) > 0:
        remaining = abs(t1 - t)
        last = h >= remaining
        step = remaining if last else h
        hs = direction * step
        K[0] = k1
        for i in range(1, 7):
            yi = y + hs * np.tensordot(_A_PAD[i, :i], K[:i], 1)
            K[i] = rhs(t + _C[i] * hs, yi)
        y_new = y + hs * np.tensordot(_B5, K, 1)
        err = hs * np.tensordot(_E, K, 1)
        en = _error_norm(err, y, y_new, rtol, atol)
        if en <= 1.0:
            t = t1 if last else t + hs
            y = y_new
            k1 = K[6].copy()
            steps += 1
            if en == 0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * en ** (-_ALPHA) * err_prev ** _BETA
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            # keep the carried-over step meaningful when the last step was clipped
            h = max(h, step) * factor if last else step * factor
            err_prev = max(en, 1e-4)
        else:
            rejected += 1
            h = step * max(MIN_FACTOR, SAFETY * en ** (-1 / 5))
            if h < floor:
                raise StepUnderflowError(
                    f"step size {h:.3e} fell below floor {floor:.3e} at t={t:.6g}")
    return OdeResult(y, h, steps, rejected)
