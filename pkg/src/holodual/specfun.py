"""Special functions: gamma, Gauss 2F1, erf, Dawson's integral, Hermite He_n.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import special as _sp

from .errors import ConvergenceError, DomainError, PoleError

__all__ = [
    "HypergeometricParams",
    "gamma",
    "gauss_2f1",
    "gauss_2f1_derivative",
    "contiguity_raise_a",
    "contiguity_raise_b",
    "erf",
    "dawson",
    "hermite_prob",
]

#: Above this argument the 2F1 series is evaluated after Euler's transformation.
EULER_SWITCH = 0.75
MAX_TERMS = 10_000


class HypergeometricParams(NamedTuple):
    a: float
    b: float
    c: float
    z: float


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def gamma(x: float) -> float:
    """Euler's gamma function.

    Raises
    ------
    PoleError
        If `x` is zero or a negative integer.
    """
    if _is_nonpositive_integer(x):
        raise PoleError(f"gamma has a pole at {x}")
    return math.gamma(x)


def _series_2f1(a, b, c, z, rtol, max_terms):
    total = 1.0
    term = 1.0
    for k in range(max_terms):
        ratio = (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        term *= ratio
        total += term
        if term == 0.0:
            return total
        # remaining terms decay at least geometrically with factor max(|ratio|, z)
        q = max(abs(ratio), z)
        if q < 1.0 and abs(term) * q / (1.0 - q) <= rtol * abs(total):
            return total
    raise ConvergenceError(
        f"2F1({a}, {b}; {c}; {z}) series did not converge within {max_terms} terms"
    )


def gauss_2f1(a: float, b: float, c: float, z: float, *, rtol: float = 1e-13,
              max_terms: int = MAX_TERMS) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real 0 <= z < 1.

    The power series is summed directly for ``z <= 0.75``.  Beyond that the
    Euler transformation ``(1-z)**(c-a-b) * 2F1(c-a, c-b; c; z)`` is used,
    which terminates or decays much faster for the half-integer parameters
    arising from Gaussian moments.

    Raises
    ------
    DomainError
        For ``z`` outside ``[0, 1)`` or ``c`` a non-positive integer.
    ConvergenceError
        If `max_terms` terms do not reach the relative tolerance.
    """
    if not 0.0 <= z < 1.0:
        raise DomainError(f"gauss_2f1 requires 0 <= z < 1, got z={z}")
    if _is_nonpositive_integer(c):
        raise DomainError(f"gauss_2f1 undefined for c={c}")
    if z == 0.0:
        return 1.0
    if z > EULER_SWITCH:
        return (1.0 - z) ** (c - a - b) * _series_2f1(c - a, c - b, c, z, rtol, max_terms)
    return _series_2f1(a, b, c, z, rtol, max_terms)


def gauss_2f1_derivative(a: float, b: float, c: float, z: float, **kw) -> float:
    """d/dz 2F1(a, b; c; z) = (ab/c) 2F1(a+1, b+1; c+1; z)."""
    return a * b / c * gauss_2f1(a + 1, b + 1, c + 1, z, **kw)


def contiguity_raise_a(a: float, b: float, z: float, value: float, derivative: float) -> float:
    """2F1(a+1, b; 1/2; z) from 2F1(a, b; 1/2; z) and its z-derivative.

    Uses ``(1/a)(z d/dz + a)``; `b` only documents which function is shifted.
    """
    del b
    if a == 0:
        raise DomainError("contiguity relation in a requires a != 0")
    return (z * derivative + a * value) / a


def contiguity_raise_b(a: float, b: float, z: float, value: float, derivative: float) -> float:
    """2F1(a, b+1; 1/2; z) by the contiguity relation in b."""
    del a
    if b == 0:
        raise DomainError("contiguity relation in b requires b != 0")
    return (z * derivative + b * value) / b


def erf(x):
    """Error function (2/sqrt(pi)) * int_0^x exp(-t^2) dt; accepts arrays."""
    return _sp.erf(x)


def dawson(x):
    """Dawson's integral F(x) = exp(-x^2) int_0^x exp(t^2) dt; accepts arrays."""
    return _sp.dawsn(x)


def hermite_prob(n: int, x):
    """Probabilists' Hermite polynomial He_n at `x` (scalar or array).

    Evaluated by the recurrence He_{k+1} = x He_k - k He_{k-1}.
    """
    if n < 0:
        raise DomainError("Hermite degree must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for k in range(1, n):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)
