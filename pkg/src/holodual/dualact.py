"""Closed-form dual activations and parameter conversions.

A dual activation is ``E[s1(u) s2(v)]`` for ``(u, v) ~ N(0, Sigma)``.  Most of
this package works with the *unnormalized* expectation

    uE(x) = int_{R^2} s1(u) s2(v) exp(x11 u^2 + 2 x12 u v + x22 v^2) du dv,

as a function of ``x = -Sigma^{-1} / 2``; ``E = uE * sqrt(det x) / pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np

from .errors import DegenerateCovarianceError, DomainError
from .specfun import gamma, gauss_2f1

__all__ = [
    "XPoint",
    "Covariance2",
    "X0",
    "x_from_sigma",
    "sigma_from_x",
    "normalize",
    "unnormalize",
    "normalizing_constant",
    "relu_closed",
    "heaviside_closed",
    "monomial_uE",
    "rectified_monomial_uE",
    "rectified_polynomial_uE",
    "polynomial_uE",
    "polynomial_dual_han",
    "gelu_ff_closed",
]

#: Degree cap for polynomial activators.
MAX_DEGREE = 30
#: Above this ratio of term size to result the rectified sum is redone in mpmath.
CANCELLATION_LIMIT = 1e3


@dataclass(frozen=True)
class XPoint:
    """The symmetric matrix ``x = -Sigma^{-1}/2`` stored as (x11, x12, x22)."""

    x11: float
    x12: float
    x22: float

    @property
    def det(self) -> float:
        return self.x11 * self.x22 - self.x12 * self.x12

    @property
    def z(self) -> float:
        return self.x12 * self.x12 / (self.x11 * self.x22)

    @property
    def is_valid(self) -> bool:
        return self.x11 < 0 and self.x22 < 0 and self.det > 0

    def validate(self) -> "XPoint":
        if not self.is_valid:
            raise DomainError(f"-x must be positive definite, got {self}")
        return self

    def as_array(self) -> np.ndarray:
        return np.array([self.x11, self.x12, self.x22])

    @classmethod
    def coerce(cls, x) -> "XPoint":
        if isinstance(x, cls):
            return x
        x11, x12, x22 = (float(v) for v in x)
        return cls(x11, x12, x22)


X0 = XPoint(-1.0, 0.0, -1.0)


@dataclass(frozen=True)
class Covariance2:
    """``Sigma = [[c1^2, c1 c2 r], [c1 c2 r, c2^2]]`` with c1, c2 > 0, |r| <= 1."""

    c1: float
    c2: float
    r: float

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise DomainError("c1 and c2 must be positive")
        if abs(self.r) > 1:
            raise DomainError(f"|r| must not exceed 1, got {self.r}")

    @property
    def matrix(self) -> np.ndarray:
        off = self.c1 * self.c2 * self.r
        return np.array([[self.c1 ** 2, off], [off, self.c2 ** 2]])

    @property
    def det(self) -> float:
        return (self.c1 * self.c2) ** 2 * (1.0 - self.r * self.r)

    @property
    def degenerate(self) -> bool:
        return abs(self.r) >= 1.0

    @classmethod
    def from_matrix(cls, sigma) -> "Covariance2":
        s = np.asarray(sigma, dtype=float)
        if s.shape != (2, 2) or not np.isclose(s[0, 1], s[1, 0]):
            raise DomainError("covariance must be a symmetric 2x2 matrix")
        c1, c2 = math.sqrt(s[0, 0]), math.sqrt(s[1, 1])
        return cls(c1, c2, float(np.clip(s[0, 1] / (c1 * c2), -1.0, 1.0)))


def x_from_sigma(sigma: Covariance2) -> XPoint:
    """``x = -Sigma^{-1}/2``; requires a strictly positive definite Sigma."""
    det = sigma.det
    if not det > 0:
        raise DegenerateCovarianceError("covariance is singular")
    s11, s22 = sigma.c1 ** 2, sigma.c2 ** 2
    s12 = sigma.c1 * sigma.c2 * sigma.r
    return XPoint(-s22 / (2 * det), s12 / (2 * det), -s11 / (2 * det))


def sigma_from_x(x: XPoint) -> Covariance2:
    x = XPoint.coerce(x).validate()
    det = x.det
    s11, s12, s22 = -x.x22 / (2 * det), x.x12 / (2 * det), -x.x11 / (2 * det)
    c1, c2 = math.sqrt(s11), math.sqrt(s22)
    return Covariance2(c1, c2, s12 / (c1 * c2))


def normalizing_constant(x) -> float:
    """``Z(x) = pi / sqrt(x11 x22 - x12^2)``."""
    x = XPoint.coerce(x)
    return math.pi / math.sqrt(x.det)


def normalize(uE_value: float, x) -> float:
    """Expectation from an unnormalized expectation: ``uE * sqrt(det x) / pi``."""
    x = XPoint.coerce(x)
    return uE_value * math.sqrt(x.det) / math.pi


def unnormalize(value: float, x) -> float:
    x = XPoint.coerce(x)
    return value * math.pi / math.sqrt(x.det)


# -- arccos kernels -----------------------------------------------------------

def relu_closed(c1, c2, r):
    """``E[relu(u) relu(v)] = c1 c2 (r (pi - arccos r) + sqrt(1 - r^2)) / (2 pi)``.

    Broadcasts over array arguments.
    """
    r = np.clip(r, -1.0, 1.0)
    out = np.asarray(c1) * np.asarray(c2) * (
        r * (np.pi - np.arccos(r)) + np.sqrt(1.0 - r * r)) / (2 * np.pi)
    return float(out) if np.ndim(out) == 0 else out


def heaviside_closed(r):
    """Orthant probability ``(pi - arccos r) / (2 pi)``; scale free."""
    out = (np.pi - np.arccos(np.clip(r, -1.0, 1.0))) / (2 * np.pi)
    return float(out) if np.ndim(out) == 0 else out


# -- 2F1 representation of monomial moments ----------------------------------

def _phis(m: int, n: int, x: XPoint):
    """The two GKZ solutions phi_1, phi_2 for exponents (m, n)."""
    alpha, beta = (1 + m) / 2, (1 + n) / 2
    z = x.z
    scale = (-x.x11) ** (-alpha) * (-x.x22) ** (-beta)
    phi1 = scale * gauss_2f1(alpha, beta, 0.5, z)
    if x.x12 == 0.0:
        phi2 = 0.0
    else:
        phi2 = (scale * math.sqrt(z) * math.copysign(1.0, x.x12)
                * gauss_2f1(alpha + 0.5, beta + 0.5, 1.5, z))
    return phi1, phi2


def _check_exponents(m, n):
    if m < 0 or n < 0 or int(m) != m or int(n) != n:
        raise DomainError("monomial exponents must be non-negative integers")


def monomial_uE(m: int, n: int, x) -> float:
    """``uE[u^m v^n](x)`` through the Gauss hypergeometric function."""
    _check_exponents(m, n)
    x = XPoint.coerce(x).validate()
    alpha, beta = (1 + m) / 2, (1 + n) / 2
    if m % 2 == 0 and n % 2 == 0:
        return gamma(alpha) * gamma(beta) * _phis(m, n, x)[0]
    if m % 2 == 1 and n % 2 == 1:
        return 0.5 * m * n * gamma(alpha - 0.5) * gamma(beta - 0.5) * _phis(m, n, x)[1]
    return 0.0


def rectified_monomial_uE(m: int, n: int, x) -> float:
    """``uE[u^m v^n Y(u) Y(v)](x)`` with Y the Heaviside step."""
    _check_exponents(m, n)
    x = XPoint.coerce(x).validate()
    alpha, beta = (1 + m) / 2, (1 + n) / 2
    phi1, phi2 = _phis(m, n, x)
    t1 = 0.25 * gamma(alpha) * gamma(beta) * phi1
    t2 = 0.5 * gamma(alpha + 0.5) * gamma(beta + 0.5) * phi2 if phi2 else 0.0
    out = t1 + t2
    # x12 < 0 makes the terms nearly cancel as z -> 1
    if abs(t1) + abs(t2) > CANCELLATION_LIMIT * abs(out):
        ratio = (abs(t1) + abs(t2)) / abs(out) if out else 1e30
        out = _rectified_mp(alpha, beta, x, 20 + int(math.log10(ratio)))
    return out


def _rectified_mp(alpha, beta, x: XPoint, dps: int) -> float:
    """Same two-term sum as `rectified_monomial_uE`, in `dps`-digit arithmetic."""
    with mpmath.workdps(dps):
        a, b = mpmath.mpf(alpha), mpmath.mpf(beta)
        x11, x12, x22 = (mpmath.mpf(float(v)) for v in (x.x11, x.x12, x.x22))
        z = x12 * x12 / (x11 * x22)
        scale = (-x11) ** (-a) * (-x22) ** (-b)
        t1 = mpmath.gamma(a) * mpmath.gamma(b) * scale * mpmath.hyp2f1(a, b, 0.5, z) / 4
        t2 = (mpmath.gamma(a + 0.5) * mpmath.gamma(b + 0.5) * scale * mpmath.sign(x12)
              * mpmath.sqrt(z) * mpmath.hyp2f1(a + 0.5, b + 0.5, 1.5, z) / 2)
        return float(t1 + t2)


def _check_coeffs(coeffs):
    coeffs = [float(a) for a in coeffs]
    if not coeffs:
        raise DomainError("polynomial needs at least one coefficient")
    if len(coeffs) - 1 > MAX_DEGREE:
        raise DomainError(f"polynomial degree capped at {MAX_DEGREE}")
    if not all(math.isfinite(a) for a in coeffs):
        raise DomainError("polynomial coefficients must be finite")
    return coeffs


def rectified_polynomial_uE(coeffs: Sequence[float], x, coeffs2: Sequence[float] | None = None) -> float:
    """``uE[p(u) q(v) Y(u) Y(v)]`` for ``p = sum a_i t^i`` (``q`` defaults to ``p``)."""
    a = _check_coeffs(coeffs)
    b = a if coeffs2 is None else _check_coeffs(coeffs2)
    x = XPoint.coerce(x).validate()
    total = 0.0
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            if bj:
                total += ai * bj * rectified_monomial_uE(i, j, x)
    return total


def polynomial_uE(coeffs: Sequence[float], x, coeffs2: Sequence[float] | None = None) -> float:
    """``uE[p(u) q(v)]`` for full-line polynomial activators."""
    a = _check_coeffs(coeffs)
    b = a if coeffs2 is None else _check_coeffs(coeffs2)
    x = XPoint.coerce(x).validate()
    total = 0.0
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            if ai and bj and (i + j) % 2 == 0:
                total += ai * bj * monomial_uE(i, j, x)
    return total


def _han_r(coeffs, ell, t):
    q = len(coeffs) - 1
    total = 0.0
    for i in range((q - ell) // 2 + 1):
        k = ell + 2 * i
        total += (coeffs[k] * math.factorial(k) / (2 ** i * math.factorial(i)
                  * math.sqrt(math.factorial(ell))) * t ** k)
    return total


def polynomial_dual_han(coeffs: Sequence[float], sigma: Covariance2,
                        coeffs2: Sequence[float] | None = None) -> float:
    """Dual activation of a polynomial activator by Han et al.'s formula.

    ``k(c1, c2, r) = sum_l r_l(c1) r_l(c2) r^l`` with
    ``r_l(t) = sum_i a_{l+2i} (l+2i)! / (2^i i! sqrt(l!)) t^{2i+l}``.
    Valid for degenerate covariances as well.
    """
    a = _check_coeffs(coeffs)
    b = a if coeffs2 is None else _check_coeffs(coeffs2)
    q = max(len(a), len(b)) - 1
    a = a + [0.0] * (q + 1 - len(a))
    b = b + [0.0] * (q + 1 - len(b))
    return sum(_han_r(a, ell, sigma.c1) * _han_r(b, ell, sigma.c2) * sigma.r ** ell
               for ell in range(q + 1))


def gelu_ff_closed(x) -> float:
    """``uE[f(u) f(v)]`` for ``f(u) = u erf'(u)``: ``2 x12 / D^{3/2}``.

    ``D = (x11 - 1)(x22 - 1) - x12^2`` must be positive.
    """
    x = XPoint.coerce(x)
    d = (x.x11 - 1.0) * (x.x22 - 1.0) - x.x12 ** 2
    if not d > 0:
        raise DomainError("shifted determinant (x11-1)(x22-1)-x12^2 must be positive")
    return 4.0 * x.x12 / (2.0 * d ** 1.5)
