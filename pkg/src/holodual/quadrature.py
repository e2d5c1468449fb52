"""Reference quadrature backend for bivariate normal expectations.

Two product rules are available:

``hermite``
    Cholesky factor ``Sigma = L L^T``, substitute ``(u, v) = sqrt(2) L (s, t)``
    and apply a tensor Gauss-Hermite rule.  Spectrally accurate for smooth
    activators, but only algebraically convergent across kinks.
``sector``
    Polar coordinates around the origin.  The angular range is split at the
    directions where ``u = 0`` or ``v = 0`` so each sector carries a smooth
    integrand; Gauss-Legendre is used in both the angle and the radius.
    This is the default for rectified activators (ReLU, Heaviside, ReSin).

Both double the number of nodes from 32 until two successive estimates agree
to the requested relative tolerance, capped at 512.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy import special

from .activators import Activator
from .dualact import Covariance2, XPoint, normalizing_constant, sigma_from_x
from .errors import CheckFailed, DegenerateCovarianceError, DomainError

__all__ = [
    "QuadratureRule",
    "QuadratureResult",
    "gauss_hermite_rule",
    "gauss_legendre_rule",
    "expectation_quadrature",
    "degenerate_expectation",
    "unnormalized_quadrature",
    "gelu_special_values_check",
]

MAX_NODES = 512
START_NODES = 32
#: Radial cut-off (in standard deviations) for the sector rule.
RADIUS = 13.0

ActivatorLike = Union[Activator, Callable]


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    achieved_tol: float
    converged: bool
    nodes: int

    def __float__(self):
        return self.value


@lru_cache(maxsize=None)
def gauss_hermite_rule(n: int) -> QuadratureRule:
    """Nodes and weights for ``int f(t) exp(-t^2) dt`` (weights sum to sqrt(pi))."""
    if not 1 <= n <= MAX_NODES:
        raise DomainError(f"Gauss-Hermite rule size must be in [1, {MAX_NODES}]")
    t, w = special.roots_hermite(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(t, w)


@lru_cache(maxsize=None)
def gauss_legendre_rule(n: int) -> QuadratureRule:
    if not 1 <= n <= MAX_NODES:
        raise DomainError(f"Gauss-Legendre rule size must be in [1, {MAX_NODES}]")
    t, w = special.roots_legendre(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(t, w)


def _as_callable(f) -> Callable:
    if isinstance(f, Activator):
        return f
    if callable(f):
        return lambda u: np.asarray(f(u), dtype=float) * np.ones_like(u)
    if np.isscalar(f):
        c = float(f)
        return lambda u: np.full_like(u, c, dtype=float)
    raise TypeError(f"cannot integrate {f!r}")


def _is_smooth(f) -> bool:
    return f.smooth if isinstance(f, Activator) else True


def _hermite_estimate(f1, f2, L, n):
    rule = gauss_hermite_rule(n)
    s, t = rule.nodes[:, None], rule.nodes[None, :]
    u = math.sqrt(2) * L[0, 0] * s + 0.0 * t
    v = math.sqrt(2) * (L[1, 0] * s + L[1, 1] * t)
    w = np.outer(rule.weights, rule.weights)
    return float(np.sum(w * f1(u) * f2(v)) / math.pi)


def _sector_breaks(L):
    # directions (cos th, sin th) in the standard-normal plane where u or v vanishes
    angles = [0.5 * math.pi, 1.5 * math.pi]
    th = math.atan2(-L[1, 0], L[1, 1]) % (2 * math.pi)
    angles += [th, (th + math.pi) % (2 * math.pi)]
    angles = sorted(set([0.0] + [a % (2 * math.pi) for a in angles] + [2 * math.pi]))
    return [(a, b) for a, b in zip(angles[:-1], angles[1:]) if b - a > 1e-15]


def _sector_estimate(f1, f2, L, n):
    rule = gauss_legendre_rule(n)
    rho = 0.5 * RADIUS * (rule.nodes + 1.0)
    w_rho = 0.5 * RADIUS * rule.weights * rho * np.exp(-0.5 * rho * rho)
    total = 0.0
    for a, b in _sector_breaks(L):
        th = 0.5 * (b - a) * rule.nodes + 0.5 * (a + b)
        w_th = 0.5 * (b - a) * rule.weights
        s, t = np.cos(th)[:, None] * rho[None, :], np.sin(th)[:, None] * rho[None, :]
        u = L[0, 0] * s
        v = L[1, 0] * s + L[1, 1] * t
        total += float(w_th @ (f1(u) * f2(v)) @ w_rho)
    return total / (2 * math.pi)


def _adaptive(estimate, rtol, atol=1e-300):
    n = START_NODES
    prev = estimate(n)
    err = math.inf
    while n < MAX_NODES:
        n *= 2
        cur = estimate(n)
        err = abs(cur - prev)
        scale = max(abs(cur), atol)
        if err <= rtol * scale:
            return QuadratureResult(cur, err / scale, True, n)
        prev = cur
    scale = max(abs(prev), atol)
    return QuadratureResult(prev, err / scale, False, n)


def _cholesky(sigma: Covariance2):
    if sigma.degenerate or sigma.det <= 0:
        raise DegenerateCovarianceError("use degenerate_expectation for rank-1 covariances")
    s12 = sigma.c1 * sigma.c2 * sigma.r
    l11 = sigma.c1
    l21 = s12 / l11
    l22 = sigma.c2 * math.sqrt(1.0 - sigma.r * sigma.r)
    return np.array([[l11, 0.0], [l21, l22]])


def expectation_quadrature(f1: ActivatorLike, f2: ActivatorLike, sigma: Covariance2,
                           rtol: float = 1e-10, method: str = "auto") -> QuadratureResult:
    """``E[f1(u) f2(v)]`` under ``N(0, Sigma)`` for a non-singular ``Sigma``.

    Parameters
    ----------
    f1, f2 : Activator, callable or scalar
        Integrands.  Plain callables are assumed smooth.
    sigma : Covariance2
    rtol : float
        Relative agreement required between successive refinements.
    method : {"auto", "hermite", "sector"}
        ``auto`` picks ``sector`` whenever an activator is not smooth.

    Returns
    -------
    QuadratureResult
        ``converged`` is False if the node cap was reached first; the value is
        still the finest estimate.
    """
    L = _cholesky(sigma)
    if method == "auto":
        method = "hermite" if (_is_smooth(f1) and _is_smooth(f2)) else "sector"
    g1, g2 = _as_callable(f1), _as_callable(f2)
    if method == "hermite":
        est = lambda n: _hermite_estimate(g1, g2, L, n)  # noqa: E731
    elif method == "sector":
        est = lambda n: _sector_estimate(g1, g2, L, n)  # noqa: E731
    else:
        raise DomainError(f"unknown quadrature method {method!r}")
    return _adaptive(est, rtol)


def degenerate_expectation(f1: ActivatorLike, f2: ActivatorLike, sigma,
                           rtol: float = 1e-12) -> QuadratureResult:
    """``E[f1(c1 z) f2(c2 z)]`` with ``z ~ N(0, 1)`` for a rank-1 ``Sigma``.

    `sigma` may be a :class:`Covariance2` with ``|r| = 1`` or a 2x2 matrix; in the
    latter case ``(c1, c2)`` is the leading eigenpair scaled by the root of
    its eigenvalue.

    Raises
    ------
    DomainError
        If `sigma` has full rank (relative eigenvalue gap above ``1e-9``).
    """
    if isinstance(sigma, Covariance2):
        if not sigma.degenerate:
            raise DomainError("degenerate_expectation needs |r| = 1")
        c1, c2 = sigma.c1, sigma.c2 * math.copysign(1.0, sigma.r)
    else:
        s = np.asarray(sigma, dtype=float)
        lam, vec = np.linalg.eigh(s)
        if lam[-1] <= 0:
            raise DegenerateCovarianceError("zero covariance matrix")
        if lam[0] > 1e-9 * lam[-1]:
            raise DomainError("covariance has full rank; use expectation_quadrature")
        c1, c2 = math.sqrt(lam[-1]) * vec[:, -1]
    g1, g2 = _as_callable(f1), _as_callable(f2)
    smooth = _is_smooth(f1) and _is_smooth(f2)

    def est(n):
        if smooth:
            rule = gauss_hermite_rule(n)
            z = math.sqrt(2) * rule.nodes
            return float(rule.weights @ (g1(c1 * z) * g2(c2 * z))) / math.sqrt(math.pi)
        rule = gauss_legendre_rule(n)
        z = 0.5 * RADIUS * (rule.nodes + 1.0)
        w = 0.5 * RADIUS * rule.weights * np.exp(-0.5 * z * z)
        vals = g1(c1 * z) * g2(c2 * z) + g1(-c1 * z) * g2(-c2 * z)
        return float(w @ vals) / math.sqrt(2 * math.pi)

    return _adaptive(est, rtol)


def unnormalized_quadrature(f1: ActivatorLike, f2: ActivatorLike, x,
                            rtol: float = 1e-10, method: str = "auto") -> QuadratureResult:
    """``uE[f1(u) f2(v)](x)`` as ``Z(x) E[...]``."""
    x = XPoint.coerce(x).validate()
    res = expectation_quadrature(f1, f2, sigma_from_x(x), rtol=rtol, method=method)
    z = normalizing_constant(x)
    return QuadratureResult(res.value * z, res.achieved_tol, res.converged, res.nodes)


def gelu_special_values_check(tol: float = 1e-7) -> dict:
    """Check the GeLU-derivative building blocks at ``x = (-1, 0, -1)``.

    With ``f(u) = u erf'(u)`` and ``g(u) = 1 + erf(u)``, quadrature gives
    ``uE[f g] = 0``, ``uE[g g] = pi``, ``d12 uE[f g] = 1/2`` and
    ``d12 uE[g g] = 1``; the ``x12``-derivative is the integral with an extra
    factor ``2 u v``.

    Returns a report dict; raises :class:`CheckFailed` if any value is off by
    more than `tol`.
    """
    f, g = Activator("gelu_f"), Activator("gelu_g")
    x0 = XPoint(-1.0, 0.0, -1.0)
    uf = lambda u: u * f(u)  # noqa: E731
    ug = lambda u: u * g(u)  # noqa: E731
    computed = {
        "uE[fg]": unnormalized_quadrature(f, g, x0, rtol=1e-13).value,
        "uE[gg]": unnormalized_quadrature(g, g, x0, rtol=1e-13).value,
        "d12 uE[fg]": 2 * unnormalized_quadrature(uf, ug, x0, rtol=1e-13).value,
        "d12 uE[gg]": 2 * unnormalized_quadrature(ug, ug, x0, rtol=1e-13).value,
    }
    expected = {"uE[fg]": 0.0, "uE[gg]": math.pi, "d12 uE[fg]": 0.5, "d12 uE[gg]": 1.0}
    deltas = {k: abs(computed[k] - expected[k]) for k in expected}
    report = {"computed": computed, "expected": expected, "deltas": deltas,
              "passed": all(d <= tol for d in deltas.values())}
    if not report["passed"]:
        raise CheckFailed("GeLU special values disagree", deltas)
    return report
