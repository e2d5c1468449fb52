"""Activator catalogue.

An :class:`Activator` knows how to evaluate itself on arrays, its derivative
activator, whether it is smooth, its homogeneity degree, and its weighted 1D
moments ``int u^p s(u) exp(-u^2) du`` (needed for HGM initial values).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DomainError

__all__ = ["Activator", "parse_activator", "RELU", "HEAVISIDE", "GELU", "RESIN"]

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)

_RECTIFIED = {"relu", "heaviside", "rmonomial", "rpoly", "resin", "resin_dot"}
_POLY_KINDS = {"monomial", "poly", "rmonomial", "rpoly", "relu", "heaviside"}


@dataclass(frozen=True)
class Activator:
    """An activator function (or distribution) of one real variable.

    Attributes
    ----------
    kind : str
        One of ``relu, heaviside, gelu, gelu_dot, gelu_f, gelu_g, resin,
        resin_dot, monomial, rmonomial, poly, rpoly``.
    coeffs : tuple of float
        Polynomial coefficients ``a_0..a_q`` for the polynomial kinds; a
        monomial ``u^m`` is stored as ``(0,)*m + (1,)``.
    """

    kind: str
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in _ALL_KINDS:
            raise DomainError(f"unknown activator kind {self.kind!r}")
        if self.kind in {"monomial", "poly", "rmonomial", "rpoly"}:
            if not self.coeffs:
                raise DomainError("polynomial activator needs coefficients")
            if not all(math.isfinite(a) for a in self.coeffs):
                raise DomainError("coefficients must be finite")

    # -- descriptive properties ------------------------------------------
    @property
    def name(self) -> str:
        if self.kind in {"monomial", "rmonomial"}:
            return f"{self.kind}:{len(self.coeffs) - 1}"
        if self.kind in {"poly", "rpoly"}:
            return f"{self.kind}:" + ",".join(f"{a:g}" for a in self.coeffs)
        return self.kind

    @property
    def rectified(self) -> bool:
        return self.kind in _RECTIFIED

    @property
    def polynomial_coeffs(self) -> tuple:
        """Coefficients of the polynomial part (rectified or not)."""
        if self.kind == "relu":
            return (0.0, 1.0)
        if self.kind == "heaviside":
            return (1.0,)
        if self.kind in {"monomial", "poly", "rmonomial", "rpoly"}:
            return tuple(float(a) for a in self.coeffs)
        raise DomainError(f"{self.name} is not a polynomial activator")

    @property
    def is_polynomial_type(self) -> bool:
        return self.kind in _POLY_KINDS

    @property
    def smooth(self) -> bool:
        """False when the activator has a kink or jump (at the origin)."""
        if self.rectified:
            return False
        return True

    @property
    def homogeneity(self):
        """Degree q with s(a t) = |a|^q s(t) for a > 0, or None."""
        if self.kind == "relu":
            return 1
        if self.kind == "heaviside":
            return 0
        if self.kind in {"monomial", "rmonomial"}:
            return len(self.coeffs) - 1
        return None

    # -- evaluation --------------------------------------------------------
    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        k = self.kind
        if k == "relu":
            return np.maximum(u, 0.0)
        if k == "heaviside":
            return (u > 0).astype(float)
        if k == "gelu":
            return u * (1.0 + special.erf(u))
        if k == "gelu_f":
            return _TWO_OVER_SQRT_PI * u * np.exp(-u * u)
        if k == "gelu_g":
            return 1.0 + special.erf(u)
        if k == "gelu_dot":
            return 1.0 + special.erf(u) + _TWO_OVER_SQRT_PI * u * np.exp(-u * u)
        if k == "resin":
            return np.where(u > 0, np.sin(u), 0.0)
        if k == "resin_dot":
            return np.where(u > 0, np.cos(u), 0.0)
        poly = np.polynomial.polynomial.polyval(u, self.coeffs)
        if k in {"rmonomial", "rpoly"}:
            return np.where(u > 0, poly, 0.0)
        return poly

    def derivative(self) -> "Activator":
        """The activator's derivative, when it is again a function."""
        k = self.kind
        if k == "relu":
            return HEAVISIDE
        if k == "gelu":
            return Activator("gelu_dot")
        if k == "resin":
            return Activator("resin_dot")
        if k in {"monomial", "poly", "rmonomial", "rpoly"}:
            a = self.coeffs
            if k in {"rmonomial", "rpoly"} and a[0] != 0:
                raise DomainError(f"derivative of {self.name} contains a Dirac delta")
            da = tuple(i * a[i] for i in range(1, len(a))) or (0.0,)
            kind = {"monomial": "poly", "rmonomial": "rpoly"}.get(k, k)
            return Activator(kind, da)
        raise DomainError(f"derivative of {self.name} is not a function")

    def pieces(self):
        """Summands used to split an expectation, as (weight, activator) pairs."""
        if self.kind == "gelu_dot":
            return [(1.0, Activator("gelu_f")), (1.0, Activator("gelu_g"))]
        return [(1.0, self)]

    # -- moments -----------------------------------------------------------
    def moment(self, p: int) -> float:
        """``int_R u^p s(u) exp(-u^2) du``."""
        if p < 0:
            raise DomainError("moment order must be non-negative")
        return _moment(self, int(p))


def _poly_moment(coeffs, p, rectified):
    total = 0.0
    for i, a in enumerate(coeffs):
        if a == 0:
            continue
        k = i + p
        half = math.gamma((1 + k) / 2) / 2
        total += a * (half if rectified else (half * 2 if k % 2 == 0 else 0.0))
    return total


@lru_cache(maxsize=4096)
def _moment(act: Activator, p: int) -> float:
    if act.is_polynomial_type:
        return _poly_moment(act.polynomial_coeffs, p, act.rectified)
    f = lambda u: u ** p * float(act(u)) * math.exp(-u * u)  # noqa: E731
    opts = dict(limit=500, epsabs=1e-15, epsrel=1e-13)
    right = integrate.quad(f, 0.0, np.inf, **opts)[0]
    left = 0.0 if act.rectified else integrate.quad(f, -np.inf, 0.0, **opts)[0]
    return left + right


_ALL_KINDS = {"relu", "heaviside", "gelu", "gelu_dot", "gelu_f", "gelu_g", "resin",
              "resin_dot", "monomial", "rmonomial", "poly", "rpoly"}

RELU = Activator("relu")
HEAVISIDE = Activator("heaviside")
GELU = Activator("gelu")
RESIN = Activator("resin")


def parse_activator(text: str) -> Activator:
    """Parse ``relu | heaviside | gelu | resin | monomial:m | rmonomial:m |
    poly:a0,a1,... | rpoly:a0,a1,...``."""
    text = text.strip().lower()
    head, _, tail = text.partition(":")
    try:
        if head in {"monomial", "rmonomial"}:
            m = int(tail)
            if m < 0:
                raise ValueError
            return Activator(head, (0.0,) * m + (1.0,))
        if head in {"poly", "rpoly"}:
            return Activator(head, tuple(float(v) for v in tail.split(",")))
    except ValueError as exc:
        raise DomainError(f"cannot parse activator {text!r}") from exc
    if tail:
        raise DomainError(f"activator {head!r} takes no parameters")
    return Activator(head)
