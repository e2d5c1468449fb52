"""Hermite coefficients by exact linear recurrences (difference HGM).

Coefficients ``c_n = int s(u) He_n(u) exp(-u^2/2) du`` are kept as exact
rational combinations of a few transcendental constants and realized as
floating-point numbers only on output, through mpmath at a working precision
matched to the size of the rationals.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import mpmath

from .dualact import Covariance2
from .errors import DomainError, RationalOverflowError

__all__ = [
    "CONSTANTS",
    "ExactCoefficient",
    "Recurrence",
    "relu_recurrence",
    "heaviside_recurrence",
    "resin_recurrence",
    "recurrence_for",
    "run_recurrence",
    "recurrence_residuals",
    "realize",
    "hermite_dual",
    "coefficients_csv",
]

CONSTANTS = ("ONE", "SQRT_PI_OVER_2", "SQRT2_DAWSON", "SQRT_PI_OVER_2E")
_CONSTANT_TEXT = {
    "ONE": "",
    "SQRT_PI_OVER_2": "sqrt(pi/2)",
    "SQRT2_DAWSON": "sqrt(2)*F(1/sqrt(2))",
    "SQRT_PI_OVER_2E": "sqrt(pi/(2e))",
}


def _constant_value(name: str):
    """The named constant as an mpmath number at the current precision."""
    if name == "ONE":
        return mpmath.mpf(1)
    if name == "SQRT_PI_OVER_2":
        return mpmath.sqrt(mpmath.pi / 2)
    if name == "SQRT2_DAWSON":
        # F(x) = sqrt(pi)/2 exp(-x^2) erfi(x)
        x = 1 / mpmath.sqrt(2)
        return mpmath.sqrt(2) * mpmath.sqrt(mpmath.pi) / 2 * mpmath.exp(-x * x) * mpmath.erfi(x)
    if name == "SQRT_PI_OVER_2E":
        return mpmath.sqrt(mpmath.pi / (2 * mpmath.e))
    raise KeyError(name)


@dataclass(frozen=True)
class ExactCoefficient:
    """``sum_k q_k * CONSTANT_k`` with exact rationals ``q_k``."""

    parts: Tuple[Tuple[str, Fraction], ...] = ()

    @classmethod
    def of(cls, **parts) -> "ExactCoefficient":
        return cls._build({k: Fraction(v) for k, v in parts.items()})

    @classmethod
    def _build(cls, d: Dict[str, Fraction]) -> "ExactCoefficient":
        for k in d:
            if k not in CONSTANTS:
                raise KeyError(f"unknown constant {k}")
        return cls(tuple((k, d[k]) for k in CONSTANTS if d.get(k)))

    def as_dict(self) -> Dict[str, Fraction]:
        return dict(self.parts)

    def __add__(self, other: "ExactCoefficient") -> "ExactCoefficient":
        d = self.as_dict()
        for k, v in other.parts:
            d[k] = d.get(k, Fraction(0)) + v
        return ExactCoefficient._build(d)

    def scale(self, q) -> "ExactCoefficient":
        q = Fraction(q)
        return ExactCoefficient._build({k: v * q for k, v in self.parts})

    def __neg__(self):
        return self.scale(-1)

    def is_zero(self) -> bool:
        return not self.parts

    def max_bits(self) -> int:
        return max((max(v.numerator.bit_length(), v.denominator.bit_length())
                    for _, v in self.parts), default=0)

    def to_mp(self):
        return mpmath.fsum(mpmath.mpf(v.numerator) / v.denominator * _constant_value(k)
                           for k, v in self.parts) if self.parts else mpmath.mpf(0)

    def __float__(self):
        return float(realize([self])[0])

    def __str__(self):
        if not self.parts:
            return "0"
        out = []
        for k, v in self.parts:
            coef = str(v)
            text = _CONSTANT_TEXT[k]
            if not text:
                out.append(coef)
            elif v == 1:
                out.append(text)
            elif v == -1:
                out.append("-" + text)
            else:
                out.append(f"{coef}*{text}")
        return " + ".join(out).replace("+ -", "- ")


@dataclass(frozen=True)
class Recurrence:
    """``sum_{s=0}^{order} p_s(n) c_{n+s} = 0`` with ``p_order = 1``.

    ``shift_coeffs[s]`` lists the integer coefficients of ``p_s`` in
    ascending powers of ``n``.
    """

    name: str
    shift_coeffs: Tuple[Tuple[int, ...], ...]
    initial: Tuple[ExactCoefficient, ...]

    def __post_init__(self):
        if tuple(self.shift_coeffs[-1]) != (1,):
            raise DomainError("recurrence must be monic in the highest shift")
        if len(self.initial) != self.order:
            raise DomainError(f"need {self.order} initial values, got {len(self.initial)}")

    @property
    def order(self) -> int:
        return len(self.shift_coeffs) - 1

    def coefficient(self, s: int, n: int) -> int:
        return sum(a * n ** i for i, a in enumerate(self.shift_coeffs[s]))


def relu_recurrence() -> Recurrence:
    """``c_{n+2} = -(n-1) c_n``, ``c_0 = 1``, ``c_1 = sqrt(pi/2)``."""
    return Recurrence("relu", ((-1, 1), (0,), (1,)),
                      (ExactCoefficient.of(ONE=1), ExactCoefficient.of(SQRT_PI_OVER_2=1)))


def heaviside_recurrence() -> Recurrence:
    """``c_{n+2} = -n c_n``, ``c_0 = sqrt(pi/2)``, ``c_1 = 1``."""
    return Recurrence("heaviside", ((0, 1), (0,), (1,)),
                      (ExactCoefficient.of(SQRT_PI_OVER_2=1), ExactCoefficient.of(ONE=1)))


def resin_recurrence() -> Recurrence:
    """Order-6 recurrence for ``Y(u) sin(u)``.

    ``c_{n+6} + 2(n+3) c_{n+4} + (n^2+5n+7) c_{n+2} + (n+1)(n+2) c_n = 0``
    with ``c_0 = D``, ``c_1 = E``, ``c_2 = 1 - D``, ``c_3 = -E``, ``c_4 = D - 2``,
    ``c_5 = E`` where ``D = sqrt(2) F(1/sqrt(2))`` (F is Dawson's integral)
    and ``E = sqrt(pi/(2e))``.
    """
    D = ExactCoefficient.of(SQRT2_DAWSON=1)
    E = ExactCoefficient.of(SQRT_PI_OVER_2E=1)
    one = ExactCoefficient.of(ONE=1)
    init = (D, E, one + (-D), -E, D + one.scale(-2), E)
    shifts = ((2, 3, 1), (0,), (7, 5, 1), (0,), (6, 2), (0,), (1,))
    return Recurrence("resin", shifts, init)


def recurrence_for(name: str) -> Recurrence:
    table = {"relu": relu_recurrence, "heaviside": heaviside_recurrence,
             "resin": resin_recurrence}
    if name not in table:
        raise DomainError(f"no Hermite recurrence for {name!r} (have: {', '.join(table)})")
    return table[name]()


def run_recurrence(rec: Recurrence, N: int, max_bits: int = 4096) -> List[ExactCoefficient]:
    """Exact ``c_0 .. c_N``.

    Raises
    ------
    DomainError
        If ``N < order``.
    RationalOverflowError
        If a rational coefficient needs more than `max_bits` bits.
    """
    if N < rec.order:
        raise DomainError(f"N must be at least the recurrence order {rec.order}")
    cs = list(rec.initial)
    k = rec.order
    for n in range(0, N + 1 - k):
        acc = ExactCoefficient()
        for s in range(k):
            p = rec.coefficient(s, n)
            if p:
                acc = acc + cs[n + s].scale(-p)
        if acc.max_bits() > max_bits:
            raise RationalOverflowError(f"c_{n + k} exceeds {max_bits} bits")
        cs.append(acc)
    return cs[: N + 1]


def recurrence_residuals(rec: Recurrence, cs: Sequence[ExactCoefficient]) -> List[ExactCoefficient]:
    """``sum_s p_s(n) c_{n+s}`` for every admissible ``n`` (all zero if exact)."""
    out = []
    for n in range(len(cs) - rec.order):
        acc = ExactCoefficient()
        for s in range(rec.order + 1):
            acc = acc + cs[n + s].scale(rec.coefficient(s, n))
        out.append(acc)
    return out


def _precision_for(cs: Sequence[ExactCoefficient]) -> int:
    bits = max((c.max_bits() for c in cs), default=0)
    return 64 + 2 * bits


def realize(cs: Sequence[ExactCoefficient]) -> List:
    """mpmath values of exact coefficients, computed with enough guard bits
    that cancellation between terms cannot reach double precision."""
    with mpmath.workprec(_precision_for(cs)):
        return [+c.to_mp() for c in cs]


def hermite_dual(coeffs: Sequence, q: float, sigma: Covariance2, terms: int | None = None):
    """Dual activation by the Hermite series of a ``q``-homogeneous activator.

    ``k(c1, c2, r) ~ (c1 c2)^q sum_{j<=terms} c_j^2 / (2 pi j!) r^j``.

    Parameters
    ----------
    coeffs : sequence
        ``c_0, c_1, ...`` as :class:`ExactCoefficient` or numbers.
    q : float
        Homogeneity degree.
    sigma : Covariance2
    terms : int, optional
        Highest index used (default: all available).

    Returns
    -------
    (value, truncation_estimate)
        The estimate is the magnitude of the last included nonzero term.
    """
    terms = len(coeffs) - 1 if terms is None else terms
    if terms >= len(coeffs):
        raise DomainError(f"only {len(coeffs)} coefficients available for {terms} terms")
    exact = [c for c in coeffs[: terms + 1] if isinstance(c, ExactCoefficient)]
    prec = _precision_for(exact) + 4 * terms + 64
    with mpmath.workprec(prec):
        vals = [c.to_mp() if isinstance(c, ExactCoefficient) else mpmath.mpf(c)
                for c in coeffs[: terms + 1]]
        r = mpmath.mpf(sigma.r)
        total = mpmath.mpf(0)
        last = mpmath.mpf(0)
        for j, c in enumerate(vals):
            term = c * c / (2 * mpmath.pi * mpmath.factorial(j)) * r ** j
            total += term
            if term != 0:
                last = term
        scale = (mpmath.mpf(sigma.c1) * sigma.c2) ** q
        return float(scale * total), float(abs(scale * last))


def coefficients_csv(cs: Sequence[ExactCoefficient]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "exact", "numeric"])
    for n, (c, v) in enumerate(zip(cs, realize(cs))):
        w.writerow([n, str(c), repr(float(v))])
    return buf.getvalue()
