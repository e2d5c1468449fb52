"""Exact polynomials and rational functions in (x11, x12, x22).

Coefficients are :class:`fractions.Fraction`.  For numerical use each object
compiles itself once into a nested-Horner Python expression that works on
floats and numpy arrays alike.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Dict, Iterable, Tuple

VARIABLES = ("x11", "x12", "x22")
Exponent = Tuple[int, int, int]

_MINUS_SIGNS = str.maketrans({"−": "-", "–": "-"})
_RATIONAL = re.compile(r"^\s*[+-]?\d+(\s*/\s*\d+)?\s*$|^\s*[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?\s*$")


def parse_rational(text) -> Fraction:
    """Parse ``"-1/2"``, ``"3"``, ``"0.25"`` (unicode minus accepted)."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    s = str(text).translate(_MINUS_SIGNS)
    if not _RATIONAL.match(s):
        raise ValueError(f"not a rational number: {text!r}")
    return Fraction(s.replace(" ", ""))


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


class Poly:
    """Sparse polynomial ``{(e11, e12, e22): coefficient}``."""

    __slots__ = ("terms", "_compiled")

    def __init__(self, terms: Dict[Exponent, Fraction] | None = None):
        clean = {}
        for e, c in (terms or {}).items():
            c = Fraction(c)
            if c:
                e = tuple(int(v) for v in e)
                if len(e) != 3 or min(e) < 0:
                    raise ValueError(f"bad exponent {e}")
                clean[e] = clean.get(e, Fraction(0)) + c
        self.terms = {e: c for e, c in clean.items() if c}
        self._compiled = None

    # -- construction ------------------------------------------------------
    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(0, 0, 0): Fraction(c)})

    @classmethod
    def var(cls, name: str) -> "Poly":
        e = [0, 0, 0]
        e[VARIABLES.index(name)] = 1
        return cls({tuple(e): Fraction(1)})

    @classmethod
    def from_terms(cls, rows: Iterable) -> "Poly":
        """From ``[[coeff, e11, e12, e22], ...]``."""
        terms: Dict[Exponent, Fraction] = {}
        for row in rows:
            if len(row) != 4:
                raise ValueError(f"term must be [coeff, e11, e12, e22], got {row!r}")
            e = tuple(int(v) for v in row[1:])
            terms[e] = terms.get(e, Fraction(0)) + parse_rational(row[0])
        return cls(terms)

    def to_terms(self) -> list:
        return [[format_rational(c), *e] for e, c in sorted(self.terms.items(), reverse=True)]

    # -- algebra -------------------------------------------------------------
    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, Fraction(0)) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        out: Dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = (e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2])
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def diff(self, var: int) -> "Poly":
        out = {}
        for e, c in self.terms.items():
            if e[var]:
                ne = list(e)
                ne[var] -= 1
                out[tuple(ne)] = c * e[var]
        return Poly(out)

    # -- evaluation ----------------------------------------------------------
    def horner_source(self) -> str:
        return _horner(self.terms, 0)

    def __call__(self, x11, x12, x22):
        if self._compiled is None:
            self._compiled = eval(f"lambda x11, x12, x22: {self.horner_source()}")  # noqa: S307
        return self._compiled(x11, x12, x22)

    def __repr__(self):
        return f"Poly({self.to_terms()})"

    def to_sympy(self):
        import sympy

        xs = sympy.symbols(VARIABLES)
        return sum((sympy.Rational(c.numerator, c.denominator)
                    * xs[0] ** e[0] * xs[1] ** e[1] * xs[2] ** e[2]
                    for e, c in self.terms.items()), sympy.Integer(0))


def _as_poly(v) -> Poly:
    return v if isinstance(v, Poly) else Poly.const(v)


def _coeff_source(c: Fraction) -> str:
    return repr(float(c))


def _horner(terms: Dict[Exponent, Fraction], depth: int) -> str:
    """Nested Horner form, recursing over the variables in order."""
    if not terms:
        return "0.0"
    if depth == 3:
        return _coeff_source(sum(terms.values(), Fraction(0)))
    var = VARIABLES[depth]
    by_power: Dict[int, Dict[Exponent, Fraction]] = {}
    for e, c in terms.items():
        by_power.setdefault(e[depth], {})[e] = c
    top = max(by_power)
    expr = None
    for k in range(top, -1, -1):
        part = by_power.get(k)
        inner = _horner(part, depth + 1) if part else None
        if expr is None:
            expr = inner
        else:
            expr = f"({expr})*{var}" if inner is None else f"({expr})*{var} + {inner}"
    return expr


class Rational:
    """Quotient ``num / den`` of two :class:`Poly` (no cancellation)."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly | None = None):
        den = Poly.const(1) if den is None else den
        if den.is_zero():
            raise ZeroDivisionError("denominator polynomial is zero")
        self.num, self.den = _as_poly(num), den

    def __call__(self, x11, x12, x22):
        if self.num.is_zero():
            return 0.0 * x11
        return self.num(x11, x12, x22) / self.den(x11, x12, x22)

    def diff(self, var: int) -> "Rational":
        if self.num.is_zero():
            return Rational(Poly())
        num = self.num.diff(var) * self.den - self.num * self.den.diff(var)
        return Rational(num, self.den * self.den)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def to_dict(self) -> dict:
        return {"num": self.num.to_terms(), "den": self.den.to_terms()}

    @classmethod
    def from_dict(cls, d) -> "Rational":
        if not isinstance(d, dict) or "num" not in d:
            raise ValueError(f"rational entry needs 'num' (and optional 'den'): {d!r}")
        den = Poly.from_terms(d["den"]) if d.get("den") is not None else None
        return cls(Poly.from_terms(d["num"]), den)

    def __repr__(self):
        return f"Rational({self.num!r}, {self.den!r})"


X11, X12, X22 = (Poly.var(v) for v in VARIABLES)
