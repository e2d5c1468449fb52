"""Pfaffian systems ``dF/dx_i = P_i(x) F`` for unnormalized expectations.

Hardcoded systems are provided for ReLU, Heaviside and, more generally, any
pair of degree-(m, n) homogeneous activators (the rank-2 system they share);
other systems are read from JSON documents.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from ..errors import DimensionMismatchError, PfaffianParseError
from ._poly import VARIABLES, X11, X12, X22, Poly, Rational

__all__ = [
    "PfaffianSystem",
    "relu_pfaffian",
    "heaviside_pfaffian",
    "homogeneous_pfaffian",
    "load_pfaffian",
    "dump_pfaffian",
    "compatibility_residual",
]

SCHEMA_VARIABLES = list(VARIABLES)


@dataclass(frozen=True, eq=False)
class PfaffianSystem:
    """A rank-``r`` Pfaffian system.

    Attributes
    ----------
    rank : int
    std_monomials : tuple of (d11, d12, d22)
        Derivative multi-indices; entry ``k`` of the state is ``d^{s_k} g``.
        The first must be ``(0, 0, 0)``.
    matrices : tuple of three r x r nested tuples of :class:`Rational`
        ``P_11, P_12, P_22`` in that order.
    singular_locus : tuple of :class:`Poly`
        Factors whose zero sets contain every pole of the matrices.
    name : str
    """

    rank: int
    std_monomials: tuple
    matrices: tuple
    singular_locus: tuple = ()
    name: str = "custom"

    def __post_init__(self):
        if self.rank < 1:
            raise DimensionMismatchError("rank must be positive")
        if len(self.std_monomials) != self.rank:
            raise DimensionMismatchError(
                f"rank {self.rank} but {len(self.std_monomials)} standard monomials")
        if tuple(self.std_monomials[0]) != (0, 0, 0):
            raise PfaffianParseError("first standard monomial must be the identity")
        if len(self.matrices) != 3:
            raise DimensionMismatchError("need exactly three matrices (x11, x12, x22)")
        for mat in self.matrices:
            if len(mat) != self.rank or any(len(row) != self.rank for row in mat):
                raise DimensionMismatchError(
                    f"rank {self.rank} but a matrix is not {self.rank}x{self.rank}")

    # -- numerical evaluation ----------------------------------------------
    @cached_property
    def _evaluator(self):
        return _compile_matrices(self.matrices, self.rank)

    @cached_property
    def _derivative_evaluator(self):
        # d/dx_j of P_i, flattened in (i, j) order
        mats = [[[e.diff(j) for e in row] for row in mat] for mat in self.matrices for j in range(3)]
        return _compile_matrices(mats, self.rank)

    def evaluate(self, x) -> np.ndarray:
        """``P_i(x)`` stacked as an array of shape ``(3, r, r)`` (or
        ``(3, B, r, r)`` for a batch of points of shape ``(B, 3)``)."""
        return self._evaluator(np.asarray(x, dtype=float))

    def evaluate_derivatives(self, x) -> np.ndarray:
        """``dP_i/dx_j`` as an array ``[i, j, ..., r, r]``."""
        out = self._derivative_evaluator(np.asarray(x, dtype=float))
        return out.reshape((3, 3) + out.shape[1:])

    def directional(self, x, direction) -> np.ndarray:
        """``sum_i d_i P_i(x)``; batched over leading axes of ``x`` and ``direction``."""
        P = self.evaluate(x)
        d = np.asarray(direction, dtype=float)
        if P.ndim == 3:
            return np.tensordot(d, P, 1)
        return np.einsum("...i,i...jk->...jk", d, P)

    def singular_values(self, x) -> np.ndarray:
        """Values of the singular-locus factors at ``x`` (shape ``(k, ...)``)."""
        x = np.asarray(x, dtype=float)
        if not self.singular_locus:
            return np.zeros((0,) + x.shape[:-1])
        return np.stack([np.broadcast_to(p(x[..., 0], x[..., 1], x[..., 2]), x.shape[:-1])
                         for p in self.singular_locus])

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "rank": self.rank,
            "variables": SCHEMA_VARIABLES,
            "std_monomials": [list(s) for s in self.std_monomials],
            "matrices": {
                v: [[e.to_dict() for e in row] for row in mat]
                for v, mat in zip(VARIABLES, self.matrices)
            },
            "singular_locus": [p.to_terms() for p in self.singular_locus],
        }


def _compile_matrices(mats, rank):
    """One generated function returning every entry of every matrix.

    Scalar points (shape ``(3,)``) are evaluated on Python floats, which is
    several times faster than numpy for the tiny matrices involved.
    """
    exprs, index = [], []
    for k, mat in enumerate(mats):
        for a, row in enumerate(mat):
            for b, e in enumerate(row):
                if e.is_zero():
                    continue
                index.append((k, a, b))
                if e.den.terms == {(0, 0, 0): 1}:
                    exprs.append(f"({e.num.horner_source()})")
                else:
                    exprs.append(f"({e.num.horner_source()}) / ({e.den.horner_source()})")
    src = "lambda x11, x12, x22: (" + ", ".join(exprs) + (",)" if exprs else ")")
    fn = eval(src)  # noqa: S307 - source built from exact polynomial data above
    shape = (len(mats), rank, rank)
    flat = [k * rank * rank + a * rank + b for k, a, b in index]

    def evaluate(x):
        if x.ndim == 1:
            out = np.zeros(shape[0] * rank * rank)
            if flat:
                out[flat] = fn(float(x[0]), float(x[1]), float(x[2]))
            return out.reshape(shape)
        out = np.zeros((shape[0] * rank * rank,) + x.shape[:-1])
        if flat:
            vals = fn(x[..., 0], x[..., 1], x[..., 2])
            for pos, v in zip(flat, vals):
                out[pos] = v
        out = out.reshape(shape + x.shape[:-1])
        return np.moveaxis(out, (1, 2), (-2, -1))

    return evaluate


def compatibility_residual(system: PfaffianSystem, x) -> float:
    """Largest entry of ``(dP_i/dx_j + P_i P_j) - (dP_j/dx_i + P_j P_i)``.

    Zero for an integrable system.
    """
    x = x.as_array() if hasattr(x, "as_array") else x
    P = system.evaluate(x)
    dP = system.evaluate_derivatives(x)
    worst = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            lhs = dP[i, j] + P[i] @ P[j]
            rhs = dP[j, i] + P[j] @ P[i]
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# -- hardcoded systems --------------------------------------------------------

def _R(num, den=1):
    return Rational(num if isinstance(num, Poly) else Poly.const(num),
                    den if isinstance(den, Poly) else Poly.const(den))


def relu_pfaffian() -> PfaffianSystem:
    """Rank-2 system for ``uE[relu(u) relu(v)]``, state ``(g, d12 g)``."""
    q = X12 ** 2 - X22 * X11
    half = Fraction(1, 2)

    def p_diag(xd):
        return (
            (_R(-1, xd), _R(-half * X12, xd)),
            (_R(2 * X12, xd * q), _R(half * (2 * X12 ** 2 + 3 * X22 * X11), xd * q)),
        )

    p12 = ((_R(0), _R(1)), (_R(-4, q), _R(-5 * X12, q)))
    return PfaffianSystem(2, ((0, 0, 0), (0, 1, 0)), (p_diag(X11), p12, p_diag(X22)),
                          (X11, X22, q), name="relu")


def heaviside_pfaffian() -> PfaffianSystem:
    """Rank-2 system for the orthant integral ``uE[Y(u) Y(v)]``."""
    d1 = -X12 ** 2 + X22 * X11
    half = Fraction(1, 2)

    def p_diag(xd):
        return (
            (_R(-half, xd), _R(-half * X12, xd)),
            (_R(-half * X12, d1 * xd), _R(-half * X12 ** 2 - X22 * X11, d1 * xd)),
        )

    p12 = ((_R(0), _R(1)), (_R(1, d1), _R(3 * X12, d1)))
    return PfaffianSystem(2, ((0, 0, 0), (0, 1, 0)), (p_diag(X11), p12, p_diag(X22)),
                          (X11, X22, d1), name="heaviside")


def homogeneous_pfaffian(m: int, n: int) -> PfaffianSystem:
    """Rank-2 system satisfied by ``uE[s1(u) s2(v)]`` whenever ``s1`` is
    positively homogeneous of degree ``m`` and ``s2`` of degree ``n``.

    Derived from the two Euler relations
    ``(m+1) g + 2 x11 d11 g + x12 d12 g = 0`` (and its ``x22`` twin) together
    with ``d12^2 g = 4 d11 d22 g``.  ``m = n = 1`` reproduces
    :func:`relu_pfaffian`, ``m = n = 0`` :func:`heaviside_pfaffian`.
    """
    if m < 0 or n < 0:
        raise ValueError("homogeneity degrees must be non-negative")
    det = X11 * X22 - X12 ** 2
    a, b = Fraction(m + 1), Fraction(n + 1)
    # d12 (d12 g) = [a b g + (m+n+3) x12 d12 g] / det
    row12 = (_R(a * b, det), _R((m + n + 3) * X12, det))

    def p_diag(xd, deg, own):
        # d_ii g = -(own g + x12 d12 g) / (2 x_ii)
        first = (_R(-own, 2 * xd), _R(-X12, 2 * xd))
        # d_ii d12 g = -((deg+2) d12 g + x12 d12^2 g) / (2 x_ii)
        second = (
            _R(-a * b * X12, 2 * xd * det),
            _R(-(deg + 2) * det - (m + n + 3) * X12 ** 2, 2 * xd * det),
        )
        return (first, second)

    p12 = ((_R(0), _R(1)), row12)
    return PfaffianSystem(2, ((0, 0, 0), (0, 1, 0)),
                          (p_diag(X11, m, a), p12, p_diag(X22, n, b)),
                          (X11, X22, det), name=f"homogeneous:{m},{n}")


# -- documents --------------------------------------------------------------

def dump_pfaffian(system: PfaffianSystem, indent: int | None = 1) -> str:
    return json.dumps(system.to_document(), indent=indent, sort_keys=True)


def load_pfaffian(document, *, check_denominators: bool = True) -> PfaffianSystem:
    """Build a :class:`PfaffianSystem` from a JSON string or parsed dict.

    Raises
    ------
    PfaffianParseError
        Malformed document.
    DimensionMismatchError
        Rank disagrees with the standard monomials or matrix sizes.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise PfaffianParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise PfaffianParseError("Pfaffian document must be an object")
    try:
        rank = int(document["rank"])
        variables = list(document.get("variables", SCHEMA_VARIABLES))
        std = tuple(tuple(int(v) for v in s) for s in document["std_monomials"])
        mats = document["matrices"]
        locus = tuple(Poly.from_terms(p) for p in document.get("singular_locus", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise PfaffianParseError(f"malformed Pfaffian document: {exc}") from exc
    if variables != SCHEMA_VARIABLES:
        raise PfaffianParseError(f"variables must be {SCHEMA_VARIABLES}, got {variables}")
    if any(len(s) != 3 for s in std):
        raise PfaffianParseError("standard monomials are triples (d11, d12, d22)")
    if set(mats) != set(VARIABLES):
        raise PfaffianParseError(f"matrices must be keyed by {VARIABLES}")
    matrices = []
    for v in VARIABLES:
        mat = mats[v]
        if not isinstance(mat, list) or any(not isinstance(row, list) for row in mat):
            raise PfaffianParseError(f"matrix {v} must be a list of rows")
        if len(mat) != rank or any(len(row) != rank for row in mat):
            raise DimensionMismatchError(
                f"declared rank {rank} but matrix {v} is "
                f"{len(mat)}x{len(mat[0]) if mat else 0}")
        try:
            matrices.append(tuple(tuple(Rational.from_dict(e) for e in row) for row in mat))
        except (ValueError, ZeroDivisionError) as exc:
            raise PfaffianParseError(f"bad entry in matrix {v}: {exc}") from exc
    system = PfaffianSystem(rank, std, tuple(matrices), locus,
                            name=str(document.get("name", "custom")))
    if check_denominators:
        _check_denominators(system)
    return system


def _check_denominators(system: PfaffianSystem) -> None:
    """Warn if a denominator has a factor absent from the singular locus."""
    import sympy

    locus = [p.to_sympy() for p in system.singular_locus]
    gens = sympy.symbols(VARIABLES)
    seen = set()
    for mat in system.matrices:
        for row in mat:
            for e in row:
                if e.is_zero():
                    continue
                den = e.den.to_sympy()
                if den in seen:
                    continue
                seen.add(den)
                _, factors = sympy.factor_list(den, *gens)
                for fac, _ in factors:
                    if not any(sympy.rem(p, fac, *gens) == 0 for p in locus if p != 0):
                        warnings.warn(
                            f"denominator factor {fac} is not covered by the singular locus",
                            stacklevel=3)
