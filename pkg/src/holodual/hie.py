"""Holonomic interpolation/extrapolation (HIE).

Fits ``f = sum_b f_b e_b`` by minimising

    sum_j T_j |(L f)(t_j)|^2  +  mu * sum_k |f^(g_k)(p_k) - q_k|^2

for a linear differential operator ``L``, a quadrature scheme ``(t_j, T_j)``
and value/derivative constraints.  The minimiser solves one linear
least-squares problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import chebyshev

from .errors import DomainError, RankDeficiencyError

__all__ = [
    "LinearOperator1D",
    "relu_restricted_operator",
    "relu_restriction_exact",
    "Basis",
    "ChebyshevBasis",
    "FunctionBasis",
    "trapezoid_scheme",
    "Constraint",
    "HieProblem",
    "HieFit",
    "hie_fit",
    "hie_eval",
    "hie_loss",
    "relu_problem",
]


@dataclass(frozen=True)
class LinearOperator1D:
    """``L = a2(x) d^2 + a1(x) d + a0(x)``; coefficients are vectorized callables."""

    a2: Callable
    a1: Callable
    a0: Callable

    def apply(self, values, d1, d2, x):
        return self.a2(x) * d2 + self.a1(x) * d1 + self.a0(x) * values

    def __call__(self, f: Callable, x, h: float = 1e-4):
        """Apply to a plain function using central differences."""
        x = np.asarray(x, dtype=float)
        f0, fp, fm = f(x), f(x + h), f(x - h)
        return self.apply(f0, (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h), x)

    def singular_points(self, candidates=(-1.0, 1.0)) -> List[float]:
        return [c for c in candidates if abs(float(self.a2(np.float64(c)))) < 1e-14]


def relu_restricted_operator() -> LinearOperator1D:
    """``(1 - x^2) d^2 - 5 x d - 4`` acting in ``x = x12`` on the line
    ``x11 = x22 = -1``; singular at ``x = +-1``."""
    return LinearOperator1D(lambda x: 1.0 - x * x, lambda x: -5.0 * x,
                            lambda x: -4.0 + 0.0 * x)


def relu_restriction_exact(x):
    """``uE[relu relu](-1, x, -1) = (x (pi - arccos x) + sqrt(1-x^2)) / (4 (1-x^2)^{3/2})``."""
    x = np.asarray(x, dtype=float)
    s = 1.0 - x * x
    return (x * (np.pi - np.arccos(x)) + np.sqrt(s)) / (4.0 * s ** 1.5)


class Basis:
    """Functions ``e_b`` with first and second derivatives."""

    size: int

    def values(self, x, order: int = 0) -> np.ndarray:
        """Matrix ``[e_b^(order)(x_j)]`` of shape ``(len(x), size)``."""
        raise NotImplementedError


@dataclass(frozen=True)
class ChebyshevBasis(Basis):
    """Chebyshev polynomials ``T_0..T_degree`` mapped onto ``[lo, hi]``."""

    degree: int
    lo: float = -0.9
    hi: float = 0.9

    @property
    def size(self):
        return self.degree + 1

    def values(self, x, order: int = 0):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        half = 0.5 * (self.hi - self.lo)
        s = (x - 0.5 * (self.hi + self.lo)) / half
        out = np.empty((len(x), self.size))
        for b in range(self.size):
            c = np.zeros(self.size)
            c[b] = 1.0
            if order:
                c = chebyshev.chebder(c, order) / half ** order
            out[:, b] = chebyshev.chebval(s, c)
        return out


@dataclass(frozen=True)
class FunctionBasis(Basis):
    """Explicit functions; derivatives by central differences unless given."""

    functions: Tuple[Callable, ...]
    derivatives: Tuple[Tuple[Callable, Callable], ...] | None = None
    h: float = 1e-4

    @property
    def size(self):
        return len(self.functions)

    def values(self, x, order: int = 0):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((len(x), self.size))
        for b, f in enumerate(self.functions):
            if order == 0:
                out[:, b] = f(x)
            elif self.derivatives is not None:
                out[:, b] = self.derivatives[b][order - 1](x)
            elif order == 1:
                out[:, b] = (f(x + self.h) - f(x - self.h)) / (2 * self.h)
            elif order == 2:
                out[:, b] = (f(x + self.h) - 2 * f(x) + f(x - self.h)) / self.h ** 2
            else:
                raise DomainError("derivative order above 2 is not supported")
        return out


def trapezoid_scheme(lo: float, hi: float, n: int):
    """Uniform grid with trapezoid weights."""
    if n < 2:
        raise DomainError("need at least two quadrature points")
    t = np.linspace(lo, hi, n)
    w = np.full(n, (hi - lo) / (n - 1))
    w[[0, -1]] *= 0.5
    return t, w


@dataclass(frozen=True)
class Constraint:
    """``f^(order)(point) = value`` with ``order`` in {0, 1}."""

    point: float
    value: float
    order: int = 0

    def __post_init__(self):
        if self.order not in (0, 1):
            raise DomainError("constraints fix the value or the first derivative only")


@dataclass(frozen=True)
class HieProblem:
    operator: LinearOperator1D
    basis: Basis
    nodes: np.ndarray
    weights: np.ndarray
    constraints: Tuple[Constraint, ...] = ()
    penalty: float = 1e6

    def __post_init__(self):
        if np.any(np.asarray(self.weights) <= 0):
            raise DomainError("quadrature weights must be positive")
        if self.penalty < 0:
            raise DomainError("penalty must be non-negative")


@dataclass
class HieFit:
    coefficients: np.ndarray
    basis: Basis
    loss: float
    rank: int
    nullity: int = 0
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _design(problem: HieProblem):
    t = np.asarray(problem.nodes, dtype=float)
    B = problem.basis
    rows = problem.operator.apply(B.values(t, 0), B.values(t, 1), B.values(t, 2), t[:, None])
    A = [np.sqrt(problem.weights)[:, None] * rows]
    rhs = [np.zeros(len(t))]
    if problem.constraints and problem.penalty > 0:
        sq = math.sqrt(problem.penalty)
        for c in problem.constraints:
            A.append(sq * B.values([c.point], c.order))
            rhs.append(np.array([sq * c.value]))
    return np.vstack(A), np.concatenate(rhs)


def hie_loss(problem: HieProblem, coefficients) -> float:
    A, b = _design(problem)
    r = A @ np.asarray(coefficients, dtype=float) - b
    return float(r @ r)


def hie_fit(problem: HieProblem, rcond: float | None = None, allow_rank_deficient: bool = False) -> HieFit:
    """Least-squares minimiser of the HIE loss.

    Raises
    ------
    RankDeficiencyError
        If the design matrix is rank deficient (``nullity`` attribute), unless
        ``allow_rank_deficient`` is set, in which case the minimum-norm
        solution is returned with the nullity recorded.
    """
    if problem.basis.size == 0:
        return HieFit(np.zeros(0), problem.basis, 0.0, 0)
    A, b = _design(problem)
    coef, _, rank, sv = np.linalg.lstsq(A, b, rcond=rcond)
    nullity = problem.basis.size - int(rank)
    if nullity and not allow_rank_deficient:
        raise RankDeficiencyError(
            f"HIE design matrix has a {nullity}-dimensional null space", nullity)
    r = A @ coef - b
    return HieFit(coef, problem.basis, float(r @ r), int(rank), nullity, sv)


def hie_eval(fit: HieFit, x) -> np.ndarray | float:
    """``sum_b f_b e_b(x)``."""
    if fit.basis.size == 0:
        return 0.0 if np.ndim(x) == 0 else np.zeros(np.shape(x))
    out = fit.basis.values(x) @ fit.coefficients
    return float(out[0]) if np.ndim(x) == 0 else out


def relu_problem(degree: int = 40, n_nodes: int = 200, penalty: float = 1e6,
                 lo: float = -0.9, hi: float = 0.9,
                 constraints: Sequence[Constraint] | None = None) -> HieProblem:
    """The ReLU instance with ``f(0) = 1/4`` and ``f'(0) = pi/8``."""
    t, w = trapezoid_scheme(lo, hi, n_nodes)
    if constraints is None:
        constraints = (Constraint(0.0, 0.25, 0), Constraint(0.0, math.pi / 8, 1))
    return HieProblem(relu_restricted_operator(), ChebyshevBasis(degree, lo, hi), t, w,
                      tuple(constraints), penalty)
