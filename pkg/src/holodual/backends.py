"""Interchangeable evaluators of ``E[s1(u) s2(v)]`` for batches of covariances.

Every backend takes arrays ``(s11, s12, s22)`` of covariance entries and
returns expectations.  Shared routing:

* zero or rank-1 covariances go to the 1D degenerate quadrature unless the
  backend has an exact formula for them; ``|r|`` within ``1e-12`` of 1 is
  snapped to 1 (arccos-type kernels are too sensitive there to rounding);
* the HGM backends send points with ``|r| >= 1 - 1e-6``, ``det Sigma <= 1e-3``
  or ``det x < 1e-3`` to 2D quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict

import numpy as np

from . import hermite as _hermite
from .activators import Activator
from .dualact import (Covariance2, gelu_ff_closed, heaviside_closed, normalize,
                      polynomial_dual_han, rectified_polynomial_uE, relu_closed, x_from_sigma)
from .errors import ClosedFormUnavailable, DomainError
from .hgm.core import (DET_CLEARANCE, hgm_eval, hgm_eval_all, initial_state, system_for)
from .quadrature import degenerate_expectation, expectation_quadrature

__all__ = [
    "Backend",
    "ClosedBackend",
    "QuadratureBackend",
    "HgmBackend",
    "HermiteBackend",
    "HybridBackend",
    "make_backend",
    "BACKENDS",
]

R_SNAP = 1e-12
R_NEAR_DEGENERATE = 1.0 - 1e-6
DET_SIGMA_MIN = 1e-3


def _geometry(s11, s12, s22):
    s11, s12, s22 = (np.asarray(v, dtype=float).ravel() for v in (s11, s12, s22))
    c1, c2 = np.sqrt(np.maximum(s11, 0.0)), np.sqrt(np.maximum(s22, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(c1 * c2 > 0, s12 / (c1 * c2), 1.0)
    r = np.clip(r, -1.0, 1.0)
    r = np.where(np.abs(r) >= 1.0 - R_SNAP, np.sign(r), r)
    return c1, c2, r


@dataclass
class Backend:
    """Base class; subclasses override :meth:`_regular`."""

    name: str = "base"
    rtol: float = 1e-10

    def expectations(self, act1: Activator, act2: Activator, s11, s12, s22) -> np.ndarray:
        """``E[act1(u) act2(v)]`` under ``N(0, [[s11, s12], [s12, s22]])``."""
        if act1 == act2:
            # canonical orientation so that swapping u and v is exact
            s11, s22 = np.minimum(s11, s22), np.maximum(s11, s22)
        c1, c2, r = _geometry(s11, s12, s22)
        out = np.empty(len(c1))
        degenerate = (c1 == 0) | (c2 == 0) | (np.abs(r) == 1.0)
        for i in np.flatnonzero(degenerate):
            out[i] = self._degenerate(act1, act2, c1[i], c2[i], r[i])
        regular = np.flatnonzero(~degenerate)
        if len(regular):
            out[regular] = self._regular(act1, act2, c1[regular], c2[regular], r[regular])
        return out

    def expectation(self, act1, act2, sigma: Covariance2) -> float:
        m = sigma.matrix
        return float(self.expectations(act1, act2, [m[0, 0]], [m[0, 1]], [m[1, 1]])[0])

    # -- hooks -----------------------------------------------------------
    def _regular(self, act1, act2, c1, c2, r) -> np.ndarray:
        raise NotImplementedError

    def _degenerate(self, act1, act2, c1, c2, r) -> float:
        return _degenerate_quadrature(act1, act2, c1, c2, r)

    def _quadrature(self, act1, act2, c1, c2, r) -> np.ndarray:
        return np.array([expectation_quadrature(act1, act2, Covariance2(a, b, c),
                                                rtol=self.rtol).value
                         for a, b, c in zip(c1, c2, r)])


def _degenerate_quadrature(act1, act2, c1, c2, r) -> float:
    if c1 == 0 and c2 == 0:
        return float(act1(0.0) * act2(0.0))
    sign = 1.0 if r >= 0 else -1.0
    sigma = np.array([[c1 * c1, sign * c1 * c2], [sign * c1 * c2, c2 * c2]])
    return _sum_pieces(act1, act2, lambda f, g: degenerate_expectation(f, g, sigma).value)


def _sum_pieces(act1, act2, fn):
    total = 0.0
    for w1, f in act1.pieces():
        for w2, g in act2.pieces():
            total += w1 * w2 * fn(f, g)
    return total


# -- closed forms ------------------------------------------------------------

class ClosedBackend(Backend):
    """Arc-cosine kernels, 2F1 formulas for (rectified) polynomials, Han's formula."""

    def __init__(self, rtol: float = 1e-10):
        super().__init__("closed", rtol)

    @staticmethod
    def supports(act1: Activator, act2: Activator) -> bool:
        if act1.kind == act2.kind and act1.kind in {"relu", "heaviside", "gelu_f"}:
            return True
        if act1.is_polynomial_type and act2.is_polynomial_type:
            return act1.rectified == act2.rectified
        return False

    def _check(self, act1, act2):
        if not self.supports(act1, act2):
            raise ClosedFormUnavailable(f"closed form NA for ({act1.name}, {act2.name})")

    def _degenerate(self, act1, act2, c1, c2, r):
        self._check(act1, act2)
        if act1.kind == act2.kind == "relu":
            return relu_closed(c1, c2, r)
        if act1.kind == act2.kind == "heaviside" and c1 > 0 and c2 > 0:
            return heaviside_closed(r)
        if act1.is_polynomial_type and not act1.rectified and c1 > 0 and c2 > 0:
            return polynomial_dual_han(act1.polynomial_coeffs, Covariance2(c1, c2, r),
                                       act2.polynomial_coeffs)
        return _degenerate_quadrature(act1, act2, c1, c2, r)

    def _regular(self, act1, act2, c1, c2, r):
        self._check(act1, act2)
        if act1.kind == act2.kind == "relu":
            return np.asarray(relu_closed(c1, c2, r), dtype=float).reshape(-1)
        if act1.kind == act2.kind == "heaviside":
            return np.asarray(heaviside_closed(r), dtype=float).reshape(-1)
        out = np.empty(len(c1))
        for i, (a, b, c) in enumerate(zip(c1, c2, r)):
            sigma = Covariance2(a, b, c)
            if act1.kind == "gelu_f":
                x = x_from_sigma(sigma)
                out[i] = normalize(gelu_ff_closed(x), x)
            elif act1.rectified:
                x = x_from_sigma(sigma)
                out[i] = normalize(rectified_polynomial_uE(act1.polynomial_coeffs, x,
                                                           act2.polynomial_coeffs), x)
            else:
                out[i] = polynomial_dual_han(act1.polynomial_coeffs, sigma, act2.polynomial_coeffs)
        return out


# -- quadrature ---------------------------------------------------------------

class QuadratureBackend(Backend):
    def __init__(self, rtol: float = 1e-10):
        super().__init__("quadrature", rtol)

    def _regular(self, act1, act2, c1, c2, r):
        return self._quadrature(act1, act2, c1, c2, r)


# -- HGM -----------------------------------------------------------------------

class HgmBackend(Backend):
    """Holonomic gradient method.

    ``all_at_once=False`` reaches every point by its own straight path from
    ``x0`` (paths advanced together in one batched integration);
    ``all_at_once=True`` visits all points of a call along one planned path.
    GeLU derivative pairs are split into ``f`` and ``g`` pieces: ``f f`` uses
    its closed form, the mixed and ``g g`` pieces use quadrature.
    """

    def __init__(self, rtol: float = 1e-10, all_at_once: bool = False, step: int = 1):
        super().__init__("aao" if all_at_once else "hgm", rtol)
        self.all_at_once = all_at_once
        self.step = step
        self.last_fallbacks = 0

    def _regular(self, act1, act2, c1, c2, r):
        if act1.kind == "gelu_dot" or act2.kind == "gelu_dot":
            return self._gelu_dot(act1, act2, c1, c2, r)
        det_sigma = (c1 * c2) ** 2 * (1 - r * r)
        det_x = 1.0 / (4.0 * det_sigma)
        ok = ((det_sigma > DET_SIGMA_MIN) & (det_x >= DET_CLEARANCE)
              & (np.abs(r) < R_NEAR_DEGENERATE))
        out = np.empty(len(c1))
        bad = np.flatnonzero(~ok)
        self.last_fallbacks = len(bad)
        if len(bad):
            out[bad] = self._quadrature(act1, act2, c1[bad], c2[bad], r[bad])
        good = np.flatnonzero(ok)
        if len(good):
            system = system_for(act1, act2)
            start = initial_state(system, act1, act2)
            s11, s22 = c1[good] ** 2, c2[good] ** 2
            s12 = c1[good] * c2[good] * r[good]
            det = s11 * s22 - s12 ** 2
            xs = np.c_[-s22 / (2 * det), s12 / (2 * det), -s11 / (2 * det)]
            if self.all_at_once:
                uE = hgm_eval_all(system, start, xs, step=self.step, rtol=self.rtol)
            else:
                uE = hgm_eval(system, start, xs, rtol=self.rtol)[:, 0]
            out[good] = uE * np.sqrt(xs[:, 0] * xs[:, 2] - xs[:, 1] ** 2) / math.pi
        return out

    def _gelu_dot(self, act1, act2, c1, c2, r):
        out = np.zeros(len(c1))
        for i, (a, b, c) in enumerate(zip(c1, c2, r)):
            sigma = Covariance2(a, b, c)
            x = x_from_sigma(sigma)
            total = 0.0
            for _, f in act1.pieces():
                for _, g in act2.pieces():
                    if f.kind == g.kind == "gelu_f":
                        total += normalize(gelu_ff_closed(x), x)
                    else:
                        total += expectation_quadrature(f, g, sigma, rtol=self.rtol).value
            out[i] = total
        return out


# -- Hermite series ------------------------------------------------------------

class HermiteBackend(Backend):
    """Hermite-series dual activation for ReLU, Heaviside and ReSin.

    ReSin is not homogeneous, so it is only supported at unit variances.
    """

    _HOMOGENEITY = {"relu": 1, "heaviside": 0}

    def __init__(self, terms: int = 200, rtol: float = 1e-10):
        super().__init__("hermite", rtol)
        self.terms = terms
        self._coeffs: Dict[str, list] = {}

    def _coefficients(self, kind):
        if kind not in self._coeffs:
            rec = _hermite.recurrence_for(kind)
            self._coeffs[kind] = [float(v) for v in
                                  _hermite.realize(_hermite.run_recurrence(rec, self.terms))]
        return self._coeffs[kind]

    def _series(self, act1, act2, c1, c2, r):
        if act1 != act2 or act1.kind not in {"relu", "heaviside", "resin"}:
            raise DomainError(f"no Hermite recurrence for ({act1.name}, {act2.name})")
        q = self._HOMOGENEITY.get(act1.kind)
        if q is None and not (np.allclose(c1, 1.0) and np.allclose(c2, 1.0)):
            raise DomainError(f"{act1.name} is not homogeneous; Hermite series needs c1 = c2 = 1")
        cs = np.array(self._coefficients(act1.kind))
        j = np.arange(len(cs))
        logw = 2 * np.log(np.abs(cs) + 1e-300) - np.log(2 * np.pi) - np.array(
            [math.lgamma(k + 1) for k in j])
        w = np.where(cs != 0, np.exp(logw), 0.0)
        vals = np.array([np.sum(w * rr ** j) for rr in r])
        scale = (c1 * c2) ** (q or 0)
        return scale * vals

    def _regular(self, act1, act2, c1, c2, r):
        return self._series(act1, act2, c1, c2, r)

    def _degenerate(self, act1, act2, c1, c2, r):
        # the series converges too slowly at |r| = 1 to be useful
        return _degenerate_quadrature(act1, act2, c1, c2, r)


# -- hybrid -------------------------------------------------------------------

class HybridBackend(Backend):
    """Closed forms where available, HGM otherwise; quadrature near degeneracy."""

    def __init__(self, rtol: float = 1e-10):
        super().__init__("hybrid", rtol)
        self._closed = ClosedBackend(rtol)
        self._hgm = HgmBackend(rtol)

    def _regular(self, act1, act2, c1, c2, r):
        det_sigma = (c1 * c2) ** 2 * (1 - r * r)
        near = (det_sigma <= DET_SIGMA_MIN) | (np.abs(r) >= R_NEAR_DEGENERATE)
        out = np.empty(len(c1))
        if np.any(near):
            out[near] = self._quadrature(act1, act2, c1[near], c2[near], r[near])
        far = ~near
        if np.any(far):
            inner = self._closed if ClosedBackend.supports(act1, act2) else self._hgm
            out[far] = inner._regular(act1, act2, c1[far], c2[far], r[far])
        return out


BACKENDS = ("closed", "hgm", "aao", "quadrature", "hermite", "hybrid")


def make_backend(name: str, rtol: float = 1e-10, step: int = 1, hermite_terms: int = 200) -> Backend:
    if name == "closed":
        return ClosedBackend(rtol)
    if name == "quadrature":
        return QuadratureBackend(rtol)
    if name == "hgm":
        return HgmBackend(rtol)
    if name == "aao":
        return HgmBackend(rtol, all_at_once=True, step=step)
    if name == "hermite":
        return HermiteBackend(hermite_terms, rtol)
    if name == "hybrid":
        return HybridBackend(rtol)
    raise DomainError(f"unknown backend {name!r}; choose from {', '.join(BACKENDS)}")
