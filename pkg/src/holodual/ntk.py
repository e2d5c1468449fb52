"""NTK surrogate kernel and kernel ridge regression.

Layer recursion (bias ``beta``, normalization ``c_s = 1 / E[s(z)^2]``)::

    S0(x, x')    = x . x' + beta^2
    L_h          = [[S_{h-1}(x, x), S_{h-1}(x, x')], [., S_{h-1}(x', x')]]
    S_h(x, x')   = c_s E_{L_h}[s(u) s(v)] + beta^2
    dS_h(x, x')  = c_s E_{L_h}[s'(u) s'(v)]
    Theta        = sum_{h=1}^{L+1} S_{h-1} prod_{h'=h}^{L+1} dS_{h'},   dS_{L+1} = 1
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .activators import Activator, parse_activator
from .backends import Backend, make_backend
from .errors import DomainError, SolverError
from .quadrature import degenerate_expectation

__all__ = [
    "NtkConfig",
    "c_sigma",
    "theta",
    "kernel_matrix",
    "kernel_error",
    "KRRModel",
    "krr_fit",
    "krr_predict",
    "NTKRegressor",
]


@dataclass
class NtkConfig:
    """Settings for the Theta kernel.

    ``c_sigma=None`` means "compute it from the activator".
    """

    layers: int = 2
    activator: Activator = field(default_factory=lambda: parse_activator("relu"))
    backend: str = "closed"
    bias: float = 1.0
    c_sigma: Optional[float] = None
    rtol: float = 1e-10
    step: int = 1

    def __post_init__(self):
        if isinstance(self.activator, str):
            self.activator = parse_activator(self.activator)
        if self.layers < 1:
            raise DomainError("need at least one layer")
        if self.bias < 0:
            raise DomainError("bias must be non-negative")

    @property
    def derivative(self) -> Activator:
        return self.activator.derivative()

    def make_backend(self) -> Backend:
        return make_backend(self.backend, rtol=self.rtol, step=self.step)

    def resolved_c_sigma(self) -> float:
        return c_sigma(self.activator) if self.c_sigma is None else float(self.c_sigma)


def c_sigma(activator: Activator) -> float:
    """``1 / E[s(z)^2]`` for standard normal ``z`` (1D degenerate expectation)."""
    second = degenerate_expectation(activator, activator, np.ones((2, 2))).value
    if not second > 0:
        raise DomainError(f"E[s(z)^2] vanishes for {activator.name}")
    return 1.0 / second


@dataclass
class _Timings:
    dual: float = 0.0


def kernel_matrix(XA, XB=None, cfg: NtkConfig | None = None, backend: Backend | None = None,
                  timings: _Timings | None = None) -> np.ndarray:
    """``Theta(x_i, x'_j)`` for rows of ``XA`` and ``XB`` (``XB = XA`` if omitted).

    For each layer every dual activation the layer needs (cross pairs plus the
    diagonal variances) goes to the backend in one call, so the all-at-once
    backend resolves a whole layer with a single path sweep.
    """
    cfg = NtkConfig() if cfg is None else cfg
    backend = cfg.make_backend() if backend is None else backend
    A = np.atleast_2d(np.asarray(XA, dtype=float))
    symmetric = XB is None
    B = A if symmetric else np.atleast_2d(np.asarray(XB, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DomainError("input dimensions differ")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise DomainError("inputs must be finite")
    beta2 = cfg.bias ** 2
    cs = cfg.resolved_c_sigma()
    act, dact = cfg.activator, cfg.derivative

    nA, nB = len(A), len(B)
    var_a = np.einsum("ij,ij->i", A, A) + beta2
    var_b = var_a if symmetric else np.einsum("ij,ij->i", B, B) + beta2
    cross = A @ B.T + beta2
    if symmetric:
        iu, ju = np.triu_indices(nA)
    else:
        iu, ju = (g.ravel() for g in np.indices((nA, nB)))
    theta_pairs = cross[iu, ju].copy()
    pair_cov = cross[iu, ju].copy()
    for _ in range(cfg.layers):
        diag = var_a if symmetric else np.concatenate([var_a, var_b])
        s11 = np.concatenate([var_a[iu], diag])
        s22 = np.concatenate([var_b[ju], diag])
        s12 = np.concatenate([pair_cov, diag])
        t0 = time.perf_counter()
        e_sig = backend.expectations(act, act, s11, s12, s22)
        e_dot = backend.expectations(dact, dact, s11[: len(iu)], s12[: len(iu)], s22[: len(iu)])
        if timings is not None:
            timings.dual += time.perf_counter() - t0
        k = len(iu)
        new_pair = cs * e_sig[:k] + beta2
        dot = cs * e_dot
        new_diag = cs * e_sig[k:] + beta2
        theta_pairs = theta_pairs * dot + new_pair
        pair_cov = new_pair
        if symmetric:
            var_a = var_b = new_diag
        else:
            var_a, var_b = new_diag[:nA], new_diag[nA:]
    out = np.empty((nA, nB))
    out[iu, ju] = theta_pairs
    if symmetric:
        out[ju, iu] = theta_pairs
    return out


def theta(x, x_prime, cfg: NtkConfig | None = None) -> float:
    return float(kernel_matrix(np.atleast_2d(x), np.atleast_2d(x_prime), cfg)[0, 0])


def kernel_error(H1, H2) -> float:
    """``||H1 - H2||_F / N^2``."""
    H1, H2 = np.asarray(H1), np.asarray(H2)
    return float(np.linalg.norm(H1 - H2) / H1.shape[0] ** 2)


@dataclass
class KRRModel:
    train_x: np.ndarray
    alpha: np.ndarray
    cfg: NtkConfig
    ridge: float
    kernel: np.ndarray
    condition_number: float
    fit_seconds: float = 0.0


def krr_fit(train_x, train_y, cfg: NtkConfig | None = None, ridge: float = 0.01,
            kernel: np.ndarray | None = None) -> KRRModel:
    """Solve ``(H + ridge I) alpha = y`` by a symmetric positive-definite solve."""
    if not ridge > 0:
        raise DomainError("ridge parameter must be positive")
    cfg = NtkConfig() if cfg is None else cfg
    X = np.atleast_2d(np.asarray(train_x, dtype=float))
    y = np.asarray(train_y, dtype=float).ravel()
    t0 = time.perf_counter()
    H = kernel_matrix(X, cfg=cfg) if kernel is None else np.asarray(kernel, dtype=float)
    M = H + ridge * np.eye(len(H))
    try:
        alpha = scipy.linalg.solve(M, y, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SolverError(f"kernel system is numerically singular: {exc}") from exc
    elapsed = time.perf_counter() - t0
    return KRRModel(X, alpha, cfg, ridge, H, float(np.linalg.cond(M)), elapsed)


def krr_predict(model: KRRModel, x) -> np.ndarray:
    """``K(x, X_train) @ alpha`` for each row of ``x``."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    K = kernel_matrix(X, model.train_x, model.cfg)
    return K @ model.alpha


class NTKRegressor(RegressorMixin, BaseEstimator):
    """Kernel ridge regression with the infinite-width NTK surrogate.

    Parameters
    ----------
    activator : str
        ``relu``, ``heaviside``, ``gelu``, ``resin`` or a polynomial such as ``rpoly:0,1``.
    backend : str
        Dual-activation backend: ``closed``, ``hgm``, ``aao``, ``quadrature``,
        ``hermite`` or ``hybrid``.
    layers : int
    bias : float
    alpha : float
        Ridge parameter.
    rtol : float
    step : int
        Path thinning for the ``aao`` backend.
    """

    def __init__(self, activator="relu", backend="closed", layers=2, bias=1.0, alpha=0.01,
                 rtol=1e-10, step=1):
        self.activator = activator
        self.backend = backend
        self.layers = layers
        self.bias = bias
        self.alpha = alpha
        self.rtol = rtol
        self.step = step

    def _config(self) -> NtkConfig:
        return NtkConfig(layers=self.layers, activator=parse_activator(self.activator),
                         backend=self.backend, bias=self.bias, rtol=self.rtol, step=self.step)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.model_ = krr_fit(X, y, self._config(), self.alpha)
        self.X_fit_ = X
        self.dual_coef_ = self.model_.alpha
        self.condition_number_ = self.model_.condition_number
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "dual_coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return krr_predict(self.model_, X)
