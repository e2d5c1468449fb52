"""Reproducible experiment drivers shared by the CLI and the acceptance tests."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .activators import Activator, parse_activator
from .backends import make_backend
from .hgm.core import (CLUSTER_RADIUS, Path, _cluster, _order_points, hgm_eval, hgm_eval_path,
                       initial_state, straighten_points, system_for)
from .dualact import X0, XPoint
from .ntk import NtkConfig, _Timings, c_sigma, kernel_error, kernel_matrix, krr_fit, krr_predict

__all__ = [
    "LearnSinResult",
    "learn_sin_data",
    "learn_sin",
    "learn_sin_cloud",
    "PathBenchRow",
    "path_bench",
    "PATH_BENCH_STEPS",
]

PATH_BENCH_STEPS = (1, 2, 5, 10, 15, 20)


def learn_sin_data(n_train: int = 15, n_test: int = 20):
    """Equally spaced inputs on ``[-1, 1]`` with targets ``sin(pi x)``."""
    xt = np.linspace(-1.0, 1.0, n_train)
    xs = np.linspace(-1.0, 1.0, n_test)
    return xt[:, None], np.sin(np.pi * xt), xs[:, None], np.sin(np.pi * xs)


@dataclass
class LearnSinResult:
    activator: str
    backend: str
    bias: float
    ridge: float
    kernel: np.ndarray
    test_x: np.ndarray
    predictions: np.ndarray
    targets: np.ndarray
    train_seconds: float
    inference_seconds: float
    dual_seconds: float
    condition_number: float
    kernel_errors: Dict[str, float] = field(default_factory=dict)

    @property
    def mse(self) -> float:
        return float(np.mean((self.predictions - self.targets) ** 2))


def learn_sin(activator: str | Activator = "relu", backend: str = "closed", ridge: float = 0.01,
              bias: float = 1.0, layers: int = 2, rtol: float = 1e-10, step: int = 1,
              compare: Sequence[str] = (), n_train: int = 15, n_test: int = 20) -> LearnSinResult:
    """Fit ``sin(pi x)`` by NTK ridge regression and time both phases.

    Each backend in `compare` recomputes the training kernel; the result
    records ``||H - H_other||_F / N^2`` for it.
    """
    act = parse_activator(activator) if isinstance(activator, str) else activator
    cfg = NtkConfig(layers=layers, activator=act, backend=backend, bias=bias,
                    c_sigma=c_sigma(act), rtol=rtol, step=step)
    train_x, train_y, test_x, test_y = learn_sin_data(n_train, n_test)
    timings = _Timings()
    t0 = time.perf_counter()
    H = kernel_matrix(train_x, cfg=cfg, timings=timings)
    model = krr_fit(train_x, train_y, cfg, ridge, kernel=H)
    t1 = time.perf_counter()
    pred = krr_predict(model, test_x)
    t2 = time.perf_counter()
    errors = {}
    for other in compare:
        other_cfg = NtkConfig(layers=layers, activator=act, backend=other, bias=bias,
                              c_sigma=cfg.c_sigma, rtol=rtol, step=step)
        errors[other] = kernel_error(H, kernel_matrix(train_x, cfg=other_cfg))
    return LearnSinResult(act.name, backend, bias, ridge, H, test_x.ravel(), pred, test_y,
                          t1 - t0, t2 - t1, timings.dual, model.condition_number, errors)


def _x_of(s11, s12, s22):
    det = s11 * s22 - s12 * s12
    return np.array([-s22 / (2 * det), s12 / (2 * det), -s11 / (2 * det)])


def learn_sin_cloud(activator: str = "relu", layers: int = 1, bias: float = 0.5,
                    det_range=(0.01, 1.0), n_points: int | None = None) -> np.ndarray:
    """Ordered x-space points met while building the learn-sin kernel.

    Collects the layer covariances of every pair ``i < j`` with ``det`` in
    `det_range`, merges points closer than the cluster radius and orders them
    as the path planner does.  The defaults give 91 points: at layer 1,
    ``det = bias^2 (x_i - x_j)^2``, which lies in ``[0.01, 1]`` exactly when
    ``|i - j| >= 2`` on the 15-point grid.  `n_points` thins evenly.
    """
    act = parse_activator(activator)
    backend = make_backend("closed" if act.kind in {"relu", "heaviside"} else "quadrature")
    cs = c_sigma(act)
    x, _, _, _ = learn_sin_data()
    x = x.ravel()
    n = len(x)
    beta2 = bias ** 2
    var = x * x + beta2
    cov = np.outer(x, x) + beta2
    iu, ju = np.triu_indices(n, 1)
    pts: List[np.ndarray] = []
    for _ in range(layers):
        s11, s12, s22 = var[iu], cov[iu, ju], var[ju]
        det = s11 * s22 - s12 ** 2
        keep = (det >= det_range[0]) & (det <= det_range[1])
        pts.extend(_x_of(s11[keep], s12[keep], s22[keep]).T)
        I, J = (g.ravel() for g in np.indices((n, n)))
        cov = (cs * backend.expectations(act, act, var[I], cov[I, J], var[J])).reshape(n, n) + beta2
        var = np.diag(cov).copy()
    pts = np.array(pts)
    reps, _ = _cluster(pts, CLUSTER_RADIUS)
    pts = pts[reps]
    pts = pts[_order_points(pts, XPoint.coerce(X0).as_array())]
    if n_points is not None and len(pts) > n_points:
        pts = pts[np.round(np.linspace(0, len(pts) - 1, n_points)).astype(int)]
    return pts


@dataclass
class PathBenchRow:
    step: int
    n_points: int
    seconds: float
    path_length: float
    max_deviation: float


def path_bench(points, activator: str = "relu", steps: Sequence[int] = PATH_BENCH_STEPS,
               rtol: float = 1e-10, repeats: int = 3) -> List[PathBenchRow]:
    """Time one ODE sweep through straightened copies of an ordered point set.

    For each step the points are replaced by equally spaced points on the
    polyline through every ``step``-th point, swept in order from ``x0``.
    Time is the minimum over `repeats` runs; deviation is against per-point
    straight-path integration at the same points.
    """
    act = parse_activator(activator)
    system = system_for(act, act)
    start = initial_state(system, act, act)
    pts = np.asarray(points, dtype=float)
    rows = []
    for step in steps:
        new = straighten_points(pts, step)
        path = Path((start.at,) + tuple(XPoint(*p) for p in new))
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            values = hgm_eval_path(system, start, path, rtol=rtol)
            best = min(best, time.perf_counter() - t0)
        reference = hgm_eval(system, start, new, rtol=rtol)[:, 0]
        dev = float(np.max(np.abs(values - reference) / np.abs(reference)))
        rows.append(PathBenchRow(step, len(new), best, path.length, dev))
    return rows
