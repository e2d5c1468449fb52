"""Initial values, path integration and multi-point evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from ..activators import Activator
from ..dualact import X0, XPoint
from ..errors import DomainError, MissingPfaffianError, SingularityError, UnreachableTargetError
from .ode import dopri45
from .pfaffian import PfaffianSystem, heaviside_pfaffian, homogeneous_pfaffian, relu_pfaffian

__all__ = [
    "StateVector",
    "Path",
    "PathPlan",
    "DET_CLEARANCE",
    "system_for",
    "register_pfaffian",
    "initial_state",
    "integrate_segment",
    "hgm_eval",
    "plan_path",
    "hgm_eval_all",
    "hgm_eval_path",
    "taylor_extend",
    "straighten_points",
]

#: Minimum of x11 x22 - x12^2 for points handed to the HGM.
DET_CLEARANCE = 1e-3
#: Off-path targets within this distance of a waypoint are resolved by Taylor.
ATTACH_RADIUS = 1e-2
#: Targets closer than this are merged.
CLUSTER_RADIUS = 1e-5
#: Local error tolerance handed to the integrator, as a fraction of the
#: requested rtol, so that global error over a path stays near rtol.
LOCAL_TOL_FACTOR = 0.1
#: Samples per segment for sign checks on loaded singular loci.
_SIGN_SAMPLES = 16


@dataclass(frozen=True)
class StateVector:
    at: XPoint
    values: np.ndarray

    @property
    def value(self) -> float:
        return float(self.values[0])


@dataclass(frozen=True)
class Path:
    waypoints: tuple

    def __len__(self):
        return len(self.waypoints)

    @property
    def length(self) -> float:
        pts = np.array([w.as_array() for w in self.waypoints])
        return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))) if len(pts) > 1 else 0.0


@dataclass
class PathPlan:
    """A path plus how each target is resolved.

    ``visit[i] = (k, h)``: target ``i`` is waypoint ``k`` displaced by ``h``
    (``h = 0`` means it is visited exactly).
    """

    path: Path
    visit: List[tuple] = field(default_factory=list)


# -- system registry ---------------------------------------------------------

_REGISTRY: Dict[tuple, PfaffianSystem] = {}


def register_pfaffian(name1: str, name2: str, system: PfaffianSystem) -> None:
    """Make a user-supplied system available for the activator pair."""
    _REGISTRY[(name1, name2)] = system


def system_for(act1: Activator, act2: Activator | None = None) -> PfaffianSystem:
    """The Pfaffian system governing ``uE[act1(u) act2(v)]``.

    Raises
    ------
    MissingPfaffianError
        If neither a hardcoded nor a registered system fits.
    """
    act2 = act1 if act2 is None else act2
    key = (act1.name, act2.name)
    if key in _REGISTRY:
        return _REGISTRY[key]
    if act1.kind == act2.kind == "relu":
        return relu_pfaffian()
    if act1.kind == act2.kind == "heaviside":
        return heaviside_pfaffian()
    m, n = act1.homogeneity, act2.homogeneity
    if m is not None and n is not None:
        return homogeneous_pfaffian(m, n)
    raise MissingPfaffianError(
        f"no Pfaffian system for ({act1.name}, {act2.name}); supply one with "
        "load_pfaffian and register_pfaffian")


# -- initial values ------------------------------------------------------------

def initial_state(system: PfaffianSystem, act1: Activator,
                  act2: Activator | None = None) -> StateVector:
    """State at ``x0 = (-1, 0, -1)`` from 1D weighted moments.

    ``d11^a d12^b d22^c uE(x0) = 2^b M_{2a+b}[act1] M_{2c+b}[act2]`` where
    ``M_p[s] = int u^p s(u) exp(-u^2) du``.
    """
    act2 = act1 if act2 is None else act2
    values = []
    for d11, d12, d22 in system.std_monomials:
        m1 = act1.moment(2 * d11 + d12)
        m2 = act2.moment(2 * d22 + d12)
        v = 2.0 ** d12 * m1 * m2
        if not math.isfinite(v):
            raise DomainError(f"moments of {act1.name}/{act2.name} are not finite")
        values.append(v)
    return StateVector(X0, np.array(values))


# -- segment integration ----------------------------------------------------

def _check_point(x: np.ndarray, what="point"):
    x11, x12, x22 = x[..., 0], x[..., 1], x[..., 2]
    det = x11 * x22 - x12 * x12
    bad = ~((x11 < 0) & (x22 < 0) & (det >= DET_CLEARANCE))
    if np.any(bad):
        first = np.asarray(x).reshape(-1, 3)[int(np.argmax(bad.reshape(-1)))]
        raise SingularityError(
            f"{what} {tuple(first)} is within det < {DET_CLEARANCE} of the singular locus "
            "or outside the valid region")


def _check_segments(system: PfaffianSystem, a: np.ndarray, b: np.ndarray):
    """Reject segments whose points leave the clearance region.

    ``sqrt(det)`` is concave on negative-definite matrices, so the determinant
    condition on a segment follows from the endpoints.  Extra singular factors
    of a loaded system are checked for sign changes on sample points.
    """
    _check_point(a, "segment start")
    _check_point(b, "target")
    if len(system.singular_locus) <= 3:
        return
    ts = np.linspace(0.0, 1.0, _SIGN_SAMPLES + 1)[:, None, None]
    pts = a[None] + ts * (b - a)[None]
    vals = system.singular_values(pts)
    signs = np.sign(vals)
    if np.any(signs == 0) or np.any(signs != signs[:, :1]):
        raise SingularityError("segment crosses a singular-locus factor")


def _segment_rhs(system, a, d):
    def rhs(t, F):
        x = a + t * d
        M = system.directional(x, d)
        return np.einsum("...ij,...j->...i", M, F)

    return rhs


def integrate_segment(system: PfaffianSystem, state: StateVector, target, rtol: float = 1e-10,
                      atol: float = 1e-12, h0: float | None = None, return_step: bool = False):
    """Carry ``state`` along the straight segment to ``target``.

    Raises
    ------
    SingularityError
        If the segment comes within the determinant clearance of the locus.
    StepUnderflowError
        If the integrator cannot make progress.
    """
    target = XPoint.coerce(target)
    a, b = state.at.as_array(), target.as_array()
    d = b - a
    if not np.any(d):
        out = StateVector(target, state.values.copy())
        return (out, h0) if return_step else out
    _check_segments(system, a, b)
    res = dopri45(_segment_rhs(system, a, d), state.values, 0.0, 1.0,
                  rtol=rtol * LOCAL_TOL_FACTOR, atol=atol * LOCAL_TOL_FACTOR, h0=h0)
    out = StateVector(target, res.y)
    return (out, res.h_last) if return_step else out


def hgm_eval(system: PfaffianSystem, start: StateVector, targets, rtol: float = 1e-10,
             atol: float = 1e-12) -> np.ndarray:
    """Full states at many targets, each reached by its own straight path from ``start``.

    All paths are advanced together in one batched integration.  Returns an
    array of shape ``(len(targets), rank)``.
    """
    pts = np.atleast_2d(np.asarray([XPoint.coerce(t).as_array() for t in targets], dtype=float))
    if pts.size == 0:
        return np.zeros((0, system.rank))
    a = np.broadcast_to(start.at.as_array(), pts.shape).copy()
    _check_segments(system, a, pts)
    d = pts - a
    moving = np.any(d != 0, axis=1)
    out = np.tile(start.values, (len(pts), 1))
    if np.any(moving):
        F0 = out[moving]
        res = dopri45(_segment_rhs(system, a[moving], d[moving]), F0, 0.0, 1.0,
                      rtol=rtol * LOCAL_TOL_FACTOR, atol=atol * LOCAL_TOL_FACTOR)
        out[moving] = res.y
    return out


# -- Taylor --------------------------------------------------------------------

def taylor_extend(system: PfaffianSystem, state: StateVector, h, order: int = 2) -> float:
    """``g(a + h)`` from the state at ``a`` by a Taylor polynomial of order 1 or 2.

    The gradient is ``(P_i F)_0`` and the Hessian ``((dP_i/dx_j + P_i P_j) F)_0``.
    """
    if order not in (1, 2):
        raise DomainError("Taylor order must be 1 or 2")
    h = np.asarray(h, dtype=float)
    F = state.values
    if not np.any(h):
        return float(F[0])
    x = state.at.as_array()
    P = system.evaluate(x)
    PF = np.einsum("kij,j->ki", P, F)
    value = F[0] + float(h @ PF[:, 0])
    if order == 2:
        dP = system.evaluate_derivatives(x)
        hess = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                hess[i, j] = dP[i, j, 0] @ F + P[i, 0] @ PF[j]
        value += 0.5 * float(h @ hess @ h)
    return float(value)


# -- path planning -------------------------------------------------------------

def _cluster(points: np.ndarray, radius: float):
    """Greedy clustering; returns representative indices and a member map."""
    reps: List[int] = []
    owner = np.empty(len(points), dtype=int)
    for i, p in enumerate(points):
        if reps:
            dist = np.linalg.norm(points[reps] - p, axis=1)
            k = int(np.argmin(dist))
            if dist[k] < radius:
                owner[i] = k
                continue
        owner[i] = len(reps)
        reps.append(i)
    return reps, owner


def _order_points(points: np.ndarray, start: np.ndarray) -> List[int]:
    """Angle around the centroid (in the leading principal plane), then
    nearest-neighbour chaining from ``start`` with angle rank breaking ties."""
    n = len(points)
    if n <= 1:
        return list(range(n))
    centred = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    plane = centred @ vt[:2].T if vt.shape[0] >= 2 else np.c_[centred @ vt[0], np.zeros(n)]
    angle = np.arctan2(plane[:, 1], plane[:, 0])
    rank = np.empty(n, dtype=int)
    rank[np.lexsort((np.arange(n), angle))] = np.arange(n)
    remaining = set(range(n))
    order = []
    cur = start
    while remaining:
        idx = sorted(remaining, key=lambda i: (round(float(np.linalg.norm(points[i] - cur)), 12),
                                                rank[i]))[0]
        order.append(idx)
        remaining.remove(idx)
        cur = points[idx]
    return order


def plan_path(targets: Sequence, start=X0, step: int = 1,
              attach_radius: float = ATTACH_RADIUS) -> PathPlan:
    """Piecewise-linear path from ``start`` visiting (or passing near) every target.

    Targets within :data:`CLUSTER_RADIUS` of each other are merged.  With
    ``step > 1`` only every ``step``-th ordered point is a waypoint; the
    others are attached to the nearest waypoint for Taylor evaluation when
    within ``attach_radius``, otherwise they become waypoints too.

    Raises
    ------
    UnreachableTargetError
        If a target violates the determinant clearance.
    """
    if step < 1:
        raise DomainError("step must be at least 1")
    pts = np.array([XPoint.coerce(t).as_array() for t in targets], dtype=float).reshape(-1, 3)
    start = XPoint.coerce(start)
    s = start.as_array()
    if len(pts) == 0:
        return PathPlan(Path((start,)), [])
    try:
        _check_point(pts, "target")
    except SingularityError as exc:
        raise UnreachableTargetError(str(exc)) from exc
    reps, owner = _cluster(pts, CLUSTER_RADIUS)
    rep_pts = pts[reps]
    order = _order_points(rep_pts, s)
    chosen = set(order[::step])
    way_idx: List[int] = []
    offsets: Dict[int, tuple] = {}
    for pos, k in enumerate(order):
        if k in chosen:
            way_idx.append(k)
            continue
        cand = [w for w in order[: pos + 1] if w in chosen] + [w for w in order[pos:] if w in chosen][:1]
        dist = [np.linalg.norm(rep_pts[k] - rep_pts[w]) for w in cand]
        j = int(np.argmin(dist)) if cand else -1
        if cand and dist[j] <= attach_radius:
            offsets[k] = (cand[j], rep_pts[k] - rep_pts[cand[j]])
        else:
            way_idx.append(k)
            chosen.add(k)
    waypoints = [start] + [XPoint(*rep_pts[k]) for k in way_idx]
    position = {k: i + 1 for i, k in enumerate(way_idx)}
    visit = []
    for i in range(len(pts)):
        k = owner[i]
        if k in position:
            visit.append((position[k], pts[i] - rep_pts[k]))
        else:
            w, off = offsets[k]
            visit.append((position[w], pts[i] - rep_pts[w]))
    return PathPlan(Path(tuple(waypoints)), visit)


def hgm_eval_all(system: PfaffianSystem, start: StateVector, targets: Sequence, step: int = 1,
                 rtol: float = 1e-10, atol: float = 1e-12, taylor_order: int = 2,
                 plan: PathPlan | None = None) -> np.ndarray:
    """``uE`` at every target from a single sweep along a planned path."""
    if len(targets) == 0:
        return np.zeros(0)
    plan = plan_path(targets, start.at, step) if plan is None else plan
    states = _sweep(system, start, plan.path, rtol, atol)
    out = np.empty(len(plan.visit))
    for i, (k, h) in enumerate(plan.visit):
        out[i] = states[k].value if not np.any(h) else _attached_value(
            system, states[k], h, taylor_order, rtol, atol)
    return out


def _attached_value(system, state, h, order, rtol, atol) -> float:
    """Taylor value at ``state.at + h``, or a short integration when the
    expansion converges too slowly to reach ``100 rtol``.

    With terms shrinking like ``F rho^k``, the second-order term gives
    ``rho^2`` and the neglected third-order term is ``F rho^3``.
    """
    t1 = taylor_extend(system, state, h, 1)
    if order == 1:
        return t1
    t2 = taylor_extend(system, state, h, 2)
    if abs(t2 - t1) <= (100 * rtol) ** (2 / 3) * abs(t2):
        return t2
    return integrate_segment(system, state, state.at.as_array() + h, rtol, atol).value


def _sweep(system, start, path: Path, rtol, atol) -> List[StateVector]:
    states = [start if start.at == path.waypoints[0]
              else integrate_segment(system, start, path.waypoints[0], rtol, atol)]
    h_abs = None  # last accepted step in x-space distance, carried across segments
    for w in path.waypoints[1:]:
        length = float(np.linalg.norm(w.as_array() - states[-1].at.as_array()))
        h0 = None if h_abs is None or length == 0 else min(1.0, h_abs / length)
        st, h_new = integrate_segment(system, states[-1], w, rtol, atol, h0=h0, return_step=True)
        if length > 0 and h_new:
            h_abs = h_new * length
        states.append(st)
    return states


def hgm_eval_path(system, start, path: Path, rtol=1e-10, atol=1e-12) -> np.ndarray:
    """Values at every waypoint of ``path`` (excluding the start)."""
    return np.array([s.value for s in _sweep(system, start, path, rtol, atol)[1:]])


def straighten_points(points: Sequence, step: int) -> np.ndarray:
    """Straighten an ordered point sequence.

    Every ``step``-th point (and the last) is kept as an anchor; the points
    between two anchors are replaced by equally spaced points on the segment
    joining them.  ``step = 1`` returns the input unchanged.
    """
    if step < 1:
        raise DomainError("step must be at least 1")
    pts = np.array([XPoint.coerce(p).as_array() for p in points], dtype=float).reshape(-1, 3)
    out = pts.copy()
    n = len(pts)
    for a in range(0, n - 1, step):
        b = min(a + step, n - 1)
        t = (np.arange(a, b + 1) - a) / (b - a)
        out[a:b + 1] = pts[a] + t[:, None] * (pts[b] - pts[a])
    return out
