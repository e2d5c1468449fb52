"""``holodual`` command line.

Every subcommand writes CSV to stdout (or ``--out``).  Exit codes: 0 on
success, 2 for unreadable or invalid input, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from typing import Iterable, List, Sequence

import numpy as np

from . import hermite
from .activators import parse_activator
from .backends import BACKENDS, make_backend
from .dualact import Covariance2, XPoint, sigma_from_x
from .errors import DomainError, HolodualError
from .experiments import PATH_BENCH_STEPS, learn_sin, learn_sin_cloud, path_bench
from .hgm.core import register_pfaffian, system_for
from .hgm.pfaffian import compatibility_residual, dump_pfaffian, load_pfaffian
from .hie import hie_eval, hie_fit, relu_problem, relu_restriction_exact
from .ntk import NtkConfig, kernel_matrix

EXIT_INPUT = 2
EXIT_NUMERIC = 3


class InputError(Exception):
    """Malformed command-line input (exit code 2)."""


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def _join_negative_values(argv: Sequence[str]) -> List[str]:
    """Turn ``--point -1,0,-1`` into ``--point=-1,0,-1`` so argparse keeps the value."""
    out: List[str] = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE_VALUE.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


# -- input helpers ---------------------------------------------------------------

def _floats(text: str, n: int | None = None) -> List[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"cannot parse numbers from {text!r}") from exc
    if n is not None and len(vals) != n:
        raise InputError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def read_points(path: str) -> List[XPoint]:
    """Points CSV whose header is ``x11,x12,x22`` or ``c1,c2,r``."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise InputError(f"{path} is empty")
    header = [h.strip().lower() for h in rows[0]]
    if header not in (["x11", "x12", "x22"], ["c1", "c2", "r"]):
        raise InputError(f"{path}: header must be 'x11,x12,x22' or 'c1,c2,r'")
    if len(rows) == 1:
        raise InputError(f"{path} has no points")
    points = []
    for k, row in enumerate(rows[1:], start=2):
        vals = _floats(",".join(row), 3)
        if header[0] == "x11":
            points.append(XPoint(*vals))
        else:
            try:
                sigma = Covariance2(*vals)
            except DomainError as exc:
                raise InputError(f"{path}:{k}: {exc}") from exc
            m = sigma.matrix
            det = sigma.det
            if not det > 0:
                raise InputError(f"{path}:{k}: covariance is singular")
            points.append(XPoint(-m[1, 1] / (2 * det), m[0, 1] / (2 * det), -m[0, 0] / (2 * det)))
    return points


def read_inputs(path: str) -> np.ndarray:
    """Network inputs: CSV with a header row, one vector per row."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if len(rows) < 2:
        raise InputError(f"{path} has no input vectors")
    data = [_floats(",".join(r), len(rows[0])) for r in rows[1:]]
    return np.array(data)


def _activator(text):
    try:
        return parse_activator(text)
    except DomainError as exc:
        raise InputError(str(exc)) from exc


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def _num(v: float) -> str:
    return repr(float(v))


def _register(args, act):
    if args.pfaffian:
        try:
            with open(args.pfaffian) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read {args.pfaffian}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.pfaffian}: invalid JSON ({exc.msg})") from exc
        register_pfaffian(act.name, act.name, load_pfaffian(doc))


# -- subcommands -----------------------------------------------------------------

def cmd_dual_eval(args, out):
    act = _activator(args.activator)
    _register(args, act)
    points = [XPoint(*_floats(p, 3)) for p in args.point]
    if args.points:
        points += read_points(args.points)
    if not points:
        raise InputError("no points given (use --point or --points)")
    for p in points:
        if not p.is_valid:
            raise InputError(f"point {p.as_array().tolist()} is not negative definite")
    backend = make_backend(args.backend, rtol=args.rtol, step=args.step)
    sig = [sigma_from_x(p).matrix for p in points]
    s11, s12, s22 = (np.array([m[i, j] for m in sig]) for i, j in ((0, 0), (0, 1), (1, 1)))
    E = backend.expectations(act, act, s11, s12, s22)
    tol = 0.0 if args.backend == "closed" else args.rtol
    w = _writer(out)
    w.writerow(["x11", "x12", "x22", "uE", "E", "backend", "achieved_tol"])
    for p, e in zip(points, E):
        uE = e * math.pi / math.sqrt(p.det)
        w.writerow([_num(p.x11), _num(p.x12), _num(p.x22), _num(uE), _num(e), args.backend,
                    _num(tol)])


def cmd_learn_sin(args, out):
    act = _activator(args.activator)
    _register(args, act)
    compare = [c for c in (args.compare or "").split(",") if c]
    for name in [args.backend] + compare:
        if name not in BACKENDS:
            raise InputError(f"unknown backend {name!r}")
    res = learn_sin(act, args.backend, ridge=args.lam, bias=args.beta, layers=args.layers,
                    rtol=args.rtol, step=args.step, compare=compare)
    w = _writer(out)
    w.writerow(["x", "prediction", "sin_pi_x"])
    for x, p, t in zip(res.test_x, res.predictions, res.targets):
        w.writerow([_num(x), _num(p), _num(t)])
    report = [
        ("activator", res.activator), ("backend", res.backend), ("beta", _num(res.bias)),
        ("beta_source", "default" if args.beta_default else "flag"),
        ("lambda", _num(res.ridge)), ("layers", args.layers), ("mse", _num(res.mse)),
        ("condition_number", _num(res.condition_number)),
        ("train_seconds", f"{res.train_seconds:.6f}"),
        ("inference_seconds", f"{res.inference_seconds:.6f}"),
    ] + [(f"kernel_error[{k}]", _num(v)) for k, v in res.kernel_errors.items()]
    if args.kernel_out:
        with open(args.kernel_out, "w", newline="") as fh:
            _writer(fh).writerows([[_num(v) for v in row] for row in res.kernel])
    for k, v in report:
        print(f"{k}={v}", file=sys.stderr)


def cmd_hermite(args, out):
    try:
        rec = hermite.recurrence_for(args.activator)
    except DomainError as exc:
        raise InputError(str(exc)) from exc
    if args.N < 0:
        raise InputError("N must be non-negative")
    cs = hermite.run_recurrence(rec, max(args.N, rec.order))[: args.N + 1]
    out.write(hermite.coefficients_csv(cs))


def cmd_path_bench(args, out):
    if args.points:
        cloud = read_points(args.points)
        for p in cloud:
            if not p.is_valid:
                raise InputError(f"point {p.as_array().tolist()} lies on or beyond the "
                                 "singular locus det x = 0")
        points = np.array([p.as_array() for p in cloud])
    else:
        points = learn_sin_cloud(args.activator)
    steps = [int(s) for s in _floats(args.steps)] if args.steps else list(PATH_BENCH_STEPS)
    rows = path_bench(points, args.activator, steps, rtol=args.rtol, repeats=args.repeats)
    w = _writer(out)
    w.writerow(["step", "n_points", "seconds", "path_length", "max_deviation"])
    for r in rows:
        w.writerow([r.step, r.n_points, f"{r.seconds:.6f}", _num(r.path_length),
                    _num(r.max_deviation)])


def cmd_hie(args, out):
    fit = hie_fit(relu_problem(args.degree, args.nodes, args.penalty))
    xs = np.linspace(-0.9, 0.9, args.grid)
    approx, exact = hie_eval(fit, xs), relu_restriction_exact(xs)
    w = _writer(out)
    w.writerow(["x12", "hie", "exact", "abs_error"])
    for x, a, e in zip(xs, approx, exact):
        w.writerow([_num(x), _num(a), _num(e), _num(abs(a - e))])
    print(f"max_abs_error={_num(np.max(np.abs(approx - exact)))}", file=sys.stderr)


def cmd_kernel(args, out):
    act = _activator(args.activator)
    _register(args, act)
    X = read_inputs(args.points) if args.points else np.linspace(-1, 1, 15)[:, None]
    cfg = NtkConfig(layers=args.layers, activator=act, backend=args.backend, bias=args.beta,
                    rtol=args.rtol, step=args.step)
    H = kernel_matrix(X, cfg=cfg)
    _writer(out).writerows([[_num(v) for v in row] for row in H])


def cmd_pfaffian(args, out):
    if args.pfaffian:
        try:
            with open(args.pfaffian) as fh:
                system = load_pfaffian(json.load(fh))
        except OSError as exc:
            raise InputError(f"cannot read {args.pfaffian}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.pfaffian}: invalid JSON ({exc.msg})") from exc
    else:
        act = _activator(args.activator)
        system = system_for(act, act)
    if not args.check:
        out.write(dump_pfaffian(system) + "\n")
        return
    rng = np.random.default_rng(args.seed)
    w = _writer(out)
    w.writerow(["x11", "x12", "x22", "compatibility_residual"])
    for x in _random_points(rng, args.check):
        w.writerow([_num(x.x11), _num(x.x12), _num(x.x22), _num(compatibility_residual(system, x))])


def _random_points(rng, n) -> Iterable[XPoint]:
    """Valid points with ``det Sigma`` in ``[1e-2, 1]``."""
    count = 0
    while count < n:
        c1, c2 = rng.uniform(0.3, 2.0, 2)
        r = rng.uniform(-0.95, 0.95)
        sigma = Covariance2(c1, c2, r)
        if 1e-2 <= sigma.det <= 1.0:
            m = sigma.matrix
            count += 1
            yield XPoint(-m[1, 1] / (2 * sigma.det), m[0, 1] / (2 * sigma.det),
                         -m[0, 0] / (2 * sigma.det))


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="holodual", description="Dual activations and NTK kernels.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, backend=True):
        sp.add_argument("--activator", default="relu",
                        help="relu | heaviside | gelu | resin | monomial:m | rpoly:a0,a1,...")
        if backend:
            sp.add_argument("--backend", default="closed", choices=BACKENDS)
        sp.add_argument("--rtol", type=float, default=1e-10)
        sp.add_argument("--step", type=int, default=1, help="path thinning for the aao backend")
        sp.add_argument("--pfaffian", metavar="FILE", help="Pfaffian document for the activator")
        sp.add_argument("--out", metavar="FILE", help="write CSV here instead of stdout")

    sp = sub.add_parser("dual-eval", help="evaluate uE and E at points x = -Sigma^-1/2")
    common(sp)
    sp.add_argument("--point", action="append", default=[], metavar="X11,X12,X22")
    sp.add_argument("--points", metavar="FILE")
    sp.set_defaults(func=cmd_dual_eval)

    sp = sub.add_parser("learn-sin", help="NTK ridge regression of sin(pi x)")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.01)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--layers", type=int, default=2)
    sp.add_argument("--compare", metavar="LIST", help="comma-separated backends to compare against")
    sp.add_argument("--kernel-out", metavar="FILE", help="write the training kernel matrix here")
    sp.set_defaults(func=cmd_learn_sin)

    sp = sub.add_parser("hermite", help="exact Hermite coefficients c_0..c_N")
    sp.add_argument("--activator", default="relu", help="relu | heaviside | resin")
    sp.add_argument("-N", type=int, default=10)
    sp.add_argument("--out", metavar="FILE")
    sp.set_defaults(func=cmd_hermite)

    sp = sub.add_parser("path-bench", help="sweep time against path straightening")
    sp.add_argument("--activator", default="relu")
    sp.add_argument("--points", metavar="FILE", help="ordered points (default: learn-sin cloud)")
    sp.add_argument("--steps", metavar="LIST", help="default 1,2,5,10,15,20")
    sp.add_argument("--rtol", type=float, default=1e-10)
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--out", metavar="FILE")
    sp.set_defaults(func=cmd_path_bench)

    sp = sub.add_parser("hie", help="fit the restricted ReLU equation on [-0.9, 0.9]")
    sp.add_argument("--degree", type=int, default=40)
    sp.add_argument("--nodes", type=int, default=200)
    sp.add_argument("--penalty", type=float, default=1e6)
    sp.add_argument("--grid", type=int, default=19)
    sp.add_argument("--out", metavar="FILE")
    sp.set_defaults(func=cmd_hie)

    sp = sub.add_parser("kernel", help="NTK kernel matrix")
    common(sp)
    sp.add_argument("--points", metavar="FILE", help="input vectors (default: learn-sin inputs)")
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--layers", type=int, default=2)
    sp.set_defaults(func=cmd_kernel)

    sp = sub.add_parser("pfaffian", help="dump a Pfaffian system or check its compatibility")
    sp.add_argument("--activator", default="relu")
    sp.add_argument("--pfaffian", metavar="FILE")
    sp.add_argument("--check", type=int, default=0, metavar="K",
                    help="report the residual at K random points instead of dumping")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", metavar="FILE")
    sp.set_defaults(func=cmd_pfaffian)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(
            _join_negative_values(sys.argv[1:] if argv is None else argv))
        if getattr(args, "beta", "absent") is None:
            args.beta, args.beta_default = 1.0, True
        else:
            args.beta_default = False
        buf = io.StringIO()
        args.func(args, buf)
    except InputError as exc:
        print(f"holodual: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except HolodualError as exc:
        code = EXIT_INPUT if isinstance(exc, ValueError) else EXIT_NUMERIC
        print(f"holodual: error: {exc}", file=sys.stderr)
        return code
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"holodual: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


if __name__ == "__main__":
    sys.exit(main())
