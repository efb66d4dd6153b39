"""Command line interface.

    sasakian-mcp compare    --k1 4 --k2 1 --N 5 --d2 1
    sasakian-mcp riccati    --space heisenberg --n 2 --u0 3.14159 --d2 1
    sasakian-mcp geodesic   --space hopf --n 1 --coeffs 0.5,0.2 --u0 1 --T 1
    sasakian-mcp mcp-check  --space hopf --n 2 --k1 4 --k2 1 --samples 1000 --seed 7
    sasakian-mcp conjugate  --space heisenberg --n 1 --u0 12.566 --horizon 1
    sasakian-mcp doubling   --n 1 --radius 1 --samples 1000000 --seed 3

Data goes to stdout (or --output); diagnostics go to stderr.  Exit status is 0
on success, 1 when a check reports a violation and 2 on usage or domain
errors.  ``--config file.json`` supplies defaults for any option; options
given on the command line win.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import comparison as cmp
from . import io
from . import riccati as ric
from . import spaces as sp
from . import verify as ver
from .errors import SasakianMCPError

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2

SPACES = [k.value for k in sp.SpaceKind]


class UsageError(Exception):
    pass


def parse_grid(spec):
    """"a:b:n" -> n evenly spaced points on [a, b]; "t1,t2,..." -> explicit list."""
    spec = str(spec).strip()
    try:
        if ":" in spec:
            a, b, num = spec.split(":")
            return np.linspace(float(a), float(b), int(num))
        return np.array([float(v) for v in spec.split(",") if v.strip()])
    except ValueError as exc:
        raise UsageError(f"bad grid spec {spec!r}: {exc}") from None


def parse_floats(text):
    try:
        return np.array([float(v) for v in str(text).split(",") if v.strip()])
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}: {exc}") from None


def _common(p, seed_required=False):
    p.add_argument("--config", help="JSON file with default option values")
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.add_argument("--output", "-o", default=None, help="write data here instead of stdout")
    if seed_required:
        p.add_argument("--seed", type=int, default=None, help="required: RNG seed")


def _space_args(p, allow_profile=False):
    p.add_argument("--space", choices=SPACES + (["flat"] if allow_profile else []), default=None)
    if allow_profile:
        p.add_argument("--profile", default=None, help="curvature profile JSON file")
    p.add_argument("--n", type=int, default=1, help="half dimension (manifold dim 2n+1)")


def _covector_args(p):
    p.add_argument("--coeffs", default=None,
                   help="horizontal covector in the frame at x0, comma separated (2n values)")
    p.add_argument("--d2", type=float, default=None,
                   help="squared length |p^h|^2 (direction X_1) when --coeffs is absent")
    p.add_argument("--u0", type=float, default=0.0, help="Reeb momentum p(v0)")
    p.add_argument("--x0", default=None, help="base point, comma separated (default: origin)")


def build_parser():
    parser = argparse.ArgumentParser(prog="sasakian-mcp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="comparison functions and density factor on a grid")
    p.add_argument("--k1", type=float, default=0.0)
    p.add_argument("--k2", type=float, default=0.0)
    p.add_argument("--N", dest="n_dim", type=int, default=3)
    p.add_argument("--d2", type=float, default=1.0, help="squared distance d^2")
    p.add_argument("--grid", default="0:0.99:100")
    _common(p)

    p = sub.add_parser("riccati", help="terminal Riccati solve: tr(C2 S) and det B")
    _space_args(p, allow_profile=True)
    _covector_args(p)
    p.add_argument("--grid", default="0:0.99:100")
    p.add_argument("--method", choices=["rk", "expm"], default="rk")
    _common(p)

    p = sub.add_parser("geodesic", help="geodesic flow from a covector")
    _space_args(p)
    _covector_args(p)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--method", choices=["exact", "numeric"], default=None)
    p.add_argument("--tol", type=float, default=1e-12)
    _common(p)

    p = sub.add_parser("mcp-check", help="contraction inequality or equality check")
    _space_args(p, allow_profile=True)
    p.add_argument("--mode", choices=["inequality", "equality"], default="inequality")
    p.add_argument("--k1", type=float, default=None)
    p.add_argument("--k2", type=float, default=None)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--radius", type=float, default=None, help="max |p^h| of sampled covectors")
    p.add_argument("--grid", default="0:0.99:100")
    _common(p, seed_required=True)

    p = sub.add_parser("conjugate", help="first conjugate time from the vertical frame")
    _space_args(p, allow_profile=True)
    _covector_args(p)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--expect", type=float, default=None,
                   help="expected conjugate time; exit 1 if off by more than --rtol")
    p.add_argument("--rtol", type=float, default=1e-6)
    _common(p)

    p = sub.add_parser("doubling", help="Heisenberg ball volume doubling ratio")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10 ** 6)
    p.add_argument("--precision", type=float, default=0.02)
    p.add_argument("--workers", type=int, default=1)
    _common(p, seed_required=True)
    return parser


def parse_args(argv):
    """Parse twice: once to find --config, then with config values as defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                conf = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from None
        if "config" in conf and "schema_version" in conf:
            conf = conf["config"]
        conf = {k.replace("-", "_"): v for k, v in conf.items() if k != "command"}
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(conf) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        subparser.set_defaults(**conf)
        args = parser.parse_args(argv)
    return args


def _config_of(args):
    conf = {k: v for k, v in vars(args).items() if k not in ("config", "output")}
    return conf


def _space(args):
    return sp.ModelSpace(args.space, args.n)


def _terminal_state(args, space):
    x0 = space.base_point() if args.x0 is None else parse_floats(args.x0)
    if args.coeffs is not None:
        coeffs = parse_floats(args.coeffs)
        if coeffs.size != 2 * space.half_dim:
            raise UsageError(f"--coeffs needs {2 * space.half_dim} values")
    else:
        d2 = 1.0 if args.d2 is None else args.d2
        if d2 < 0:
            raise UsageError("--d2 must be non-negative")
        coeffs = np.zeros(2 * space.half_dim)
        coeffs[0] = math.sqrt(d2)
    p = sp.covector_from_frame(space, x0, coeffs, args.u0)
    return sp.PhaseState(x0, p)


def _profile(args):
    if getattr(args, "profile", None):
        return io.profile_from_doc(io.read_json(args.profile)), None
    if args.space is None:
        raise UsageError("one of --space or --profile is required")
    if args.space == "flat":
        return ric.CurvatureProfile.flat(args.n), None
    space = _space(args)
    state = _terminal_state(args, space)
    return sp.curvature_profile(space, state), (space, state)


def cmd_compare(args):
    g = parse_grid(args.grid)
    params = cmp.ComparisonParams(args.k1, args.k2, args.n_dim)
    kd1 = args.k1 * args.d2
    kd2 = args.k2 * args.d2
    cols = ["t", "d1", "d2", "m1", "m2", "density"]
    rows = []
    dens = np.atleast_1d(cmp.density_factor(params, args.d2, g))
    for t, dv in zip(g, dens):
        rows.append([float(t), cmp.d_param(kd1, t), cmp.d_param(kd2, t), cmp.m1(kd1, t),
                     cmp.m2(kd2, t), float(dv)])
    return "comparison_table", cols, rows, {}, EXIT_OK


def cmd_riccati(args):
    g = parse_grid(args.grid)
    prof, geo = _profile(args)
    sol = ric.solve_riccati_terminal(prof, prof.half_dim, g, method=args.method)
    cols = ["t", "trace_c2s", "det_b"]
    extra = {}
    if geo is not None:
        space, state = geo
        k1, k2 = sp.mcp_params(space, state)
        params = cmp.ComparisonParams(k1, k2, 2 * space.half_dim + 1)
        dens = np.asarray(cmp.density_factor(params, 1.0, g), dtype=float)
        cols.append("density")
        rows = [[float(t), float(tr), float(db), float(dv)]
                for t, tr, db, dv in zip(g, sol.trace_c2s, sol.det_b, dens)]
        extra = {"k1": k1, "k2": k2, "max_abs_deviation": float(np.max(np.abs(sol.det_b - dens)))}
    else:
        rows = [[float(t), float(tr), float(db)] for t, tr, db in zip(g, sol.trace_c2s, sol.det_b)]
    return "riccati_solution", cols, rows, extra, EXIT_OK


def cmd_geodesic(args):
    if args.space is None:
        raise UsageError("--space is required")
    space = _space(args)
    state = _terminal_state(args, space)
    traj = sp.geodesic_flow(space, state, args.T, tol=args.tol, method=args.method,
                            n_out=args.steps + 1)
    m = space.chart_dim
    cols = (["t", "hamiltonian", "reeb_momentum"] + [f"x{i}" for i in range(m)]
            + [f"p{i}" for i in range(m)])
    rows = [[float(t), float(h), float(u)] + s.x.tolist() + s.p.tolist()
            for t, h, u, s in zip(traj.times, traj.hamiltonian_values,
                                  traj.reeb_momentum_values, traj.states)]
    dh, du = traj.drift()
    return "geodesic_trajectory", cols, rows, {"hamiltonian_drift": dh, "reeb_drift": du}, EXIT_OK


def _need_seed(args):
    if args.seed is None:
        raise UsageError("--seed is required for stochastic commands")


def cmd_mcp_check(args):
    _need_seed(args)
    g = parse_grid(args.grid)
    if args.profile:
        prof = io.profile_from_doc(io.read_json(args.profile))
        if args.k1 is None or args.k2 is None:
            raise UsageError("--k1 and --k2 are required with --profile")
        rep = ver.mcp_inequality_check(prof, args.k1, args.k2, args.samples, g, args.seed)
    else:
        if args.space is None or args.space == "flat":
            raise UsageError("--space must be a model space (or use --profile)")
        space = _space(args)
        if args.mode == "equality":
            rep = ver.model_equality_check(space, args.samples, g, args.seed)
        else:
            k1, k2 = args.k1, args.k2
            if k1 is None or k2 is None:
                # the model constants at unit squared distance
                k1, k2 = space.curvature_constants
            rep = ver.mcp_inequality_check(space, k1, k2, args.samples, g, args.seed,
                                           radius=args.radius)
    cols = ["t", "measured_min", "predicted_min", "min_margin"]
    if rep.measured.size:
        margin = rep.measured - rep.predicted
        rows = [[float(t), float(a), float(b), float(c)]
                for t, a, b, c in zip(g, rep.measured.min(axis=0), rep.predicted.min(axis=0),
                                      margin.min(axis=0))]
    else:
        rows = []
    summary = {"violations": rep.violations, "rejected": rep.rejected,
               "accepted": len(rep.samples), "max_abs_deviation": rep.max_abs_deviation,
               "set_level": rep.set_level, "mode": rep.mode}
    code = EXIT_OK if rep.passed else EXIT_VIOLATION
    return "contraction_report", cols, rows, {"report": rep.to_dict(), **summary}, code


def cmd_conjugate(args):
    prof, _ = _profile(args)
    tc = ric.detect_conjugate_time(prof, prof.half_dim, args.horizon)
    code = EXIT_OK
    if args.expect is not None:
        if tc is None or abs(tc - args.expect) > args.rtol * abs(args.expect):
            code = EXIT_VIOLATION
    cols = ["conjugate_time"]
    rows = [[float("nan") if tc is None else float(tc)]]
    return "conjugate_time", cols, rows, {"conjugate_time": tc, "found": tc is not None}, code


def cmd_doubling(args):
    _need_seed(args)
    space = sp.ModelSpace("heisenberg", args.n)
    rep = ver.doubling_check(space, args.radius, args.samples, args.seed, args.precision,
                             workers=args.workers)
    d = rep.to_dict()
    cols = ["radius", "volume_r", "volume_2r", "ratio", "expected", "rel_error"]
    rows = [[rep.radius, rep.volume_r, rep.volume_2r, rep.ratio, rep.expected, rep.rel_error]]
    code = EXIT_OK if rep.rel_error <= args.precision else EXIT_VIOLATION
    return "doubling_report", cols, rows, d, code


COMMANDS = {
    "compare": cmd_compare,
    "riccati": cmd_riccati,
    "geodesic": cmd_geodesic,
    "mcp-check": cmd_mcp_check,
    "conjugate": cmd_conjugate,
    "doubling": cmd_doubling,
}


def _emit(args, kind, cols, rows, extra, out):
    fmt = args.format or "json"
    if fmt == "csv":
        io.write_csv(out, cols, rows)
    else:
        data = {"columns": cols, "rows": rows, **extra}
        out.write(io.dumps(io.envelope(kind, data, _config_of(args))) + "\n")


def main(argv=None, stdout=None, stderr=None):
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    except UsageError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE
    try:
        kind, cols, rows, extra, code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE
    except (SasakianMCPError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_USAGE
    if args.output:
        with open(args.output, "w") as fh:
            _emit(args, kind, cols, rows, extra, fh)
    else:
        _emit(args, kind, cols, rows, extra, stdout)
    if code == EXIT_VIOLATION:
        print(f"{args.command}: check failed", file=stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
