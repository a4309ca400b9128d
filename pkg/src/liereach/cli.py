"""``lie-reach`` command line.

Exit codes: 0 success, 1 failed checks or missed budgets, 2 malformed input.
Machine artifacts go to files (or stdout when no file is given); tables go to stdout.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import io
from .checks import format_table, run_checks
from .controls import SampledControl, l1_distance
from .errors import (BudgetExceeded, BudgetInfeasible, CapacityExceeded, LieReachError,
                     NotInHull)
from .evolution import METHODS, evolution_values_at, evolve
from .gmanifold import flow_path, manifold
from .groups import GroupElement
from .reach import DEFAULT_MAX_POINTS, reachable_explore
from .synthesis import (DEFAULT_N_MAX, approximate_continuous, approximate_staircase,
                        bangbang_pipeline)

THREADS_ENV = "LIE_REACH_THREADS"


class UsageError(Exception):
    pass


def _floats(text, what):
    try:
        vals = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"{what}: expected finite numbers, got {text!r}")
    return vals


def _threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def _load_control(path):
    return io.control_from_data(io.load(path), f"{path}:$")


# ---------------------------------------------------------------------------
# subcommands


def cmd_evolve(args):
    c = _load_control(args.control)
    if args.curve:
        if args.curve < 2:
            raise UsageError("--curve needs at least 2 points")
        times = np.linspace(0.0, c.horizon, args.curve)
        blocks = evolution_values_at(c, times, args.method, args.steps)
        data = {"group": c.group.group_id,
                "curve": [[t, GroupElement(c.group, b).coords] for t, b in zip(times, blocks)]}
        _write(io.dumps(data), args.output)
    else:
        _write(io.dumps(evolve(c, args.method, args.steps)), args.output)
    return 0


def cmd_flow(args):
    c = _load_control(args.control)
    m = manifold(args.manifold)
    y0 = m.point(_floats(args.point, "--point"))
    if args.samples < 2:
        raise UsageError("--samples needs at least 2")
    t_end = c.horizon if args.t_end is None else args.t_end
    times = np.linspace(args.t0, t_end, args.samples)
    path = flow_path(m, c, times, args.t0, y0, method=args.method, steps=args.steps)
    _write(io.path_csv(times, path), args.output)
    return 0


def cmd_approx(args):
    c = _load_control(args.control)
    if not isinstance(c, SampledControl):
        raise UsageError(f"{args.control}: approx takes a sampled control")
    if args.kind == "staircase":
        out = approximate_staircase(c, args.seminorm, args.eps)
    else:
        out = approximate_continuous(c, args.seminorm, args.eps)
    data = {"approximant": out, "certified_error": l1_distance(c, out, args.seminorm),
            "eps": args.eps, "seminorm": args.seminorm}
    _write(io.dumps(data), args.output)
    return 0


def cmd_bangbang(args):
    c = _load_control(args.control)
    poly = io.polytope_from_data(io.load(args.polytope), f"{args.polytope}:$")
    rep = bangbang_pipeline(c, poly, args.eps, args.seminorm, n_max=args.n_max,
                            workers=_threads())
    _write(io.dumps(rep), args.output)
    return 0


def cmd_reach(args):
    m = manifold(args.manifold)
    x0 = m.point(_floats(args.point, "--point"))
    if not args.generator:
        raise UsageError("reach needs at least one --generator")
    gens = [m.group.vector(_floats(g, "--generator")) for g in args.generator]
    dwell = _floats(args.dwell, "--dwell")
    cloud = reachable_explore(m, x0, gens, args.depth, dwell, args.dedup_radius, args.max_points)
    _write(io.cloud_csv(cloud), args.csv)
    if args.json:
        _write(io.dumps(cloud), args.json)
    return 0


def cmd_check(args):
    results = run_checks(args.seed)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------


def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
        return v
    return parse


def build_parser():
    p = argparse.ArgumentParser(prog="lie-reach", description="Evolutions, flows, bang-bang "
                                "synthesis and reachable sets on matrix Lie groups.")
    sub = p.add_subparsers(dest="command", required=True)

    def integration(sp):
        sp.add_argument("--method", choices=METHODS, default="cf4",
                        help="integrator for non-staircase controls (default: cf4)")
        sp.add_argument("--steps", type=_positive(int), default=None,
                        help="integration steps (default: max(256, 2 * sample intervals))")

    sp = sub.add_parser("evolve", help="endpoint (or sampled curve) of the evolution")
    sp.add_argument("control", help="control JSON file")
    integration(sp)
    sp.add_argument("--curve", type=int, default=0, metavar="M",
                    help="emit the curve at M uniform times instead of the endpoint")
    sp.add_argument("-o", "--output", help="output JSON (default: stdout)")
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("flow", help="trajectory of x0 under the control as CSV")
    sp.add_argument("control")
    sp.add_argument("--manifold", required=True,
                    help="Sphere2UnderSO3, PlaneUnderSE2, GroupItself[G], ProductPowerDiagonal[N]")
    sp.add_argument("--point", required=True, help="initial point, comma-separated coordinates")
    sp.add_argument("--t0", type=float, default=0.0, help="initial time (default: 0)")
    sp.add_argument("--t-end", type=float, default=None, help="final time (default: horizon)")
    sp.add_argument("--samples", type=int, default=101, help="output times (default: 101)")
    integration(sp)
    sp.add_argument("-o", "--output", help="output CSV (default: stdout)")
    sp.set_defaults(func=cmd_flow)

    sp = sub.add_parser("approx", help="staircase or continuous L1 approximant")
    sp.add_argument("control", help="sampled control JSON file")
    sp.add_argument("--eps", type=_positive(float), required=True)
    sp.add_argument("--kind", choices=("staircase", "continuous"), default="staircase")
    sp.add_argument("--seminorm", choices=("euclid", "sup"), default="euclid")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_approx)

    sp = sub.add_parser("bangbang", help="vertex-valued staircase with nearby evolution")
    sp.add_argument("control")
    sp.add_argument("polytope", help="polytope JSON file (group, vertices, tolerance)")
    sp.add_argument("--eps", type=_positive(float), required=True)
    sp.add_argument("--seminorm", choices=("euclid", "sup"), default="euclid")
    sp.add_argument("--n-max", type=_positive(int), default=DEFAULT_N_MAX,
                    help=f"Trotter doubling cap (default: {DEFAULT_N_MAX})")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_bangbang)

    sp = sub.add_parser("reach", help="breadth-first reachable cloud")
    sp.add_argument("--manifold", required=True)
    sp.add_argument("--point", required=True, help="x0, comma-separated coordinates")
    sp.add_argument("--generator", action="append", metavar="V",
                    help="algebra vector, comma-separated; repeat for each generator")
    sp.add_argument("--depth", type=_positive(int), required=True)
    sp.add_argument("--dwell", required=True, help="comma-separated dwell times")
    sp.add_argument("--dedup-radius", type=_positive(float), required=True)
    sp.add_argument("--max-points", type=_positive(int), default=DEFAULT_MAX_POINTS,
                    help=f"point limit (default: {DEFAULT_MAX_POINTS})")
    sp.add_argument("--csv", help="point coordinates CSV (default: stdout)")
    sp.add_argument("--json", help="words JSON")
    sp.set_defaults(func=cmd_reach)

    sp = sub.add_parser("check", help="run the invariant suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BudgetInfeasible, BudgetExceeded, NotInHull, CapacityExceeded) as e:
        stage = getattr(e, "stage", None)
        print(f"lie-reach: budget error{f' at stage {stage}' if stage else ''}: {e}",
              file=sys.stderr)
        return 1
    except (io.FormatError, UsageError, LieReachError, ValueError, OSError) as e:
        print(f"lie-reach: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
