"""Invariant suite behind ``lie-reach check``.

Each check draws seeded random instances, measures the worst violation and compares it
with a fixed tolerance.  The whole suite runs in a few seconds.
"""
from __future__ import annotations

import math
import time
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import expm

from . import io
from .controls import (FunctionControl, SampledControl, StaircaseControl, concatenate,
                       l1_distance, l1_seminorm, reparametrize, subdivide)
from .evolution import (evolution_curve_staircase, evolve, evolve_numeric, evolve_staircase,
                        solution_residual)
from .gmanifold import Sphere2UnderSO3, act, caratheodory_residual, cocycle_check, flow, flow_path
from .groups import HEISENBERG3, SE2, SO3, dist, exp, inverse, log, membership_residual
from .reach import contains_approx, reachable_explore
from .synthesis import (ControlPolytope, approximate_staircase, bangbang_pipeline,
                        convex_decompose, trotter_synthesize, vertex_rows_only)

GROUPS = (SO3, SE2, HEISENBERG3)


class CheckResult(NamedTuple):
    name: str
    passed: bool
    value: float
    tolerance: float
    seconds: float


def _staircase(rng, group, pieces=None, scale=1.0):
    n = pieces or int(rng.integers(1, 11))
    durs = rng.uniform(0.05, 0.5, n)
    return StaircaseControl.from_durations(group, durs, scale * rng.normal(size=(n, group.algebra_dim)))


def _unit(rng):
    x = rng.normal(size=3)
    return x / np.linalg.norm(x)


def check_exp_log(rng):
    worst = 0.0
    for group in GROUPS:
        for _ in range(30):
            v = group.vector(rng.normal(size=3) * (1.0 if group != SO3 else 0.9))
            g = exp(v)
            worst = max(worst, float(np.max(np.abs(g.coords - expm(group.hat_coeffs(v.coeffs)[0])))))
            worst = max(worst, dist(exp(log(g)), g), membership_residual(g))
    return worst, 1e-12


def check_inverse(rng):
    worst = 0.0
    for group in GROUPS:
        for _ in range(30):
            g = exp(group.vector(rng.normal(size=3)))
            worst = max(worst, dist(g @ inverse(g), group.identity()))
    return worst, 1e-12


def check_concatenation(rng):
    worst = 0.0
    for group in GROUPS:
        for _ in range(20):
            a, b = _staircase(rng, group), _staircase(rng, group)
            worst = max(worst, dist(evolve_staircase(concatenate(a, b)),
                                    evolve_staircase(a) @ evolve_staircase(b)))
    return worst, 1e-12


def check_reparametrization(rng):
    worst = 0.0
    for group in GROUPS:
        for _ in range(20):
            a = _staircase(rng, group)
            lo = rng.uniform(-1, 1)
            r = reparametrize(a, lo, lo + rng.uniform(0.2, 3.0))
            worst = max(worst, dist(evolve_staircase(r), evolve_staircase(a)))
    return worst, 1e-12


def check_subdivision(rng):
    worst = 0.0
    for group in GROUPS:
        for _ in range(10):
            a = _staircase(rng, group)
            n = int(rng.integers(2, 6))
            prod = group.identity()
            l1 = 0.0
            for k in range(n):
                piece = subdivide(a, n, k)
                prod = prod @ evolve_staircase(piece)
                l1 += l1_seminorm(piece)
            worst = max(worst, dist(prod, evolve_staircase(a)),
                        abs(l1 - l1_seminorm(a)) / max(1.0, l1))
    return worst, 1e-12


def check_solution_residual(rng):
    worst = 0.0
    for group in GROUPS:
        for _ in range(5):
            n = int(rng.integers(1, 5))
            a = StaircaseControl.from_durations(group, np.full(n, 0.25), rng.normal(size=(n, 3)))
            curve = evolution_curve_staircase(a, 64 * n + 1)
            worst = max(worst, solution_residual(a, curve))
    return worst, 1e-10


def check_cf4_order(rng):
    def f(t):
        t = np.atleast_1d(t)
        return np.stack([np.cos(t), np.sin(t), 0.5 * t], axis=1)

    c = FunctionControl(SO3, 1.0, f)
    ref = evolve_numeric(c, "cf4", 512)
    e1 = dist(evolve_numeric(c, "cf4", 8), ref)
    e2 = dist(evolve_numeric(c, "cf4", 16), ref)
    order = math.log2(e1 / e2)
    return max(0.0, 3.7 - order), 0.0


def check_flow_laws(rng):
    m = Sphere2UnderSO3()
    worst = 0.0
    for _ in range(20):
        a = _staircase(rng, SO3)
        x = m.point(_unit(rng))
        triple = sorted(rng.uniform(0.0, a.horizon, 3))
        worst = max(worst, cocycle_check(m, a, triple, [x]))
        end = flow(m, a, a.horizon, 0.0, x)
        worst = max(worst, float(np.linalg.norm(end.coords - act(x, evolve_staircase(a)).coords)))
    return worst, 1e-12


def check_caratheodory_halving(rng):
    m = Sphere2UnderSO3()
    worst = 0.0
    for _ in range(5):
        n = int(rng.integers(1, 5))
        a = StaircaseControl.from_durations(SO3, np.full(n, 1.0 / n), rng.normal(size=(n, 3)))
        x = m.point(_unit(rng))
        res = []
        for cells in (960, 1920):
            t = np.linspace(0.0, 1.0, cells + 1)
            res.append(caratheodory_residual(m, a, flow_path(m, a, t, 0.0, x), t))
        worst = max(worst, abs(res[0] / res[1] - 2.0) / 2.0)
    return worst, 0.1


def check_l1_triangle(rng):
    worst = 0.0
    for _ in range(20):
        # same grid for all three, so the knot-wise triangle inequality carries over
        m = int(rng.integers(2, 60))
        a, b, c = (SampledControl(SO3, 1.0, rng.normal(size=(m, 3))) for _ in range(3))
        worst = max(worst, l1_distance(a, c) - l1_distance(a, b) - l1_distance(b, c))
    return max(0.0, worst), 1e-12


def check_approximation(rng):
    worst = 0.0
    for _ in range(5):
        g = SampledControl(SO3, 1.0, np.cumsum(rng.normal(size=(401, 3)) * 0.02, axis=0))
        eta = approximate_staircase(g, "euclid", 0.05)
        rows = {r.tobytes() for r in g.samples}
        if not all(v.tobytes() in rows for v in eta.values):
            return math.inf, 0.0
        worst = max(worst, l1_distance(g, eta) - 0.05)
    return max(0.0, worst), 0.0


def check_convex_decompose(rng):
    verts = np.vstack([np.eye(3), -np.eye(3)])
    poly = ControlPolytope(SO3, verts)
    worst = 0.0
    for _ in range(30):
        w = rng.dirichlet(np.ones(6)) @ verts
        parts = convex_decompose(SO3.vector(w), poly)
        lam = np.array([t for t, _ in parts])
        rec = sum(t * verts[i] for t, i in parts)
        if np.any(lam < 0) or len(parts) > 4:
            return math.inf, 0.0
        worst = max(worst, abs(math.fsum(lam) - 1.0), float(np.linalg.norm(rec - w)))
    return worst, 1e-9


def check_trotter(rng):
    rep = trotter_synthesize([(1.0, HEISENBERG3.vector([1, 0, 0])), (1.0, HEISENBERG3.vector([0, 1, 0]))], 1e-3)
    d = dist(evolve_staircase(rep.control), exp(HEISENBERG3.vector([1, 1, 0])))
    horizon_err = abs(rep.control.horizon - 2.0)
    hist = [h for _, h in rep.history]
    if horizon_err > 1e-12 or any(b > a for a, b in zip(hist, hist[1:])):
        return math.inf, 1e-3
    return d, 1e-3


def check_bangbang(rng):
    verts = np.vstack([np.eye(3), -np.eye(3)]) * 2.0
    poly = ControlPolytope(SO3, verts)
    worst = 0.0
    for _ in range(2):
        knots = rng.dirichlet(np.ones(6), size=4) @ verts
        t = np.linspace(0.0, 1.0, 401)
        w = np.array([np.interp(t, np.linspace(0.0, 1.0, 4), knots[:, i]) for i in range(3)]).T
        g = SampledControl(SO3, 1.0, w)
        rep = bangbang_pipeline(g, poly, 1e-2)
        if not vertex_rows_only(rep.control, poly):
            return math.inf, 0.0
        worst = max(worst, dist(evolve_staircase(rep.control), evolve(g)))
    return worst, 1e-2


def check_reach(rng):
    m = Sphere2UnderSO3()
    x0 = m.point([0.0, 0.0, 1.0])
    gens = [SO3.vector([1, 0, 0]), SO3.vector([0, 0, 1])]
    cloud = reachable_explore(m, x0, gens, 6, [math.pi / 8], 0.05)
    worst = 0.0
    for i, word in enumerate(cloud.words):
        c = cloud.control_for(word)
        y = x0.coords if c is None else act(x0, evolve_staircase(c)).coords
        worst = max(worst, float(np.linalg.norm(y - cloud.points[i])))
    ok, w = contains_approx(cloud, x0, 1e-12)
    if not ok or w != ():
        return math.inf, 0.0
    return worst, 1e-10


def check_io_roundtrip(rng):
    objs = [_staircase(rng, SO3), SampledControl(SE2, 1.5, rng.normal(size=(7, 3))),
            exp(HEISENBERG3.vector(rng.normal(size=3))),
            ControlPolytope(SO3, np.vstack([np.eye(3), -np.eye(3)])),
            Sphere2UnderSO3().point(_unit(rng))]
    loaders = [io.control_from_data, io.control_from_data, io.element_from_data,
               io.polytope_from_data, io.point_from_data]
    for obj, load in zip(objs, loaders):
        text = io.dumps(obj)
        back = load(io.loads(text))
        if io.dumps(back) != text:
            return math.inf, 0.0
    return 0.0, 0.0


CHECKS: list[tuple[str, Callable]] = [
    ("exp/log/membership vs expm", check_exp_log),
    ("inverse", check_inverse),
    ("concatenation law", check_concatenation),
    ("reparametrization invariance", check_reparametrization),
    ("subdivision product and L1", check_subdivision),
    ("staircase solution residual", check_solution_residual),
    ("cf4 observed order", check_cf4_order),
    ("flow cocycle and endpoint", check_flow_laws),
    ("Caratheodory residual halving", check_caratheodory_halving),
    ("L1 triangle inequality", check_l1_triangle),
    ("staircase approximation", check_approximation),
    ("convex decomposition", check_convex_decompose),
    ("Trotter synthesis (Heisenberg)", check_trotter),
    ("bang-bang pipeline (SO3)", check_bangbang),
    ("reach words reproduce points", check_reach),
    ("JSON round trip", check_io_roundtrip),
]


def run_checks(seed: int = 0) -> list[CheckResult]:
    out = []
    for k, (name, fn) in enumerate(CHECKS):
        rng = np.random.default_rng([seed, k])
        t0 = time.perf_counter()
        try:
            value, tol = fn(rng)
            passed = bool(value <= tol)
        except Exception as e:  # a crash is a failed check, reported in the table
            value, tol, passed = math.inf, 0.0, False
            name = f"{name} ({type(e).__name__}: {e})"
        out.append(CheckResult(name, passed, float(value), float(tol), time.perf_counter() - t0))
    return out


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  {'value':>10}  {'tol':>8}"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  "
                     f"{r.value:>10.3g}  {r.tolerance:>8.2g}")
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} passed")
    return "\n".join(lines)
