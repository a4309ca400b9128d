"""Approximation of controls and bang-bang synthesis.

* :func:`approximate_staircase` - a staircase with values among the samples of a sampled
  control, within a certified L1 distance.
* :func:`approximate_continuous` - a continuous control with values in the convex hull
  of the samples, obtained by ramping across the staircase jumps.
* :func:`convex_decompose` - convex weights of a point over polytope vertices, pruned to
  at most ``dim + 1`` vertices.
* :func:`trotter_synthesize` - a staircase with values in ``{v_i}`` whose evolution is
  close to ``exp(sum t_i v_i)``, via nested Trotter products.
* :func:`bangbang_pipeline` - the composition: any control valued in ``conv(S)`` to a
  staircase valued in the vertices of ``S`` with nearby evolution.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .controls import (PiecewiseContinuousControl, SampledControl, StaircaseControl,
                       concatenate_all, image_array, l1_distance, merge_equal_segments)
from .errors import (BudgetExceeded, BudgetInfeasible, GroupMismatch, InvalidControl,
                     NotInHull)
from .evolution import evolve, evolve_staircase
from .groups import AlgebraVector, GroupElement, LieGroup, as_group, check_seminorm, seminorm_values

DEFAULT_N_MAX = 1 << 20
# pipeline grid refinements (factor 2 each) before giving up on the L1 budget
MAX_REFINE = 6


# ---------------------------------------------------------------------------
# L1 approximation


def approximate_staircase(gamma: SampledControl, q_id: str = "euclid", eps: float = 0.01) -> StaircaseControl:
    """Greedy staircase approximation with values drawn from the samples.

    Grid cells are merged left to right into runs; each run is snapped to the sample in
    the run with the smallest trapezoid cost and kept as long as that cost stays below
    ``eps * run_length / T``.  Breakpoints therefore sit on grid nodes and the total
    certified distance is at most ``eps``.
    """
    if not isinstance(gamma, SampledControl):
        raise TypeError("approximate_staircase takes a SampledControl")
    check_seminorm(q_id)
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    group = gamma.group
    s = gamma.samples
    m, h, T = gamma.m, gamma.step, gamma.horizon
    density = eps / T * (1.0 - 1e-12)

    def q(x):
        return seminorm_values(group, x, q_id)

    cuts = [0]
    chosen = []
    i0 = 0
    while i0 < m - 1:
        # running cost per candidate in [i0, i1]
        cost = np.zeros(1)
        last_q = np.zeros(1)  # q(s[i1] - s[c]) for each candidate c
        best_end, best_c = None, None
        i1 = i0
        while i1 < m - 1:
            nxt = q(s[i1 + 1][None, :] - s[i0:i1 + 1])
            cost = cost + 0.5 * h * (last_q + nxt)
            # the new node as a candidate
            back = q(s[i0:i1 + 2] - s[i1 + 1][None, :])
            wts = np.ones(i1 + 2 - i0)
            wts[0] = wts[-1] = 0.5
            cost = np.append(cost, h * float(back @ wts))
            last_q = np.append(nxt, 0.0)
            i1 += 1
            k = int(np.argmin(cost))
            if cost[k] <= density * (i1 - i0) * h:
                best_end, best_c = i1, i0 + k
            else:
                break
        if best_end is None:
            raise BudgetInfeasible(
                f"cell starting at node {i0} cannot meet the L1 budget; resample finer")
        cuts.append(best_end)
        chosen.append(best_c)
        i0 = best_end

    bp = np.asarray(cuts, dtype=float) * h
    bp[-1] = T
    eta = StaircaseControl(group, bp, s[np.asarray(chosen)])
    return merge_equal_segments(eta)


def approximate_continuous(gamma: SampledControl, q_id: str = "euclid", eps: float = 0.01) -> SampledControl:
    """Continuous approximation whose values stay in the hull of the samples.

    A staircase within ``eps/2`` is built first; each jump at ``t_j`` is replaced by the
    affine ramp on ``[t_j - w, t_j + w]``.  The half-width ``w`` keeps the total ramp cost
    ``sum_j w * q(jump_j) / 2`` under ``eps/2`` and the ramps disjoint.  The result lives on
    a uniform grid refined by a power of two so that ramp ends are grid nodes.
    """
    eta = approximate_staircase(gamma, q_id, eps / 2.0)
    group = gamma.group
    T, h, m = gamma.horizon, gamma.step, gamma.m
    if eta.n_segments == 1:
        return SampledControl(group, T, np.repeat(eta.values, m, axis=0))

    node = np.rint(eta.breakpoints / h).astype(int)
    node[-1] = m - 1
    jumps = seminorm_values(group, np.diff(eta.values, axis=0), q_id)
    total_jump = float(np.sum(jumps))
    min_cells = int(np.min(np.diff(node)))
    w_max = eps / total_jump if total_jump > 0 else T

    r = 1
    while h / r > w_max or (min_cells * r - 1) // 2 < 1:
        r *= 2
    s = min(int(math.floor(w_max * r / h)), (min_cells * r - 1) // 2)

    fine = (m - 1) * r + 1
    seg = np.clip(np.searchsorted(node * r, np.arange(fine), side="right") - 1, 0, eta.n_segments - 1)
    out = eta.values[seg].copy()
    for j, centre in enumerate(node[1:-1] * r):
        lo, hi = eta.values[j], eta.values[j + 1]
        d = np.arange(-s + 1, s)
        out[centre + d] = lo + ((d + s) / (2.0 * s))[:, None] * (hi - lo)
    theta = SampledControl(group, T, out)

    certified = l1_distance(gamma, theta, q_id)
    if certified > eps:
        raise BudgetInfeasible(f"continuous approximant misses the budget ({certified:.3g} > {eps:.3g})")
    return theta


# ---------------------------------------------------------------------------
# convex geometry


def _hull_lp(points, w):
    """Minimize ``||sum l_i p_i - w||_1`` over the simplex; returns (weights, residual)."""
    k, d = points.shape
    # variables: lambda (k), r_plus (d), r_minus (d)
    c = np.concatenate([np.zeros(k), np.ones(2 * d)])
    a_eq = np.zeros((d + 1, k + 2 * d))
    a_eq[:d, :k] = points.T
    a_eq[:d, k:k + d] = np.eye(d)
    a_eq[:d, k + d:] = -np.eye(d)
    a_eq[d, :k] = 1.0
    b_eq = np.concatenate([w, [1.0]])
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        return None, math.inf
    lam = np.clip(res.x[:k], 0.0, None)
    return lam, float(np.linalg.norm(points.T @ lam - w))


def _exact_unit_sum(lam):
    lam = np.array(lam, dtype=float)
    top = int(np.argmax(lam))
    for _ in range(8):
        excess = math.fsum(list(lam) + [-1.0])
        if excess == 0.0:
            break
        lam[top] -= excess
    return lam


def _caratheodory_prune(points, lam):
    support = np.flatnonzero(lam > 0.0)
    lam = lam.copy()
    d = points.shape[1]
    while support.size > d + 1:
        a = np.vstack([points[support].T, np.ones(support.size)])
        mu = np.linalg.svd(a)[2][-1]
        if not np.any(mu > 0):
            mu = -mu
        pos = mu > 0
        ratios = np.full(support.size, np.inf)
        ratios[pos] = lam[support][pos] / mu[pos]
        j = int(np.argmin(ratios))
        lam[support] = lam[support] - ratios[j] * mu
        lam[support[j]] = 0.0
        lam = np.clip(lam, 0.0, None)
        support = np.flatnonzero(lam > 0.0)
    return lam


@dataclass(frozen=True, eq=False)
class ControlPolytope:
    """Vertices of a convex control set; construction rejects non-extreme vertices."""

    group: LieGroup
    vertices: np.ndarray
    tolerance: float = 1e-9

    def __post_init__(self):
        group = as_group(self.group)
        object.__setattr__(self, "group", group)
        rows = [v.coeffs if isinstance(v, AlgebraVector) else v for v in self.vertices]
        verts = np.array(rows, dtype=float)
        if verts.ndim != 2 or verts.shape[0] < 1 or verts.shape[1] != group.algebra_dim:
            raise ValueError("vertices must be a non-empty (k, algebra_dim) array")
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        for i in range(verts.shape[0]):
            others = np.delete(verts, i, axis=0)
            if others.shape[0] == 0:
                break
            _, res = _hull_lp(others, verts[i])
            if res <= self.tolerance:
                raise ValueError(f"vertex {i} lies in the hull of the others")

    def vertex(self, i) -> AlgebraVector:
        return AlgebraVector(self.group, self.vertices[i])

    def __len__(self):
        return self.vertices.shape[0]


def convex_decompose(w: AlgebraVector, polytope: ControlPolytope) -> list:
    """Weights ``t_i >= 0`` summing to 1 with ``||sum t_i v_i - w|| <= tolerance``.

    The feasibility LP is solved by dual simplex and the support is then reduced to at
    most ``algebra_dim + 1`` vertices.  Returns ``[(weight, vertex_index), ...]``.
    """
    if w.group != polytope.group:
        raise GroupMismatch(f"{w.group_id} vs {polytope.group.group_id}")
    verts = polytope.vertices
    hit = np.flatnonzero(np.all(verts == w.coeffs, axis=1))
    if hit.size:
        return [(1.0, int(hit[0]))]
    lam, res = _hull_lp(verts, w.coeffs)
    if lam is None or res > polytope.tolerance:
        raise NotInHull(f"point is {res:.3g} away from the polytope hull")
    lam = _caratheodory_prune(verts, lam)
    # weights this small would make zero-length staircase segments
    lam[lam < 1e-13] = 0.0
    lam = lam / math.fsum(lam)
    lam = _exact_unit_sum(lam)
    res = float(np.linalg.norm(verts.T @ lam - w.coeffs))
    if res > polytope.tolerance:
        raise NotInHull(f"decomposition residual {res:.3g} exceeds tolerance")
    return [(float(lam[i]), int(i)) for i in np.flatnonzero(lam > 0.0)]


def hull_violation(points, queries) -> np.ndarray:
    """How far each query lies outside ``conv(points)`` (0 inside).

    Uses the Qhull facets for full-dimensional point sets and the L1 feasibility LP
    otherwise.
    """
    points = np.asarray(points, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    uniq = np.unique(points, axis=0)
    try:
        hull = ConvexHull(uniq)
    except (QhullError, ValueError):
        return np.array([_hull_lp(uniq, q)[1] for q in queries])
    eq = hull.equations
    return np.clip(np.max(queries @ eq[:, :-1].T + eq[:, -1], axis=1), 0.0, None)


# ---------------------------------------------------------------------------
# Trotter synthesis


@dataclass
class SynthesisReport:
    control: StaircaseControl
    achieved_distance: float
    segment_count: int
    trotter_n_used: list
    history: list = field(default_factory=list)  # (n, distance) of the outermost doubling


def _spec_norm(blocks):
    return float(np.max(np.linalg.norm(blocks, ord=2, axis=(-2, -1))))


def _bdist(a, b):
    return float(np.sqrt(np.sum((a - b) ** 2)))


def _power(blocks, n):
    return np.stack([np.linalg.matrix_power(b, n) for b in blocks])


def _trotter(group, times, vecs, idx, tol, n_max, n_used, history=None):
    """Recursive Trotter construction; returns ``(durations, vertex_indices)``."""
    if len(times) == 1:
        return [times[0]], [idx[0]]
    head_sum = np.sum(np.asarray(times[:-1])[:, None] * vecs[:-1], axis=0)
    tail = times[-1] * vecs[-1]
    target = group.exp_coeffs(head_sum + tail)

    n, best = 1, (math.inf, None)
    while True:
        u0 = group.exp_coeffs(head_sum / n)
        theta = group.exp_coeffs(tail / n)
        d = _bdist(_power(u0 @ theta, n), target)
        if history is not None:
            history.append((n, d))
        if d < best[0]:
            best = (d, n)
        if d <= tol / 2.0:
            break
        if 2 * n > n_max:
            raise BudgetExceeded(f"Trotter doubling reached n_max={n_max} at distance {best[0]:.3g}",
                                 best_distance=best[0], best_n=best[1])
        n *= 2
    n_used.append(n)

    # (u theta)^n moves by at most lip * ||u - u0||_F while u stays near u0
    a = max(1.0, _spec_norm(u0 @ theta))
    lip = n * a ** (n - 1) * _spec_norm(theta) * 1.05
    delta = (tol / 2.0) / lip
    inner_times = [t / n for t in times[:-1]]
    for _ in range(6):
        sub_used = []
        durs, ids = _trotter(group, inner_times, vecs[:-1], idx[:-1], delta, n_max, sub_used)
        eta = evolve_staircase(StaircaseControl.from_durations(group, durs, vecs[:-1][_local(idx[:-1], ids)]))
        if _bdist(_power(eta.blocks @ theta, n), target) <= tol:
            break
        delta /= 4.0
    else:
        raise BudgetExceeded("inner Trotter level could not reach its budget", best_distance=best[0])
    n_used.extend(sub_used)
    block_d = durs + [times[-1] / n]
    block_i = ids + [idx[-1]]
    return block_d * n, block_i * n


def _local(idx, ids):
    pos = {v: k for k, v in enumerate(idx)}
    return [pos[i] for i in ids]


def trotter_synthesize(targets, eps: float, n_max: int = DEFAULT_N_MAX) -> SynthesisReport:
    """Staircase with values only in ``{v_i}`` and horizon ``sum t_i`` approximating
    ``exp(t_1 v_1 + ... + t_m v_m)`` to distance ``eps``.

    ``targets`` is a list of ``(t_i, v_i)`` with ``t_i > 0``.  The last direction is
    split off and ``n`` doubled until the Trotter product is within ``eps/2``; the
    remaining directions are synthesized recursively at the tolerance that keeps the
    ``n``-fold product within ``eps``.
    """
    targets = list(targets)
    if not targets:
        raise InvalidControl("no targets")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    group = targets[0][1].group
    for t, v in targets:
        if v.group != group:
            raise GroupMismatch(f"{v.group_id} vs {group.group_id}")
        if not t > 0.0:
            raise InvalidControl("dwell times must be positive")
    times = [float(t) for t, _ in targets]
    vecs = np.vstack([v.coeffs for _, v in targets])
    durs, vals, n_used, history = _synthesize_rows(group, times, vecs, eps, n_max)
    gamma = StaircaseControl.from_durations(group, durs, vals)
    target = group.exp_coeffs(np.sum(np.asarray(times)[:, None] * vecs, axis=0))
    d = _bdist(evolve_staircase(gamma).blocks, target)
    return SynthesisReport(gamma, d, gamma.n_segments, n_used, history)


def _synthesize_rows(group, times, vecs, eps, n_max):
    idx = list(range(len(times)))
    n_used, history = [], []
    durs, ids = _trotter(group, times, vecs, idx, eps, n_max, n_used, history)
    return durs, vecs[ids], n_used, history


# ---------------------------------------------------------------------------
# bang-bang pipeline


def _evol_l1_lipschitz(group, gamma, q_id):
    """Constant ``K`` with ``dist(evol a, evol b) <= K ||a - b||_{L1,q}`` near ``gamma``."""
    # ||hat(v)||_F <= sqrt(2) * euclid(v) for all three bases; sup <= euclid <= sqrt(N) sup
    c_hat = math.sqrt(2.0) * (math.sqrt(group.copies) if q_id == "sup" else 1.0)
    if group.base == "SO3":
        # compact with skew generators: the Frobenius error grows by at most ||a - b||
        return c_hat
    pts = image_array(gamma)
    bound = float(np.max(np.linalg.norm(group.hat_coeffs(pts), ord=2, axis=(-2, -1)))) * gamma.horizon
    return c_hat * math.exp(2.0 * bound) * math.e


def _refine(c: SampledControl, r: int) -> SampledControl:
    """Same piecewise-linear interpolant on a grid ``r`` times finer."""
    t = np.linspace(0.0, c.horizon, (c.m - 1) * r + 1)
    out = np.empty((t.size, c.samples.shape[1]))
    for i in range(out.shape[1]):
        out[:, i] = np.interp(t, c.times, c.samples[:, i])
    out[::r] = c.samples
    return SampledControl(c.group, c.horizon, out)


def _approximate_refining(c: SampledControl, q_id, budget):
    # a staircase valued in the samples is at least ~ h * TV / 4 away, so refine on failure
    for k in range(MAX_REFINE + 1):
        try:
            return approximate_staircase(_refine(c, 1 << k) if k else c, q_id, budget)
        except BudgetInfeasible:
            if k == MAX_REFINE:
                raise


def _staircase_stage(gamma, q_id, budget):
    if isinstance(gamma, StaircaseControl):
        return gamma
    if isinstance(gamma, SampledControl):
        return _approximate_refining(gamma, q_id, budget)
    if isinstance(gamma, PiecewiseContinuousControl):
        parts = [_approximate_refining(s, q_id, budget * s.horizon / gamma.horizon)
                 for s in gamma.segments]
        return concatenate_all(parts)
    raise TypeError(f"cannot approximate {type(gamma).__name__}")


def bangbang_pipeline(gamma, polytope: ControlPolytope, eps: float, q_id: str = "euclid",
                      n_max: int = DEFAULT_N_MAX, workers: int | None = None,
                      steps: int | None = None) -> SynthesisReport:
    """Staircase valued in the polytope vertices with evolution within ``eps`` of ``gamma``'s.

    Budget: ``eps/3`` for the staircase approximation (converted to an L1 budget by the
    evolution's Lipschitz constant), ``eps/3`` shared by the per-segment Trotter syntheses,
    the rest left for the reference integration of non-staircase inputs.  Errors keep their
    type and carry a ``stage`` attribute.
    """
    if gamma.group != polytope.group:
        raise GroupMismatch(f"{gamma.group.group_id} vs {polytope.group.group_id}")
    group = gamma.group
    verts = polytope.vertices

    stage = "approximate"
    try:
        lip = _evol_l1_lipschitz(group, gamma, q_id)
        eta = _staircase_stage(gamma, q_id, eps / 3.0 / lip)

        stage = "decompose"
        decomps = [convex_decompose(AlgebraVector(group, w), polytope) for w in eta.values]

        stage = "trotter"
        factors = group.exp_coeffs(eta.durations[:, None] * eta.values)
        growth = float(np.prod([max(1.0, _spec_norm(f)) for f in factors])) ** 2
        seg_eps = eps / 3.0 / (eta.n_segments * growth)

        def synth(j):
            dt = float(eta.durations[j])
            times = [dt * wt for wt, _ in decomps[j]]
            vecs = verts[[i for _, i in decomps[j]]]
            return _synthesize_rows(group, times, vecs, seg_eps, n_max)

        if workers and workers > 1 and eta.n_segments > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(synth, range(eta.n_segments)))
        else:
            parts = [synth(j) for j in range(eta.n_segments)]
    except (BudgetInfeasible, BudgetExceeded, NotInHull) as err:
        err.stage = stage
        raise

    # anchor each piece at the original breakpoints so the horizon is kept exactly
    bp, vals, n_used = [0.0], [], []
    for j, (durs, rows, used, _) in enumerate(parts):
        inner = eta.breakpoints[j] + np.cumsum(durs[:-1])
        bp.extend(inner.tolist())
        bp.append(float(eta.breakpoints[j + 1]))
        vals.append(rows)
        n_used.extend(used)
    out = StaircaseControl(group, np.asarray(bp), np.vstack(vals))
    if isinstance(gamma, StaircaseControl) and out == gamma:
        out = gamma
    reference = evolve(gamma, "cf4", steps)
    d = _bdist(evolve_staircase(out).blocks, reference.blocks)
    if d > eps:
        err = BudgetExceeded(f"pipeline distance {d:.3g} exceeds {eps:.3g}", best_distance=d)
        err.stage = "verify"
        raise err
    return SynthesisReport(out, d, out.n_segments, n_used)


def vertex_rows_only(control: StaircaseControl, polytope: ControlPolytope) -> bool:
    """True when every staircase value is bitwise one of the polytope vertices."""
    verts = polytope.vertices
    return all(np.any(np.all(verts == v, axis=1)) for v in control.values)
