"""Time-dependent controls ``[0, T] -> g`` and their L^p seminorms.

Three concrete representations are used throughout:

* :class:`StaircaseControl` - piecewise constant, exact everywhere.
* :class:`SampledControl` - samples on a uniform grid, read as the piecewise-linear
  interpolant.  Integrals use the composite trapezoid rule.
* :class:`PiecewiseContinuousControl` - a chain of sampled segments, possibly jumping at
  the joins.

:class:`FunctionControl` wraps an analytic callable; it is only evaluated pointwise (by the
integrators) and has no seminorm or structural operations.

At a breakpoint the value of a staircase is taken from the segment on the left
(``t in ]t_{j-1}, t_j]``), except at ``t = 0``.  Every evaluation helper accepts
``side="right"`` to ask for the right limit instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import (BadExponent, BadInterval, GroupMismatch, IndexOutOfRange,
                     InvalidControl)
from .groups import AlgebraVector, LieGroup, as_group, check_seminorm, seminorm_values

_SNAP = 1e-9


def _frozen(a, ndim):
    a = np.array(a, dtype=float)
    if a.ndim != ndim:
        raise InvalidControl(f"expected a {ndim}-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidControl("control data must be finite")
    a.setflags(write=False)
    return a


def _coeff_rows(group, values):
    rows = [v.coeffs if isinstance(v, AlgebraVector) else np.asarray(v, dtype=float) for v in values]
    for v in values:
        if isinstance(v, AlgebraVector) and v.group != group:
            raise GroupMismatch(f"value in {v.group_id}, control in {group.group_id}")
    if not rows:
        return np.zeros((0, group.algebra_dim))
    return np.vstack([np.reshape(r, (1, -1)) for r in rows])


@dataclass(frozen=True, eq=False)
class StaircaseControl:
    group: LieGroup
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        group = as_group(self.group)
        object.__setattr__(self, "group", group)
        bp = _frozen(self.breakpoints, 1)
        vals = _coeff_rows(group, self.values) if not isinstance(self.values, np.ndarray) else self.values
        vals = _frozen(vals, 2)
        n = vals.shape[0]
        if n < 1:
            raise InvalidControl("a staircase needs at least one segment")
        if bp.shape != (n + 1,):
            raise InvalidControl(f"{n} values need {n + 1} breakpoints, got {bp.shape[0]}")
        if bp[0] != 0.0:
            raise InvalidControl("first breakpoint must be 0")
        if np.any(np.diff(bp) <= 0.0):
            raise InvalidControl("breakpoints must be strictly increasing")
        if vals.shape[1] != group.algebra_dim:
            raise InvalidControl(f"values need {group.algebra_dim} coefficients")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, v: AlgebraVector, horizon: float) -> StaircaseControl:
        return cls(v.group, [0.0, horizon], v.coeffs[None, :])

    @classmethod
    def from_durations(cls, group, durations, values) -> StaircaseControl:
        group = as_group(group)
        bp = np.concatenate([[0.0], np.cumsum(np.asarray(durations, dtype=float))])
        return cls(group, bp, _coeff_rows(group, values))

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def n_segments(self) -> int:
        return self.values.shape[0]

    def value(self, j: int) -> AlgebraVector:
        return AlgebraVector(self.group, self.values[j])

    def __eq__(self, other):
        return (isinstance(other, StaircaseControl) and self.group == other.group
                and np.array_equal(self.breakpoints, other.breakpoints)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def __repr__(self):
        return f"StaircaseControl({self.group.group_id}, n={self.n_segments}, T={self.horizon!r})"


@dataclass(frozen=True, eq=False)
class SampledControl:
    """Uniform samples ``t_i = i*T/(m-1)``; between nodes the control is linear."""

    group: LieGroup
    horizon: float
    samples: np.ndarray

    def __post_init__(self):
        group = as_group(self.group)
        object.__setattr__(self, "group", group)
        s = self.samples if isinstance(self.samples, np.ndarray) else _coeff_rows(group, self.samples)
        s = _frozen(s, 2)
        if s.shape[0] < 2:
            raise InvalidControl("a sampled control needs at least two samples")
        if s.shape[1] != group.algebra_dim:
            raise InvalidControl(f"samples need {group.algebra_dim} coefficients")
        horizon = float(self.horizon)
        if not horizon > 0.0 or not math.isfinite(horizon):
            raise InvalidControl("horizon must be positive")
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, group, horizon: float, m: int, func) -> SampledControl:
        """Sample ``func(t) -> coefficients`` on ``m`` uniform nodes."""
        group = as_group(group)
        t = np.linspace(0.0, horizon, m)
        return cls(group, horizon, np.array([np.asarray(func(ti), dtype=float) for ti in t]))

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def step(self) -> float:
        return self.horizon / (self.m - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.m)

    def __eq__(self, other):
        return (isinstance(other, SampledControl) and self.group == other.group
                and self.horizon == other.horizon and np.array_equal(self.samples, other.samples))

    __hash__ = None

    def __repr__(self):
        return f"SampledControl({self.group.group_id}, m={self.m}, T={self.horizon!r})"


@dataclass(frozen=True, eq=False)
class PiecewiseContinuousControl:
    group: LieGroup
    segments: tuple

    def __post_init__(self):
        group = as_group(self.group)
        object.__setattr__(self, "group", group)
        segs = tuple(self.segments)
        if not segs:
            raise InvalidControl("need at least one segment")
        for s in segs:
            if not isinstance(s, SampledControl):
                raise InvalidControl("segments must be SampledControl instances")
            if s.group != group:
                raise GroupMismatch(f"segment in {s.group_id}, control in {group.group_id}")
        object.__setattr__(self, "segments", segs)

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.horizon for s in self.segments])])

    @property
    def horizon(self) -> float:
        return float(self.starts[-1])

    def __eq__(self, other):
        return (isinstance(other, PiecewiseContinuousControl) and self.group == other.group
                and len(self.segments) == len(other.segments)
                and all(a == b for a, b in zip(self.segments, other.segments)))

    __hash__ = None


@dataclass(frozen=True)
class FunctionControl:
    """An analytic control; ``func`` maps an array of times to ``(k, algebra_dim)`` values."""

    group: LieGroup
    horizon: float
    func: Callable


Control = Union[StaircaseControl, SampledControl, PiecewiseContinuousControl]
AnyControl = Union[Control, FunctionControl]


# ---------------------------------------------------------------------------
# evaluation


def _grid_index(c: SampledControl, t):
    u = np.asarray(t, dtype=float) * ((c.m - 1) / c.horizon)
    r = np.rint(u)
    return np.where(np.abs(u - r) < _SNAP, r, u)


def _eval_sampled(c: SampledControl, t):
    u = _grid_index(c, t)
    i = np.clip(np.floor(u).astype(int), 0, c.m - 2)
    frac = (u - i)[:, None]
    s = c.samples
    out = s[i] + frac * (s[i + 1] - s[i])
    on_node = frac[:, 0] == 0.0
    out[on_node] = s[i[on_node]]
    on_next = frac[:, 0] == 1.0
    out[on_next] = s[i[on_next] + 1]
    return out


def values_at(c: AnyControl, t, side: str = "left") -> np.ndarray:
    """Control coefficients at times ``t``; returns shape ``(len(t), algebra_dim)``.

    ``side`` picks the one-sided limit at jumps; it is irrelevant where the control is
    continuous.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(c, StaircaseControl):
        bp = c.breakpoints
        how = "right" if side == "right" else "left"
        j = np.searchsorted(bp, t, side=how) - 1
        return c.values[np.clip(j, 0, c.n_segments - 1)]
    if isinstance(c, SampledControl):
        return _eval_sampled(c, t)
    if isinstance(c, PiecewiseContinuousControl):
        starts = c.starts
        how = "right" if side == "right" else "left"
        j = np.clip(np.searchsorted(starts, t, side=how) - 1, 0, len(c.segments) - 1)
        out = np.empty((t.size, c.group.algebra_dim))
        for k in np.unique(j):
            sel = j == k
            seg = c.segments[k]
            local = np.clip(t[sel] - starts[k], 0.0, seg.horizon)
            out[sel] = _eval_sampled(seg, local)
        return out
    if isinstance(c, FunctionControl):
        return np.asarray(c.func(t), dtype=float).reshape(t.size, c.group.algebra_dim)
    raise TypeError(f"not a control: {type(c).__name__}")


def value_at(c: AnyControl, t: float, side: str = "left") -> AlgebraVector:
    return AlgebraVector(c.group, values_at(c, [t], side)[0])


def knots(c: Control) -> np.ndarray:
    """Times between which ``c`` is affine (constant for staircases)."""
    if isinstance(c, StaircaseControl):
        return c.breakpoints
    if isinstance(c, SampledControl):
        return c.times
    if isinstance(c, PiecewiseContinuousControl):
        starts = c.starts
        parts = [seg.times[:-1] + s0 for seg, s0 in zip(c.segments, starts)]
        return np.concatenate(parts + [[c.horizon]])
    raise TypeError(f"no knot structure for {type(c).__name__}")


# ---------------------------------------------------------------------------
# seminorms


def _trapezoid_cells(group, grid, left_fn, right_fn, q_id, p):
    """Sum over cells of ``len * (q(right limit at start)^p + q(left limit at end)^p) / 2``."""
    a = right_fn(grid[:-1])
    b = left_fn(grid[1:])
    qa = seminorm_values(group, a, q_id)
    qb = seminorm_values(group, b, q_id)
    if p == 1:
        f = qa + qb
    else:
        f = qa**p + qb**p
    return float(np.sum(np.diff(grid) * f) / 2.0), max(float(np.max(qa)), float(np.max(qb)))


def _check_p(p):
    p = float(p)
    if not (p >= 1.0):
        raise BadExponent(f"exponent must be >= 1 or inf, got {p}")
    return p


def lp_seminorm(c: Control, p: float = 1.0, q_id: str = "euclid") -> float:
    """``(int q(c(t))^p dt)^(1/p)``; exact for staircases, trapezoid otherwise.

    ``p = inf`` gives the maximum of ``q`` over the values (staircase) or samples.
    """
    p = _check_p(p)
    check_seminorm(q_id)
    grid = knots(c)
    integral, peak = _trapezoid_cells(c.group, grid,
                                      lambda t: values_at(c, t, "left"),
                                      lambda t: values_at(c, t, "right"), q_id,
                                      1.0 if math.isinf(p) else p)
    if math.isinf(p):
        return peak
    return integral if p == 1.0 else integral ** (1.0 / p)


def l1_seminorm(c: Control, q_id: str = "euclid") -> float:
    return lp_seminorm(c, 1.0, q_id)


def common_knots(a: Control, b: Control) -> np.ndarray:
    ka, kb = knots(a), knots(b)
    return np.unique(np.concatenate([ka, kb]))


def l1_distance(a: Control, b: Control, q_id: str = "euclid") -> float:
    """``||a - b||_{L1,q}`` on the common refinement of both knot sets.

    On each refined cell both controls are affine, so the trapezoid value is an upper
    bound of the exact integral (``q`` is convex) and exact when both are staircases.
    """
    if a.group != b.group:
        raise GroupMismatch(f"{a.group.group_id} vs {b.group.group_id}")
    if not math.isclose(a.horizon, b.horizon, rel_tol=0.0, abs_tol=1e-12 * max(1.0, a.horizon)):
        raise BadInterval(f"horizons differ: {a.horizon} vs {b.horizon}")
    check_seminorm(q_id)
    grid = common_knots(a, b)
    grid = grid[grid <= a.horizon]
    grid[-1] = a.horizon
    integral, _ = _trapezoid_cells(
        a.group, grid,
        lambda t: values_at(a, t, "left") - values_at(b, t, "left"),
        lambda t: values_at(a, t, "right") - values_at(b, t, "right"), q_id, 1.0)
    return integral


# ---------------------------------------------------------------------------
# structural operations


def to_piecewise(c: Control) -> PiecewiseContinuousControl:
    if isinstance(c, PiecewiseContinuousControl):
        return c
    if isinstance(c, SampledControl):
        return PiecewiseContinuousControl(c.group, (c,))
    if isinstance(c, StaircaseControl):
        segs = tuple(SampledControl(c.group, d, np.vstack([v, v]))
                     for d, v in zip(c.durations, c.values))
        return PiecewiseContinuousControl(c.group, segs)
    raise TypeError(f"cannot convert {type(c).__name__}")


def concatenate(a: Control, b: Control) -> Control:
    """``a * b``: run ``a`` on ``[0, Ta]`` then ``b`` shifted to ``]Ta, Ta+Tb]``.

    Two staircases give a staircase; any other combination gives a
    :class:`PiecewiseContinuousControl`.
    """
    if a.group != b.group:
        raise GroupMismatch(f"{a.group.group_id} vs {b.group.group_id}")
    if isinstance(a, StaircaseControl) and isinstance(b, StaircaseControl):
        bp = np.concatenate([a.breakpoints, a.horizon + b.breakpoints[1:]])
        return StaircaseControl(a.group, bp, np.vstack([a.values, b.values]))
    return PiecewiseContinuousControl(a.group, to_piecewise(a).segments + to_piecewise(b).segments)


def concatenate_all(controls) -> Control:
    controls = list(controls)
    if not controls:
        raise InvalidControl("nothing to concatenate")
    if all(isinstance(c, StaircaseControl) for c in controls):
        group = controls[0].group
        for c in controls:
            if c.group != group:
                raise GroupMismatch(f"{c.group.group_id} vs {group.group_id}")
        offsets = np.cumsum([0.0] + [c.horizon for c in controls[:-1]])
        bp = np.concatenate([[0.0]] + [o + c.breakpoints[1:] for o, c in zip(offsets, controls)])
        return StaircaseControl(group, bp, np.vstack([c.values for c in controls]))
    out = controls[0]
    for c in controls[1:]:
        out = concatenate(out, c)
    return out


def reparametrize(c: Control, alpha: float, beta: float) -> Control:
    """``s -> m * c(phi(s))`` on ``[0, beta - alpha]`` with ``phi`` affine onto ``[0, T]``.

    The slope ``m = T / (beta - alpha)`` keeps the evolution endpoint unchanged.
    """
    if not alpha < beta:
        raise BadInterval(f"need alpha < beta, got [{alpha}, {beta}]")
    length = beta - alpha
    if isinstance(c, StaircaseControl):
        if length == c.horizon:
            return c
        slope = c.horizon / length
        return StaircaseControl(c.group, c.breakpoints * (length / c.horizon), c.values * slope)
    if isinstance(c, SampledControl):
        if length == c.horizon:
            return c
        return SampledControl(c.group, length, c.samples * (c.horizon / length))
    if isinstance(c, PiecewiseContinuousControl):
        scale = length / c.horizon
        return PiecewiseContinuousControl(
            c.group, tuple(SampledControl(c.group, s.horizon * scale, s.samples / scale)
                           for s in c.segments))
    raise TypeError(f"cannot reparametrize {type(c).__name__}")


def _restrict_sampled(c: SampledControl, a: float, b: float) -> SampledControl:
    ia, ib = _grid_index(c, [a, b])
    if ia == np.rint(ia) and ib == np.rint(ib):
        return SampledControl(c.group, b - a, c.samples[int(ia):int(ib) + 1])
    # not grid-aligned: resample the interpolant at (about) the native spacing
    count = max(2, int(math.ceil((b - a) / c.step - _SNAP)) + 1)
    return SampledControl(c.group, b - a, _eval_sampled(c, np.linspace(a, b, count)))


def restrict(c: Control, a: float, b: float) -> Control:
    """The piece of ``c`` on ``[a, b]``, shifted to start at 0 (no rescaling)."""
    if not 0.0 <= a < b <= c.horizon * (1 + 1e-15):
        raise BadInterval(f"[{a}, {b}] not inside [0, {c.horizon}]")
    b = min(b, c.horizon)
    if isinstance(c, StaircaseControl):
        bp = c.breakpoints
        inner = bp[(bp > a) & (bp < b)]
        new_bp = np.concatenate([[a], inner, [b]])
        mids = 0.5 * (new_bp[:-1] + new_bp[1:])
        vals = values_at(c, mids)
        return StaircaseControl(c.group, new_bp - a, vals)
    if isinstance(c, SampledControl):
        return _restrict_sampled(c, a, b)
    if isinstance(c, PiecewiseContinuousControl):
        starts = c.starts
        segs = []
        for s0, s1, seg in zip(starts[:-1], starts[1:], c.segments):
            lo, hi = max(a, s0), min(b, s1)
            if hi - lo > 0.0:
                segs.append(_restrict_sampled(seg, lo - s0, min(hi - s0, seg.horizon)))
        return PiecewiseContinuousControl(c.group, tuple(segs))
    raise TypeError(f"cannot restrict {type(c).__name__}")


def subdivide(c: Control, n: int, k: int) -> Control:
    """``c_{n,k}(s) = c((k*T + s)/n) / n`` on ``[0, T]``.

    The ``n`` pieces have L1 seminorms summing to that of ``c`` and evolutions multiplying
    to its evolution.  Sampled controls are split exactly when the cut points fall on the
    sample grid and resampled otherwise.
    """
    n, k = int(n), int(k)
    if n < 1 or not 0 <= k < n:
        raise IndexOutOfRange(f"need 0 <= k < n, got n={n}, k={k}")
    if n == 1:
        return c
    T = c.horizon
    a = k * T / n
    b = T if k == n - 1 else (k + 1) * T / n
    return reparametrize(restrict(c, a, b), 0.0, T)


def image_points(c: Control) -> list:
    """Values taken by ``c``: staircase values, or all samples."""
    if isinstance(c, StaircaseControl):
        rows = c.values
    elif isinstance(c, SampledControl):
        rows = c.samples
    elif isinstance(c, PiecewiseContinuousControl):
        rows = np.vstack([s.samples for s in c.segments])
    else:
        raise TypeError(f"no image for {type(c).__name__}")
    return [AlgebraVector(c.group, r) for r in rows]


def image_array(c: Control) -> np.ndarray:
    if isinstance(c, StaircaseControl):
        return c.values
    if isinstance(c, SampledControl):
        return c.samples
    return np.vstack([s.samples for s in c.segments])


def merge_equal_segments(c: StaircaseControl) -> StaircaseControl:
    """Drop breakpoints between adjacent segments carrying identical values."""
    keep = np.ones(c.n_segments, dtype=bool)
    keep[1:] = np.any(c.values[1:] != c.values[:-1], axis=1)
    bp = np.concatenate([c.breakpoints[:-1][keep], [c.breakpoints[-1]]])
    return StaircaseControl(c.group, bp, c.values[keep])
