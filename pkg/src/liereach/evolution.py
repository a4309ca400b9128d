"""Evolutions of controls: ``y' = y . gamma(t)``, ``y(0) = e``.

Staircase controls are evolved exactly as ordered products of exponentials.  Other
controls are integrated with one of two group-preserving schemes:

``lie_euler``
    ``y_{k+1} = y_k exp(h gamma(t_k))`` (order 1)
``cf4``
    the two-exponential commutator-free scheme with Gauss nodes (order 4)

Each step multiplies by exact exponentials, so integrated values never leave the group.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .controls import (FunctionControl, PiecewiseContinuousControl, SampledControl,
                       StaircaseControl, l1_distance, to_piecewise, values_at)
from .errors import BadStepCount, GridMismatch, GroupMismatch, TimeOutOfRange
from .groups import GroupElement, LieGroup, dist, inverse_base

METHODS = ("lie_euler", "cf4")

_SQ3 = math.sqrt(3.0)
CF4_NODES = (0.5 - _SQ3 / 6.0, 0.5 + _SQ3 / 6.0)
CF4_WEIGHTS = (0.25 + _SQ3 / 6.0, 0.25 - _SQ3 / 6.0)

DEFAULT_STEPS = 256


@dataclass(frozen=True, eq=False)
class EvolutionCurve:
    """Values ``eta(t_i)`` of an evolution on a time grid."""

    group: LieGroup
    times: np.ndarray
    blocks: np.ndarray  # (m, copies, 3, 3)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i):
        return float(self.times[i]), GroupElement(self.group, self.blocks[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def endpoint(self) -> GroupElement:
        return GroupElement(self.group, self.blocks[-1])

    def replace(self, i: int, g: GroupElement) -> EvolutionCurve:
        blocks = self.blocks.copy()
        blocks[i] = g.blocks
        return EvolutionCurve(self.group, self.times, blocks)


# ---------------------------------------------------------------------------
# staircase controls


def _staircase_prefix(gamma: StaircaseControl):
    group = gamma.group
    factors = group.exp_coeffs(gamma.durations[:, None] * gamma.values)
    prefix = np.empty((gamma.n_segments + 1,) + factors.shape[1:])
    prefix[0] = np.eye(3)
    for j in range(gamma.n_segments):
        prefix[j + 1] = prefix[j] @ factors[j]
    return prefix


def evolve_staircase(gamma: StaircaseControl) -> GroupElement:
    """``exp((t1-t0) v1) exp((t2-t1) v2) ... exp((tn-t_{n-1}) vn)``, left to right."""
    return GroupElement(gamma.group, _staircase_prefix(gamma)[-1])


def staircase_values_at(gamma: StaircaseControl, times) -> np.ndarray:
    """``eta(t)`` for each ``t``: completed segments times a partial exponential."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    T = gamma.horizon
    if np.any(times < 0.0) or np.any(times > T):
        raise TimeOutOfRange(f"times must lie in [0, {T}]")
    prefix = _staircase_prefix(gamma)
    bp = gamma.breakpoints
    j = np.clip(np.searchsorted(bp, times, side="right") - 1, 0, gamma.n_segments - 1)
    elapsed = times - bp[j]
    # a time equal to a breakpoint is the completed product of the segments before it
    at_bp = elapsed == 0.0
    partial = gamma.group.exp_coeffs(elapsed[:, None] * gamma.values[j])
    out = prefix[j] @ partial
    out[at_bp] = prefix[j[at_bp]]
    # the endpoint must coincide with evolve_staircase bit for bit
    out[times == T] = prefix[-1]
    return out


def evolution_curve_staircase(gamma: StaircaseControl, m: int) -> EvolutionCurve:
    if m < 2:
        raise BadStepCount("grid needs at least two points")
    times = np.linspace(0.0, gamma.horizon, m)
    return EvolutionCurve(gamma.group, times, staircase_values_at(gamma, times))


# ---------------------------------------------------------------------------
# numerical integration


def _check_method(method):
    method = method.lower().replace("-", "_")
    aliases = {"lieeuler": "lie_euler", "euler": "lie_euler"}
    method = aliases.get(method, method)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; known: {', '.join(METHODS)}")
    return method


def _step_factors(c, group, a, h, steps, method):
    t0 = a + h * np.arange(steps)
    if method == "lie_euler":
        v = values_at(c, t0, side="right")
        return group.exp_coeffs(h * v)[:, None]
    g1 = values_at(c, t0 + CF4_NODES[0] * h)
    g2 = values_at(c, t0 + CF4_NODES[1] * h)
    w1, w2 = CF4_WEIGHTS
    first = group.exp_coeffs(h * (w1 * g1 + w2 * g2))
    second = group.exp_coeffs(h * (w2 * g1 + w1 * g2))
    return np.stack([first, second], axis=1)


def _integrate_piece(c, group, a, b, steps, method, start=None, keep_path=False):
    """Integrate ``c`` over ``[a, b]`` from ``start``; optionally keep all step ends."""
    h = (b - a) / steps
    factors = _step_factors(c, group, a, h, steps, method)
    y = np.broadcast_to(np.eye(3), (group.copies, 3, 3)).copy() if start is None else start.copy()
    path = [y.copy()] if keep_path else None
    for k in range(steps):
        for f in factors[k]:
            y = y @ f
        if keep_path:
            path.append(y)
    return y, path


def _pieces(c, a, b):
    """Split ``[a, b]`` into pieces on which ``c`` is continuous."""
    if isinstance(c, (StaircaseControl, PiecewiseContinuousControl)):
        pw = to_piecewise(c)
        starts = pw.starts
        out = []
        for s0, s1, seg in zip(starts[:-1], starts[1:], pw.segments):
            lo, hi = max(a, s0), min(b, s1)
            if hi > lo:
                out.append((seg, lo - s0, min(hi - s0, seg.horizon), hi - lo))
        return out
    return [(c, a, b, b - a)]


def _numeric_blocks(c, t_end, steps, method):
    group = c.group
    if t_end == 0.0:
        return np.broadcast_to(np.eye(3), (group.copies, 3, 3)).copy()
    y = None
    for seg, lo, hi, length in _pieces(c, 0.0, t_end):
        n = max(1, int(round(steps * length / t_end)))
        y, _ = _integrate_piece(seg, group, lo, hi, n, method, start=y)
    return y


def evolve_numeric(c, method: str = "cf4", steps: int = DEFAULT_STEPS) -> GroupElement:
    """Endpoint of the evolution by ``lie_euler`` or ``cf4`` with ``steps`` steps.

    Piecewise continuous (and staircase) inputs are integrated segment by segment, the
    steps shared out in proportion to segment length, and the segment evolutions
    multiplied in order.
    """
    steps = int(steps)
    if steps < 1:
        raise BadStepCount(f"need at least one step, got {steps}")
    method = _check_method(method)
    return GroupElement(c.group, _numeric_blocks(c, c.horizon, steps, method))


def evolve_numeric_curve(c, method: str = "cf4", steps: int = DEFAULT_STEPS) -> EvolutionCurve:
    """All step ends of a uniform-step integration (no segment splitting)."""
    steps = int(steps)
    if steps < 1:
        raise BadStepCount(f"need at least one step, got {steps}")
    method = _check_method(method)
    _, path = _integrate_piece(c, c.group, 0.0, c.horizon, steps, method, keep_path=True)
    times = np.linspace(0.0, c.horizon, steps + 1)
    return EvolutionCurve(c.group, times, np.stack(path))


def evolve(c, method: str = "cf4", steps: int | None = None) -> GroupElement:
    """Exact for staircases, numerical otherwise."""
    if isinstance(c, StaircaseControl):
        return evolve_staircase(c)
    return evolve_numeric(c, method, steps or _default_steps(c))


def _default_steps(c):
    if isinstance(c, SampledControl):
        return max(DEFAULT_STEPS, 2 * (c.m - 1))
    if isinstance(c, PiecewiseContinuousControl):
        return max(DEFAULT_STEPS, 2 * sum(s.m - 1 for s in c.segments))
    return DEFAULT_STEPS


def evolution_values_at(c, times, method: str = "cf4", steps: int | None = None) -> np.ndarray:
    """``eta(t)`` blocks for each time: exact for staircases, integrated otherwise."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if isinstance(c, StaircaseControl):
        return staircase_values_at(c, times)
    if np.any(times < 0.0) or np.any(times > c.horizon):
        raise TimeOutOfRange(f"times must lie in [0, {c.horizon}]")
    method = _check_method(method)
    steps = steps or _default_steps(c)
    out = np.empty((times.size, c.group.copies, 3, 3))
    for i, t in enumerate(times):
        n = max(1, int(math.ceil(steps * t / c.horizon)))
        out[i] = _numeric_blocks(c, float(t), n, method)
    return out


# ---------------------------------------------------------------------------
# verification helpers


def solution_residual(gamma, curve: EvolutionCurve) -> float:
    """``max_i dist(eta_i^-1 eta_{i+1}, exp(h_i gamma(t_i+))) / h_i`` over the grid cells.

    For staircase controls every breakpoint must be a grid time.
    """
    if curve.group != gamma.group:
        raise GroupMismatch(f"{curve.group.group_id} vs {gamma.group.group_id}")
    times = curve.times
    if isinstance(gamma, StaircaseControl):
        tol = 1e-12 * max(1.0, gamma.horizon)
        for b in gamma.breakpoints:
            if np.min(np.abs(times - b)) > tol:
                raise GridMismatch(f"breakpoint {b} is not a grid time")
    if abs(times[-1] - gamma.horizon) > 1e-12 * max(1.0, gamma.horizon) or times[0] != 0.0:
        raise GridMismatch("grid must span [0, T]")
    h = np.diff(times)
    v = values_at(gamma, times[:-1], side="right")
    expected = gamma.group.exp_coeffs(h[:, None] * v)
    base = curve.group.base
    actual = inverse_base(base, curve.blocks[:-1]) @ curve.blocks[1:]
    err = np.sqrt(np.sum((actual - expected) ** 2, axis=(1, 2, 3)))
    return float(np.max(err / h))


class ProbeRow(NamedTuple):
    l1: float
    group_distance: float


def continuity_probe(gamma, perturbations, q_id: str = "euclid",
                     method: str = "cf4", steps: int | None = None) -> list:
    """Rows ``(||gamma - eta_k||_{L1,q}, dist(evol gamma, evol eta_k))``, largest L1 first."""
    base = evolve(gamma, method, steps)
    rows = []
    for eta in perturbations:
        if eta.group != gamma.group:
            raise GroupMismatch(f"{eta.group.group_id} vs {gamma.group.group_id}")
        rows.append(ProbeRow(l1_distance(gamma, eta, q_id), dist(base, evolve(eta, method, steps))))
    rows.sort(key=lambda r: -r.l1)
    return rows


def as_function_control(group, horizon, func) -> FunctionControl:
    """Wrap ``func(t) -> coefficients`` (scalar ``t``) as a vectorized control."""
    def vec(t):
        return np.array([np.asarray(func(ti), dtype=float) for ti in np.atleast_1d(t)])
    return FunctionControl(group, horizon, vec)
