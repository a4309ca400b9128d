"""Right G-actions, fundamental vector fields and the two-time flow of a control.

Conventions (all right actions, ``x.(gh) = (x.g).h``):

``GroupItself[G]``        x.g = x g  (points are flattened matrices)
``Sphere2UnderSO3``       x.g = g^T x
``PlaneUnderSE2``         x.g = g^{-1} x  (homogeneous coordinates)
``ProductPowerDiagonal[N]``  SO3^N on (S^2)^N, factor by factor

The flow of ``y' = gamma(t)_#(y)`` is ``Fl(t, t0, y0) = y0 . (eta(t0)^-1 eta(t))`` where
``eta`` is the evolution of ``gamma``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .controls import StaircaseControl, values_at
from .errors import GridMismatch, ManifoldMismatch, TimeOutOfRange
from .evolution import evolution_values_at
from .groups import (SE2, SO3, AlgebraVector, GroupElement, LieGroup, as_group,
                     inverse_base, membership_base, product_power)

FD_STEP = 1e-5
MEMBERSHIP_TOL = 1e-10


class GManifold:
    """Base class; subclasses supply the action and, where known, the closed-form field."""

    manifold_id: str
    group: LieGroup
    point_dim: int

    def act_coords(self, x, blocks):
        """Vectorized action: ``x`` ``(..., point_dim)``, ``blocks`` ``(..., copies, 3, 3)``."""
        raise NotImplementedError

    def field_coords(self, v, x):
        """Closed-form ``v_#(x)`` vectorized over leading axes, or ``None`` if unavailable."""
        return None

    def membership(self, x):
        return np.zeros(np.shape(x)[:-1])

    def point(self, coords, tol=MEMBERSHIP_TOL) -> ManifoldPoint:
        coords = np.asarray(coords, dtype=float).reshape(-1)
        if coords.shape != (self.point_dim,):
            raise ManifoldMismatch(f"{self.manifold_id} points have {self.point_dim} coordinates")
        res = float(np.max(self.membership(coords)))
        if not res <= tol:
            raise ManifoldMismatch(f"point is off {self.manifold_id} (residual {res:.3g})")
        return ManifoldPoint(self, coords)

    def __repr__(self):
        return f"<GManifold {self.manifold_id}>"

    def __eq__(self, other):
        return isinstance(other, GManifold) and self.manifold_id == other.manifold_id

    def __hash__(self):
        return hash(self.manifold_id)


class GroupItself(GManifold):
    def __init__(self, group):
        self.group = as_group(group)
        self.manifold_id = f"GroupItself[{self.group.group_id}]"
        self.point_dim = 9 * self.group.copies

    def _blocks(self, x):
        x = np.asarray(x, dtype=float)
        return x.reshape(x.shape[:-1] + (self.group.copies, 3, 3))

    def act_coords(self, x, blocks):
        out = self._blocks(x) @ blocks
        return out.reshape(out.shape[:-3] + (self.point_dim,))

    def field_coords(self, v, x):
        out = self._blocks(x) @ self.group.hat_coeffs(v)
        return out.reshape(out.shape[:-3] + (self.point_dim,))

    def membership(self, x):
        return np.max(membership_base(self.group.base, self._blocks(x)), axis=-1)


class Sphere2UnderSO3(GManifold):
    manifold_id = "Sphere2UnderSO3"
    group = SO3
    point_dim = 3

    def act_coords(self, x, blocks):
        return np.einsum("...ji,...j->...i", blocks[..., 0, :, :], x)

    def field_coords(self, v, x):
        # d/dt exp(tv)^T x = -hat(v) x = x cross v
        return np.cross(x, v)

    def membership(self, x):
        return np.abs(np.linalg.norm(x, axis=-1) - 1.0)


class PlaneUnderSE2(GManifold):
    manifold_id = "PlaneUnderSE2"
    group = SE2
    point_dim = 2

    def act_coords(self, x, blocks):
        ginv = inverse_base("SE2", blocks[..., 0, :, :])
        return np.einsum("...ij,...j->...i", ginv[..., :2, :2], x) + ginv[..., :2, 2]

    def field_coords(self, v, x):
        v = np.asarray(v, dtype=float)
        x = np.asarray(x, dtype=float)
        w, tx, ty = v[..., 0], v[..., 1], v[..., 2]
        return -np.stack([-w * x[..., 1] + tx, w * x[..., 0] + ty], axis=-1)

    @staticmethod
    def torus_projection(x):
        """Reduce planar coordinates modulo the integer lattice."""
        return np.mod(x, 1.0)


class ProductPowerDiagonal(GManifold):
    def __init__(self, copies):
        self.copies = int(copies)
        self.group = product_power("SO3", self.copies)
        self.manifold_id = f"ProductPowerDiagonal[{self.copies}]"
        self.point_dim = 3 * self.copies

    def act_coords(self, x, blocks):
        x = np.asarray(x, dtype=float)
        xs = x.reshape(x.shape[:-1] + (self.copies, 3))
        out = np.einsum("...kji,...kj->...ki", blocks, xs)
        return out.reshape(out.shape[:-2] + (self.point_dim,))

    def field_coords(self, v, x):
        v = np.asarray(v, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.cross(x.reshape(x.shape[:-1] + (self.copies, 3)),
                       v.reshape(v.shape[:-1] + (self.copies, 3)))
        return out.reshape(out.shape[:-2] + (self.point_dim,))

    def membership(self, x):
        x = np.asarray(x, dtype=float)
        xs = x.reshape(x.shape[:-1] + (self.copies, 3))
        return np.max(np.abs(np.linalg.norm(xs, axis=-1) - 1.0), axis=-1)


_BRACKET = re.compile(r"^(\w+)\[(.+)\]$")


def manifold(manifold_id: str) -> GManifold:
    """Look up a manifold by id, e.g. ``"Sphere2UnderSO3"`` or ``"GroupItself[SE2]"``."""
    manifold_id = manifold_id.strip()
    if manifold_id == "Sphere2UnderSO3":
        return Sphere2UnderSO3()
    if manifold_id in ("PlaneUnderSE2", "TorusUnderSE2"):
        return PlaneUnderSE2()
    m = _BRACKET.match(manifold_id)
    if m and m.group(1) == "GroupItself":
        return GroupItself(m.group(2))
    if m and m.group(1) == "ProductPowerDiagonal":
        return ProductPowerDiagonal(int(m.group(2)))
    raise ManifoldMismatch(f"unknown manifold {manifold_id!r}")


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    manifold: GManifold
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def manifold_id(self) -> str:
        return self.manifold.manifold_id

    def __eq__(self, other):
        return (isinstance(other, ManifoldPoint) and self.manifold == other.manifold
                and np.array_equal(self.coords, other.coords))

    def __hash__(self):
        return hash((self.manifold_id, self.coords.tobytes()))

    def __repr__(self):
        return f"ManifoldPoint({self.manifold_id}, {self.coords.tolist()!r})"


def _check_group(m: GManifold, group: LieGroup):
    if m.group != group:
        raise ManifoldMismatch(f"{m.manifold_id} is acted on by {m.group.group_id}, "
                               f"not {group.group_id}")


def act(x: ManifoldPoint, g: GroupElement) -> ManifoldPoint:
    _check_group(x.manifold, g.group)
    return ManifoldPoint(x.manifold, x.manifold.act_coords(x.coords, g.blocks))


def fundamental_vector_field(m: GManifold, v: AlgebraVector, x: ManifoldPoint,
                             method: str = "auto") -> np.ndarray:
    """``v_#(x) = d/dt x.exp(tv)`` at ``t = 0``.

    ``method="auto"`` uses the closed form when the manifold has one, ``"fd"`` forces the
    central difference with step ``FD_STEP``.
    """
    _check_group(m, v.group)
    if x.manifold != m:
        raise ManifoldMismatch(f"point on {x.manifold_id}, manifold {m.manifold_id}")
    if method != "fd":
        closed = m.field_coords(v.coeffs, x.coords)
        if closed is not None:
            return np.asarray(closed, dtype=float)
        if method == "closed":
            raise ValueError(f"{m.manifold_id} has no closed-form field")
    h = FD_STEP
    plus = m.act_coords(x.coords, m.group.exp_coeffs(h * v.coeffs))
    minus = m.act_coords(x.coords, m.group.exp_coeffs(-h * v.coeffs))
    return (plus - minus) / (2.0 * h)


def _field_batch(m: GManifold, v, x):
    closed = m.field_coords(v, x)
    if closed is not None:
        return closed
    h = FD_STEP
    return (m.act_coords(x, m.group.exp_coeffs(h * v))
            - m.act_coords(x, m.group.exp_coeffs(-h * v))) / (2.0 * h)


def _check_times(gamma, times):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0.0) or np.any(times > gamma.horizon):
        raise TimeOutOfRange(f"times must lie in [0, {gamma.horizon}]")
    return times


def flow_path(m: GManifold, gamma, times, t0: float, y0: ManifoldPoint, **integration) -> np.ndarray:
    """``Fl(t, t0, y0)`` for every ``t`` in ``times``; returns ``(len(times), point_dim)``."""
    _check_group(m, gamma.group)
    if y0.manifold != m:
        raise ManifoldMismatch(f"point on {y0.manifold_id}, manifold {m.manifold_id}")
    times = _check_times(gamma, times)
    _check_times(gamma, [t0])
    eta = evolution_values_at(gamma, np.concatenate([[t0], times]), **integration)
    rel = inverse_base(gamma.group.base, eta[0])[None] @ eta[1:]
    # Fl(t0, t0, .) is the identity exactly, not up to rounding
    rel[times == t0] = np.eye(3)
    return m.act_coords(np.broadcast_to(y0.coords, (times.size, m.point_dim)), rel)


def flow(m: GManifold, gamma, t: float, t0: float, y0: ManifoldPoint, **integration) -> ManifoldPoint:
    return ManifoldPoint(m, flow_path(m, gamma, [t], t0, y0, **integration)[0])


def cocycle_check(m: GManifold, gamma, triple, points, **integration) -> float:
    """``max ||Fl(t2, t1, Fl(t1, t0, y)) - Fl(t2, t0, y)||`` over the sample points."""
    t0, t1, t2 = triple
    _check_times(gamma, triple)
    worst = 0.0
    for y in points:
        mid = flow(m, gamma, t1, t0, y, **integration)
        two_step = flow(m, gamma, t2, t1, mid, **integration)
        direct = flow(m, gamma, t2, t0, y, **integration)
        worst = max(worst, float(np.linalg.norm(two_step.coords - direct.coords)))
    return worst


def caratheodory_residual(m: GManifold, gamma, path, times, scheme: str = "forward") -> float:
    """Discrete check of ``y'(t) = gamma(t)_#(y(t))`` along a sampled path.

    ``forward``: ``max_i ||(y_{i+1} - y_i)/h_i - gamma(t_i+)_#(y_i)||`` over all cells, which
    is first order in the grid step.  ``central``: symmetric differences at interior nodes
    where ``gamma`` does not jump (second order).

    For staircase controls every breakpoint must be a grid time.
    """
    _check_group(m, gamma.group)
    times = np.asarray(times, dtype=float)
    path = np.asarray(path, dtype=float)
    if path.shape != (times.size, m.point_dim):
        raise GridMismatch(f"path shape {path.shape} does not match {times.size} grid times")
    jumps = np.array([])
    if isinstance(gamma, StaircaseControl):
        tol = 1e-12 * max(1.0, gamma.horizon)
        for b in gamma.breakpoints:
            if np.min(np.abs(times - b)) > tol:
                raise GridMismatch(f"breakpoint {b} is not a grid time")
        jumps = gamma.breakpoints[1:-1]
    h = np.diff(times)
    if scheme == "forward":
        v = values_at(gamma, times[:-1], side="right")
        diff = (path[1:] - path[:-1]) / h[:, None]
        err = diff - _field_batch(m, v, path[:-1])
    elif scheme == "central":
        idx = np.arange(1, times.size - 1)
        if jumps.size:
            near = np.min(np.abs(times[idx, None] - jumps[None, :]), axis=1) <= 1e-12 * max(1.0, times[-1])
            idx = idx[~near]
        if idx.size == 0:
            return 0.0
        v = values_at(gamma, times[idx])
        diff = (path[idx + 1] - path[idx - 1]) / (times[idx + 1] - times[idx - 1])[:, None]
        err = diff - _field_batch(m, v, path[idx])
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return float(np.max(np.linalg.norm(err, axis=-1)))
