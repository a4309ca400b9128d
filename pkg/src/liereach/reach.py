"""Breadth-first exploration of reachable sets ``x0 . <exp([0, inf) S)>_+``.

Dwell times are restricted to a finite grid, so a cloud is a finite under-approximation
of the reachable set; a negative :func:`contains_approx` answer only means "not found at
this budget".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controls import StaircaseControl
from .errors import CapacityExceeded, ManifoldMismatch
from .gmanifold import GManifold, ManifoldPoint
from .groups import AlgebraVector

DEFAULT_MAX_POINTS = 100_000
# beyond this point dimension the 3^d neighbour-cell scan is slower than a linear scan
_HASH_MAX_DIM = 4


class _Dedup:
    """Spatial hash with cells of side ``radius``; a query checks the 3^d neighbour cells."""

    def __init__(self, dim, radius):
        self.radius = radius
        self.cells = {}
        self.dim = dim
        self.pts = []
        if dim <= _HASH_MAX_DIM:
            grids = np.meshgrid(*[np.array([-1, 0, 1])] * dim, indexing="ij")
            self.offsets = np.stack([g.ravel() for g in grids], axis=1)
        else:
            self.offsets = None

    def _key(self, y):
        return tuple(np.floor(y / self.radius).astype(np.int64).tolist())

    def near(self, y):
        if self.offsets is None:
            if not self.pts:
                return False
            d = np.linalg.norm(np.asarray(self.pts) - y, axis=1)
            return bool(np.min(d) <= self.radius)
        base = np.floor(y / self.radius).astype(np.int64)
        for off in self.offsets:
            for p in self.cells.get(tuple((base + off).tolist()), ()):
                if np.linalg.norm(self.pts[p] - y) <= self.radius:
                    return True
        return False

    def add(self, y):
        self.pts.append(y)
        if self.offsets is not None:
            self.cells.setdefault(self._key(y), []).append(len(self.pts) - 1)


@dataclass
class ReachabilityCloud:
    manifold: GManifold
    x0: ManifoldPoint
    generators: list            # AlgebraVectors, indexed by words
    points: np.ndarray          # (k, point_dim)
    words: list                 # tuples of (dwell, generator index); () for x0
    depths: list
    dedup_radius: float
    complete: bool = True
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.words)

    @property
    def manifold_id(self) -> str:
        return self.manifold.manifold_id

    def point(self, i) -> ManifoldPoint:
        return ManifoldPoint(self.manifold, self.points[i])

    def control_for(self, word) -> StaircaseControl | None:
        """The staircase control spelled by ``word``; ``None`` for the empty word."""
        if not word:
            return None
        return StaircaseControl.from_durations(
            self.manifold.group, [s for s, _ in word], [self.generators[i] for _, i in word])

    def controls(self) -> list:
        return [self.control_for(w) for w in self.words]


def reachable_explore(m: GManifold, x0: ManifoldPoint, generators, max_depth: int,
                      dwell_grid, dedup_radius: float,
                      max_points: int = DEFAULT_MAX_POINTS) -> ReachabilityCloud:
    """Expand level by level: every frontier point is moved by ``exp(s v)`` for each ``v`` in
    ``generators`` and ``s`` in ``dwell_grid`` (in that order) and kept unless an existing
    point lies within ``dedup_radius``.

    Raises :class:`CapacityExceeded` (carrying the partial cloud) when more than
    ``max_points`` points would be stored.
    """
    if x0.manifold != m:
        raise ManifoldMismatch(f"point on {x0.manifold_id}, manifold {m.manifold_id}")
    gens = list(generators)
    for v in gens:
        if not isinstance(v, AlgebraVector) or v.group != m.group:
            raise ManifoldMismatch(f"generators must be {m.group.group_id} algebra vectors")
    if int(max_depth) < 1:
        raise ValueError("max_depth must be at least 1")
    dwell = [float(s) for s in dwell_grid]
    if not dwell or min(dwell) <= 0.0:
        raise ValueError("dwell times must be positive")
    if not dedup_radius > 0.0:
        raise ValueError("dedup_radius must be positive")

    moves = [(s, i) for i in range(len(gens)) for s in dwell]
    move_blocks = np.stack([m.group.exp_coeffs(s * gens[i].coeffs) for s, i in moves])

    index = _Dedup(m.point_dim, dedup_radius)
    start = np.array(x0.coords, dtype=float)
    index.add(start)
    words, depths = [()], [0]
    frontier = [0]
    params = {"max_depth": int(max_depth), "dwell_grid": dwell, "max_points": int(max_points)}

    def cloud(complete):
        return ReachabilityCloud(m, x0, gens, np.array(index.pts), list(words), list(depths),
                                 dedup_radius, complete, params)

    for depth in range(1, int(max_depth) + 1):
        nxt = []
        for p in frontier:
            here = index.pts[p]
            cands = m.act_coords(np.broadcast_to(here, (len(moves), m.point_dim)), move_blocks)
            for k, y in enumerate(cands):
                if index.near(y):
                    continue
                if len(words) >= max_points:
                    raise CapacityExceeded(f"more than {max_points} points at depth {depth}",
                                           cloud=cloud(False))
                index.add(y)
                words.append(words[p] + (moves[k],))
                depths.append(depth)
                nxt.append(len(words) - 1)
        frontier = nxt
        if not frontier:
            break
    return cloud(True)


def contains_approx(cloud: ReachabilityCloud, y: ManifoldPoint, r: float):
    """``(True, word)`` for the nearest cloud point if it is within ``r`` of ``y``, else
    ``(False, None)``."""
    if y.manifold != cloud.manifold:
        raise ManifoldMismatch(f"point on {y.manifold_id}, cloud on {cloud.manifold_id}")
    d = np.linalg.norm(cloud.points - y.coords, axis=1)
    i = int(np.argmin(d))
    if d[i] <= r:
        return True, cloud.words[i]
    return False, None


def coverage(cloud: ReachabilityCloud, test_points, radius: float) -> float:
    """Fraction of ``test_points`` within ``radius`` of some cloud point."""
    test = np.asarray(test_points, dtype=float)
    hit = 0
    for start in range(0, test.shape[0], 256):
        chunk = test[start:start + 256]
        d = np.linalg.norm(chunk[:, None, :] - cloud.points[None, :, :], axis=2)
        hit += int(np.sum(np.min(d, axis=1) <= radius))
    return hit / test.shape[0]


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    rho = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
