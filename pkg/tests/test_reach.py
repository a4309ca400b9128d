import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from liereach.errors import CapacityExceeded, ManifoldMismatch
from liereach.evolution import evolve_staircase
from liereach.gmanifold import GroupItself, PlaneUnderSE2, Sphere2UnderSO3, act
from liereach.groups import SE2, SO3, exp
from liereach.reach import contains_approx, coverage, fibonacci_sphere, reachable_explore

SPHERE = Sphere2UnderSO3()
NORTH = SPHERE.point([0.0, 0.0, 1.0])
EX, EZ = SO3.vector([1.0, 0.0, 0.0]), SO3.vector([0.0, 0.0, 1.0])


def oracle_cloud(x0, rotvecs, dwell, depth, radius):
    """Level-by-level enumeration with a linear-scan dedup; x.g = g^T x."""
    mats = [Rotation.from_rotvec(s * np.asarray(v, float)).as_matrix() for v in rotvecs for s in dwell]
    pts = [np.asarray(x0, float)]
    frontier = [0]
    for _ in range(depth):
        nxt = []
        for p in frontier:
            for R in mats:
                y = R.T @ pts[p]
                if np.min(np.linalg.norm(np.array(pts) - y, axis=1)) <= radius:
                    continue
                pts.append(y)
                nxt.append(len(pts) - 1)
        frontier = nxt
    return np.array(pts)


def explore(depth, radius=0.05, dwell=(math.pi / 8,), gens=(EX, EZ), **kw):
    return reachable_explore(SPHERE, NORTH, list(gens), depth, list(dwell), radius, **kw)


def test_trivial_clouds():
    c = reachable_explore(SPHERE, NORTH, [SO3.zero()], 5, [0.5, 1.0], 0.01)
    assert len(c) == 1 and c.words == [()]
    c = reachable_explore(SPHERE, NORTH, [EZ], 8, [0.3], 0.01)
    assert len(c) == 1 and np.array_equal(c.points[0], NORTH.coords)


def test_argument_errors():
    with pytest.raises(ValueError):
        explore(0)
    with pytest.raises(ValueError):
        explore(2, dwell=(0.0,))
    with pytest.raises(ManifoldMismatch):
        reachable_explore(SPHERE, NORTH, [SE2.vector([1, 0, 0])], 2, [0.5], 0.1)


def test_points_reproducible_and_separated():
    c = explore(6)
    for w, p in zip(c.words[1:], c.points[1:]):
        y = act(NORTH, evolve_staircase(c.control_for(w)))
        assert np.linalg.norm(y.coords - p) <= 1e-10
    d = np.linalg.norm(c.points[:, None] - c.points[None], axis=2)
    np.fill_diagonal(d, np.inf)
    assert np.min(d) >= c.dedup_radius / 2
    assert all(len(w) == k for w, k in zip(c.words, c.depths))


def test_matches_bruteforce_oracle():
    c = explore(6, radius=0.05)
    ref = oracle_cloud(NORTH.coords, [EX.coeffs, EZ.coeffs], [math.pi / 8], 6, 0.05)
    assert c.points.shape == ref.shape
    assert np.max(np.abs(c.points - ref)) <= 1e-12


def test_monotone_in_depth():
    small, big = explore(4), explore(5)
    assert small.points.shape[0] <= big.points.shape[0]
    # breadth-first insertion: the shallower cloud is a prefix of the deeper one
    assert np.array_equal(big.points[:len(small)], small.points)


def test_semigroup_closure_at_budget():
    c = explore(5, radius=0.1)
    moves = [exp(v * (math.pi / 8)) for v in (EX, EZ)]
    last = max(c.depths)
    for i in range(len(c)):
        for g in moves:
            y = act(c.point(i), g).coords
            near = np.min(np.linalg.norm(c.points - y, axis=1)) <= c.dedup_radius
            assert near or c.depths[i] == last


def test_contains_approx():
    c = explore(6, radius=0.05)
    assert contains_approx(c, NORTH, 1e-9) == (True, ())
    south = SPHERE.point([0.0, 0.0, -1.0])
    gap = np.min(np.linalg.norm(c.points - south.coords, axis=1))
    assert contains_approx(c, south, gap / 2) == (False, None)
    rng = np.random.default_rng(20)
    for y in fibonacci_sphere(40):
        q = SPHERE.point(y)
        found = [contains_approx(c, q, r)[0] for r in (0.05, 0.1, 0.2, 0.4, 1.0, 2.0)]
        assert all(b or not a for a, b in zip(found, found[1:]))
        ok, w = contains_approx(c, q, 0.4)
        if ok and w:
            witness = act(NORTH, evolve_staircase(c.control_for(w)))
            assert np.linalg.norm(witness.coords - q.coords) <= 0.4
    with pytest.raises(ManifoldMismatch):
        contains_approx(c, PlaneUnderSE2().point(rng.normal(size=2)), 0.1)


def test_capacity_exceeded_reports_partial_cloud():
    with pytest.raises(CapacityExceeded) as info:
        explore(8, radius=0.01, max_points=50)
    partial = info.value.cloud
    assert len(partial) == 50 and not partial.complete
    full = explore(8, radius=0.01)
    assert np.array_equal(full.points[:50], partial.points)


def test_group_itself_exploration():
    m = GroupItself(SE2)
    x0 = m.point(np.eye(3).ravel())
    c = reachable_explore(m, x0, [SE2.vector([1, 0, 0]), SE2.vector([0, 0, 1])], 3, [0.5], 0.1)
    for w, p in zip(c.words[1:], c.points[1:]):
        assert np.max(np.abs(evolve_staircase(c.control_for(w)).coords.ravel() - p)) <= 1e-12


def test_fibonacci_sphere_and_coverage():
    pts = fibonacci_sphere(500)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-15)
    c = explore(3)
    assert coverage(c, pts, 3.0) == 1.0
    assert 0.0 < coverage(c, pts, 0.3) < 1.0
