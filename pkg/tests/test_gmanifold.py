import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liereach.controls import FunctionControl, StaircaseControl
from liereach.errors import GridMismatch, ManifoldMismatch, TimeOutOfRange
from liereach.evolution import evolve_staircase
from liereach.gmanifold import (GroupItself, PlaneUnderSE2, ProductPowerDiagonal, Sphere2UnderSO3,
                                act, caratheodory_residual, cocycle_check, flow, flow_path,
                                fundamental_vector_field, manifold)
from liereach.groups import HEISENBERG3, SE2, SO3, exp, rotation

from strategies import staircases

HALF_PI = math.pi / 2
SPHERE = Sphere2UnderSO3()
MANIFOLDS = [SPHERE, PlaneUnderSE2(), GroupItself(HEISENBERG3), GroupItself(SE2),
             ProductPowerDiagonal(3)]


def random_point(m, rng):
    if isinstance(m, (Sphere2UnderSO3, ProductPowerDiagonal)):
        x = rng.normal(size=(m.point_dim // 3, 3))
        return m.point((x / np.linalg.norm(x, axis=1, keepdims=True)).ravel())
    if isinstance(m, GroupItself):
        return m.point(exp(m.group.vector(rng.normal(size=m.group.algebra_dim))).coords.ravel())
    return m.point(rng.normal(size=m.point_dim))


def test_manifold_lookup():
    assert manifold("Sphere2UnderSO3") == SPHERE
    assert manifold("GroupItself[SO3^2]").point_dim == 18
    assert manifold("ProductPowerDiagonal[4]").group.group_id == "SO3^4"
    assert manifold("TorusUnderSE2") == PlaneUnderSE2()
    with pytest.raises(ManifoldMismatch):
        manifold("Klein")
    with pytest.raises(ManifoldMismatch):
        SPHERE.point([1.0, 1.0, 0.0])


def test_act_examples():
    north = SPHERE.point([0.0, 0.0, 1.0])
    assert act(north, SO3.identity()) == north
    np.testing.assert_allclose(act(north, rotation([0, 0, 1], 0.7)).coords, [0, 0, 1], atol=1e-16)
    # x.g = g^T x with g = Rx(pi/2)
    np.testing.assert_allclose(act(north, rotation([1, 0, 0], HALF_PI)).coords, [0, 1, 0], atol=1e-15)
    with pytest.raises(ManifoldMismatch):
        act(north, SE2.identity())


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.manifold_id)
def test_right_action_axioms(m):
    rng = np.random.default_rng(7)
    for _ in range(10):
        x = random_point(m, rng)
        g = exp(m.group.vector(rng.normal(size=m.group.algebra_dim)))
        h = exp(m.group.vector(rng.normal(size=m.group.algebra_dim)))
        np.testing.assert_allclose(act(act(x, g), h).coords, act(x, g @ h).coords, atol=1e-12)
        assert act(x, m.group.identity()) == x


def test_field_examples():
    north = SPHERE.point([0.0, 0.0, 1.0])
    assert np.all(fundamental_vector_field(SPHERE, SO3.zero(), north) == 0.0)
    assert np.all(fundamental_vector_field(SPHERE, SO3.vector([0, 0, 1]), north) == 0.0)
    closed = fundamental_vector_field(SPHERE, SO3.vector([1, 0, 0]), north)
    np.testing.assert_array_equal(closed, [0.0, 1.0, 0.0])
    fd = fundamental_vector_field(SPHERE, SO3.vector([1, 0, 0]), north, method="fd")
    np.testing.assert_allclose(fd, closed, atol=1e-7)
    with pytest.raises(ManifoldMismatch):
        fundamental_vector_field(SPHERE, SE2.vector([1, 0, 0]), north)


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.manifold_id)
def test_closed_field_matches_finite_difference(m):
    rng = np.random.default_rng(8)
    for _ in range(10):
        x = random_point(m, rng)
        v = m.group.vector(rng.normal(size=m.group.algebra_dim))
        np.testing.assert_allclose(fundamental_vector_field(m, v, x),
                                   fundamental_vector_field(m, v, x, method="fd"), atol=1e-7)


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.manifold_id)
def test_field_linearity(m):
    rng = np.random.default_rng(9)
    x = random_point(m, rng)
    u, v = (m.group.vector(rng.normal(size=m.group.algebra_dim)) for _ in range(2))
    lhs = fundamental_vector_field(m, u + v, x)
    rhs = fundamental_vector_field(m, u, x) + fundamental_vector_field(m, v, x)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    lhs = fundamental_vector_field(m, u + v, x, method="fd")
    rhs = fundamental_vector_field(m, u, x, method="fd") + fundamental_vector_field(m, v, x, method="fd")
    np.testing.assert_allclose(lhs, rhs, atol=1e-7)


def test_flow_examples():
    y0 = SPHERE.point([1.0, 0.0, 0.0])
    two = StaircaseControl(SO3, [0.0, 1.0, 2.0], [[0, 0, HALF_PI], [HALF_PI, 0, 0]])
    assert flow(SPHERE, two, 0.7, 0.7, y0) == y0
    # (Rz(pi/2) Rx(pi/2))^T e_x, computed by hand
    np.testing.assert_allclose(flow(SPHERE, two, 2.0, 0.0, y0).coords, [0, 0, 1], atol=1e-15)
    v = SO3.vector([0.3, -0.5, 0.2])
    c = StaircaseControl.constant(v, 3.0)
    for t in (0.5, 1.7, 3.0):
        np.testing.assert_allclose(flow(SPHERE, c, t, 0.0, y0).coords,
                                   act(y0, exp(v * t)).coords, atol=1e-15)
    with pytest.raises(TimeOutOfRange):
        flow(SPHERE, two, 2.5, 0.0, y0)


def test_cocycle_examples():
    rng = np.random.default_rng(10)
    pts = [random_point(SPHERE, rng) for _ in range(5)]
    two = StaircaseControl(SO3, [0.0, 1.0, 2.0], [[0, 0, HALF_PI], [HALF_PI, 0, 0]])
    assert cocycle_check(SPHERE, two, (0.4, 0.4, 0.4), pts) == 0.0
    assert cocycle_check(SPHERE, two, (0.3, 1.6, 0.9), pts) <= 1e-12

    def f(t):
        t = np.atleast_1d(t)
        return np.stack([np.cos(3 * t), np.sin(2 * t), t], axis=1)

    smooth = FunctionControl(SO3, 1.0, f)
    assert cocycle_check(SPHERE, smooth, (0.1, 0.55, 0.9), pts, steps=512) <= 1e-8
    with pytest.raises(TimeOutOfRange):
        cocycle_check(SPHERE, two, (0.0, 1.0, 3.0), pts)


def test_flow_membership_preserved():
    rng = np.random.default_rng(11)
    m = ProductPowerDiagonal(3)
    for _ in range(5):
        c = StaircaseControl.from_durations(m.group, [0.4, 0.7], rng.normal(size=(2, 9)))
        x = random_point(m, rng)
        path = flow_path(m, c, np.linspace(0, c.horizon, 50), 0.0, x)
        assert np.max(m.membership(path)) <= 1e-10


def test_caratheodory_examples():
    zero = StaircaseControl.constant(SO3.zero(), 1.0)
    t = np.linspace(0.0, 1.0, 11)
    const_path = np.tile([0.0, 0.6, 0.8], (11, 1))
    assert caratheodory_residual(SPHERE, zero, const_path, t) == 0.0

    v = StaircaseControl.constant(SO3.vector([0.4, 1.0, -0.3]), 1.0)
    x = SPHERE.point([0.0, 0.6, 0.8])
    res = []
    for cells in (256, 512, 1024):
        t = np.linspace(0.0, 1.0, cells + 1)
        res.append(caratheodory_residual(SPHERE, v, flow_path(SPHERE, v, t, 0.0, x), t))
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    assert min(orders) >= 0.9

    t = np.linspace(0.0, 1.0, 513)
    path = flow_path(SPHERE, v, t, 0.0, x)
    bad = path.copy()
    bad[200] = act(SPHERE.point(bad[200]), rotation([0, 0, 1], 0.05)).coords
    assert caratheodory_residual(SPHERE, v, bad, t) >= 10 * caratheodory_residual(SPHERE, v, path, t)

    # central differences are second order away from jumps
    c2 = [caratheodory_residual(SPHERE, v, flow_path(SPHERE, v, tt, 0.0, x), tt, scheme="central")
          for tt in (np.linspace(0, 1, 257), np.linspace(0, 1, 513))]
    assert math.log2(c2[0] / c2[1]) >= 1.9


def test_caratheodory_grid_must_contain_breakpoints():
    two = StaircaseControl(SO3, [0.0, 1.0 / 3.0, 1.0], [[0, 0, 1], [1, 0, 0]])
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(GridMismatch):
        caratheodory_residual(SPHERE, two, flow_path(SPHERE, two, t, 0.0, SPHERE.point([1, 0, 0])), t)


@settings(max_examples=30, deadline=None)
@given(staircases(), st.data())
def test_flow_endpoint_and_inverse_flow(gamma, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2 ** 32 - 1)))
    x = random_point(SPHERE, rng)
    T = gamma.horizon
    end = flow(SPHERE, gamma, T, 0.0, x)
    np.testing.assert_allclose(end.coords, act(x, evolve_staircase(gamma)).coords, atol=1e-12)
    t0, t1 = sorted(data.draw(st.lists(st.floats(0, T), min_size=2, max_size=2)))
    back = flow(SPHERE, gamma, t0, t1, flow(SPHERE, gamma, t1, t0, x))
    np.testing.assert_allclose(back.coords, x.coords, atol=1e-12)
