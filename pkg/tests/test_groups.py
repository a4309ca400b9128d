import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from liereach.errors import (BadExponent, GroupMismatch, NotInGroup, OutsideChart,
                             UnknownSeminorm)
from liereach.groups import (HEISENBERG3, SE2, SO3, LieGroup, dist, exp, inverse, log,
                             membership_residual, multiply, product_power, rotation,
                             seminorm)

GROUPS = [SO3, SE2, HEISENBERG3]

# hand-written rotation matrices, independent of the library
RZ90 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
RX90 = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])

coeff = st.floats(-2.0, 2.0, allow_nan=False)
vec3 = st.tuples(coeff, coeff, coeff).map(np.array)
group_st = st.sampled_from(GROUPS)


def test_parse_and_ids():
    assert LieGroup.parse("SO3") == SO3
    assert LieGroup.parse("SO3^4") == product_power("SO3", 4)
    assert product_power(SO3, 4).group_id == "SO3^4"
    assert product_power(SO3, 4).algebra_dim == 12
    with pytest.raises(ValueError):
        LieGroup.parse("SU2")


def test_identity_law_and_inverse_law():
    for group in GROUPS:
        g = exp(group.vector([0.3, -0.2, 0.7]))
        assert dist(multiply(group.identity(), g), g) == 0.0
        assert dist(multiply(g, inverse(g)), group.identity()) <= 1e-15


def test_multiply_rz_rx_oracle():
    g = multiply(rotation([0, 0, 1], math.pi / 2), rotation([1, 0, 0], math.pi / 2))
    np.testing.assert_allclose(g.coords, RZ90 @ RX90, atol=1e-15)
    np.testing.assert_allclose(g.coords, [[0, 0, 1], [1, 0, 0], [0, 1, 0]], atol=1e-15)


def test_multiply_group_mismatch():
    with pytest.raises(GroupMismatch):
        multiply(SO3.identity(), SE2.identity())


def test_exp_zero_is_identity():
    for group in GROUPS + [product_power(SO3, 3)]:
        assert exp(group.zero()) == group.identity()


def test_exp_heisenberg_oracle():
    g = exp(HEISENBERG3.vector([1.0, 1.0, 0.0]))
    np.testing.assert_array_equal(g.coords, [[1, 1, 0.5], [0, 1, 1], [0, 0, 1]])


def test_exp_so3_pi_about_z():
    g = exp(SO3.vector([0.0, 0.0, math.pi]))
    np.testing.assert_allclose(g.coords, np.diag([-1.0, -1.0, 1.0]), atol=1e-15)


def test_exp_so3_matches_scipy_rotation():
    rng = np.random.default_rng(3)
    for _ in range(50):
        w = rng.normal(size=3) * 2
        np.testing.assert_allclose(exp(SO3.vector(w)).coords,
                                   Rotation.from_rotvec(w).as_matrix(), atol=1e-14)


def test_exp_matches_expm_all_groups():
    rng = np.random.default_rng(4)
    for group in GROUPS:
        for _ in range(20):
            v = rng.normal(size=3)
            np.testing.assert_allclose(exp(group.vector(v)).coords,
                                       expm(group.hat_coeffs(v)[0]), atol=1e-13)


def test_log_identity_and_axis_angle_oracle():
    assert np.all(log(SO3.identity()).coeffs == 0.0)
    axis = np.ones(3) / math.sqrt(3.0)
    g = SO3.element(Rotation.from_rotvec(0.3 * axis).as_matrix())
    np.testing.assert_allclose(log(g).coeffs, 0.3 * axis, atol=1e-15)


def test_log_large_angle_accurate():
    w = np.array([0.2, -1.0, 2.5])
    w *= (math.pi - 1e-3) / np.linalg.norm(w)
    np.testing.assert_allclose(log(exp(SO3.vector(w))).coeffs, w, atol=1e-11)


def test_log_outside_chart_near_pi():
    with pytest.raises(OutsideChart):
        log(exp(SO3.vector([0.0, 0.0, math.pi - 1e-8])))
    with pytest.raises(OutsideChart):
        log(SO3.element(np.diag([-1.0, -1.0, 1.0])))


def test_dist_oracles():
    g = exp(SO3.vector([0.1, 0.2, 0.3]))
    assert dist(g, g) == 0.0
    assert dist(SO3.identity(), rotation([0, 0, 1], math.pi)) == pytest.approx(2 * math.sqrt(2), abs=1e-15)
    v = SO3.vector([0.3, -0.4, 0.5])
    ratios = [dist(SO3.identity(), exp(v * h)) / h for h in (1e-2, 1e-4, 1e-6)]
    # first-order: ratio tends to ||hat(v)||_F = sqrt(2) * |v|
    assert ratios[-1] == pytest.approx(math.sqrt(2) * math.sqrt(0.5), rel=1e-5)
    with pytest.raises(GroupMismatch):
        dist(SO3.identity(), HEISENBERG3.identity())


def test_seminorms():
    assert seminorm(SO3.vector([3.0, 4.0, 0.0]), "euclid") == 5.0
    # sup is the largest per-factor Euclidean norm
    assert seminorm(SO3.vector([3.0, -4.0, 0.0]), "sup") == 5.0
    assert seminorm(product_power(SO3, 2).vector([3, -4, 0, 0, 1, 0]), "sup") == 5.0
    assert seminorm(SO3.zero(), "euclid") == 0.0
    v = SE2.vector([0.3, 1.2, -0.1])
    assert seminorm(v * 2.0, "euclid") == pytest.approx(2 * seminorm(v, "euclid"), rel=1e-15)
    with pytest.raises(UnknownSeminorm):
        seminorm(v, "l7")


def test_element_rejects_non_members():
    with pytest.raises(NotInGroup):
        SO3.element(np.diag([1.0, 1.0, -1.0]) * 1.0 + 0.01)
    with pytest.raises(NotInGroup):
        HEISENBERG3.element(np.array([[1, 0, 0], [1, 1, 0], [0, 0, 1.0]]))
    with pytest.raises(NotInGroup):
        SE2.element(np.eye(4))


def test_product_power_is_factorwise():
    rng = np.random.default_rng(5)
    G = product_power(SO3, 4)
    v = rng.normal(size=12)
    g = exp(G.vector(v))
    for k in range(4):
        np.testing.assert_array_equal(g.blocks[k], exp(SO3.vector(v[3 * k:3 * k + 3])).blocks[0])
    h = exp(G.vector(rng.normal(size=12)))
    gh = multiply(g, h)
    for k in range(4):
        np.testing.assert_array_equal(gh.blocks[k], g.blocks[k] @ h.blocks[k])
    # dense coordinates are block diagonal
    assert np.all(g.coords[:3, 3:] == 0.0)


@settings(max_examples=60, deadline=None)
@given(group_st, vec3, vec3, vec3)
def test_associativity(group, a, b, c):
    g, h, k = (exp(group.vector(x)) for x in (a, b, c))
    assert dist(multiply(multiply(g, h), k), multiply(g, multiply(h, k))) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(group_st, vec3)
def test_exp_inverse(group, v):
    v = v / max(1.0, np.linalg.norm(v))
    assert dist(multiply(exp(group.vector(v)), exp(group.vector(-v))), group.identity()) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(group_st, vec3, st.floats(-2, 2), st.floats(-2, 2))
def test_one_parameter_subgroup(group, v, s, t):
    v = group.vector(v)
    assert dist(multiply(exp(v * s), exp(v * t)), exp(v * (s + t))) <= 1e-10


@settings(max_examples=80, deadline=None)
@given(group_st, vec3)
def test_log_exp_roundtrip(group, v):
    if group == SO3:
        n = np.linalg.norm(v)
        if n > 3.0:
            v = v * (3.0 / n)
    assert np.max(np.abs(log(exp(group.vector(v))).coeffs - v)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(group_st, vec3)
def test_exp_stays_in_group(group, v):
    assert membership_residual(exp(group.vector(v * 5))) <= 1e-12


def test_bad_exponent_is_a_value_error():
    assert issubclass(BadExponent, ValueError)
