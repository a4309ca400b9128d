import json
import math

import numpy as np
import pytest
from hypothesis import given, settings

from liereach.controls import SampledControl, StaircaseControl, concatenate
from liereach.evolution import evolution_curve_staircase
from liereach.gmanifold import Sphere2UnderSO3
from liereach.groups import HEISENBERG3, SO3, exp
from liereach.io import (FormatError, cloud_csv, control_from_data, curve_from_data, dumps,
                         element_from_data, fmt, loads, path_csv, point_from_data,
                         polytope_from_data, report_from_data, to_data, vector_from_data)
from liereach.reach import reachable_explore
from liereach.synthesis import ControlPolytope, trotter_synthesize

from strategies import staircases


def roundtrip(obj):
    return loads(dumps(to_data(obj)))


def test_fmt_is_exact():
    for x in (0.1, math.pi, 1e-300, -2.5e17, 1 / 3):
        assert float(fmt(x)) == x
    assert fmt(2.0) == "2"


@settings(max_examples=40, deadline=None)
@given(staircases(group=HEISENBERG3))
def test_staircase_roundtrip_bitwise(c):
    back = control_from_data(roundtrip(c))
    assert np.array_equal(back.breakpoints, c.breakpoints)
    assert np.array_equal(back.values, c.values)
    assert dumps(to_data(back)) == dumps(to_data(c))


def test_other_roundtrips():
    rng = np.random.default_rng(30)
    s = SampledControl(SO3, 1.5, rng.normal(size=(7, 3)))
    assert control_from_data(roundtrip(s)) == s
    pw = concatenate(StaircaseControl.constant(SO3.vector([0, 0, 1]), 1.0), s)
    assert dumps(to_data(control_from_data(roundtrip(pw)))) == dumps(to_data(pw))
    g = exp(SO3.vector([0.3, 0.2, -0.1]))
    assert np.array_equal(element_from_data(roundtrip(g)).coords, g.coords)
    v = HEISENBERG3.vector([1, 2, 3])
    assert np.array_equal(vector_from_data(roundtrip(v)).coeffs, v.coeffs)
    p = Sphere2UnderSO3().point([0.0, 0.6, 0.8])
    assert np.array_equal(point_from_data(roundtrip(p)).coords, p.coords)
    poly = ControlPolytope(SO3, np.vstack([np.eye(3), -np.eye(3)]))
    assert np.array_equal(polytope_from_data(roundtrip(poly)).vertices, poly.vertices)
    rep = trotter_synthesize([(1.0, HEISENBERG3.vector([1, 0, 0])), (1.0, HEISENBERG3.vector([0, 1, 0]))], 1e-2)
    back = report_from_data(roundtrip(rep))
    assert back.achieved_distance == rep.achieved_distance and back.history == rep.history
    curve = evolution_curve_staircase(StaircaseControl.constant(SO3.vector([0, 1, 0]), 1.0), 5)
    assert dumps(to_data(curve_from_data(roundtrip(curve)))) == dumps(to_data(curve))


def test_dumps_is_valid_json_with_trailing_newline():
    text = dumps(to_data(StaircaseControl(SO3, [0, 0.5, 1], [[0, 0, 1], [0.1, 0, 0]])))
    assert text.endswith("\n")
    assert json.loads(text)["kind"] == "staircase"


def test_syntax_error_location():
    with pytest.raises(FormatError, match=r"ctl.json: line 2, column \d+"):
        loads('{"kind": "staircase",\n "group": SO3}', "ctl.json")


@pytest.mark.parametrize("data, path", [
    ({"kind": "staircase", "group": "SO3", "breakpoints": [0, 1], "values": [[0, "x", 0]]}, r"\$\.values\[0\]\[1\]"),
    ({"kind": "staircase", "group": "SO3", "values": [[0, 0, 0]]}, r"\$\.breakpoints"),
    ({"kind": "staircase", "group": "SO7", "breakpoints": [0, 1], "values": [[0, 0, 0]]}, r"\$\.group"),
    ({"kind": "spline", "group": "SO3"}, r"\$\.kind"),
    ({"kind": "sampled", "group": "SO3", "horizon": "one", "samples": [[0, 0, 0], [0, 0, 0]]}, r"\$\.horizon"),
])
def test_field_path_errors(data, path):
    with pytest.raises(FormatError, match=path):
        control_from_data(data)


def test_invalid_control_reported_as_format_error():
    with pytest.raises(FormatError):
        control_from_data({"kind": "staircase", "group": "SO3", "breakpoints": [0, 1, 1], "values": [[0, 0, 1], [1, 0, 0]]})


def test_csv_writers():
    m = Sphere2UnderSO3()
    c = reachable_explore(m, m.point([0, 0, 1]), [SO3.vector([1, 0, 0])], 2, [0.5], 0.01)
    lines = cloud_csv(c).splitlines()
    assert lines[0] == "index,depth,x0,x1,x2"
    assert len(lines) == len(c) + 1
    assert [float(x) for x in lines[1].split(",")[2:]] == [0.0, 0.0, 1.0]
    text = path_csv(np.array([0.0, 0.5]), np.array([[1.0, 0, 0], [0, 1.0, 0]]))
    assert text.splitlines()[0] == "t,x0,x1,x2"
