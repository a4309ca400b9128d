"""JSON and CSV serialization.

Floats are written with 17 significant digits so that every double survives a round
trip and repeated runs produce byte-identical files.  Loaders raise :class:`FormatError`
naming the offending field (``$.values[2][1]``) or the JSON line and column.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .controls import PiecewiseContinuousControl, SampledControl, StaircaseControl
from .errors import LieReachError
from .evolution import EvolutionCurve
from .gmanifold import ManifoldPoint, manifold
from .groups import AlgebraVector, GroupElement, LieGroup
from .reach import ReachabilityCloud
from .synthesis import ControlPolytope, SynthesisReport


class FormatError(LieReachError, ValueError):
    """Malformed input file; the message names the line/column or the field path."""


def fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    s = format(x, ".17g")
    return "0" if s == "-0" else s


def _is_flat(v):
    return isinstance(v, list) and all(not isinstance(e, (list, dict)) for e in v)


def _dump(v, indent, level):
    pad = " " * (indent * level)
    inner = " " * (indent * (level + 1))
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_dump(val, indent, level + 1)}" for k, val in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(v, (list, tuple)):
        v = list(v)
        if not v:
            return "[]"
        if _is_flat(v):
            return "[" + ", ".join(_dump(e, indent, level + 1) for e in v) + "]"
        return "[\n" + ",\n".join(inner + _dump(e, indent, level + 1) for e in v) + "\n" + pad + "]"
    if isinstance(v, np.ndarray):
        return _dump(v.tolist(), indent, level)
    if v is None or isinstance(v, (bool, np.bool_)):
        return json.dumps(None if v is None else bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if isinstance(v, str):
        return json.dumps(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(obj) -> str:
    """Serialize a liereach object (or plain JSON data) to deterministic JSON text."""
    return _dump(to_data(obj), 2, 0) + "\n"


def save(obj, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(obj))


# ---------------------------------------------------------------------------
# objects -> plain data


def to_data(obj):
    if isinstance(obj, GroupElement):
        return {"group": obj.group_id, "coords": obj.coords}
    if isinstance(obj, AlgebraVector):
        return {"group": obj.group_id, "coeffs": obj.coeffs}
    if isinstance(obj, StaircaseControl):
        return {"kind": "staircase", "group": obj.group.group_id,
                "breakpoints": obj.breakpoints, "values": obj.values}
    if isinstance(obj, SampledControl):
        return {"kind": "sampled", "group": obj.group.group_id,
                "horizon": obj.horizon, "samples": obj.samples}
    if isinstance(obj, PiecewiseContinuousControl):
        return {"kind": "piecewise", "group": obj.group.group_id,
                "segments": [to_data(s) for s in obj.segments]}
    if isinstance(obj, ManifoldPoint):
        return {"manifold": obj.manifold_id, "coords": obj.coords}
    if isinstance(obj, ControlPolytope):
        return {"group": obj.group.group_id, "vertices": obj.vertices,
                "tolerance": obj.tolerance}
    if isinstance(obj, EvolutionCurve):
        return {"group": obj.group.group_id,
                "curve": [[t, g.coords] for t, g in obj]}
    if isinstance(obj, SynthesisReport):
        return {"control": to_data(obj.control),
                "achieved_distance": obj.achieved_distance,
                "segment_count": obj.segment_count,
                "trotter_n_used": list(obj.trotter_n_used),
                "history": [[int(n), d] for n, d in obj.history]}
    if isinstance(obj, ReachabilityCloud):
        return cloud_words_data(obj)
    if isinstance(obj, dict):
        return {k: to_data(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_data(v) for v in obj]
    return obj


def cloud_words_data(cloud: ReachabilityCloud) -> dict:
    return {
        "manifold": cloud.manifold_id,
        "x0": cloud.x0.coords,
        "generators": [v.coeffs for v in cloud.generators],
        "dedup_radius": cloud.dedup_radius,
        "complete": cloud.complete,
        "params": cloud.params,
        # each word as [[dwell, generator index], ...]
        "words": [[[s, i] for s, i in w] for w in cloud.words],
        "depths": list(cloud.depths),
    }


def cloud_csv(cloud: ReachabilityCloud) -> str:
    dim = cloud.points.shape[1]
    lines = ["index,depth," + ",".join(f"x{k}" for k in range(dim))]
    for i, p in enumerate(cloud.points):
        lines.append(f"{i},{cloud.depths[i]}," + ",".join(fmt(c) for c in p))
    return "\n".join(lines) + "\n"


def path_csv(times, path) -> str:
    path = np.asarray(path)
    lines = ["t," + ",".join(f"x{k}" for k in range(path.shape[1]))]
    for t, p in zip(times, path):
        lines.append(fmt(t) + "," + ",".join(fmt(c) for c in p))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# plain data -> objects


def loads(text: str, source: str = "<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None


def load(path):
    with open(path, encoding="utf-8") as f:
        return loads(f.read(), str(path))


def _field(data, key, where):
    if not isinstance(data, dict):
        raise FormatError(f"{where}: expected an object")
    if key not in data:
        raise FormatError(f"{where}.{key}: missing field")
    return data[key]


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError(f"{where}: expected a number, got {json.dumps(v)[:40]}")
    return float(v)


def _array(v, where, ndim, width=None):
    """Nested lists of numbers as a float array, checked element by element."""
    def walk(x, path, depth):
        if depth == ndim:
            return _number(x, path)
        if not isinstance(x, list):
            raise FormatError(f"{path}: expected a list")
        return [walk(e, f"{path}[{i}]", depth + 1) for i, e in enumerate(x)]

    out = walk(v, where, 0)
    if ndim == 2:
        want = width if width is not None else (len(out[0]) if out else 0)
        for i, row in enumerate(out):
            if len(row) != want:
                raise FormatError(f"{where}[{i}]: expected {want} entries, got {len(row)}")
    elif width is not None and len(out) != width:
        raise FormatError(f"{where}: expected {width} entries, got {len(out)}")
    return np.array(out, dtype=float)


def _group(data, where):
    gid = _field(data, "group", where)
    if not isinstance(gid, str):
        raise FormatError(f"{where}.group: expected a string")
    try:
        return LieGroup.parse(gid)
    except (ValueError, KeyError) as e:
        raise FormatError(f"{where}.group: {e}") from None


def _build(where, ctor, *args):
    try:
        return ctor(*args)
    except (LieReachError, ValueError) as e:
        raise FormatError(f"{where}: {e}") from None


def control_from_data(data, where="$"):
    kind = _field(data, "kind", where)
    group = _group(data, where)
    dim = group.algebra_dim
    if kind == "staircase":
        bp = _array(_field(data, "breakpoints", where), f"{where}.breakpoints", 1)
        vals = _array(_field(data, "values", where), f"{where}.values", 2, dim)
        return _build(where, StaircaseControl, group, bp, vals)
    if kind == "sampled":
        T = _number(_field(data, "horizon", where), f"{where}.horizon")
        samples = _array(_field(data, "samples", where), f"{where}.samples", 2, dim)
        return _build(where, SampledControl, group, T, samples)
    if kind == "piecewise":
        segs = _field(data, "segments", where)
        if not isinstance(segs, list):
            raise FormatError(f"{where}.segments: expected a list")
        parts = []
        for i, s in enumerate(segs):
            c = control_from_data(s, f"{where}.segments[{i}]")
            if not isinstance(c, SampledControl):
                raise FormatError(f"{where}.segments[{i}]: segments must be sampled")
            parts.append(c)
        return _build(where, PiecewiseContinuousControl, group, parts)
    raise FormatError(f"{where}.kind: unknown control kind {kind!r}")


def element_from_data(data, where="$") -> GroupElement:
    group = _group(data, where)
    n = group.ambient_dim
    coords = _array(_field(data, "coords", where), f"{where}.coords", 2, n)
    return _build(where, group.element, coords)


def vector_from_data(data, where="$") -> AlgebraVector:
    group = _group(data, where)
    return _build(where, group.vector,
                  _array(_field(data, "coeffs", where), f"{where}.coeffs", 1, group.algebra_dim))


def point_from_data(data, where="$") -> ManifoldPoint:
    mid = _field(data, "manifold", where)
    m = _build(f"{where}.manifold", manifold, mid)
    coords = _array(_field(data, "coords", where), f"{where}.coords", 1, m.point_dim)
    return _build(where, m.point, coords)


def polytope_from_data(data, where="$") -> ControlPolytope:
    group = _group(data, where)
    verts = _array(_field(data, "vertices", where), f"{where}.vertices", 2, group.algebra_dim)
    tol = _number(data.get("tolerance", 1e-9), f"{where}.tolerance")
    return _build(where, ControlPolytope, group, verts, tol)


def report_from_data(data, where="$") -> SynthesisReport:
    control = control_from_data(_field(data, "control", where), f"{where}.control")
    dist = _number(_field(data, "achieved_distance", where), f"{where}.achieved_distance")
    hist = [(int(n), float(d)) for n, d in data.get("history", [])]
    return SynthesisReport(control, dist, int(_field(data, "segment_count", where)),
                           [int(n) for n in _field(data, "trotter_n_used", where)], hist)


def curve_from_data(data, where="$") -> EvolutionCurve:
    group = _group(data, where)
    rows = _field(data, "curve", where)
    if not isinstance(rows, list) or not rows:
        raise FormatError(f"{where}.curve: expected a non-empty list")
    times, blocks = [], []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 2:
            raise FormatError(f"{where}.curve[{i}]: expected [t, coords]")
        times.append(_number(row[0], f"{where}.curve[{i}][0]"))
        g = _build(f"{where}.curve[{i}]", group.element,
                   _array(row[1], f"{where}.curve[{i}][1]", 2, group.ambient_dim))
        blocks.append(g.blocks)
    return EvolutionCurve(group, np.array(times), np.stack(blocks))
