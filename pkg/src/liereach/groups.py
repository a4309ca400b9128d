"""Concrete matrix Lie groups: SO(3), SE(2), the Heisenberg group and their product powers.

Every base group is realized by 3x3 matrices with a three dimensional Lie algebra, so a
product power ``G^N`` is stored as a stack of ``N`` blocks of shape ``(3, 3)``.  The
dense block-diagonal matrix is available as :attr:`GroupElement.coords`.

All array kernels (``exp_coeffs``, ``log_blocks`` ...) are vectorized over leading axes;
the dataclass wrappers are thin immutable views on top of them.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import GroupMismatch, NotInGroup, OutsideChart, UnknownSeminorm

BASE_GROUPS = ("SO3", "SE2", "Heisenberg3")
SEMINORMS = ("euclid", "sup")

# SO3 log refuses angles this close to pi instead of picking a branch
LOG_ANGLE_MARGIN = 1e-6
MEMBERSHIP_TOL = 1e-10

_SMALL = 1e-4


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# array kernels, one block = one 3x3 matrix


def hat(base, coeffs):
    """Map algebra coefficients ``(..., 3)`` to matrices ``(..., 3, 3)``."""
    w = np.asarray(coeffs, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    x, y, z = w[..., 0], w[..., 1], w[..., 2]
    if base == "SO3":
        out[..., 0, 1] = -z
        out[..., 0, 2] = y
        out[..., 1, 0] = z
        out[..., 1, 2] = -x
        out[..., 2, 0] = -y
        out[..., 2, 1] = x
    elif base == "SE2":
        # (rotation, tx, ty)
        out[..., 0, 1] = -x
        out[..., 1, 0] = x
        out[..., 0, 2] = y
        out[..., 1, 2] = z
    elif base == "Heisenberg3":
        # X = E12, Y = E23, Z = E13, so [X, Y] = Z
        out[..., 0, 1] = x
        out[..., 1, 2] = y
        out[..., 0, 2] = z
    else:
        raise ValueError(f"unknown base group {base!r}")
    return out


def _so3_exp(w):
    theta2 = np.sum(w * w, axis=-1)
    theta = np.sqrt(theta2)
    small = theta < _SMALL
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta2 / 6.0 + theta2**2 / 120.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta2 / 24.0 + theta2**2 / 720.0, (1.0 - np.cos(safe)) / safe**2)
    k = hat("SO3", w)
    return np.eye(3) + a[..., None, None] * k + b[..., None, None] * (k @ k)


def _so3_log(r):
    skew = np.stack([r[..., 2, 1] - r[..., 1, 2],
                     r[..., 0, 2] - r[..., 2, 0],
                     r[..., 1, 0] - r[..., 0, 1]], axis=-1)
    s = 0.5 * np.linalg.norm(skew, axis=-1)
    c = 0.5 * (np.trace(r, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(s, c)
    if np.any(theta > np.pi - LOG_ANGLE_MARGIN):
        raise OutsideChart("rotation angle too close to pi for the log chart")

    small = theta < _SMALL
    safe_s = np.where(small, 1.0, s)
    factor = np.where(small, 1.0 + theta**2 / 6.0 + 7.0 * theta**4 / 360.0, theta / safe_s)
    out = 0.5 * factor[..., None] * skew

    # large angles: the skew part loses precision, take the axis from the symmetric part
    wide = c < 0.0
    if np.any(wide):
        rw, cw, tw, kw = r[wide], c[wide], theta[wide], skew[wide]
        m = 0.5 * (rw + np.swapaxes(rw, -1, -2)) - cw[:, None, None] * np.eye(3)
        col = np.argmax(np.diagonal(m, axis1=-2, axis2=-1), axis=-1)
        axis = np.take_along_axis(m, col[:, None, None], axis=-1)[..., 0]
        axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
        sign = np.where(np.sum(axis * kw, axis=-1) < 0.0, -1.0, 1.0)
        out[wide] = (sign * tw)[:, None] * axis
    return out


def _se2_vcoeffs(w):
    w2 = w * w
    small = np.abs(w) < _SMALL
    safe = np.where(small, 1.0, w)
    a = np.where(small, 1.0 - w2 / 6.0 + w2**2 / 120.0, np.sin(safe) / safe)
    b = np.where(small, w / 2.0 - w * w2 / 24.0 + w * w2**2 / 720.0, (1.0 - np.cos(safe)) / safe)
    return a, b


def _se2_exp(v):
    w, tx, ty = v[..., 0], v[..., 1], v[..., 2]
    a, b = _se2_vcoeffs(w)
    out = np.zeros(v.shape[:-1] + (3, 3))
    c, s = np.cos(w), np.sin(w)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 0, 2] = a * tx - b * ty
    out[..., 1, 2] = b * tx + a * ty
    out[..., 2, 2] = 1.0
    return out


def _se2_log(g):
    w = np.arctan2(g[..., 1, 0], g[..., 0, 0])
    a, b = _se2_vcoeffs(w)
    det = a * a + b * b
    px, py = g[..., 0, 2], g[..., 1, 2]
    return np.stack([w, (a * px + b * py) / det, (-b * px + a * py) / det], axis=-1)


def _heis_exp(v):
    a, b, c = v[..., 0], v[..., 1], v[..., 2]
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 0] = out[..., 1, 1] = out[..., 2, 2] = 1.0
    out[..., 0, 1] = a
    out[..., 1, 2] = b
    out[..., 0, 2] = c + 0.5 * a * b
    return out


def _heis_log(g):
    a, b = g[..., 0, 1], g[..., 1, 2]
    return np.stack([a, b, g[..., 0, 2] - 0.5 * a * b], axis=-1)


def exp_base(base, coeffs):
    coeffs = np.asarray(coeffs, dtype=float)
    if base == "SO3":
        return _so3_exp(coeffs)
    if base == "SE2":
        return _se2_exp(coeffs)
    if base == "Heisenberg3":
        return _heis_exp(coeffs)
    raise ValueError(f"unknown base group {base!r}")


def log_base(base, blocks):
    blocks = np.asarray(blocks, dtype=float)
    if base == "SO3":
        return _so3_log(blocks)
    if base == "SE2":
        return _se2_log(blocks)
    if base == "Heisenberg3":
        return _heis_log(blocks)
    raise ValueError(f"unknown base group {base!r}")


def inverse_base(base, g):
    if base == "SO3":
        return np.swapaxes(g, -1, -2).copy()
    out = np.zeros_like(g)
    if base == "SE2":
        rt = np.swapaxes(g[..., :2, :2], -1, -2)
        out[..., :2, :2] = rt
        out[..., :2, 2] = -np.einsum("...ij,...j->...i", rt, g[..., :2, 2])
        out[..., 2, 2] = 1.0
        return out
    if base == "Heisenberg3":
        a, b, c = g[..., 0, 1], g[..., 1, 2], g[..., 0, 2]
        out[..., 0, 0] = out[..., 1, 1] = out[..., 2, 2] = 1.0
        out[..., 0, 1] = -a
        out[..., 1, 2] = -b
        out[..., 0, 2] = a * b - c
        return out
    raise ValueError(f"unknown base group {base!r}")


def membership_base(base, g):
    """Per-block membership residual; ``inf`` when the structural pattern is broken."""
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        return np.full(g.shape[:-2], np.inf)
    if base == "SO3":
        gram = np.swapaxes(g, -1, -2) @ g - np.eye(3)
        res = np.linalg.norm(gram, axis=(-2, -1))
        return np.where(np.linalg.det(g) > 0.0, res, np.inf)
    if base == "SE2":
        rot = g[..., :2, :2]
        gram = np.swapaxes(rot, -1, -2) @ rot - np.eye(2)
        res = np.linalg.norm(gram, axis=(-2, -1))
        pattern = (g[..., 2, 0] == 0.0) & (g[..., 2, 1] == 0.0) & (g[..., 2, 2] == 1.0)
        return np.where(pattern & (np.linalg.det(rot) > 0.0), res, np.inf)
    if base == "Heisenberg3":
        pattern = np.stack([g[..., 0, 0] - 1.0, g[..., 1, 1] - 1.0, g[..., 2, 2] - 1.0,
                            g[..., 1, 0], g[..., 2, 0], g[..., 2, 1]], axis=-1)
        return np.max(np.abs(pattern), axis=-1)
    raise ValueError(f"unknown base group {base!r}")


# ---------------------------------------------------------------------------
# descriptors and values


_ID_RE = re.compile(r"^(SO3|SE2|Heisenberg3)(?:\^(\d+))?$")


@dataclass(frozen=True)
class LieGroup:
    """A base group or its product power ``base^copies``.

    ``group_id`` is ``"SO3"``, ``"SE2"``, ``"Heisenberg3"`` or e.g. ``"SO3^8"``.
    """

    base: str
    copies: int = 1

    def __post_init__(self):
        if self.base not in BASE_GROUPS:
            raise ValueError(f"unknown base group {self.base!r}")
        if int(self.copies) < 1:
            raise ValueError("copies must be positive")

    @classmethod
    def parse(cls, group_id: str) -> LieGroup:
        m = _ID_RE.match(group_id.strip())
        if not m:
            raise ValueError(f"unknown group id {group_id!r}")
        return cls(m.group(1), int(m.group(2) or 1))

    @property
    def group_id(self) -> str:
        return self.base if self.copies == 1 else f"{self.base}^{self.copies}"

    @property
    def algebra_dim(self) -> int:
        return 3 * self.copies

    @property
    def ambient_dim(self) -> int:
        return 3 * self.copies

    def __str__(self):
        return self.group_id

    # constructors

    def identity(self) -> GroupElement:
        return GroupElement(self, np.broadcast_to(np.eye(3), (self.copies, 3, 3)))

    def zero(self) -> AlgebraVector:
        return AlgebraVector(self, np.zeros(self.algebra_dim))

    def vector(self, coeffs) -> AlgebraVector:
        return AlgebraVector(self, coeffs)

    def element(self, coords, tol=MEMBERSHIP_TOL) -> GroupElement:
        """Build an element from a dense ambient matrix, checking membership."""
        coords = np.asarray(coords, dtype=float)
        n = self.ambient_dim
        if coords.shape != (n, n):
            raise NotInGroup(f"{self.group_id} expects a {n}x{n} matrix, got {coords.shape}")
        blocks = np.stack([coords[3 * i:3 * i + 3, 3 * i:3 * i + 3] for i in range(self.copies)])
        off = coords.copy()
        for i in range(self.copies):
            off[3 * i:3 * i + 3, 3 * i:3 * i + 3] = 0.0
        if np.any(off != 0.0):
            raise NotInGroup(f"{self.group_id}: off-diagonal blocks must be zero")
        g = GroupElement(self, blocks)
        res = membership_residual(g)
        if not res <= tol:
            raise NotInGroup(f"{self.group_id}: membership residual {res:.3g} exceeds {tol:g}")
        return g

    # batch kernels over leading axes

    def exp_coeffs(self, coeffs):
        """``(..., algebra_dim)`` coefficients to ``(..., copies, 3, 3)`` blocks."""
        coeffs = np.asarray(coeffs, dtype=float)
        shaped = coeffs.reshape(coeffs.shape[:-1] + (self.copies, 3))
        return exp_base(self.base, shaped)

    def log_blocks(self, blocks):
        blocks = np.asarray(blocks, dtype=float)
        w = log_base(self.base, blocks)
        return w.reshape(w.shape[:-2] + (self.algebra_dim,))

    def hat_coeffs(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        return hat(self.base, coeffs.reshape(coeffs.shape[:-1] + (self.copies, 3)))


SO3 = LieGroup("SO3")
SE2 = LieGroup("SE2")
HEISENBERG3 = LieGroup("Heisenberg3")


def product_power(base: str | LieGroup, copies: int) -> LieGroup:
    name = base.base if isinstance(base, LieGroup) else base
    return LieGroup(name, copies)


def as_group(group) -> LieGroup:
    if isinstance(group, LieGroup):
        return group
    return LieGroup.parse(group)


@dataclass(frozen=True, eq=False)
class GroupElement:
    group: LieGroup
    blocks: np.ndarray

    def __post_init__(self):
        blocks = _frozen(self.blocks)
        if blocks.shape != (self.group.copies, 3, 3):
            raise NotInGroup(f"bad block shape {blocks.shape} for {self.group.group_id}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def group_id(self) -> str:
        return self.group.group_id

    @property
    def coords(self) -> np.ndarray:
        n = self.group.ambient_dim
        out = np.zeros((n, n))
        for i, b in enumerate(self.blocks):
            out[3 * i:3 * i + 3, 3 * i:3 * i + 3] = b
        return out

    def __matmul__(self, other):
        return multiply(self, other)

    def __eq__(self, other):
        return (isinstance(other, GroupElement) and self.group == other.group
                and np.array_equal(self.blocks, other.blocks))

    def __hash__(self):
        return hash((self.group, self.blocks.tobytes()))

    def __repr__(self):
        return f"GroupElement({self.group_id}, {self.coords.tolist()!r})"


@dataclass(frozen=True, eq=False)
class AlgebraVector:
    group: LieGroup
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = _frozen(self.coeffs).reshape(-1)
        if coeffs.shape != (self.group.algebra_dim,):
            raise ValueError(f"{self.group.group_id} needs {self.group.algebra_dim} coefficients, "
                             f"got {coeffs.shape[0]}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("algebra coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def group_id(self) -> str:
        return self.group.group_id

    def _check(self, other):
        if not isinstance(other, AlgebraVector):
            return NotImplemented
        if other.group != self.group:
            raise GroupMismatch(f"{self.group_id} vs {other.group_id}")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return AlgebraVector(self.group, self.coeffs + other.coeffs)

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return AlgebraVector(self.group, self.coeffs - other.coeffs)

    def __mul__(self, s):
        return AlgebraVector(self.group, float(s) * self.coeffs)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return AlgebraVector(self.group, self.coeffs / float(s))

    def __neg__(self):
        return AlgebraVector(self.group, -self.coeffs)

    def __eq__(self, other):
        return (isinstance(other, AlgebraVector) and self.group == other.group
                and np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.group, self.coeffs.tobytes()))

    def __repr__(self):
        return f"AlgebraVector({self.group_id}, {self.coeffs.tolist()!r})"


# ---------------------------------------------------------------------------
# operations


def _same(a, b):
    if a.group != b.group:
        raise GroupMismatch(f"{a.group_id} vs {b.group_id}")


def multiply(a: GroupElement, b: GroupElement) -> GroupElement:
    _same(a, b)
    return GroupElement(a.group, a.blocks @ b.blocks)


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(g.group, inverse_base(g.group.base, g.blocks))


def exp(v: AlgebraVector) -> GroupElement:
    return GroupElement(v.group, v.group.exp_coeffs(v.coeffs))


def log(g: GroupElement) -> AlgebraVector:
    """Chart inverse to :func:`exp` near the identity.

    Raises :class:`OutsideChart` for SO(3) blocks whose rotation angle is within
    ``LOG_ANGLE_MARGIN`` of pi.
    """
    return AlgebraVector(g.group, g.group.log_blocks(g.blocks))


def dist(a: GroupElement, b: GroupElement) -> float:
    """Frobenius distance of the ambient matrices."""
    _same(a, b)
    return float(np.sqrt(np.sum((a.blocks - b.blocks) ** 2)))


def membership_residual(g: GroupElement) -> float:
    return float(np.max(membership_base(g.group.base, g.blocks)))


def seminorm_values(group: LieGroup, coeffs, q_id: str = "euclid"):
    """Seminorm of each row of ``coeffs`` (shape ``(..., algebra_dim)``)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if q_id == "euclid":
        return np.linalg.norm(coeffs, axis=-1)
    if q_id == "sup":
        shaped = coeffs.reshape(coeffs.shape[:-1] + (group.copies, 3))
        return np.max(np.linalg.norm(shaped, axis=-1), axis=-1)
    raise UnknownSeminorm(f"unknown seminorm {q_id!r}; known: {', '.join(SEMINORMS)}")


def seminorm(v: AlgebraVector, q_id: str = "euclid") -> float:
    """``euclid``: Euclidean norm of the coefficients; ``sup``: max over product factors."""
    return float(seminorm_values(v.group, v.coeffs, q_id))


def check_seminorm(q_id: str) -> str:
    if q_id not in SEMINORMS:
        raise UnknownSeminorm(f"unknown seminorm {q_id!r}; known: {', '.join(SEMINORMS)}")
    return q_id


def rotation(axis, angle) -> GroupElement:
    """SO(3) rotation by ``angle`` about ``axis`` (normalized here)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return exp(SO3.vector(angle * axis))
