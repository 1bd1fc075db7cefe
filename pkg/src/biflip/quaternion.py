"""Quaternions, vector-arcs, and the double cover of the rotation group.

Unit quaternions act on vectors by q p q*, rotating about the axis u by the
angle theta when q = cos(theta/2) + u sin(theta/2); the kernel of this action
is exactly {1, -1}.  The same group is modelled by directed great-circle
arcs on the sphere that multiply head to tail, and zero-dimensional sphere
biflippers lift to unit quaternions through it: the lift of (A, B), with
representatives v in A and w in B, is the product w v, defined up to sign.
With that order the lift intertwines composition: rotating by the lift of a
biflipper equals the isometry the biflipper encodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .biflipper import Biflipper
from .errors import NonUnit, NotPerpendicular, WrongFlipperKind
from .flips import s2_pair
from .numkernel import normalize, perp_any

UNIT_EPS = 1e-12


@dataclass(frozen=True)
class Quaternion:
    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_parts(cls, scalar: float, vector) -> "Quaternion":
        v = np.asarray(vector, dtype=float)
        return cls(float(scalar), float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def from_vector(cls, vector) -> "Quaternion":
        return cls.from_parts(0.0, vector)

    @property
    def scalar(self) -> float:
        return self.a

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.b, self.c, self.d])

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.a, -self.b, -self.c, -self.d)

    def __repr__(self):
        return f"Quaternion({self.a:+.6g} {self.b:+.6g}i {self.c:+.6g}j {self.d:+.6g}k)"


ONE = Quaternion(1.0, 0.0, 0.0, 0.0)


def qmul(p: Quaternion, q: Quaternion) -> Quaternion:
    """Quaternion product: scalars, dot and cross products combined."""
    pv, qv = p.vector, q.vector
    scalar = p.a * q.a - float(pv @ qv)
    vector = p.a * qv + q.a * pv + np.cross(pv, qv)
    return Quaternion.from_parts(scalar, vector)


def qconj(q: Quaternion) -> Quaternion:
    return Quaternion(q.a, -q.b, -q.c, -q.d)


def qnorm(q: Quaternion) -> float:
    return math.sqrt(q.a * q.a + q.b * q.b + q.c * q.c + q.d * q.d)


def _require_unit(q: Quaternion):
    if abs(qnorm(q) - 1.0) > UNIT_EPS:
        raise NonUnit(f"|q| = {qnorm(q)!r} differs from 1 beyond {UNIT_EPS}")


def axis_angle(q: Quaternion):
    """Axis and angle of the rotation q p q*; angle in [0, pi]."""
    _require_unit(q)
    if q.a < 0:
        q = -q
    s = float(np.linalg.norm(q.vector))
    theta = 2.0 * math.atan2(s, q.a)
    if s < 1e-12:
        return np.array([0.0, 0.0, 1.0]), 0.0
    return q.vector / s, theta


def from_axis_angle(u, theta) -> Quaternion:
    u = normalize(u)
    return Quaternion.from_parts(math.cos(theta / 2.0), u * math.sin(theta / 2.0))


def rotate(q: Quaternion, p) -> np.ndarray:
    """The rotation action q p q* on a vector."""
    _require_unit(q)
    res = qmul(qmul(q, Quaternion.from_vector(p)), qconj(q))
    return res.vector


def rotation_matrix(q: Quaternion) -> np.ndarray:
    return np.column_stack([rotate(q, e) for e in np.eye(3)])


def vector_factorization(q: Quaternion, v):
    """Unit vectors w_plus, w_minus with v w_plus = q and w_minus v = q.

    v must be a unit vector perpendicular to the vector part of q.  When the
    vector part vanishes the axis is taken to be any unit vector
    perpendicular to v (the alpha = 0 and alpha = pi branches).
    """
    _require_unit(q)
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise NonUnit("v must be a unit vector")
    qv = q.vector
    sin_a = float(np.linalg.norm(qv))
    cos_a = q.a
    if sin_a > 1e-9:
        u = qv / sin_a
        if abs(float(u @ v)) > 1e-9:
            raise NotPerpendicular("v must be perpendicular to the vector part of q")
    else:
        u = perp_any(v)
    w_plus = -v * cos_a + np.cross(u, v) * sin_a
    w_minus = -v * cos_a - np.cross(u, v) * sin_a
    return w_plus, w_minus


# ---------------------------------------------------------------------------
# Hamilton's vector-arc model


@dataclass(frozen=True)
class VectorArc:
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start", normalize(self.start))
        object.__setattr__(self, "end", normalize(self.end))

    def quaternion(self) -> Quaternion:
        """The represented unit quaternion -(start * end)."""
        return -qmul(Quaternion.from_vector(self.start), Quaternion.from_vector(self.end))


def arc_mul(a: VectorArc, b: VectorArc) -> VectorArc:
    """Head-to-tail product of vector-arcs.

    Representatives are slid within their great circles so that the head of
    the first meets the tail of the second at an intersection point of the
    circles (the lexicographically larger one); arcs with collinear
    endpoints represent +-1 and short-circuit.
    """
    qa = a.quaternion()
    qb = b.quaternion()
    na = np.cross(a.start, a.end)
    nb = np.cross(b.start, b.end)
    if np.linalg.norm(na) < 1e-12:      # a represents +-1
        if qa.a > 0:
            return VectorArc(b.start, b.end)
        return VectorArc(b.start, -b.end)
    if np.linalg.norm(nb) < 1e-12:      # b represents +-1
        if qb.a > 0:
            return VectorArc(a.start, a.end)
        return VectorArc(a.start, -a.end)
    cross = np.cross(na, nb)
    if np.linalg.norm(cross) < 1e-12:
        # same great circle: slide b to start at a's head
        y = qmul(Quaternion.from_vector(a.start), qmul(qa, qb)).vector
        return VectorArc(a.start, y)
    p = normalize(cross)
    if tuple(p) < tuple(-p):
        p = -p
    # resite a to end at p and b to start at p; products stay fixed
    x = qmul(qa, Quaternion.from_vector(p)).vector
    y = qmul(Quaternion.from_vector(p), qb).vector
    return VectorArc(x, y)


# ---------------------------------------------------------------------------
# the two-fold cover over sphere biflippers


def canonical_pair(q: Quaternion) -> Quaternion:
    """Representative of {q, -q}: first component above tolerance positive."""
    for comp in (q.a, q.b, q.c, q.d):
        if comp > 1e-12:
            return q
        if comp < -1e-12:
            return -q
    return q


def lift_biflipper(b: Biflipper) -> Quaternion:
    """Unit quaternion over a zero-dimensional sphere biflipper.

    Defined up to sign; the returned representative is sign-canonicalized.
    Rotating by the lift reproduces the isometry the biflipper encodes.
    """
    if b.space != "S2" or b.tail.kind != "point-pair" or b.head.kind != "point-pair":
        raise WrongFlipperKind("the lift needs two antipodal-pair flippers on S2")
    v = np.asarray(b.tail.data, float)
    w = np.asarray(b.head.data, float)
    q = qmul(Quaternion.from_vector(w), Quaternion.from_vector(v))
    return canonical_pair(q)


def project_to_biflipper(q: Quaternion) -> Biflipper:
    """A zero-dimensional sphere biflipper lifting to +-q."""
    _require_unit(q)
    u, _ = axis_angle(q)
    if np.linalg.norm(q.vector) < 1e-12:
        v = np.array([1.0, 0.0, 0.0])
    else:
        v = perp_any(u)
    w = (-qmul(q, Quaternion.from_vector(v))).vector
    return Biflipper(s2_pair(v), s2_pair(w))
