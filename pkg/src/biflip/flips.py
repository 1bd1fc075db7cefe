"""Flippers and flips.

A flipper is the fixed set of an involutive isometry (its *flip*); flipper
and flip determine each other.  Per space the admissible flipper kinds are

    E1   point | whole
    E2   point | line | whole
    E3   point | line | plane | whole
    S2   point-pair | circle | whole
    RP2  point | whole          (a projective point together with its polar
                                 line; both are fixed, the point determines
                                 the flipper)
    H2   point | line | whole
    H3   point | line | plane | whole
    MOEB point-pair | circle | whole

MOEB flippers store the inducing H3 subspace: a circle is the absolute of an
H3 plane, a point-pair is the pair of endpoints of an H3 line.  H3 point
flips act on the absolute without fixed points and are therefore not flips
of MOEB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkernel as nk
from .errors import (
    EmptyFixedSet,
    InvalidFlipper,
    NotInvolution,
    SpaceMismatch,
)
from .numkernel import (
    AffineSubspace,
    LinearSubspace,
    canonical_sign,
    model_convert,
    normalize,
    space,
)

_ADMISSIBLE = {
    "E1": {"whole", "point"},
    "E2": {"whole", "point", "line"},
    "E3": {"whole", "point", "line", "plane"},
    "S2": {"whole", "point-pair", "circle"},
    "RP2": {"whole", "point"},
    "H2": {"whole", "point", "line"},
    "H3": {"whole", "point", "line", "plane"},
    "MOEB": {"whole", "point-pair", "circle"},
}

_EUCLID_KIND = {0: "point", 1: "line", 2: "plane"}


@dataclass(frozen=True, eq=False)
class Flipper:
    space: str
    kind: str
    data: object  # AffineSubspace | LinearSubspace | ndarray | None

    def __repr__(self):
        return f"Flipper({self.space}, {self.kind})"

    @property
    def is_whole(self) -> bool:
        return self.kind == "whole"


@dataclass(frozen=True, eq=False)
class Isometry:
    space: str
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if not nk.is_isometry_matrix(self.space, m, tol=5e-7):
            raise InvalidFlipper(f"matrix is not an isometry of {self.space}")

    def compose(self, other: "Isometry") -> "Isometry":
        """self after other (matrix product self @ other)."""
        if other.space != self.space:
            raise SpaceMismatch(f"{self.space} vs {other.space}")
        return Isometry(self.space, self.matrix @ other.matrix)

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self) -> "Isometry":
        # closed forms: exact and well conditioned for any magnitude
        sp = space(self.space)
        if sp.affine:
            n = sp.linear_dim
            a = self.linear
            m = np.eye(n + 1)
            m[:n, :n] = a.T
            m[:n, n] = -a.T @ self.translation
            return Isometry(self.space, m)
        g = sp.form.matrix
        return Isometry(self.space, g @ self.matrix.T @ g)

    @property
    def linear(self) -> np.ndarray:
        sp = space(self.space)
        if sp.affine:
            n = sp.linear_dim
            return self.matrix[:n, :n]
        return self.matrix

    @property
    def translation(self) -> np.ndarray:
        sp = space(self.space)
        if not sp.affine:
            raise SpaceMismatch("translation part only exists in affine models")
        n = sp.linear_dim
        return self.matrix[:n, n]

    def det(self) -> float:
        return float(np.linalg.det(self.linear))

    def apply(self, point) -> np.ndarray:
        """Apply to model coordinates (affine point or linear-model vector)."""
        p = np.asarray(point, dtype=float)
        sp = space(self.space)
        if sp.affine:
            return self.linear @ p + self.translation
        return self.matrix @ p

    def is_identity(self, tol: float = nk.DEFAULT_TOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        return bool(np.max(np.abs(self.matrix - np.eye(self.matrix.shape[0]))) <= tol * scale)

    def is_involution(self, tol: float = 1e-8) -> bool:
        # the defect of M @ M scales with the square of the entries
        scale = max(1.0, float(np.max(np.abs(self.matrix)))) ** 2
        m2 = self.matrix @ self.matrix
        return bool(np.max(np.abs(m2 - np.eye(self.matrix.shape[0]))) <= tol * scale)


def identity(tag: str) -> Isometry:
    return Isometry(tag, np.eye(space(tag).matrix_dim))


# ---------------------------------------------------------------------------
# constructors

def whole(tag: str) -> Flipper:
    space(tag)
    return Flipper(tag, "whole", None)


def euclidean_flipper(tag: str, sub: AffineSubspace) -> Flipper:
    sp = space(tag)
    if not sp.affine:
        raise InvalidFlipper(f"{tag} flippers are not affine subspaces")
    if sub.ambient_dim != sp.linear_dim:
        raise InvalidFlipper("wrong ambient dimension")
    if sub.dim >= sp.linear_dim:
        return whole(tag)
    return Flipper(tag, _EUCLID_KIND[sub.dim], sub)


def e_point(tag: str, coords) -> Flipper:
    return euclidean_flipper(tag, AffineSubspace.from_point_and_dirs(coords, []))


def e_line(tag: str, anchor, direction) -> Flipper:
    return euclidean_flipper(tag, AffineSubspace.from_point_and_dirs(anchor, [direction]))


def e_plane(anchor, norm) -> Flipper:
    n = normalize(norm)
    d1 = nk.perp_any(n)
    d2 = np.cross(n, d1)
    return euclidean_flipper("E3", AffineSubspace.from_point_and_dirs(anchor, [d1, d2]))


def s2_circle(norm) -> Flipper:
    return Flipper("S2", "circle", canonical_sign(normalize(norm)))


def s2_pair(v) -> Flipper:
    return Flipper("S2", "point-pair", canonical_sign(normalize(v)))


def rp2_point(v) -> Flipper:
    return Flipper("RP2", "point", canonical_sign(normalize(v)))


def lorentz_flipper(tag: str, sub: LinearSubspace) -> Flipper:
    sp = space(tag)
    if sp.form.euclidean or sp.affine:
        raise InvalidFlipper(f"{tag} flippers are not Lorentz subspaces")
    if sub.ambient_dim != sp.linear_dim:
        raise InvalidFlipper("wrong ambient dimension")
    pos, neg = sub.restricted_signature()
    if pos != 1:
        raise InvalidFlipper("flipper subspace must contain a timelike direction")
    if tag == "H2":
        kind = {1: "point", 2: "line"}.get(sub.dim)
    elif tag == "H3":
        kind = {1: "point", 2: "line", 3: "plane"}.get(sub.dim)
    else:  # MOEB
        kind = {2: "point-pair", 3: "circle"}.get(sub.dim)
    if kind is None:
        raise InvalidFlipper(f"no {tag} flipper of subspace dimension {sub.dim}")
    return Flipper(tag, kind, sub)


def h_point(tag: str, coords, chart: str = "hyperboloid") -> Flipper:
    sp = space(tag)
    if chart in ("poincare-disk", "poincare-ball"):
        coords = model_convert(coords, chart, "hyperboloid")
    v = np.asarray(coords, dtype=float)
    s = sp.form.dot(v, v)
    if s <= 0 or v[0] <= 0:
        raise InvalidFlipper("a hyperbolic point must be future timelike")
    v = v / np.sqrt(s)
    return lorentz_flipper(tag, LinearSubspace.from_spanning([v], sp.form))


def h2_line_from_normal(norm) -> Flipper:
    form = space("H2").form
    n = np.asarray(norm, dtype=float)
    s = form.dot(n, n)
    if s >= 0:
        raise InvalidFlipper("a line normal must be spacelike")
    n = n / np.sqrt(-s)
    sub = _orthogonal_complement([n], form)
    return lorentz_flipper("H2", sub)


def h2_line_through(p1, p2, chart: str = "poincare-disk") -> Flipper:
    a = model_convert(p1, chart, "hyperboloid")
    b = model_convert(p2, chart, "hyperboloid")
    return h2_line_from_normal(nk.lcross(a, b))


def h3_plane_from_normal(norm) -> Flipper:
    form = space("H3").form
    n = np.asarray(norm, dtype=float)
    s = form.dot(n, n)
    if s >= 0:
        raise InvalidFlipper("a plane normal must be spacelike")
    return lorentz_flipper("H3", _orthogonal_complement([n / np.sqrt(-s)], form))


def h3_line_through(p1, p2, chart: str = "hyperboloid") -> Flipper:
    a = model_convert(p1, chart, "hyperboloid")
    b = model_convert(p2, chart, "hyperboloid")
    form = space("H3").form
    return lorentz_flipper("H3", LinearSubspace.from_spanning([a, b], form))


def moeb_circle_from_normal(norm) -> Flipper:
    form = space("MOEB").form
    n = np.asarray(norm, dtype=float)
    s = form.dot(n, n)
    if s >= 0:
        raise InvalidFlipper("a circle normal must be spacelike")
    return lorentz_flipper("MOEB", _orthogonal_complement([n / np.sqrt(-s)], form))


def moeb_circle_through(s1, s2, s3) -> Flipper:
    """Circle through three points of the absolute sphere."""
    form = space("MOEB").form
    g = form.matrix
    rows = [g @ np.concatenate([[1.0], normalize(s)]) for s in (s1, s2, s3)]
    _, sv, vt = np.linalg.svd(np.array(rows))
    n = vt[-1]
    if sv[-1] > 1e-9:
        raise InvalidFlipper("three absolute points do not determine a circle")
    return moeb_circle_from_normal(n)


def moeb_pair(s1, s2) -> Flipper:
    """Point pair on the absolute = endpoints of an H3 line."""
    form = space("MOEB").form
    a = np.concatenate([[1.0], normalize(s1)])
    b = np.concatenate([[1.0], normalize(s2)])
    return lorentz_flipper("MOEB", LinearSubspace.from_spanning([a, b], form))


def _orthogonal_complement(normals, form) -> LinearSubspace:
    g = form.matrix
    rows = np.array([g @ np.asarray(n, float) for n in normals])
    _, _, vt = np.linalg.svd(rows)
    comp = vt[len(normals):]
    return LinearSubspace.from_spanning(comp, form)


# ---------------------------------------------------------------------------
# flip_of / flipper_of_involution

def flip_of(f: Flipper) -> Isometry:
    """The involution whose fixed set is exactly the flipper."""
    sp = space(f.space)
    if f.kind == "whole":
        return identity(f.space)
    if sp.affine:
        return Isometry(f.space, nk.reflection_matrix(f.data))
    if f.space == "S2":
        v = f.data
        if f.kind == "circle":
            return Isometry("S2", np.eye(3) - 2.0 * np.outer(v, v))
        return Isometry("S2", 2.0 * np.outer(v, v) - np.eye(3))
    if f.space == "RP2":
        v = f.data
        return Isometry("RP2", 2.0 * np.outer(v, v) - np.eye(3))
    return Isometry(f.space, f.data.reflection())


def flipper_of_involution(t: Isometry, tol: float = 1e-8) -> Flipper:
    """Recover the flipper of an involution; reject non-flips.

    Raises NotInvolution when t*t differs from the identity, EmptyFixedSet
    when the fixed set in the model space is empty (the antipodal map on S2,
    H3 point flips acting on the Moebius sphere).
    """
    sp = space(t.space)
    if not t.is_involution(tol):
        raise NotInvolution(f"matrix squared differs from the identity beyond {tol}")
    if t.is_identity(tol):
        return whole(t.space)

    if sp.affine:
        a = t.linear
        anchor = t.translation / 2.0
        dirs = _null_basis(a - np.eye(sp.linear_dim))
        if len(dirs) == 0:
            return euclidean_flipper(t.space, AffineSubspace(anchor, None))
        sub = AffineSubspace(anchor, LinearSubspace.from_spanning(dirs, sp.form))
        return euclidean_flipper(t.space, sub)

    if t.space in ("S2", "RP2"):
        m = t.matrix
        if t.space == "RP2":
            if np.linalg.det(m) < 0:
                m = -m
            if np.max(np.abs(m - np.eye(3))) <= tol:
                return whole("RP2")
            fixed = _null_basis(m - np.eye(3))
            if len(fixed) != 1:
                raise NotInvolution("not a projective flip")
            return rp2_point(fixed[0])
        fixed = _null_basis(m - np.eye(3))
        if len(fixed) == 0:
            raise EmptyFixedSet("involution has no fixed points on the sphere")
        if len(fixed) == 1:
            return s2_pair(fixed[0])
        norm = _null_basis(m + np.eye(3))
        return s2_circle(norm[0])

    # Lorentz models
    fixed = _null_basis(t.matrix - np.eye(sp.linear_dim))
    if len(fixed) == 0:
        raise EmptyFixedSet("involution fixes nothing in the model")
    sub = LinearSubspace.from_spanning(fixed, sp.form)
    if t.space == "MOEB" and sub.dim == 1:
        raise EmptyFixedSet("an H3 point flip has no fixed points on the absolute")
    return lorentz_flipper(t.space, sub)


def _null_basis(m: np.ndarray, tol: float = nk.RANK_TOL):
    _, sv, vt = np.linalg.svd(m)
    bound = tol * max(1.0, sv[0])
    return [vt[i] for i in range(vt.shape[0]) if sv[i] <= bound]


# ---------------------------------------------------------------------------
# moving flippers by isometries

def move_flipper(t: Isometry, f: Flipper) -> Flipper:
    if t.space != f.space:
        raise SpaceMismatch(f"{t.space} vs {f.space}")
    if f.kind == "whole":
        return f
    sp = space(f.space)
    if sp.affine:
        sub: AffineSubspace = f.data
        anchor = t.apply(sub.anchor)
        dirs = [t.linear @ b for b in sub.direction.basis]
        if dirs:
            moved = AffineSubspace(anchor, LinearSubspace.from_spanning(dirs, sp.form))
        else:
            moved = AffineSubspace(anchor, None)
        return euclidean_flipper(f.space, moved)
    if f.space == "S2":
        v = t.matrix @ f.data
        return s2_circle(v) if f.kind == "circle" else s2_pair(v)
    if f.space == "RP2":
        return rp2_point(t.matrix @ f.data)
    basis = [t.matrix @ b for b in f.data.basis]
    return lorentz_flipper(f.space, LinearSubspace.from_spanning(basis, sp.form))


def flippers_equal(f1: Flipper, f2: Flipper, tol: float = 1e-8) -> bool:
    if f1.space != f2.space or f1.kind != f2.kind:
        return False
    if f1.kind == "whole":
        return True
    sp = space(f1.space)
    if sp.affine:
        return f1.data.approx_eq(f2.data, tol)
    if f1.space in ("S2", "RP2"):
        return bool(np.max(np.abs(f1.data - f2.data)) <= tol)
    return f1.data.approx_eq(f2.data, tol)


# ---------------------------------------------------------------------------
# JSON

def flipper_to_json(f: Flipper, ident: str | None = None) -> dict:
    out = {"kind": f.kind}
    if ident is not None:
        out = {"id": ident, "kind": f.kind}
    sp = space(f.space)
    if f.kind == "whole":
        out["coords"] = []
        return out
    if sp.affine:
        sub: AffineSubspace = f.data
        if f.kind == "point":
            out["coords"] = sub.anchor.tolist()
        elif f.kind == "line":
            out["coords"] = [sub.anchor.tolist(), sub.direction.basis[0].tolist()]
        else:
            n = _plane_normal(sub)
            out["coords"] = [sub.anchor.tolist(), n.tolist()]
        return out
    if f.space in ("S2", "RP2"):
        out["coords"] = np.asarray(f.data).tolist()
        return out
    sub: LinearSubspace = f.data
    if f.space == "MOEB":
        if f.kind == "circle":
            out["coords"] = _subspace_normal(sub).tolist()
            out["chart"] = "hyperboloid"
        else:
            a, b = _line_endpoints(sub)
            out["coords"] = [a.tolist(), b.tolist()]
            out["chart"] = "sphere"
        return out
    if f.kind == "point":
        out["coords"] = sub.basis[0].tolist()
    elif f.kind == "line" and f.space == "H2":
        out["coords"] = _subspace_normal(sub).tolist()
    elif f.kind == "line":
        out["coords"] = [b.tolist() for b in sub.basis]
    else:  # H3 plane
        out["coords"] = _subspace_normal(sub).tolist()
    out["chart"] = "hyperboloid"
    return out


def _plane_normal(sub: AffineSubspace) -> np.ndarray:
    b = sub.direction.basis
    return canonical_sign(normalize(np.cross(b[0], b[1])))


def _subspace_normal(sub: LinearSubspace) -> np.ndarray:
    # The kernel of the form-orthogonal projector is the form-orthogonal
    # complement; for co-dimension 1 it is spanned by the (spacelike) normal.
    g = np.diag(np.concatenate([[1.0], -np.ones(sub.ambient_dim - 1)]))
    _, _, vt = np.linalg.svd(sub.projector())
    n = vt[-1]
    s = float(n @ g @ n)
    n = n / np.sqrt(-s)
    return canonical_sign(n)


def _line_endpoints(sub: LinearSubspace):
    """Endpoints on the absolute sphere of a signature (1,1) subspace."""
    b0, b1 = sub.basis  # timelike, spacelike (canonical order)
    n1 = b0 + b1
    n2 = b0 - b1
    pts = sorted((tuple(np.round(n / n[0], 12)) for n in (n1, n2)))
    return np.array(pts[0][1:]), np.array(pts[1][1:])


def flipper_from_json(tag: str, obj: dict) -> Flipper:
    kind = obj.get("kind")
    coords = obj.get("coords", [])
    chart = obj.get("chart")
    sp = space(tag)
    if kind not in _ADMISSIBLE.get(tag, set()):
        raise InvalidFlipper(f"kind {kind!r} is not admissible in {tag}")
    if kind == "whole":
        return whole(tag)
    if sp.affine:
        if kind == "point":
            return e_point(tag, coords)
        if kind == "line":
            return e_line(tag, coords[0], coords[1])
        return e_plane(coords[0], coords[1])
    if tag == "S2":
        return s2_circle(coords) if kind == "circle" else s2_pair(coords)
    if tag == "RP2":
        return rp2_point(coords)
    if tag == "H2":
        if kind == "point":
            return h_point(tag, coords, chart or "hyperboloid")
        if chart == "poincare-disk":
            return h2_line_through(coords[0], coords[1], chart)
        return h2_line_from_normal(coords)
    if tag == "H3":
        if kind == "point":
            return h_point(tag, coords, chart or "hyperboloid")
        if kind == "line":
            return h3_line_through(coords[0], coords[1], chart or "hyperboloid")
        return h3_plane_from_normal(coords)
    # MOEB
    if kind == "circle":
        if chart == "sphere":
            return moeb_circle_through(*coords)
        return moeb_circle_from_normal(coords)
    if chart == "hyperboloid":
        form = sp.form
        return lorentz_flipper(tag, LinearSubspace.from_spanning(coords, form))
    return moeb_pair(coords[0], coords[1])
