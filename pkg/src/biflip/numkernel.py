"""Numeric foundation: forms, subspaces, reflections, charts.

Every supported space is handled through a linear or affine matrix model:

========  =====================  ==========================================
space     matrices               model
========  =====================  ==========================================
E1/E2/E3  (n+1)x(n+1) affine     orthogonal linear part + translation
S2        3x3 in O(3)            unit sphere in R^3
RP2       3x3 in O(3), mod -I    quotient of the sphere model
H2        3x3 in O(1,2), M00>0   hyperboloid <x,x> = 1, x0 > 0
H3        4x4 in O(1,3), M00>0   hyperboloid in R^{1,3}
MOEB      4x4 in O(1,3), M00>0   action on the absolute sphere of H3
========  =====================  ==========================================

The Lorentz form is diag(+1, -1, ..., -1); vectors with positive square are
timelike (points), vectors with negative square are spacelike (normals of
lines/planes).  One reflection formula, 2P - I with P the form-orthogonal
projection onto a subspace, produces the involution fixing that subspace in
every model, which is why everything downstream reduces to this module.

Poincare coordinates and the stereographic plane are I/O charts only; all
algebra happens in the linear models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRestriction, OutOfDomain, SpaceMismatch, UnsupportedSpace

DEFAULT_TOL = 1e-9
# Rank decisions for fixed-set extraction use this band (see flips).
RANK_TOL = 1e-8


@dataclass(frozen=True)
class Tolerance:
    abs_eps: float = DEFAULT_TOL
    projective: bool = False

    def __post_init__(self):
        if not self.abs_eps > 0:
            raise ValueError("abs_eps must be positive")


def _as_tol(tol) -> Tolerance:
    if isinstance(tol, Tolerance):
        return tol
    return Tolerance(abs_eps=float(tol))


@dataclass(frozen=True)
class BilinearForm:
    """Non-degenerate diagonal form diag(+1 x plus, -1 x minus)."""

    plus: int
    minus: int

    @property
    def dim(self) -> int:
        return self.plus + self.minus

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.signs)

    @property
    def signs(self) -> np.ndarray:
        return np.concatenate([np.ones(self.plus), -np.ones(self.minus)])

    def dot(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return float(np.sum(self.signs * x * y))

    @property
    def euclidean(self) -> bool:
        return self.minus == 0


@dataclass(frozen=True)
class Space:
    tag: str
    linear_dim: int          # dimension of the linear model / linear part
    affine: bool
    form: BilinearForm       # form on the linear model (or linear part)
    projective: bool = False
    orthochronous: bool = False

    @property
    def matrix_dim(self) -> int:
        return self.linear_dim + 1 if self.affine else self.linear_dim

    @property
    def geom_dim(self) -> int:
        """Dimension of the geometry itself (2 for E2, S2, H2, ...)."""
        return self.linear_dim if self.affine else self.linear_dim - 1


SPACES = {
    "E1": Space("E1", 1, True, BilinearForm(1, 0)),
    "E2": Space("E2", 2, True, BilinearForm(2, 0)),
    "E3": Space("E3", 3, True, BilinearForm(3, 0)),
    "S2": Space("S2", 3, False, BilinearForm(3, 0)),
    "RP2": Space("RP2", 3, False, BilinearForm(3, 0), projective=True),
    "H2": Space("H2", 3, False, BilinearForm(1, 2), orthochronous=True),
    "H3": Space("H3", 4, False, BilinearForm(1, 3), orthochronous=True),
    "MOEB": Space("MOEB", 4, False, BilinearForm(1, 3), orthochronous=True),
}


def space(tag: str) -> Space:
    try:
        return SPACES[tag]
    except KeyError:
        raise UnsupportedSpace(f"unknown space tag {tag!r}") from None


# ---------------------------------------------------------------------------
# subspaces


class LinearSubspace:
    """Linear subspace with a non-degenerate induced form.

    Stores a canonical form-orthonormal basis (rows).  Canonicalization is
    deterministic and depends only on the subspace, not on the spanning set:
    for indefinite forms the (unique) future timelike unit direction is
    extracted first, the definite rest is built by largest-pivot
    Gram-Schmidt over the coordinate axes, ties broken by lowest index.
    """

    def __init__(self, basis: np.ndarray, form: BilinearForm, signs: np.ndarray):
        self.basis = basis
        self.form = form
        self.signs = signs

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.form.dim

    @classmethod
    def from_spanning(cls, vectors, form: BilinearForm, tol: float = RANK_TOL) -> "LinearSubspace":
        vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
        if vecs.shape[1] != form.dim:
            raise ValueError("spanning vectors have wrong ambient dimension")
        # Independent subset first (Euclidean QR is fine for that).
        q, r = np.linalg.qr(vecs.T)
        keep = [i for i in range(min(vecs.shape)) if abs(r[i, i]) > tol * max(1.0, np.abs(vecs).max())]
        basis0 = q[:, : len(keep)].T if keep else np.zeros((0, form.dim))
        if basis0.shape[0] == 0:
            raise DegenerateRestriction("empty spanning set")
        gram = basis0 @ form.matrix @ basis0.T
        eigval, _ = np.linalg.eigh(gram)
        if np.min(np.abs(eigval)) < 1e-10 * max(1.0, np.max(np.abs(eigval))):
            raise DegenerateRestriction("form restricted to the subspace is singular")
        proj = _projector_from_any_basis(basis0, form)
        basis, signs = _canonical_basis(proj, form)
        return cls(basis, form, signs)

    def projector(self) -> np.ndarray:
        g = self.form.matrix
        p = np.zeros((self.ambient_dim, self.ambient_dim))
        for b, eps in zip(self.basis, self.signs):
            p += eps * np.outer(b, g @ b)
        return p

    def reflection(self) -> np.ndarray:
        return 2.0 * self.projector() - np.eye(self.ambient_dim)

    def contains(self, v, tol: float = 1e-8) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.max(np.abs(self.projector() @ v - v)) <= tol * max(1.0, np.max(np.abs(v))))

    def approx_eq(self, other: "LinearSubspace", tol: float = 1e-8) -> bool:
        if self.dim != other.dim:
            return False
        return bool(np.max(np.abs(self.projector() - other.projector())) <= tol)

    def restricted_signature(self) -> tuple:
        pos = int(np.sum(self.signs > 0))
        return (pos, self.dim - pos)

    def __repr__(self):
        return f"LinearSubspace(dim={self.dim}, sig={self.restricted_signature()})"


def _projector_from_any_basis(basis0: np.ndarray, form: BilinearForm) -> np.ndarray:
    # P = B^T Gram^{-1} B G  projects form-orthogonally onto span(B rows).
    g = form.matrix
    gram = basis0 @ g @ basis0.T
    coeff = np.linalg.solve(gram, basis0 @ g)
    return basis0.T @ coeff


def _canonical_basis(proj: np.ndarray, form: BilinearForm):
    n = form.dim
    g = form.matrix
    dim = int(round(np.trace(proj)))
    basis = []
    signs = []
    if not form.euclidean:
        # Indefinite case: e0 is timelike, so its projection into a
        # non-degenerate subspace containing timelike directions is timelike;
        # null residuals would break pivoting, so pull this direction first.
        w = proj @ np.eye(n)[0]
        ww = form.dot(w, w)
        if ww > 1e-12:
            b0 = w / np.sqrt(ww)
            if b0[0] < 0:
                b0 = -b0
            basis.append(b0)
            signs.append(1.0)
    # Remaining part is definite (for every subspace kind this library uses),
    # so Euclidean-sized pivots are safe.
    for _ in range(dim - len(basis)):
        best, best_norm = None, 0.0
        for i in range(n):
            r = proj @ np.eye(n)[i]
            for b, eps in zip(basis, signs):
                r = r - eps * form.dot(r, b) * b
            nr = float(np.linalg.norm(r))
            if nr > best_norm + 1e-12:
                best, best_norm = r, nr
        if best is None or best_norm < 1e-9:
            raise DegenerateRestriction("cannot extract a canonical basis")
        rr = form.dot(best, best)
        if abs(rr) < 1e-12:
            raise DegenerateRestriction("null pivot in canonical basis")
        b = best / np.sqrt(abs(rr))
        nz = np.nonzero(np.abs(b) > 1e-9)[0]
        if len(nz) and b[nz[0]] < 0:
            b = -b
        basis.append(b)
        signs.append(float(np.sign(rr)))
    return np.array(basis), np.array(signs)


class AffineSubspace:
    """Affine subspace of a Euclidean space: anchor + direction."""

    def __init__(self, anchor, direction: LinearSubspace | None, ambient_dim: int | None = None):
        anchor = np.asarray(anchor, dtype=float)
        if not np.all(np.isfinite(anchor)):
            raise ValueError("anchor must be finite")
        if direction is None:
            direction = LinearSubspace(np.zeros((0, anchor.size)), BilinearForm(anchor.size, 0), np.zeros(0))
        # Canonical anchor: the point of the subspace closest to the origin.
        p = direction.projector() if direction.dim else np.zeros((anchor.size, anchor.size))
        self.anchor = anchor - p @ anchor
        self.direction = direction

    @property
    def dim(self) -> int:
        return self.direction.dim

    @property
    def ambient_dim(self) -> int:
        return self.anchor.size

    @classmethod
    def from_point_and_dirs(cls, point, dirs) -> "AffineSubspace":
        point = np.asarray(point, dtype=float)
        form = BilinearForm(point.size, 0)
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        if dirs.size == 0 or dirs.shape[0] == 0:
            return cls(point, None)
        return cls(point, LinearSubspace.from_spanning(dirs, form))

    def contains(self, pt, tol: float = 1e-8) -> bool:
        pt = np.asarray(pt, dtype=float)
        d = pt - self.anchor
        p = self.direction.projector() if self.dim else np.zeros((self.ambient_dim,) * 2)
        return bool(np.max(np.abs(p @ d - d), initial=0.0) <= tol * max(1.0, np.max(np.abs(pt))))

    def foot(self, pt) -> np.ndarray:
        """Orthogonal projection of a point onto the subspace."""
        pt = np.asarray(pt, dtype=float)
        if self.dim == 0:
            return self.anchor.copy()
        p = self.direction.projector()
        return self.anchor + p @ (pt - self.anchor)

    def approx_eq(self, other: "AffineSubspace", tol: float = 1e-8) -> bool:
        if self.dim != other.dim:
            return False
        if np.max(np.abs(self.anchor - other.anchor)) > tol:
            return False
        return self.dim == 0 or self.direction.approx_eq(other.direction, tol)

    def __repr__(self):
        return f"AffineSubspace(anchor={np.round(self.anchor, 6)}, dim={self.dim})"


# ---------------------------------------------------------------------------
# reflections


def reflection_matrix(sub, form: BilinearForm | None = None) -> np.ndarray:
    """Involution matrix fixing exactly ``sub`` (2P - I, affine-wrapped).

    Raises DegenerateRestriction when the form restricted to the subspace is
    singular, in which case no form-orthogonal projection exists.
    """
    if isinstance(sub, LinearSubspace):
        return sub.reflection()
    if isinstance(sub, AffineSubspace):
        n = sub.ambient_dim
        if sub.dim:
            r = sub.direction.reflection()
        else:
            r = -np.eye(n)
        m = np.eye(n + 1)
        m[:n, :n] = r
        m[:n, n] = (np.eye(n) - r) @ sub.anchor
        return m
    raise TypeError(f"cannot reflect in {type(sub).__name__}")


# ---------------------------------------------------------------------------
# matrix predicates


def is_isometry_matrix(tag: str, m: np.ndarray, tol: float = 1e-7) -> bool:
    sp = space(tag)
    m = np.asarray(m, dtype=float)
    if m.shape != (sp.matrix_dim, sp.matrix_dim):
        return False
    if sp.affine:
        n = sp.linear_dim
        a = m[:n, :n]
        if np.max(np.abs(a.T @ a - np.eye(n))) > tol:
            return False
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m[n, :n])) > tol * scale or abs(m[n, n] - 1.0) > tol:
            return False
        return True
    g = sp.form.matrix
    # the defect of M^T G M scales with the square of the entries
    scale = max(1.0, float(np.max(np.abs(m)))) ** 2
    if np.max(np.abs(m.T @ g @ m - g)) > tol * scale:
        return False
    if sp.orthochronous and m[0, 0] <= 0:
        return False
    return True


def approx_equal(m1, m2, tol=DEFAULT_TOL, projective: bool | None = None) -> bool:
    """Entrywise comparison; the projective flag also accepts -m2 (RP2)."""
    t = _as_tol(tol)
    proj = t.projective if projective is None else projective
    a = np.asarray(m1, dtype=float)
    b = np.asarray(m2, dtype=float)
    if a.shape != b.shape:
        raise SpaceMismatch(f"matrix shapes differ: {a.shape} vs {b.shape}")
    d = np.max(np.abs(a - b))
    if proj:
        d = min(d, np.max(np.abs(a + b)))
    return bool(d <= t.abs_eps)


# ---------------------------------------------------------------------------
# charts

CHARTS = ("poincare-disk", "poincare-ball", "hyperboloid", "sphere", "stereo-plane")


def model_convert(point, from_chart: str, to_chart: str):
    """Convert a point between an I/O chart and its linear-model partner.

    Supported pairs: poincare-disk/ball <-> hyperboloid and
    sphere <-> stereo-plane.  Round trips are identities within 1e-10.
    """
    p = np.asarray(point, dtype=float)
    if from_chart == to_chart:
        return p.copy()
    key = (from_chart, to_chart)
    if key == ("poincare-disk", "hyperboloid") or key == ("poincare-ball", "hyperboloid"):
        r2 = float(p @ p)
        if r2 >= 1.0:
            raise OutOfDomain("Poincare coordinates must satisfy |u| < 1")
        return np.concatenate([[1.0 + r2], 2.0 * p]) / (1.0 - r2)
    if key == ("hyperboloid", "poincare-disk") or key == ("hyperboloid", "poincare-ball"):
        if p[0] <= 0:
            raise OutOfDomain("not a future timelike hyperboloid point")
        return p[1:] / (1.0 + p[0])
    if key == ("sphere", "stereo-plane"):
        if abs(p[2] - 1.0) < 1e-12:
            raise OutOfDomain("the projection pole has no stereographic image")
        return p[:2] / (1.0 - p[2])
    if key == ("stereo-plane", "sphere"):
        r2 = float(p @ p)
        return np.concatenate([2.0 * p, [r2 - 1.0]]) / (r2 + 1.0)
    raise ValueError(f"no conversion from {from_chart!r} to {to_chart!r}")


# ---------------------------------------------------------------------------
# small vector helpers shared by the geometry modules


def normalize(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-13:
        raise ValueError("cannot normalize ~zero vector")
    return v / n


def canonical_sign(v, tol: float = 1e-9):
    """Flip sign so the first coordinate above ``tol`` is positive."""
    v = np.asarray(v, dtype=float)
    nz = np.nonzero(np.abs(v) > tol)[0]
    if len(nz) and v[nz[0]] < 0:
        return -v
    return v.copy()


def perp_any(u):
    """A deterministic unit vector perpendicular to u (3D or 2D)."""
    u = normalize(u)
    if u.size == 2:
        return np.array([-u[1], u[0]])
    e = np.eye(3)[int(np.argmin(np.abs(u)))]
    return normalize(np.cross(u, e))


def lorentz_dot(form: BilinearForm, x, y) -> float:
    return form.dot(x, y)


def lcross(x, y):
    """Lorentz cross product in R^{1,2}: <lcross(x,y), z> = det(x, y, z)."""
    g = np.diag([1.0, -1.0, -1.0])
    return g @ np.cross(np.asarray(x, float), np.asarray(y, float))
