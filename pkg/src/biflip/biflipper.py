"""Biflippers: ordered flipper pairs encoding isometries.

A biflipper (tail, head) encodes flip(head) o flip(tail).  This module owns
the calculus around that encoding: classification of the encoded isometry
with enough parameters to rebuild it, canonical decompositions, equivalence
of biflippers, the two equivalence-preserving moves (composing both flips
with a commuting flip; conjugating both flippers by a centralizer element),
rebasing a decomposition through a chosen flipper, direct products, and the
invariant pencil of a hyperbolic-plane isometry.

Classification labels per space:

    E1   identity | translation | point-symmetry
    E2   identity | translation | rotation | reflection | glide-reflection
    E3   identity | translation | rotation | screw-motion | reflection
         | glide-reflection | rotary-reflection | central-symmetry
    S2   identity | rotation | reflection | rotary-reflection
         | central-symmetry
    RP2  identity | rotation            (via the SO(3) lift)
    H2   identity | rotation | hyperbolic-translation | parallel-motion
         | reflection | glide-reflection
    H3   identity | elliptic | parabolic | loxodromic
    MOEB   | orientation-reversing-moebius   (coarse labels only)

Line symmetries of E3 are rotations with angle pi, glide line symmetries are
screw motions with angle pi; both rebuild exactly from the screw parameters,
so they are not split into separate labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numkernel as nk
from .errors import (
    DegenerateRestriction,
    EmptyFixedSet,
    IdentityHasNoPencil,
    InvalidFlipper,
    NonEuclideanFactor,
    NotCommuting,
    NotCompatible,
    NotDecomposable,
    NotInCentralizer,
    NotInvolution,
    SpaceMismatch,
    UnsupportedSpace,
)
from .flips import (
    Flipper,
    Isometry,
    e_line,
    e_plane,
    e_point,
    euclidean_flipper,
    flip_of,
    flipper_of_involution,
    flippers_equal,
    h2_line_from_normal,
    h_point,
    identity,
    lorentz_flipper,
    move_flipper,
    rp2_point,
    s2_circle,
    s2_pair,
    whole,
)
from .numkernel import (
    AffineSubspace,
    LinearSubspace,
    canonical_sign,
    lcross,
    normalize,
    perp_any,
    space,
)

ANGLE_ZERO = 1e-9
LENGTH_ZERO = 1e-9


@dataclass(frozen=True, eq=False)
class Biflipper:
    tail: Flipper
    head: Flipper

    def __post_init__(self):
        if self.tail.space != self.head.space:
            raise SpaceMismatch(f"{self.tail.space} vs {self.head.space}")

    @property
    def space(self) -> str:
        return self.tail.space

    @property
    def proper(self) -> bool:
        return not (self.tail.is_whole or self.head.is_whole)

    def swap(self) -> "Biflipper":
        return Biflipper(self.head, self.tail)

    def __repr__(self):
        return f"Biflipper({self.space}: {self.tail.kind} -> {self.head.kind})"


@dataclass(frozen=True)
class IsometryClass:
    space: str
    label: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Pencil:
    """Family of H2 lines: through a point / an absolute point / a common
    perpendicular axis.  A line with spacelike unit normal n belongs to the
    pencil with carrier c exactly when <n, c> = 0."""

    kind: str       # elliptic | parabolic | hyperbolic
    carrier: np.ndarray

    def contains_line(self, f: Flipper, tol: float = nk.DEFAULT_TOL) -> bool:
        if f.space != "H2" or f.kind != "line":
            return False
        n = _h2_line_normal(f)
        return abs(_ldot(n, self.carrier)) <= tol * max(1.0, float(np.max(np.abs(self.carrier))))

    def line_through(self, q) -> Flipper | None:
        """The pencil line through a hyperboloid point, if non-degenerate."""
        n = lcross(np.asarray(q, float), self.carrier)
        s = _ldot(n, n)
        if s >= -1e-12:
            return None
        return h2_line_from_normal(n)

    def canonical_line(self) -> Flipper:
        c = self.carrier
        if self.kind == "elliptic":
            v, _ = _h2_frame(c)
            return h2_line_from_normal(v)
        if self.kind == "parabolic":
            xhat = normalize(c[1:])
            return h2_line_from_normal(np.array([0.0, -xhat[1], xhat[0]]))
        q0, t0 = _h2_axis_frame(c)
        return h2_line_from_normal(t0)


# ---------------------------------------------------------------------------
# encode / equivalence


def encode(b: Biflipper) -> Isometry:
    """The isometry flip(head) o flip(tail)."""
    return flip_of(b.head) @ flip_of(b.tail)


def equivalent(b1: Biflipper, b2: Biflipper, tol: float = nk.DEFAULT_TOL) -> bool:
    if b1.space != b2.space:
        raise SpaceMismatch(f"{b1.space} vs {b2.space}")
    proj = space(b1.space).projective
    return nk.approx_equal(encode(b1).matrix, encode(b2).matrix, tol, projective=proj)


def transform_commuting(b: Biflipper, c: Flipper, tol: float = 1e-8) -> Biflipper:
    """Replace both flips by their product with a commuting flip."""
    if c.space != b.space:
        raise SpaceMismatch(f"{c.space} vs {b.space}")
    fc = flip_of(c)
    fa = flip_of(b.tail)
    fb = flip_of(b.head)
    for g in (fa, fb):
        if np.max(np.abs(g.matrix @ fc.matrix - fc.matrix @ g.matrix)) > tol:
            raise NotCommuting("the chosen flip does not commute with both components")
    try:
        tail = flipper_of_involution(fa @ fc)
        head = flipper_of_involution(fb @ fc)
    except NotInvolution as exc:  # commuting involutions multiply to involutions
        raise NotCommuting(str(exc)) from exc
    return Biflipper(tail, head)


def conjugate(b: Biflipper, t: Isometry, tol: float = 1e-8) -> Biflipper:
    """Move both flippers by an isometry commuting with the encoded one."""
    if t.space != b.space:
        raise SpaceMismatch(f"{t.space} vs {b.space}")
    s = encode(b)
    if np.max(np.abs(t.matrix @ s.matrix - s.matrix @ t.matrix)) > tol:
        raise NotInCentralizer("the isometry does not commute with the encoded one")
    return Biflipper(move_flipper(t, b.tail), move_flipper(t, b.head))


def rebase(t: Isometry, e: Flipper, side: str, tol: float = 1e-8) -> Biflipper:
    """Decomposition of t with e as the tail or the head flipper.

    Succeeds exactly when the product of t with the flip of e is again a
    flip; otherwise raises NotCompatible.
    """
    if e.space != t.space:
        raise SpaceMismatch(f"{e.space} vs {t.space}")
    fe = flip_of(e)
    if side == "tail":
        g = t @ fe
    elif side == "head":
        g = fe @ t
    else:
        raise ValueError("side must be 'tail' or 'head'")
    try:
        other = flipper_of_involution(g, tol)
    except (NotInvolution, EmptyFixedSet) as exc:
        raise NotCompatible(str(exc)) from exc
    return Biflipper(e, other) if side == "tail" else Biflipper(other, e)


def strong_reversibility_witness(t: Isometry):
    """A flipper pair (a, b) with t = flip(b) o flip(a)."""
    b = decompose(t)
    return (b.tail, b.head)


def product_biflipper(bk: Biflipper, bl: Biflipper) -> Biflipper:
    """Direct product of Euclidean biflippers, block by block."""
    for b in (bk, bl):
        if not space(b.space).affine:
            raise NonEuclideanFactor(f"{b.space} is not Euclidean")
    k = space(bk.space).linear_dim
    l = space(bl.space).linear_dim
    tag = f"E{k + l}"
    if tag not in nk.SPACES:
        raise UnsupportedSpace(f"no product space of dimension {k + l}")
    return Biflipper(
        _product_flipper(tag, bk.tail, bl.tail, k, l),
        _product_flipper(tag, bk.head, bl.head, k, l),
    )


def _product_flipper(tag, f1, f2, k, l) -> Flipper:
    def parts(f, n):
        if f.kind == "whole":
            return np.zeros(n), [e for e in np.eye(n)]
        sub: AffineSubspace = f.data
        return sub.anchor, [b for b in sub.direction.basis]

    a1, d1 = parts(f1, k)
    a2, d2 = parts(f2, l)
    anchor = np.concatenate([a1, a2])
    dirs = [np.concatenate([d, np.zeros(l)]) for d in d1]
    dirs += [np.concatenate([np.zeros(k), d]) for d in d2]
    if len(dirs) == k + l:
        return whole(tag)
    if dirs:
        sub = AffineSubspace(anchor, LinearSubspace.from_spanning(dirs, space(tag).form))
    else:
        sub = AffineSubspace(anchor, None)
    return euclidean_flipper(tag, sub)


# ---------------------------------------------------------------------------
# low level frames and angle helpers


def _ldot(x, y) -> float:
    g = np.concatenate([[1.0], -np.ones(len(np.atleast_1d(x)) - 1)])
    return float(np.sum(g * np.asarray(x, float) * np.asarray(y, float)))


def _rot2(theta) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _rodrigues(u, theta) -> np.ndarray:
    u = normalize(u)
    k = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
    return np.eye(3) + math.sin(theta) * k + (1 - math.cos(theta)) * (k @ k)


def _so3_axis_angle(a: np.ndarray):
    """Axis and angle of a rotation matrix; theta in [0, pi]."""
    w = np.array([a[2, 1] - a[1, 2], a[0, 2] - a[2, 0], a[1, 0] - a[0, 1]]) / 2.0
    s = float(np.linalg.norm(w))
    c = (float(np.trace(a)) - 1.0) / 2.0
    if s > 1e-9:
        return w / s, math.atan2(s, c)
    if c > 0:
        return np.array([0.0, 0.0, 1.0]), 0.0
    # angle pi: axis from the +1 eigenspace
    m = a + np.eye(3)
    u = m[:, int(np.argmax(np.linalg.norm(m, axis=0)))]
    return canonical_sign(normalize(u)), math.pi


def _h2_frame(p):
    """Canonical spacelike pair (v, w) with det[p, v, w] = +1.

    The second vector comes from the Lorentz cross product, which is exactly
    orthogonal to both p and v; Gram-Schmidt would cancel catastrophically
    for centers far from the apex."""
    p = np.asarray(p, float)
    sub = LinearSubspace.from_spanning([p], space("H2").form)
    proj = np.eye(3) - sub.projector()
    best, best_norm = None, -1.0
    for i in (1, 2, 0):
        r = proj @ np.eye(3)[i]
        nr = float(np.linalg.norm(r))
        if nr > best_norm + 1e-12:
            best, best_norm = r, nr
    v = canonical_sign(best / math.sqrt(-_ldot(best, best)))
    w = lcross(p, v)
    w = w / math.sqrt(-_ldot(w, w))
    if np.linalg.det(np.column_stack([p, v, w])) < 0:
        w = -w
    return v, w


def _h2_axis_frame(a):
    """Canonical point q0 on the line with normal a, and tangent t0 there."""
    a = np.asarray(a, float)
    q = np.array([1.0, 0.0, 0.0]) + _ldot(np.eye(3)[0], a) * a  # project e0 to a-perp
    q0 = q / math.sqrt(_ldot(q, q))
    t0 = lcross(q0, a)
    t0 = t0 / math.sqrt(-_ldot(t0, t0))
    return q0, t0


def _h2_line_normal(f: Flipper) -> np.ndarray:
    sub: LinearSubspace = f.data
    _, _, vt = np.linalg.svd(sub.projector())
    n = vt[-1]
    return canonical_sign(n / math.sqrt(-_ldot(n, n)))


def _h2_null_frame(xi):
    """Frame (xi, eta, s) with <xi,eta> = 1 and s spacelike unit."""
    xi = np.asarray(xi, float)
    xi = xi / xi[0]
    xhat = xi[1:]
    eta = np.concatenate([[1.0], -xhat]) / 2.0
    s = np.array([0.0, -xhat[1], xhat[0]])
    return xi, eta, s


def _h3_null_frame(xi):
    xi = np.asarray(xi, float)
    xi = xi / xi[0]
    xhat = xi[1:]
    eta = np.concatenate([[1.0], -xhat]) / 2.0
    u1 = perp_any(xhat)
    u2 = np.cross(xhat, u1)
    s1 = np.concatenate([[0.0], u1])
    s2 = np.concatenate([[0.0], u2])
    return xi, eta, s1, s2


def _null_dirs_of_plane(b0, b1):
    """Null directions of a signature (1,1) plane spanned by the canonical
    basis (timelike b0, spacelike b1), scaled to first coordinate 1."""
    n1 = b0 + b1
    n2 = b0 - b1
    return n1 / n1[0], n2 / n2[0]


# ---------------------------------------------------------------------------
# classification


def classify(t: Isometry, tol: float = ANGLE_ZERO) -> IsometryClass:
    """Label plus parameters sufficient to resynthesize (fine spaces)."""
    tag = t.space
    if tag == "E1":
        return _classify_e1(t, tol)
    if tag == "E2":
        return _classify_e2(t, tol)
    if tag == "E3":
        return _classify_e3(t, tol)
    if tag == "S2":
        return _classify_s2(t, tol)
    if tag == "RP2":
        m = t.matrix if np.linalg.det(t.matrix) > 0 else -t.matrix
        cls = _classify_s2(Isometry("S2", m), tol)
        return IsometryClass("RP2", cls.label, cls.params)
    if tag == "H2":
        return _classify_h2(t, tol)
    if tag in ("H3", "MOEB"):
        return _classify_lorentz4(t, tol)
    raise UnsupportedSpace(tag)


def _classify_e1(t, tol):
    a = float(t.linear[0, 0])
    v = float(t.translation[0])
    if a > 0:
        if abs(v) <= tol:
            return IsometryClass("E1", "identity")
        return IsometryClass("E1", "translation", {"vector": np.array([v])})
    return IsometryClass("E1", "point-symmetry", {"center": np.array([v / 2.0])})


def _classify_e2(t, tol):
    a = t.linear
    tr = t.translation
    if np.linalg.det(a) > 0:
        theta = math.atan2(a[1, 0], a[0, 0])
        if abs(theta) <= tol:
            if np.max(np.abs(tr)) <= tol:
                return IsometryClass("E2", "identity")
            return IsometryClass("E2", "translation", {"vector": tr.copy()})
        center = np.linalg.solve(np.eye(2) - a, tr)
        return IsometryClass("E2", "rotation", {"center": center, "angle": theta})
    phi = math.atan2(a[1, 0], a[0, 0]) / 2.0
    d = canonical_sign(np.array([math.cos(phi), math.sin(phi)]))
    t_par = (tr @ d) * d
    t_perp = tr - t_par
    p = t_perp / 2.0
    if np.max(np.abs(t_par)) <= tol:
        return IsometryClass("E2", "reflection", {"axis_point": p, "axis_dir": d})
    return IsometryClass(
        "E2", "glide-reflection", {"axis_point": p, "axis_dir": d, "glide": t_par}
    )


def _classify_e3(t, tol):
    a = t.linear
    tr = t.translation
    if np.linalg.det(a) > 0:
        u, theta = _so3_axis_angle(a)
        if theta <= tol:
            if np.max(np.abs(tr)) <= tol:
                return IsometryClass("E3", "identity")
            return IsometryClass("E3", "translation", {"vector": tr.copy()})
        d = float(tr @ u)
        t_perp = tr - d * u
        p = np.linalg.solve(np.eye(3) - a + np.outer(u, u), t_perp)
        if abs(d) <= tol:
            return IsometryClass("E3", "rotation", {"axis_point": p, "axis_dir": u, "angle": theta})
        return IsometryClass(
            "E3",
            "screw-motion",
            {"axis_point": p, "axis_dir": u, "angle": theta, "translation": d},
        )
    if np.max(np.abs(a + np.eye(3))) <= tol:
        return IsometryClass("E3", "central-symmetry", {"center": tr / 2.0})
    u, phi = _so3_axis_angle(-a)
    theta = phi - math.pi
    if abs(theta) <= tol:
        n = canonical_sign(u)
        t_n = (tr @ n) * n
        t_in = tr - t_n
        p = t_n / 2.0
        if np.max(np.abs(t_in)) <= tol:
            return IsometryClass("E3", "reflection", {"plane_point": p, "plane_normal": n})
        return IsometryClass(
            "E3", "glide-reflection", {"plane_point": p, "plane_normal": n, "glide": t_in}
        )
    if theta < 0:
        u, theta = -u, -theta
    c = np.linalg.solve(np.eye(3) - a, tr)
    return IsometryClass(
        "E3", "rotary-reflection", {"fixed_point": c, "axis_dir": u, "angle": theta}
    )


def _classify_s2(t, tol):
    m = t.matrix
    if np.linalg.det(m) > 0:
        u, theta = _so3_axis_angle(m)
        if theta <= tol:
            return IsometryClass("S2", "identity")
        return IsometryClass("S2", "rotation", {"axis": u, "angle": theta})
    if np.max(np.abs(m + np.eye(3))) <= tol:
        return IsometryClass("S2", "central-symmetry")
    u, phi = _so3_axis_angle(-m)
    theta = phi - math.pi
    if abs(theta) <= tol:
        return IsometryClass("S2", "reflection", {"normal": canonical_sign(u)})
    if theta < 0:
        u, theta = -u, -theta
    return IsometryClass("S2", "rotary-reflection", {"axis": u, "angle": theta})


def _classify_h2(t, tol):
    m = t.matrix
    if t.is_identity(tol):
        return IsometryClass("H2", "identity")
    if np.linalg.det(m) > 0:
        trace = float(np.trace(m))
        if trace < 3.0 - tol:
            p = _h2_fixed_vector(m, timelike=True)
            v, w = _h2_frame(p)
            mv = m @ v
            theta = math.atan2(-_ldot(mv, w), -_ldot(mv, v))
            return IsometryClass("H2", "rotation", {"center": p, "angle": theta})
        if trace > 3.0 + tol:
            a = _h2_fixed_vector(m, timelike=False)
            q0, t0 = _h2_axis_frame(a)
            mq = m @ q0
            length = math.asinh(-_ldot(mq, t0))
            return IsometryClass("H2", "hyperbolic-translation", {"axis_normal": a, "length": length})
        xi = _h2_fixed_vector(m, null=True)
        xi, eta, s = _h2_null_frame(xi)
        mu = _ldot(m @ s, eta)
        return IsometryClass("H2", "parallel-motion", {"absolute_point": xi, "shift": mu})
    # orientation reversing: the mirror axis is the -1 eigenvector, and the
    # glide length is read off along the axis (no squaring, which would cost
    # half the available precision for long glides)
    a = _h2_neg_fixed_vector(m)
    q0, t0 = _h2_axis_frame(a)
    length = math.asinh(-_ldot(m @ q0, t0))
    if abs(length) <= tol:
        return IsometryClass("H2", "reflection", {"axis_normal": a})
    return IsometryClass("H2", "glide-reflection", {"axis_normal": a, "length": length})


def _h2_neg_fixed_vector(m):
    _, sv, vt = np.linalg.svd(m + np.eye(m.shape[0]))
    v = vt[np.argmin(sv)]
    s = _ldot(v, v)
    if s >= -1e-9:
        raise NotDecomposable("no spacelike mirror normal")
    return canonical_sign(v / math.sqrt(-s))


def _h2_fixed_vector(m, timelike=False, null=False):
    _, sv, vt = np.linalg.svd(m - np.eye(m.shape[0]))
    order = np.argsort(sv)
    for i in order:
        v = vt[i]
        s = _ldot(v, v)
        if null:
            v = vt[order[0]]
            if v[0] < 0:
                v = -v
            return v / v[0]
        if timelike and s > 1e-9:
            v = v / math.sqrt(s)
            return v if v[0] > 0 else -v
        if not timelike and s < -1e-9:
            return canonical_sign(v / math.sqrt(-s))
    raise NotDecomposable("no fixed vector of the requested type")


def _lorentz4_cosh_length(m: np.ndarray) -> float:
    # Eigenvalues of an orthochronous O(1,3) matrix with det +1 are
    # exp(+-l), exp(+-i theta); cosh l and cos theta are the roots of
    # x^2 - s x + p with s, p read off tr(M) and tr(M^2).  This avoids
    # eigensolvers, which lose half the precision on parabolic Jordan
    # blocks.
    s = float(np.trace(m)) / 2.0
    q = (float(np.trace(m @ m)) + 4.0) / 4.0
    disc = max(0.0, 2.0 * q - s * s)
    return max(1.0, (s + math.sqrt(disc)) / 2.0)


def _classify_lorentz4(t, tol):
    tag = t.space
    if t.is_identity(tol):
        return IsometryClass(tag, "identity")
    if np.linalg.det(t.matrix) < 0:
        return IsometryClass(tag, "orientation-reversing-moebius")
    scale = max(1.0, float(np.max(np.abs(t.matrix))))
    m = t.matrix
    s = float(np.trace(m)) / 2.0
    q = (float(np.trace(m @ m)) + 4.0) / 4.0
    # (1 - cosh l)(1 - cos theta); linear in floating noise, unlike the
    # square root in the cosh recovery
    f1 = 1.0 - s + s * s - q
    twist_band = 1e-9 * scale * scale
    sqrt_band = 20.0 * math.sqrt(2.3e-16 * scale ** 3)
    if f1 < -twist_band:
        return IsometryClass(tag, "loxodromic")
    if _lorentz4_cosh_length(m) > 1.0 + max(1e-9 * scale, sqrt_band):
        return IsometryClass(tag, "loxodromic")
    _, sv, vt = np.linalg.svd(t.matrix - np.eye(4))
    bound = 1e-7 * max(1.0, sv[0])
    kernel = [vt[i] for i in range(4) if sv[i] <= bound]
    sub_ok = False
    for v in kernel:
        if _ldot(v, v) > 1e-9:
            sub_ok = True
    if not sub_ok and len(kernel) >= 2:
        # a timelike fixed direction may hide in a mixed kernel basis
        gram = np.array([[_ldot(a, b) for b in kernel] for a in kernel])
        if np.max(np.linalg.eigvalsh(gram)) > 1e-9:
            sub_ok = True
    if sub_ok:
        return IsometryClass(tag, "elliptic")
    return IsometryClass(tag, "parabolic")


# ---------------------------------------------------------------------------
# synthesis (inverse of classification, fine spaces)


def synthesize(cls: IsometryClass) -> Isometry:
    tag = cls.space
    p = cls.params
    if tag == "E1":
        if cls.label == "identity":
            return identity(tag)
        if cls.label == "translation":
            return Isometry(tag, np.array([[1.0, p["vector"][0]], [0.0, 1.0]]))
        c = p["center"][0]
        return Isometry(tag, np.array([[-1.0, 2.0 * c], [0.0, 1.0]]))
    if tag == "E2":
        return _synth_affine(tag, *_e2_parts(cls))
    if tag == "E3":
        return _synth_affine(tag, *_e3_parts(cls))
    if tag == "S2":
        return Isometry(tag, _s2_matrix(cls))
    if tag == "RP2":
        return Isometry(tag, _s2_matrix(IsometryClass("S2", cls.label, cls.params)))
    if tag == "H2":
        return _synth_h2(cls)
    raise UnsupportedSpace(f"no synthesis for {tag} (coarse labels only)")


def _e2_parts(cls):
    p = cls.params
    if cls.label == "identity":
        return np.eye(2), np.zeros(2)
    if cls.label == "translation":
        return np.eye(2), np.asarray(p["vector"], float)
    if cls.label == "rotation":
        a = _rot2(p["angle"])
        c = np.asarray(p["center"], float)
        return a, (np.eye(2) - a) @ c
    d = normalize(p["axis_dir"])
    a = 2.0 * np.outer(d, d) - np.eye(2)
    g = np.asarray(p.get("glide", np.zeros(2)), float)
    return a, (np.eye(2) - a) @ np.asarray(p["axis_point"], float) + g


def _e3_parts(cls):
    p = cls.params
    if cls.label == "identity":
        return np.eye(3), np.zeros(3)
    if cls.label == "translation":
        return np.eye(3), np.asarray(p["vector"], float)
    if cls.label in ("rotation", "screw-motion"):
        u = normalize(p["axis_dir"])
        a = _rodrigues(u, p["angle"])
        d = p.get("translation", 0.0)
        return a, (np.eye(3) - a) @ np.asarray(p["axis_point"], float) + d * u
    if cls.label in ("reflection", "glide-reflection"):
        n = normalize(p["plane_normal"])
        a = np.eye(3) - 2.0 * np.outer(n, n)
        g = np.asarray(p.get("glide", np.zeros(3)), float)
        return a, (np.eye(3) - a) @ np.asarray(p["plane_point"], float) + g
    if cls.label == "rotary-reflection":
        u = normalize(p["axis_dir"])
        a = _rodrigues(u, p["angle"]) @ (np.eye(3) - 2.0 * np.outer(u, u))
        return a, (np.eye(3) - a) @ np.asarray(p["fixed_point"], float)
    # central symmetry
    return -np.eye(3), 2.0 * np.asarray(p["center"], float)


def _synth_affine(tag, a, tr):
    n = a.shape[0]
    m = np.eye(n + 1)
    m[:n, :n] = a
    m[:n, n] = tr
    return Isometry(tag, m)


def _s2_matrix(cls):
    p = cls.params
    if cls.label == "identity":
        return np.eye(3)
    if cls.label == "rotation":
        return _rodrigues(p["axis"], p["angle"])
    if cls.label == "reflection":
        n = normalize(p["normal"])
        return np.eye(3) - 2.0 * np.outer(n, n)
    if cls.label == "central-symmetry":
        return -np.eye(3)
    u = normalize(p["axis"])
    return _rodrigues(u, p["angle"]) @ (np.eye(3) - 2.0 * np.outer(u, u))


def _frame_inverse(b: np.ndarray, gram_inv: np.ndarray) -> np.ndarray:
    """Exact inverse of a column frame with known Gram matrix.

    B^T G B = J implies B^{-1} = J^{-1} B^T G; frames of far-out centers are
    terribly conditioned for a generic solve, while this stays exact."""
    g = np.diag(np.concatenate([[1.0], -np.ones(b.shape[0] - 1)]))
    return gram_inv @ b.T @ g


_ORTHO_GRAM_INV = np.diag([1.0, -1.0, -1.0])
_NULL_GRAM_INV = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])


def _synth_h2(cls):
    p = cls.params
    if cls.label == "identity":
        return identity("H2")
    if cls.label == "rotation":
        c = np.asarray(p["center"], float)
        v, w = _h2_frame(c)
        b = np.column_stack([c, v, w])
        r = np.eye(3)
        r[1:, 1:] = _rot2(p["angle"])
        return Isometry("H2", b @ r @ _frame_inverse(b, _ORTHO_GRAM_INV))
    if cls.label == "hyperbolic-translation":
        a = np.asarray(p["axis_normal"], float)
        q0, t0 = _h2_axis_frame(a)
        b = np.column_stack([q0, t0, a])
        ell = p["length"]
        r = np.eye(3)
        r[0, 0] = r[1, 1] = math.cosh(ell)
        r[0, 1] = r[1, 0] = math.sinh(ell)
        return Isometry("H2", b @ r @ _frame_inverse(b, _ORTHO_GRAM_INV))
    if cls.label == "parallel-motion":
        xi, eta, s = _h2_null_frame(p["absolute_point"])
        mu = p["shift"]
        b = np.column_stack([xi, eta, s])
        r = np.array([[1.0, mu * mu / 2.0, mu], [0.0, 1.0, 0.0], [0.0, mu, 1.0]])
        return Isometry("H2", b @ r @ _frame_inverse(b, _NULL_GRAM_INV))
    if cls.label == "reflection":
        return flip_of(h2_line_from_normal(p["axis_normal"]))
    # glide reflection: translate along the axis, then reflect in it
    refl = flip_of(h2_line_from_normal(p["axis_normal"]))
    trans = _synth_h2(
        IsometryClass(
            "H2",
            "hyperbolic-translation",
            {"axis_normal": p["axis_normal"], "length": p["length"]},
        )
    )
    return refl @ trans


# ---------------------------------------------------------------------------
# canonical decomposition


def decompose(t: Isometry, tol: float = 1e-8) -> Biflipper:
    """A canonical biflipper encoding t; improper only for flips."""
    tag = t.space
    if t.is_identity(nk.DEFAULT_TOL):
        return Biflipper(whole(tag), whole(tag))
    if tag in ("H3", "MOEB"):
        return _decompose_lorentz4(t, tol)
    cls = classify(t)
    out = _DECOMPOSERS[tag](t, cls)
    if tag == "H2" and not (out.tail.is_whole or out.head.is_whole):
        # near-parabolic axis data costs precision; polish restores it
        out = _polish_lorentz4(t, out)
    scale = max(1.0, float(np.max(np.abs(t.matrix))))
    if not nk.approx_equal(encode(out).matrix, t.matrix, 1e-7 * scale,
                           projective=space(tag).projective):
        raise NotDecomposable(f"internal decomposition failed for {tag} {cls.label}")
    return out


def _decompose_e1(t, cls):
    p = cls.params
    if cls.label == "translation":
        v = p["vector"]
        return Biflipper(e_point("E1", [0.0]), e_point("E1", [v[0] / 2.0]))
    return Biflipper(e_point("E1", p["center"]), whole("E1"))


def _decompose_e2(t, cls):
    p = cls.params
    if cls.label == "translation":
        v = np.asarray(p["vector"], float)
        return Biflipper(e_point("E2", [0.0, 0.0]), e_point("E2", v / 2.0))
    if cls.label == "rotation":
        c = np.asarray(p["center"], float)
        d1 = np.array([1.0, 0.0])
        d2 = _rot2(p["angle"] / 2.0) @ d1
        return Biflipper(e_line("E2", c, d1), e_line("E2", c, d2))
    d = normalize(p["axis_dir"])
    g = np.asarray(p.get("glide", np.zeros(2)), float)
    anchor = np.asarray(p["axis_point"], float)
    sub = AffineSubspace.from_point_and_dirs(anchor, [d])
    foot = sub.foot(np.zeros(2))
    pt = e_point("E2", foot)
    ln = e_line("E2", foot + g / 2.0, np.array([-d[1], d[0]]))
    return Biflipper(pt, ln)


def _decompose_e3(t, cls):
    p = cls.params
    if cls.label == "translation":
        v = np.asarray(p["vector"], float)
        return Biflipper(e_point("E3", np.zeros(3)), e_point("E3", v / 2.0))
    if cls.label in ("rotation", "screw-motion"):
        u = normalize(p["axis_dir"])
        axis = AffineSubspace.from_point_and_dirs(p["axis_point"], [u])
        p0 = axis.foot(np.zeros(3))
        d = p.get("translation", 0.0)
        w0 = perp_any(u)
        w1 = _rodrigues(u, p["angle"] / 2.0) @ w0
        return Biflipper(e_line("E3", p0, w0), e_line("E3", p0 + (d / 2.0) * u, w1))
    if cls.label in ("reflection", "glide-reflection"):
        n = normalize(p["plane_normal"])
        g = np.asarray(p.get("glide", np.zeros(3)), float)
        anchor = np.asarray(p["plane_point"], float)
        plane = _plane_subspace(anchor, n)
        foot = plane.foot(np.zeros(3))
        return Biflipper(e_point("E3", foot), e_line("E3", foot + g / 2.0, n))
    if cls.label == "rotary-reflection":
        c = np.asarray(p["fixed_point"], float)
        u = normalize(p["axis_dir"])
        v0 = perp_any(u)
        m = _rodrigues(u, p["angle"] / 2.0) @ np.cross(u, v0)
        return Biflipper(e_line("E3", c, v0), e_plane(c, m))
    # central symmetry
    c = np.asarray(p["center"], float)
    v0 = perp_any(np.array([0.0, 0.0, 1.0]))
    return Biflipper(e_line("E3", c, v0), e_plane(c, v0))


def _plane_subspace(anchor, n):
    d1 = perp_any(n)
    d2 = np.cross(n, d1)
    return AffineSubspace.from_point_and_dirs(anchor, [d1, d2])


def _decompose_s2(t, cls):
    p = cls.params
    if cls.label == "rotation":
        u = normalize(p["axis"])
        n1 = perp_any(u)
        n2 = _rodrigues(u, p["angle"] / 2.0) @ n1
        return Biflipper(s2_circle(n1), s2_circle(n2))
    if cls.label == "reflection":
        u = normalize(p["normal"])
        v0 = perp_any(u)
        return Biflipper(s2_pair(v0), s2_circle(np.cross(u, v0)))
    if cls.label == "central-symmetry":
        v0 = np.array([1.0, 0.0, 0.0])
        return Biflipper(s2_pair(v0), s2_circle(v0))
    u = normalize(p["axis"])
    v0 = perp_any(u)
    m = _rodrigues(u, p["angle"] / 2.0) @ np.cross(u, v0)
    return Biflipper(s2_pair(v0), s2_circle(m))


def _decompose_rp2(t, cls):
    u = normalize(cls.params["axis"])
    v0 = perp_any(u)
    v1 = _rodrigues(u, cls.params["angle"] / 2.0) @ v0
    return Biflipper(rp2_point(v0), rp2_point(v1))


def _decompose_h2(t, cls):
    p = cls.params
    if cls.label == "rotation":
        half = synthesize(IsometryClass("H2", "rotation", {"center": p["center"], "angle": p["angle"] / 2.0}))
        v, _ = _h2_frame(p["center"])
        tail = h2_line_from_normal(v)
        return Biflipper(tail, move_flipper(half, tail))
    if cls.label == "hyperbolic-translation":
        half = synthesize(
            IsometryClass(
                "H2",
                "hyperbolic-translation",
                {"axis_normal": p["axis_normal"], "length": p["length"] / 2.0},
            )
        )
        _, t0 = _h2_axis_frame(p["axis_normal"])
        tail = h2_line_from_normal(t0)
        return Biflipper(tail, move_flipper(half, tail))
    if cls.label == "parallel-motion":
        half = synthesize(
            IsometryClass(
                "H2",
                "parallel-motion",
                {"absolute_point": p["absolute_point"], "shift": p["shift"] / 2.0},
            )
        )
        _, _, s = _h2_null_frame(p["absolute_point"])
        tail = h2_line_from_normal(s)
        return Biflipper(tail, move_flipper(half, tail))
    # reflection / glide reflection: rebase through a line perpendicular to
    # the mirror (reflection) or the glide axis.
    _, t0 = _h2_axis_frame(p["axis_normal"])
    tail = h2_line_from_normal(t0)
    return rebase(t, tail, "tail")


_DECOMPOSERS = {
    "E1": _decompose_e1,
    "E2": _decompose_e2,
    "E3": _decompose_e3,
    "S2": _decompose_s2,
    "RP2": _decompose_rp2,
    "H2": _decompose_h2,
}


# --- H3 / MOEB -------------------------------------------------------------


def _lorentz4_axis(m: np.ndarray):
    """Axis data of a loxodromic or elliptic O(1,3)+ matrix: the canonical
    point q0 on the axis and the unit tangent there.

    The axis plane is recovered as an eigenspace of M + M^{-1}, which is
    better conditioned than eigenvectors of M itself when the translation
    length is small or the matrix is far from the identity."""
    coshl = _lorentz4_cosh_length(m)
    scale = max(1.0, float(np.max(np.abs(m))))
    if coshl > 1.0 + 1e-9 * scale:
        g = space("H3").form.matrix
        n = m + g @ m.T @ g      # m + m^{-1}, exactly, at any magnitude
        _, _, vt = np.linalg.svd(n - 2.0 * coshl * np.eye(4))
        sub = LinearSubspace.from_spanning(vt[-2:], space("H3").form)
    else:
        _, _, vt = np.linalg.svd(m - np.eye(4))
        sub = LinearSubspace.from_spanning(vt[-2:], space("H3").form)
    n_plus, n_minus = _null_dirs_of_plane(sub.basis[0], sub.basis[1])
    q = n_plus + n_minus
    q0 = q / math.sqrt(_ldot(q, q))
    tan = n_plus - n_minus
    tan = tan / math.sqrt(-_ldot(tan, tan))
    return q0, tan


def _spacelike_complement(vectors):
    """Canonical spacelike unit vector Lorentz-orthogonal to the given ones."""
    g = np.diag([1.0, -1.0, -1.0, -1.0])
    rows = np.array([g @ np.asarray(v, float) for v in vectors])
    _, _, vt = np.linalg.svd(rows)
    for i in range(vt.shape[0] - 1, -1, -1):
        w = vt[i]
        s = _ldot(w, w)
        if s < -1e-9:
            return canonical_sign(w / math.sqrt(-s))
    raise NotDecomposable("no spacelike complement")


def _nearest_flipper(tag: str, g: np.ndarray, dim: int) -> Flipper:
    """Flipper whose subspace is spanned by the directions g moves least,
    used to polish decompositions built from ill-conditioned axis data."""
    _, _, vt = np.linalg.svd(g - np.eye(g.shape[0]))
    sub = LinearSubspace.from_spanning(vt[-dim:], space(tag).form)
    return lorentz_flipper(tag, sub)


def _polish_lorentz4(t: Isometry, b: Biflipper, rounds: int = 3) -> Biflipper:
    """Alternating projection: resolve each flipper exactly against the
    other.  Restores full precision when the initial axis data came from a
    squared matrix or a nearly defective eigenproblem."""
    tag = t.space
    tail, head = b.tail, b.head
    scale = max(1.0, float(np.max(np.abs(t.matrix))))
    best = b
    best_err = float(np.max(np.abs(encode(b).matrix - t.matrix)))
    for _ in range(rounds):
        if best_err <= 1e-12 * scale:
            break
        try:
            head = _nearest_flipper(tag, t.matrix @ flip_of(tail).matrix, head.data.dim)
            tail = _nearest_flipper(tag, flip_of(head).matrix @ t.matrix, tail.data.dim)
        except (DegenerateRestriction, InvalidFlipper):
            break
        cand = Biflipper(tail, head)
        err = float(np.max(np.abs(encode(cand).matrix - t.matrix)))
        if err < best_err:
            best, best_err = cand, err
    return best


def _decompose_lorentz4(t: Isometry, tol: float) -> Biflipper:
    tag = t.space
    m = t.matrix
    form = space(tag).form

    def finish(tail: Flipper) -> Biflipper:
        try:
            out = rebase(t, tail, "tail", tol)
        except NotCompatible:
            # initial axis data was too coarse; take the closest flip of the
            # right dimension and let the polishing pass converge
            g = t.matrix @ flip_of(tail).matrix
            _, sv, _ = np.linalg.svd(g - np.eye(4))
            dim = int(np.sum(sv <= 1e-3 * max(1.0, sv[0])))
            if dim == 0:
                raise
            out = Biflipper(tail, _nearest_flipper(tag, g, dim))
        if out.tail.is_whole or out.head.is_whole:
            return out
        out = _polish_lorentz4(t, out)
        scale = max(1.0, float(np.max(np.abs(t.matrix))))
        if np.max(np.abs(encode(out).matrix - t.matrix)) > 1e-8 * scale:
            raise NotDecomposable("hyperbolic decomposition did not converge")
        return out

    if t.is_involution(tol):
        if tag == "H3":
            return Biflipper(flipper_of_involution(t), whole(tag))
        # MOEB: point flips of H3 have empty absolute fixed set; present them
        # as a commuting (circle, point-pair) product instead.
        _, sv, vt = np.linalg.svd(m - np.eye(4))
        bound = nk.RANK_TOL * max(1.0, sv[0])
        kernel = [vt[i] for i in range(4) if sv[i] <= bound]
        if len(kernel) == 1:
            p = kernel[0] / math.sqrt(_ldot(kernel[0], kernel[0]))
            w = _spacelike_complement([p])
            line = LinearSubspace.from_spanning([p, w], form)
            tailf = lorentz_flipper("MOEB", _complement_subspace(w, form))
            headf = lorentz_flipper("MOEB", line)
            return Biflipper(tailf, headf)
        return Biflipper(flipper_of_involution(t), whole(tag))

    det = np.linalg.det(m)
    if det > 0:
        def axis_tail():
            q0, tan = _lorentz4_axis(m)
            w = _spacelike_complement([q0, tan])
            return lorentz_flipper(tag, LinearSubspace.from_spanning([q0, w], form))

        def parabolic_tail():
            # plane through the fixed absolute point whose boundary line is
            # perpendicular to the displacement (normal parallel to it)
            xi = _parabolic_fixed_point(m)
            xi, eta, s1, s2 = _h3_null_frame(xi)
            b1 = _ldot(m @ s1, eta)
            b2 = _ldot(m @ s2, eta)
            n = (b1 * s1 + b2 * s2) / math.hypot(b1, b2)
            return lorentz_flipper(tag, _complement_subspace(n, form))

        cls = _classify_lorentz4(t, ANGLE_ZERO)
        builders = [axis_tail, parabolic_tail]
        if cls.label == "parabolic":
            builders.reverse()
        return _first_tail(finish, builders)

    # orientation reversing, not an involution: decide through the square
    m2 = m @ m

    def glide_tail():
        q0, tan = _lorentz4_axis(m2)
        return lorentz_flipper(tag, _complement_subspace(tan, form))

    def rotary_tail():
        fixed = [v for v, s in _fixed_with_signs(m) if s > 1e-9]
        if not fixed:
            raise NotDecomposable("orientation-reversing elliptic without fixed point")
        p = fixed[0] / math.sqrt(_ldot(fixed[0], fixed[0]))
        if p[0] < 0:
            p = -p
        tangent = _tangent_action(m, p)
        u = _tangent_vector(p, _so3_fixed_dir(-tangent))
        w = _spacelike_complement([p, u])
        return lorentz_flipper(tag, LinearSubspace.from_spanning([p, w], form))

    def parabolic_glide_tail():
        xi = _parabolic_fixed_point(m2)
        xi, eta, s1, s2 = _h3_null_frame(xi)
        smat = np.array([[_ldot(m @ s1, -s1), _ldot(m @ s2, -s1)],
                         [_ldot(m @ s1, -s2), _ldot(m @ s2, -s2)]])
        rdir = _so3_fixed_dir_2d(smat)
        n = rdir[0] * s1 + rdir[1] * s2
        return lorentz_flipper(tag, _complement_subspace(n, form))

    cls2 = _classify_lorentz4(Isometry(tag, m2), ANGLE_ZERO)
    order = {"loxodromic": [glide_tail, rotary_tail, parabolic_glide_tail],
             "elliptic": [rotary_tail, glide_tail, parabolic_glide_tail],
             "parabolic": [parabolic_glide_tail, glide_tail, rotary_tail],
             "identity": [rotary_tail, glide_tail, parabolic_glide_tail]}
    return _first_tail(finish, order[cls2.label])


def _first_tail(finish, builders):
    last = None
    for build in builders:
        try:
            return finish(build())
        except (NotCompatible, NotDecomposable, DegenerateRestriction,
                InvalidFlipper, ValueError) as exc:
            last = exc
    raise NotDecomposable(f"no decomposition branch converged: {last}")


def _complement_subspace(n, form) -> LinearSubspace:
    g = form.matrix
    _, _, vt = np.linalg.svd(np.atleast_2d(g @ np.asarray(n, float)))
    return LinearSubspace.from_spanning(vt[1:], form)


def _fixed_with_signs(m):
    _, sv, vt = np.linalg.svd(m - np.eye(m.shape[0]))
    bound = 1e-7 * max(1.0, sv[0])
    out = []
    for i in range(m.shape[0]):
        if sv[i] <= bound:
            v = vt[i]
            out.append((v, _ldot(v, v)))
    return out


def _parabolic_fixed_point(m):
    # The kernel of M - I may also contain a spacelike direction (the mirror
    # of the displacement); the absolute fixed point is its null direction,
    # found where the kernel Gram matrix degenerates.
    _, sv, vt = np.linalg.svd(m - np.eye(4))
    bound = 1e-7 * max(1.0, sv[0])
    kernel = [vt[i] for i in range(4) if sv[i] <= bound]
    if not kernel:
        kernel = [vt[-1]]
    if len(kernel) == 1:
        v = kernel[0]
    else:
        gram = np.array([[_ldot(a, b) for b in kernel] for a in kernel])
        w, vec = np.linalg.eigh(gram)
        coeff = vec[:, int(np.argmin(np.abs(w)))]
        v = sum(c * k for c, k in zip(coeff, kernel))
    if v[0] < 0:
        v = -v
    return v / v[0]


def _tangent_action(m, p):
    """The 3x3 action on an orthonormal tangent basis at the fixed point p."""
    basis = []
    g = np.diag([1.0, -1.0, -1.0, -1.0])
    proj = np.outer(p, g @ p)  # projector onto span(p), <p,p> = 1
    for i in range(4):
        r = np.eye(4)[i] - proj @ np.eye(4)[i]
        for b in basis:
            r = r + _ldot(r, b) * b
        nr = _ldot(r, r)
        if nr < -1e-9:
            basis.append(r / math.sqrt(-nr))
        if len(basis) == 3:
            break
    a = np.zeros((3, 3))
    for j, bj in enumerate(basis):
        mb = m @ bj
        for i, bi in enumerate(basis):
            a[i, j] = -_ldot(mb, bi)
    _tangent_action.basis = basis
    return a


def _tangent_vector(p, coords):
    basis = _tangent_action.basis
    return sum(c * b for c, b in zip(coords, basis))


def _so3_fixed_dir(a):
    _, sv, vt = np.linalg.svd(a - np.eye(3))
    return vt[np.argmin(sv)]


def _so3_fixed_dir_2d(a):
    _, sv, vt = np.linalg.svd(a - np.eye(2))
    return vt[np.argmin(sv)]


# ---------------------------------------------------------------------------
# invariant pencil


def invariant_pencil(t: Isometry, tol: float = ANGLE_ZERO) -> Pencil:
    """The line pencil containing every line flipper of every biflipper of a
    hyperbolic-plane isometry."""
    if t.space != "H2":
        raise UnsupportedSpace("pencils are defined for H2 only")
    cls = classify(t, tol)
    if cls.label == "identity":
        raise IdentityHasNoPencil("the identity belongs to every pencil")
    if cls.label == "rotation":
        return Pencil("elliptic", cls.params["center"])
    if cls.label == "parallel-motion":
        return Pencil("parabolic", cls.params["absolute_point"])
    return Pencil("hyperbolic", cls.params["axis_normal"])
