"""Head-to-tail composition of biflippers.

Two isometries presented by biflippers (A, B) and (B, C) with a shared
middle flipper compose by cancelling the middle flip: the pair (A, C)
encodes the composition.  ``linked`` finds such a shared flipper when one
exists; ``head_to_tail`` drives the whole computation, falling back to the
multi-step reductions for the pairs that are provably not linked (rotary
reflections and screws in general position in E3, the parallel degenerations
in H2) unless strict mode is requested.

Every returned step preserves the isometry encoded by the biflipper it
moves, which makes the step list replayable against the matrix oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numkernel as nk
from .biflipper import (
    Biflipper,
    IsometryClass,
    classify,
    conjugate,
    decompose,
    encode,
    equivalent,
    invariant_pencil,
    rebase,
    synthesize,
    transform_commuting,
)
from .errors import (
    DegenerateAxes,
    NotCompatible,
    NotDecomposable,
    NotLinked,
    SpaceMismatch,
    WrongFlipperKind,
)
from .flips import (
    Flipper,
    Isometry,
    e_line,
    e_plane,
    e_point,
    flip_of,
    flippers_equal,
    h2_line_from_normal,
    h_point,
    move_flipper,
    rp2_point,
    s2_circle,
    s2_pair,
    whole,
)
from .biflipper import _h2_frame, _ldot, _rodrigues, _rot2  # shared frames
from .numkernel import AffineSubspace, canonical_sign, lcross, normalize, perp_any, space


@dataclass(frozen=True)
class Move:
    kind: str                 # rebase | commuting-transform | screw-adjust |
    which: str                # rotate-about-center | translate-along-axis
    before: Biflipper
    after: Biflipper


@dataclass(frozen=True)
class H2TResult:
    biflipper: Biflipper
    steps: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# linked


def linked(s: Isometry, t: Isometry, tol: float = 1e-8):
    """A common flipper usable as head for t and tail for s, or None."""
    if s.space != t.space:
        raise SpaceMismatch(f"{s.space} vs {t.space}")
    for e in _common_candidates(s, t, tol):
        if e is None:
            continue
        try:
            if _usable(s, t, e, tol):
                return e
        except (ValueError, np.linalg.LinAlgError):
            continue
    return None


def _usable(s, t, e, tol) -> bool:
    try:
        rebase(t, e, "head", tol)
        rebase(s, e, "tail", tol)
        return True
    except NotCompatible:
        return False


def _common_candidates(s, t, tol):
    tag = s.space
    if t.is_identity(nk.DEFAULT_TOL) and s.is_identity(nk.DEFAULT_TOL):
        yield _any_flipper(tag)
        return
    if t.is_identity(nk.DEFAULT_TOL):
        yield decompose(s).tail
        return
    if s.is_identity(nk.DEFAULT_TOL):
        yield decompose(t).tail
        return
    if tag in ("E1",):
        yield e_point("E1", [0.0])
        yield decompose(t).tail
    elif tag == "E2":
        yield from _e2_candidates(s, t)
    elif tag == "S2":
        yield from _s2_candidates(s, t)
    elif tag == "RP2":
        yield from _rp2_candidates(s, t)
    elif tag == "H2":
        yield from _h2_candidates(s, t)
    elif tag == "E3":
        yield from _e3_candidates(s, t, tol)
    else:  # H3 / MOEB: modest constructive search only
        yield decompose(t).tail
        yield decompose(s).tail


def _any_flipper(tag):
    return {
        "E1": e_point("E1", [0.0]),
        "E2": e_point("E2", [0.0, 0.0]),
        "E3": e_point("E3", [0.0, 0.0, 0.0]),
        "S2": s2_pair([1.0, 0.0, 0.0]),
        "RP2": rp2_point([1.0, 0.0, 0.0]),
        "H2": h_point("H2", [1.0, 0.0, 0.0]),
        "H3": h_point("H3", [1.0, 0.0, 0.0, 0.0]),
        "MOEB": None,
    }.get(tag) or decompose(Isometry(tag, np.eye(4))).tail


# --- E2 ---------------------------------------------------------------------


def _rot90(v):
    return np.array([-v[1], v[0]])


def _e2_axis(cls):
    p = cls.params
    if cls.label in ("reflection", "glide-reflection"):
        return np.asarray(p["axis_point"], float), normalize(p["axis_dir"])
    return None


def _e2_candidates(s, t):
    cs, ct = classify(s), classify(t)
    labels = {cs.label, ct.label}
    # translations admit every point, so a point candidate settles most pairs
    if ct.label == "translation" and cs.label == "translation":
        yield e_point("E2", [0.0, 0.0])
        return
    for c_rot, c_other in ((ct, cs), (cs, ct)):
        if c_rot.label == "rotation":
            c = np.asarray(c_rot.params["center"], float)
            if c_other.label == "rotation":
                c2 = np.asarray(c_other.params["center"], float)
                d = c2 - c if np.linalg.norm(c2 - c) > 1e-12 else np.array([1.0, 0.0])
                yield e_line("E2", c, d)
                return
            if c_other.label == "translation":
                v = normalize(c_other.params["vector"])
                yield e_line("E2", c, _rot90(v))
                return
            ax = _e2_axis(c_other)
            yield e_line("E2", c, _rot90(ax[1]))
            return
    if "translation" in labels:
        c_tr, c_m = (ct, cs) if ct.label == "translation" else (cs, ct)
        ax = _e2_axis(c_m)
        sub = AffineSubspace.from_point_and_dirs(ax[0], [ax[1]])
        yield e_point("E2", sub.foot(np.zeros(2)))
        return
    # two mirror-axis isometries
    ax1, ax2 = _e2_axis(ct), _e2_axis(cs)
    crossv = ax1[1][0] * ax2[1][1] - ax1[1][1] * ax2[1][0]
    if abs(crossv) > 1e-9:
        rhs = ax2[0] - ax1[0]
        mat = np.column_stack([ax1[1], -ax2[1]])
        t1, _ = np.linalg.solve(mat, rhs)
        yield e_point("E2", ax1[0] + t1 * ax1[1])
        return
    sub = AffineSubspace.from_point_and_dirs(ax1[0], [ax1[1]])
    yield e_line("E2", sub.foot(np.zeros(2)), _rot90(ax1[1]))


# --- S2 / RP2 ---------------------------------------------------------------


def _s2_axis(cls):
    if cls.label in ("rotation", "rotary-reflection"):
        return normalize(cls.params["axis"])
    if cls.label == "reflection":
        return normalize(cls.params["normal"])
    return None  # central symmetry commutes with everything


def _s2_candidates(s, t):
    u1, u2 = _s2_axis(classify(t)), _s2_axis(classify(s))
    if u1 is None and u2 is None:
        yield s2_pair([1.0, 0.0, 0.0])
        yield s2_circle([1.0, 0.0, 0.0])
        return
    if u1 is None or u2 is None:
        u = u1 if u1 is not None else u2
        v = perp_any(u)
        yield s2_circle(np.cross(u, v))
        yield s2_pair(v)
        return
    w = np.cross(u1, u2)
    v = normalize(w) if np.linalg.norm(w) > 1e-9 else perp_any(u1)
    yield s2_circle(v)
    yield s2_pair(v)


def _rp2_candidates(s, t):
    u1, u2 = _s2_axis(classify(t)), _s2_axis(classify(s))
    w = np.cross(u1, u2)
    v = normalize(w) if np.linalg.norm(w) > 1e-9 else perp_any(u1)
    yield rp2_point(v)
    yield rp2_point(perp_any(u1))


# --- H2 ---------------------------------------------------------------------


def _h2_candidates(s, t):
    pen_t = invariant_pencil(t)
    pen_s = invariant_pencil(s)
    c1, c2 = pen_t.carrier, pen_s.carrier
    if np.linalg.norm(np.cross(c1 / np.linalg.norm(c1), c2 / np.linalg.norm(c2))) < 1e-9:
        yield pen_t.canonical_line()
        return
    w = lcross(c1, c2)
    sq = _ldot(w, w)
    scale = float(np.linalg.norm(w)) ** 2
    if sq < -1e-9 * max(scale, 1.0):
        yield h2_line_from_normal(w)
    elif sq > 1e-9 * max(scale, 1.0):
        v = w / math.sqrt(sq)
        if v[0] < 0:
            v = -v
        yield h_point("H2", v)
    # else: parallel degeneration, no common flipper


# --- E3 ---------------------------------------------------------------------
# Families of admissible middle flippers, generated constructively per
# classified pair and verified numerically by the caller.


def _e3_line_descs(cls: IsometryClass):
    p = cls.params
    out = []
    if cls.label == "translation":
        out.append(("any-perp", normalize(p["vector"])))
    elif cls.label in ("rotation", "screw-motion"):
        out.append(("perp-meet", np.asarray(p["axis_point"], float), normalize(p["axis_dir"])))
    elif cls.label in ("reflection", "glide-reflection"):
        n = normalize(p["plane_normal"])
        g = p.get("glide")
        out.append(("dir", n))
        out.append(("in-plane", np.asarray(p["plane_point"], float), n,
                    normalize(g) if g is not None else None))
    elif cls.label == "rotary-reflection":
        out.append(("pt-perp", np.asarray(p["fixed_point"], float), normalize(p["axis_dir"])))
    elif cls.label == "central-symmetry":
        out.append(("pt", np.asarray(p["center"], float)))
    return out


def _e3_point_descs(cls):
    p = cls.params
    if cls.label == "translation":
        return [("all",)]
    if cls.label in ("rotation", "screw-motion") and abs(p["angle"] - math.pi) <= 1e-9:
        return [("on-line", np.asarray(p["axis_point"], float), normalize(p["axis_dir"]))]
    if cls.label in ("reflection", "glide-reflection"):
        return [("in-plane", np.asarray(p["plane_point"], float), normalize(p["plane_normal"]))]
    if cls.label == "central-symmetry":
        return [("pt", np.asarray(p["center"], float))]
    return []


def _e3_plane_descs(cls):
    p = cls.params
    out = []
    if cls.label == "translation":
        out.append(("dir", normalize(p["vector"])))
    elif cls.label == "rotation":
        out.append(("thru-line", np.asarray(p["axis_point"], float), normalize(p["axis_dir"])))
        if abs(p["angle"] - math.pi) <= 1e-9:
            out.append(("dir", normalize(p["axis_dir"])))
    elif cls.label == "screw-motion":
        if abs(p["angle"] - math.pi) <= 1e-9:
            out.append(("dir", normalize(p["axis_dir"])))
    elif cls.label == "reflection":
        out.append(("perp-family", normalize(p["plane_normal"])))
    elif cls.label == "glide-reflection":
        out.append(("dir", normalize(p["glide"])))
    elif cls.label == "rotary-reflection":
        out.append(("thru-line", np.asarray(p["fixed_point"], float), normalize(p["axis_dir"])))
    elif cls.label == "central-symmetry":
        out.append(("thru-pt", np.asarray(p["center"], float)))
    return out


def _e3_candidates(s, t, tol):
    cs, ct = classify(s), classify(t)
    for c in _common_lines(_e3_line_descs(ct), _e3_line_descs(cs)):
        try:
            yield _line_flipper(c)
        except (ValueError, np.linalg.LinAlgError):
            continue
    for c in _common_points(_e3_point_descs(ct), _e3_point_descs(cs)):
        yield e_point("E3", c)
    for a, n in _common_planes(_e3_plane_descs(ct), _e3_plane_descs(cs)):
        try:
            yield e_plane(a, n)
        except (ValueError, np.linalg.LinAlgError):
            continue
    yield decompose(t).tail
    yield decompose(s).tail


def _line_flipper(c):
    return e_line("E3", c[0], c[1])


def _line_dist(p1, d1, p2, d2):
    n = np.cross(d1, d2)
    w = np.asarray(p2, float) - np.asarray(p1, float)
    if np.linalg.norm(n) < 1e-9:
        return float(np.linalg.norm(w - (w @ d1) * d1))
    return abs(float(w @ n)) / float(np.linalg.norm(n))


def _common_perp(p1, d1, p2, d2):
    """Deterministic common perpendicular of two E3 lines."""
    p1 = np.asarray(p1, float)
    p2 = np.asarray(p2, float)
    n = np.cross(d1, d2)
    if np.linalg.norm(n) > 1e-9:
        nh = normalize(n)
        w = p2 - p1
        mat = np.column_stack([d1, -d2, nh])
        t1, t2, _ = np.linalg.solve(mat, w)
        return p1 + t1 * d1, nh
    # parallel axes: perpendicular through the first axis's origin foot
    sub = AffineSubspace.from_point_and_dirs(p1, [d1])
    f = sub.foot(np.zeros(3))
    w = (p2 - f) - ((p2 - f) @ d1) * d1
    if np.linalg.norm(w) < 1e-9:
        return f, perp_any(d1)
    return f, normalize(w)


def _common_lines(descs1, descs2):
    out = []
    for a in descs1:
        for b in descs2:
            out.extend(_solve_line_pair(a, b))
            out.extend(_solve_line_pair(b, a))
    return out


def _solve_line_pair(a, b):
    if a[0] == "perp-meet" and b[0] == "perp-meet":
        anchor, d = _common_perp(a[1], a[2], b[1], b[2])
        return [(anchor, d)]
    # collect direction constraints
    perp, fixed, positions = [], [], []
    for d in (a, b):
        kind = d[0]
        if kind == "any-perp":
            perp.append(d[1])
        elif kind == "perp-meet":
            perp.append(d[2])
            positions.append(("meets", d[1], d[2]))
        elif kind == "dir":
            fixed.append(d[1])
        elif kind == "in-plane":
            perp.append(d[2])
            if d[3] is not None:
                perp.append(d[3])
            positions.append(("plane", d[1], d[2]))
        elif kind == "pt-perp":
            perp.append(d[2])
            positions.append(("point", d[1]))
        elif kind == "pt":
            positions.append(("point", d[1]))
    pts = [p for p in positions if p[0] == "point"]
    if len(pts) == 2:
        c1, c2 = pts[0][1], pts[1][1]
        if np.linalg.norm(c2 - c1) > 1e-9:
            fixed.append(normalize(c2 - c1))
            positions = [("point", c1)] + [p for p in positions if p[0] != "point"]
        else:
            positions = [("point", c1)] + [p for p in positions if p[0] != "point"]
    direction = _resolve_direction(perp, fixed)
    if direction is None:
        return []
    anchor = _resolve_anchor(direction, positions)
    if anchor is None:
        return []
    return [(anchor, direction)]


def _resolve_direction(perp, fixed):
    for f in fixed[1:]:
        if np.linalg.norm(np.cross(fixed[0], f)) > 1e-9:
            return None
    if fixed:
        d = normalize(fixed[0])
        if any(abs(d @ v) > 1e-9 for v in perp):
            return None
        return d
    if not perp:
        return np.array([1.0, 0.0, 0.0])
    if len(perp) == 1:
        return perp_any(perp[0])
    d = None
    for v in perp[1:]:
        c = np.cross(perp[0], v)
        if np.linalg.norm(c) > 1e-9:
            d = normalize(c)
            break
    if d is None:
        return perp_any(perp[0])
    if any(abs(d @ v) > 1e-9 for v in perp):
        return None
    return d


def _resolve_anchor(d, positions):
    if not positions:
        return np.zeros(3)
    pts = [p for p in positions if p[0] == "point"]
    rest = [p for p in positions if p[0] != "point"]
    if pts:
        c = pts[0][1]
        for r in rest:
            if r[0] == "meets":
                if _line_dist(c, d, r[1], r[2]) > 1e-8:
                    return None
            else:
                if abs((c - r[1]) @ r[2]) > 1e-8:
                    return None
        return c
    planes = [p for p in rest if p[0] == "plane"]
    meets = [p for p in rest if p[0] == "meets"]
    if planes and meets:
        q, n = planes[0][1], planes[0][2]
        p0, u = meets[0][1], meets[0][2]
        un = float(u @ n)
        if abs(un) > 1e-9:
            tpar = float((q - p0) @ n) / un
            anchor = p0 + tpar * u
        elif abs((p0 - q) @ n) <= 1e-8:
            anchor = p0
        else:
            return None
        for pl in planes[1:]:
            if abs((anchor - pl[1]) @ pl[2]) > 1e-8:
                return None
        return anchor
    if len(planes) >= 2:
        rows = np.array([pl[2] for pl in planes])
        rhs = np.array([pl[2] @ pl[1] for pl in planes])
        anchor, res, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
        if np.max(np.abs(rows @ anchor - rhs)) > 1e-8:
            return None
        return anchor
    if planes:
        return planes[0][1]
    if len(meets) == 2:
        p1, u1 = meets[0][1], meets[0][2]
        p2, u2 = meets[1][1], meets[1][2]
        mat = np.column_stack([u1, -u2, d])
        if abs(np.linalg.det(mat)) > 1e-9:
            t1, _, _ = np.linalg.solve(mat, p2 - p1)
            return p1 + t1 * u1
        return p1 if _line_dist(p1, d, p2, u2) <= 1e-8 else None
    return meets[0][1]


def _common_points(descs1, descs2):
    out = []
    for a in descs1:
        for b in descs2:
            c = _solve_point_pair(a, b)
            if c is not None:
                out.append(c)
    return out


def _point_member(c, d):
    kind = d[0]
    if kind == "all":
        return True
    if kind == "pt":
        return np.linalg.norm(c - d[1]) <= 1e-8
    if kind == "on-line":
        sub = AffineSubspace.from_point_and_dirs(d[1], [d[2]])
        return bool(np.linalg.norm(sub.foot(c) - c) <= 1e-8)
    return abs((c - d[1]) @ d[2]) <= 1e-8


def _solve_point_pair(a, b):
    for first, second in ((a, b), (b, a)):
        if first[0] == "pt":
            return first[1] if _point_member(first[1], second) else None
        if first[0] == "all":
            if second[0] == "all":
                return np.zeros(3)
            if second[0] == "on-line":
                return second[1]
            if second[0] == "in-plane":
                return second[1]
    if a[0] == "on-line" and b[0] == "on-line":
        p1, u1 = a[1], a[2]
        p2, u2 = b[1], b[2]
        if _line_dist(p1, u1, p2, u2) > 1e-8:
            return None
        mat = np.column_stack([u1, -u2])
        rhs = p2 - p1
        sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
        return p1 + sol[0] * u1
    for first, second in ((a, b), (b, a)):
        if first[0] == "on-line" and second[0] == "in-plane":
            p0, u = first[1], first[2]
            q, n = second[1], second[2]
            un = float(u @ n)
            if abs(un) > 1e-9:
                return p0 + (float((q - p0) @ n) / un) * u
            return p0 if abs((p0 - q) @ n) <= 1e-8 else None
    # two planes
    q1, n1 = a[1], a[2]
    q2, n2 = b[1], b[2]
    rows = np.array([n1, n2])
    rhs = np.array([n1 @ q1, n2 @ q2])
    sol, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    if np.max(np.abs(rows @ sol - rhs)) > 1e-8:
        return None
    return sol


def _common_planes(descs1, descs2):
    out = []
    for a in descs1:
        for b in descs2:
            c = _solve_plane_pair(a, b)
            if c is not None:
                out.append(c)
    return out


def _solve_plane_pair(a, b):
    for first, second in ((a, b), (b, a)):
        if first[0] == "thru-line" and second[0] == "thru-line":
            p1, u1 = first[1], first[2]
            p2, u2 = second[1], second[2]
            m = np.cross(u1, u2)
            if np.linalg.norm(m) > 1e-9:
                m = normalize(m)
                if abs((p2 - p1) @ m) > 1e-8:
                    return None
                return (p1, m)
            w = (p2 - p1) - ((p2 - p1) @ u1) * u1
            if np.linalg.norm(w) < 1e-9:
                return (p1, perp_any(u1))
            return (p1, normalize(np.cross(u1, w)))
        if first[0] == "thru-line":
            p, u = first[1], first[2]
            if second[0] == "dir":
                v = second[1]
                return (p, normalize(v)) if abs(u @ v) <= 1e-9 else None
            if second[0] == "perp-family":
                n = second[1]
                c = np.cross(u, n)
                m = normalize(c) if np.linalg.norm(c) > 1e-9 else perp_any(u)
                return (p, m)
            if second[0] == "thru-pt":
                c = second[1]
                w = np.cross(u, c - p)
                m = normalize(w) if np.linalg.norm(w) > 1e-9 else perp_any(u)
                return (p, m)
        if first[0] == "dir":
            v = first[1]
            if second[0] == "dir":
                return (np.zeros(3), v) if np.linalg.norm(np.cross(v, second[1])) <= 1e-9 else None
            if second[0] == "perp-family":
                return (np.zeros(3), v) if abs(v @ second[1]) <= 1e-9 else None
            if second[0] == "thru-pt":
                return (second[1], v)
        if first[0] == "perp-family":
            n1 = first[1]
            if second[0] == "perp-family":
                c = np.cross(n1, second[1])
                m = normalize(c) if np.linalg.norm(c) > 1e-9 else perp_any(n1)
                return (np.zeros(3), m)
            if second[0] == "thru-pt":
                return (second[1], perp_any(n1))
    if a[0] == "thru-pt" and b[0] == "thru-pt":
        w = b[1] - a[1]
        if np.linalg.norm(w) < 1e-9:
            return (a[1], np.array([0.0, 0.0, 1.0]))
        return (a[1], perp_any(w))
    return None


# ---------------------------------------------------------------------------
# head_to_tail


def head_to_tail(b_t: Biflipper, b_s: Biflipper, mode: str = "fallback",
                 tol: float = 1e-8) -> H2TResult:
    """Biflipper for encode(b_s) o encode(b_t), with a replayable move list.

    In strict mode the pair must be linked; fallback mode (default) also
    resolves the non-linked configurations via the screw reductions (E3) or
    a preliminary replacement by a rotation (H2).
    """
    if b_t.space != b_s.space:
        raise SpaceMismatch(f"{b_t.space} vs {b_s.space}")
    if mode not in ("strict", "fallback"):
        raise ValueError("mode must be 'strict' or 'fallback'")
    tag = b_t.space
    t = encode(b_t)
    s = encode(b_s)
    if t.is_identity(nk.DEFAULT_TOL):
        return H2TResult(b_s, [])
    if s.is_identity(nk.DEFAULT_TOL):
        return H2TResult(b_t, [])
    e = linked(s, t, tol)
    if e is not None:
        first = rebase(t, e, "head", tol)
        second = rebase(s, e, "tail", tol)
        steps = [Move("rebase", "first", b_t, first),
                 Move("rebase", "second", b_s, second)]
        out = H2TResult(Biflipper(first.tail, second.head), steps)
        want = (s @ t).matrix
        scale = max(1.0, float(np.max(np.abs(want))))
        good = np.max(np.abs(encode(out.biflipper).matrix - want)) <= tol * scale
        # far-out common flippers can be exact in theory yet lossy in floats;
        # prefer the bounded fallback constructions in that case
        if good or mode == "strict" or tag in ("E2", "S2", "RP2"):
            return out
    if mode == "strict":
        raise NotLinked(f"no common flipper for this {tag} pair")
    if tag == "E3":
        return _e3_fallback(b_t, b_s, tol)
    if tag == "H2":
        return _h2_fallback(b_t, b_s, tol)
    # H3 / MOEB: rebase-based composition without a move trace
    return H2TResult(decompose(s @ t), [])


def compose_with_fallback(s: Isometry, t: Isometry, tol: float = 1e-8) -> H2TResult:
    """Composition s o t from canonical biflippers, never raising NotLinked."""
    return head_to_tail(decompose(t), decompose(s), "fallback", tol)


# --- E3 fallback reductions -------------------------------------------------


def _e3_or_rev_biflipper(t: Isometry, plane_at: str) -> Biflipper:
    """A (line, plane) or (plane, line) biflipper of an orientation-reversing
    E3 isometry, with the plane at the requested end."""
    cls = classify(t)
    p = cls.params
    if cls.label == "reflection":
        q = np.asarray(p["plane_point"], float)
        n = normalize(p["plane_normal"])
        d = perp_any(n)
        line = e_line("E3", q, d)
        plane = e_plane(q, np.cross(d, n))
        out = Biflipper(line, plane) if plane_at == "head" else Biflipper(plane, line)
    elif cls.label == "glide-reflection":
        q = np.asarray(p["plane_point"], float)
        n = normalize(p["plane_normal"])
        g = np.asarray(p["glide"], float)
        gh = normalize(g)
        d = np.cross(n, gh)
        if plane_at == "head":
            out = Biflipper(e_line("E3", q, d), e_plane(q + g / 2.0, gh))
        else:
            out = Biflipper(e_plane(q, gh), e_line("E3", q + g / 2.0, d))
    elif cls.label == "rotary-reflection":
        c = np.asarray(p["fixed_point"], float)
        u = normalize(p["axis_dir"])
        v0 = perp_any(u)
        if plane_at == "head":
            m = _rodrigues(u, p["angle"] / 2.0) @ np.cross(u, v0)
            out = Biflipper(e_line("E3", c, v0), e_plane(c, m))
        else:
            m = _rodrigues(u, -p["angle"] / 2.0) @ np.cross(u, v0)
            out = Biflipper(e_plane(c, m), e_line("E3", c, v0))
    else:  # central symmetry
        c = np.asarray(p["center"], float)
        w = perp_any(np.array([0.0, 0.0, 1.0]))
        line = e_line("E3", c, w)
        plane = e_plane(c, w)
        out = Biflipper(line, plane) if plane_at == "head" else Biflipper(plane, line)
    if not nk.approx_equal(encode(out).matrix, t.matrix, 1e-7):
        raise NotDecomposable(f"internal plane-ended decomposition failed for {cls.label}")
    return out


def _e3_fallback(b_t, b_s, tol):
    t = encode(b_t)
    s = encode(b_s)
    if t.det() < 0 and s.det() < 0:
        return _e3_two_rotary(b_t, b_s, t, s, tol)
    if t.det() < 0:
        return _e3_rotary_then_screw(b_t, b_s, t, s, tol)
    if s.det() < 0:
        return _e3_screw_then_rotary(b_t, b_s, t, s, tol)
    raise NotLinked("orientation-preserving E3 pairs are always linked")


def _e3_two_rotary(b_t, b_s, t, s, tol):
    # Split both through planes, drop the middle plane pair to lines with a
    # commuting plane flip, then compose the two remaining screws.
    bt2 = _e3_or_rev_biflipper(t, "head")      # (A, B-plane)
    bs2 = _e3_or_rev_biflipper(s, "tail")      # (C-plane, D)
    steps = [Move("rebase", "first", b_t, bt2), Move("rebase", "second", b_s, bs2)]
    n_b = _plane_normal_of(bt2.head)
    n_c = _plane_normal_of(bs2.tail)
    cr = np.cross(n_b, n_c)
    m = normalize(cr) if np.linalg.norm(cr) > 1e-9 else perp_any(n_b)
    e = e_plane(_plane_anchor_of(bt2.head), m)
    middle = Biflipper(bt2.head, bs2.tail)
    dropped = transform_commuting(middle, e, 1e-7)
    steps.append(Move("commuting-transform", "middle", middle, dropped))
    first = Biflipper(bt2.tail, dropped.tail)
    second = Biflipper(dropped.head, bs2.head)
    inner = head_to_tail(first, second, "fallback", tol)
    return H2TResult(inner.biflipper, steps + list(inner.steps))


def _plane_normal_of(f: Flipper):
    b = f.data.direction.basis
    return canonical_sign(normalize(np.cross(b[0], b[1])))


def _plane_anchor_of(f: Flipper):
    return f.data.anchor


def _split_plane_flip(plane: Flipper):
    """F_plane = F_line o F_perp_plane with the line inside the plane."""
    q = _plane_anchor_of(plane)
    n = _plane_normal_of(plane)
    d = perp_any(n)
    line = e_line("E3", q, d)
    perp = e_plane(q, np.cross(d, n))
    return line, perp


def _e3_rotary_then_screw(b_t, b_s, t, s, tol):
    # t orientation-reversing: t = F_B o F_A with A a plane; peel the plane
    # into a line flip inside it and a perpendicular plane flip.
    bt2 = _e3_or_rev_biflipper(t, "tail")      # (A-plane, B-line)
    steps = [Move("rebase", "first", b_t, bt2)]
    e_line_f, f_plane = _split_plane_flip(bt2.tail)
    inner = head_to_tail(Biflipper(e_line_f, bt2.head), b_s, "fallback", tol)
    steps += list(inner.steps)
    y, x = inner.biflipper.tail, inner.biflipper.head
    if y.is_whole:
        return H2TResult(Biflipper(f_plane, x), steps)
    if x.is_whole:
        return H2TResult(Biflipper(f_plane, y), steps)
    reduced, extra = _absorb_plane(inner.biflipper, f_plane, side="tail", tol=tol)
    return H2TResult(reduced, steps + extra)


def _e3_screw_then_rotary(b_t, b_s, t, s, tol):
    bs2 = _e3_or_rev_biflipper(s, "head")      # (C-line, D-plane)
    steps = [Move("rebase", "second", b_s, bs2)]
    e_line_f, f_plane = _split_plane_flip(bs2.head)
    inner = head_to_tail(b_t, Biflipper(bs2.tail, e_line_f), "fallback", tol)
    steps += list(inner.steps)
    p, q = inner.biflipper.tail, inner.biflipper.head
    if q.is_whole:
        return H2TResult(Biflipper(p, f_plane), steps)
    if p.is_whole:
        return H2TResult(Biflipper(q, f_plane), steps)
    reduced, extra = _absorb_plane(inner.biflipper, f_plane, side="head", tol=tol)
    return H2TResult(reduced, steps + extra)


def _absorb_plane(line_pair: Biflipper, f_plane: Flipper, side: str, tol: float):
    """Reduce F_X o F_Y o F_F (side=tail) or F_F o F_Q o F_P (side=head) to a
    two-flip form by sliding the line pair along its screw axis."""
    yf = line_pair.tail if side == "tail" else line_pair.head
    d_y = _line_dir_of(yf)
    p_y = _line_anchor_of(yf)
    other = line_pair.head if side == "tail" else line_pair.tail
    d_x = _line_dir_of(other)
    p_x = _line_anchor_of(other)
    z_anchor, z_dir = _common_perp(p_y, d_y, p_x, d_x)
    n_f = _plane_normal_of(f_plane)
    q_f = _plane_anchor_of(f_plane)
    moved = line_pair
    extra = []
    if abs(z_dir @ n_f) > 1e-9:
        # F meets Z: slide the pair so the moving line lies inside F
        tpar = float((q_f - z_anchor) @ n_f) / float(z_dir @ n_f)
        hit = z_anchor + tpar * z_dir
        foot = _meet_on_axis(z_anchor, z_dir, p_y, d_y)
        shift = float((hit - foot) @ z_dir)
        target = np.cross(n_f, z_dir)
        target = normalize(target) if np.linalg.norm(target) > 1e-9 else perp_any(n_f)
        angle = _signed_angle_about(z_dir, d_y, target)
        g = _screw_isometry(z_anchor, z_dir, angle, shift)
        moved = conjugate(line_pair, g, 1e-6)
        extra.append(Move("screw-adjust", "middle", line_pair, moved))
        yf2 = moved.tail if side == "tail" else moved.head
        w_nrm = np.cross(_line_dir_of(yf2), n_f)
        w_plane = e_plane(_line_anchor_of(yf2), w_nrm)
        if side == "tail":
            out = Biflipper(w_plane, moved.head)
        else:
            out = Biflipper(moved.tail, w_plane)
        return out, extra
    # F parallel to Z: rotate the moving line perpendicular to F
    angle = _signed_angle_about(z_dir, d_y, n_f)
    g = _screw_isometry(z_anchor, z_dir, angle, 0.0)
    moved = conjugate(line_pair, g, 1e-6)
    extra.append(Move("screw-adjust", "middle", line_pair, moved))
    yf2 = moved.tail if side == "tail" else moved.head
    pt = _line_plane_point(_plane_anchor_of(f_plane), n_f, _line_anchor_of(yf2), _line_dir_of(yf2))
    point = e_point("E3", pt)
    if side == "tail":
        return Biflipper(point, moved.head), extra
    return Biflipper(moved.tail, point), extra


def _line_plane_point(q_or_p, n_or_d, p0, u):
    """Intersection of the line (p0, u) with the plane (q, n); the caller
    guarantees they meet."""
    q, n = q_or_p, n_or_d
    denom = float(u @ n)
    tpar = float((q - p0) @ n) / denom
    return p0 + tpar * u


def _line_dir_of(f: Flipper):
    return f.data.direction.basis[0]


def _line_anchor_of(f: Flipper):
    return f.data.anchor


def _signed_angle_about(u, a, b):
    ap = a - (a @ u) * u
    bp = b - (b @ u) * u
    ap = normalize(ap)
    bp = normalize(bp)
    return math.atan2(float(np.cross(ap, bp) @ u), float(ap @ bp))


def _screw_isometry(p, u, angle, shift) -> Isometry:
    a = _rodrigues(u, angle)
    m = np.eye(4)
    m[:3, :3] = a
    m[:3, 3] = (np.eye(3) - a) @ p + shift * np.asarray(u, float)
    return Isometry("E3", m)


# --- H2 fallback -------------------------------------------------------------


def _h2_fallback(b_t, b_s, tol):
    # Degenerate parallel configurations: replace the middle pair by an
    # isometry whose pencil meets the tail line, turning the problem into a
    # rotation composed with the rest.
    t = encode(b_t)
    s = encode(b_s)
    bt2 = decompose(t)
    bs2 = decompose(s)
    steps = [Move("rebase", "first", b_t, bt2), Move("rebase", "second", b_s, bs2)]
    a, b = bt2.tail, bt2.head
    c, d = bs2.tail, bs2.head
    u = flip_of(c) @ flip_of(b)
    if u.is_identity(nk.DEFAULT_TOL):
        return H2TResult(Biflipper(a, d), steps)
    q = _h2_point_on_line(a)
    pen = invariant_pencil(Isometry("H2", u.matrix))
    line = pen.line_through(q)
    if line is None:
        v, _ = _h2_frame(q)
        line = h2_line_from_normal(v)
    mid_before = Biflipper(b, c)
    mid_after = rebase(Isometry("H2", u.matrix), line, "tail", tol)
    steps.append(Move("rebase", "middle", mid_before, mid_after))
    l_f, m_f = mid_after.tail, mid_after.head
    if flippers_equal(l_f, a, 1e-7):
        return H2TResult(Biflipper(m_f, d), steps)
    inner = head_to_tail(Biflipper(a, l_f), Biflipper(m_f, d), "fallback", tol)
    return H2TResult(inner.biflipper, steps + list(inner.steps))


def _h2_point_on_line(f: Flipper):
    from .biflipper import _h2_axis_frame, _h2_line_normal

    q0, _ = _h2_axis_frame(_h2_line_normal(f))
    return q0


# ---------------------------------------------------------------------------
# explicit screw head-to-tail (E3, skew line pairs)


def compose_screws(b1: Biflipper, b2: Biflipper, tol: float = 1e-8) -> H2TResult:
    """Head-to-tail composition of two skew-line biflippers.

    Extends the arrows to the screw axes, finds their common perpendicular,
    glides/rotates each biflipper along its own axis until the middle
    flippers coincide with that perpendicular, and joins the outer pair.
    """
    for b in (b1, b2):
        if b.space != "E3":
            raise SpaceMismatch("compose_screws works in E3")
        for f in (b.tail, b.head):
            if f.kind != "line":
                raise WrongFlipperKind("compose_screws needs line pairs")
    x_anchor, x_dir = _axis_of_pair(b1)
    y_anchor, y_dir = _axis_of_pair(b2)
    z_anchor, z_dir = _common_perp(x_anchor, x_dir, y_anchor, y_dir)
    z = e_line("E3", z_anchor, z_dir)
    g1 = _carry_to(b1.head, x_anchor, x_dir, z_anchor, z_dir)
    b1m = conjugate(b1, g1, 1e-6)
    g2 = _carry_to(b2.tail, y_anchor, y_dir, z_anchor, z_dir)
    b2m = conjugate(b2, g2, 1e-6)
    steps = [Move("screw-adjust", "first", b1, b1m),
             Move("screw-adjust", "second", b2, b2m)]
    if not (flippers_equal(b1m.head, z, 1e-6) and flippers_equal(b2m.tail, z, 1e-6)):
        raise DegenerateAxes("could not align the middle flippers on the common perpendicular")
    return H2TResult(Biflipper(b1m.tail, b2m.head), steps)


def _axis_of_pair(b: Biflipper):
    d1 = _line_dir_of(b.tail)
    p1 = _line_anchor_of(b.tail)
    d2 = _line_dir_of(b.head)
    p2 = _line_anchor_of(b.head)
    if np.linalg.norm(np.cross(d1, d2)) < 1e-9 and _line_dist(p1, d1, p2, d2) < 1e-9:
        raise DegenerateAxes("identical lines have no well-defined screw axis")
    return _common_perp(p1, d1, p2, d2)


def _carry_to(moving: Flipper, ax_p, ax_u, z_p, z_u) -> Isometry:
    """Screw about the axis carrying one perpendicular line onto another."""
    m_p = _line_anchor_of(moving)
    m_d = _line_dir_of(moving)
    foot_m = _meet_on_axis(ax_p, ax_u, m_p, m_d)
    foot_z = _meet_on_axis(ax_p, ax_u, z_p, z_u)
    shift = float((foot_z - foot_m) @ ax_u)
    angle = _signed_angle_about(ax_u, m_d, z_u)
    return _screw_isometry(ax_p, ax_u, angle, shift)


def _meet_on_axis(ax_p, ax_u, p, d):
    mat = np.column_stack([ax_u, -d])
    sol, *_ = np.linalg.lstsq(mat, p - ax_p, rcond=None)
    return ax_p + sol[0] * ax_u
