"""Deterministic SVG rendering of scenes and composition traces.

Conventions: arrows are a line plus a triangular head, arc-arrows mark
intersecting flippers, hyperbolic scenes draw in the Poincare disk, sphere
and Moebius scenes project stereographically.  Euclidean 3-space emits a
plain XY projection sketch.  Every coordinate is printed with three
decimals and groups appear in a fixed order, so output is byte-stable.
"""

from __future__ import annotations

import math

import numpy as np

from .biflipper import Biflipper
from .flips import Flipper
from .numkernel import model_convert, normalize

SIZE = 600.0
DISK_R = 270.0


def _fmt(x: float) -> str:
    v = float(x)
    if abs(v) < 5e-4:
        v = 0.0
    return f"{v:.3f}"


class _View:
    """World-to-screen affine map with a fixed canvas."""

    def __init__(self, center, half):
        self.cx, self.cy = center
        self.half = half
        self.scale = (SIZE / 2.0 - 30.0) / half

    def pt(self, p):
        x = SIZE / 2.0 + (p[0] - self.cx) * self.scale
        y = SIZE / 2.0 - (p[1] - self.cy) * self.scale
        return x, y

    def r(self, radius):
        return radius * self.scale


def _scene_view(tag, pts):
    if tag == "H2":
        return _View((0.0, 0.0), 1.0)
    if tag in ("S2", "MOEB", "RP2"):
        return _View((0.0, 0.0), 3.0)
    if not pts:
        return _View((0.0, 0.0), 5.0)
    arr = np.array(pts, dtype=float)
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    center = (lo + hi) / 2.0
    half = max(1.0, float(np.max(hi - lo)) / 2.0 * 1.25)
    return _View((center[0], center[1]), half)


def _view_for(tag, scene_flippers):
    pts = []
    for f in scene_flippers:
        pts.extend(_anchor_points(f))
    return _scene_view(tag, pts)


def _anchor_points(f: Flipper):
    tag = f.space
    if f.kind == "whole":
        return []
    if tag in ("E2", "E3"):
        a = f.data.anchor
        return [a[:2]]
    if tag == "H2":
        if f.kind == "point":
            return [model_convert(f.data.basis[0], "hyperboloid", "poincare-disk")]
        return []
    return []


# --- per-space drawing primitives -------------------------------------------


def _draw_flipper(f: Flipper, view: _View, style: str):
    tag = f.space
    parts = []
    if f.kind == "whole":
        return parts
    if tag in ("E2", "E3"):
        if f.kind == "point":
            x, y = view.pt(f.data.anchor[:2])
            parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" {style}/>')
        elif f.kind == "line":
            seg = _clip_line(f.data.anchor[:2], f.data.direction.basis[0][:2], view)
            if seg:
                (x1, y1), (x2, y2) = seg
                parts.append(
                    f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" {style}/>'
                )
        else:  # E3 plane: dashed trace through the anchor
            n = np.cross(f.data.direction.basis[0], f.data.direction.basis[1])[:2]
            d = np.array([-n[1], n[0]]) if np.linalg.norm(n) > 1e-9 else np.array([1.0, 0.0])
            if np.linalg.norm(d) < 1e-9:
                d = np.array([1.0, 0.0])
            seg = _clip_line(f.data.anchor[:2], d, view)
            if seg:
                (x1, y1), (x2, y2) = seg
                parts.append(
                    f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" stroke-dasharray="8 5" {style}/>'
                )
    elif tag == "H2":
        if f.kind == "point":
            u = model_convert(f.data.basis[0], "hyperboloid", "poincare-disk")
            x, y = view.pt(u)
            parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" {style}/>')
        else:
            parts.append(_h2_line_path(f, view, style))
    elif tag in ("S2", "RP2"):
        v = np.asarray(f.data, float)
        if f.kind == "circle":
            parts.extend(_projected_circle(v, 0.0, view, style))
        else:
            for w in (v, -v):
                if abs(w[2] - 1.0) > 1e-9:
                    p = model_convert(w, "sphere", "stereo-plane")
                    if np.linalg.norm(p) <= 3.2:
                        x, y = view.pt(p)
                        parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" {style}/>')
    elif tag == "MOEB":
        from .flips import _line_endpoints, _subspace_normal

        if f.kind == "circle":
            n = _subspace_normal(f.data)
            parts.extend(_projected_circle(n[1:], n[0], view, style))
        else:
            for w in _line_endpoints(f.data):
                if abs(w[2] - 1.0) > 1e-9:
                    p = model_convert(np.asarray(w), "sphere", "stereo-plane")
                    if np.linalg.norm(p) <= 3.2:
                        x, y = view.pt(p)
                        parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" {style}/>')
    return [p for p in parts if p]


def _clip_line(anchor, direction, view: _View):
    d = np.asarray(direction, float)
    if np.linalg.norm(d) < 1e-12:
        return None
    d = d / np.linalg.norm(d)
    a = np.asarray(anchor, float)
    lo = np.array([view.cx - view.half * 1.6, view.cy - view.half * 1.6])
    hi = np.array([view.cx + view.half * 1.6, view.cy + view.half * 1.6])
    tmin, tmax = -1e18, 1e18
    for k in range(2):
        if abs(d[k]) < 1e-12:
            if a[k] < lo[k] or a[k] > hi[k]:
                return None
            continue
        t1 = (lo[k] - a[k]) / d[k]
        t2 = (hi[k] - a[k]) / d[k]
        t1, t2 = min(t1, t2), max(t1, t2)
        tmin, tmax = max(tmin, t1), min(tmax, t2)
    if tmin >= tmax:
        return None
    return view.pt(a + tmin * d), view.pt(a + tmax * d)


def _h2_line_endpoints(f: Flipper):
    """Ideal endpoints of a hyperbolic line, as points of the unit circle."""
    sub = f.data
    b0, b1 = sub.basis
    e1 = b0 + b1
    e2 = b0 - b1
    out = []
    for e in (e1, e2):
        e = e / e[0]
        out.append(np.array([e[1], e[2]]))
    return out


def _h2_line_path(f: Flipper, view: _View, style: str) -> str:
    e1, e2 = _h2_line_endpoints(f)
    if abs(float(e1 @ e2) + 1.0) < 1e-9:
        (x1, y1), (x2, y2) = view.pt(e1), view.pt(e2)
        return f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" {style}/>'
    mat = np.array([e1, e2])
    c = np.linalg.solve(mat, np.array([1.0, 1.0]))
    r = math.sqrt(max(float(c @ c) - 1.0, 0.0))
    sweep = 1 if (e1[0] - c[0]) * (e2[1] - c[1]) - (e1[1] - c[1]) * (e2[0] - c[0]) > 0 else 0
    # the screen y-axis points down, which mirrors the sweep direction
    sweep = 1 - sweep
    (x1, y1), (x2, y2) = view.pt(e1), view.pt(e2)
    rr = view.r(r)
    return (
        f'<path d="M {_fmt(x1)} {_fmt(y1)} A {_fmt(rr)} {_fmt(rr)} 0 0 {sweep} '
        f'{_fmt(x2)} {_fmt(y2)}" fill="none" {style}/>'
    )


def _projected_circle(normal, offset, view: _View, style: str):
    """Stereographic image of the sphere circle {x . n = offset}."""
    n = np.asarray(normal, float)
    denom = n[2] - offset
    if abs(denom) > 1e-9:
        cx = -n[0] / denom
        cy = -n[1] / denom
        r2 = (n[0] ** 2 + n[1] ** 2) / denom ** 2 + (n[2] + offset) / denom
        if r2 <= 0:
            return []
        r = math.sqrt(r2)
        if math.hypot(cx, cy) + r > 40.0:
            return []
        x, y = view.pt((cx, cy))
        return [f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(view.r(r))}" fill="none" {style}/>']
    d = np.array([-n[1], n[0]])
    if np.linalg.norm(d) < 1e-12:
        return []
    anchor = np.array([n[0], n[1]]) * (offset / max(float(n[0] ** 2 + n[1] ** 2), 1e-12))
    seg = _clip_line(anchor, d, view)
    if not seg:
        return []
    (x1, y1), (x2, y2) = seg
    return [f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" {style}/>']


def _rep_point(f: Flipper, view: _View):
    tag = f.space
    if f.kind == "whole":
        return (view.cx, view.cy)
    if tag in ("E2", "E3"):
        return tuple(f.data.anchor[:2])
    if tag == "H2":
        if f.kind == "point":
            return tuple(model_convert(f.data.basis[0], "hyperboloid", "poincare-disk"))
        e1, e2 = _h2_line_endpoints(f)
        mid = (e1 + e2) / 2.0
        n = np.linalg.norm(mid)
        if n < 1e-9:
            return (0.0, 0.0)
        # pull the chord midpoint onto the geodesic
        mat = np.array([e1, e2])
        c = np.linalg.solve(mat, np.array([1.0, 1.0]))
        r = math.sqrt(max(float(c @ c) - 1.0, 0.0))
        m = c - r * c / np.linalg.norm(c)
        return (float(m[0]), float(m[1]))
    if tag in ("S2", "RP2"):
        v = np.asarray(f.data, float)
        if f.kind != "circle" or abs(v[2]) < 1e-9:
            w = v if abs(v[2] - 1.0) > 1e-9 else -v
            p = model_convert(w, "sphere", "stereo-plane")
            return (float(p[0]), float(p[1]))
        return (-v[0] / v[2], -v[1] / v[2])
    return (0.0, 0.0)


def _arrow(f1: Flipper, f2: Flipper, view: _View, style: str):
    p1 = np.array(_rep_point(f1, view))
    p2 = np.array(_rep_point(f2, view))
    (x1, y1), (x2, y2) = view.pt(p1), view.pt(p2)
    d = np.array([x2 - x1, y2 - y1])
    length = np.linalg.norm(d)
    parts = []
    if length < 8.0:
        # intersecting or coincident flippers: arc-arrow around the spot
        r = 18.0
        parts.append(
            f'<path d="M {_fmt(x1 - r)} {_fmt(y1)} A {_fmt(r)} {_fmt(r)} 0 0 1 '
            f'{_fmt(x1)} {_fmt(y1 - r)}" fill="none" {style}/>'
        )
        tip = np.array([x1, y1 - r])
        back = np.array([x1 - 8.0, y1 - r - 4.0])
        back2 = np.array([x1 - 8.0, y1 - r + 4.0])
    else:
        parts.append(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" {style}/>')
        u = d / length
        n = np.array([-u[1], u[0]])
        tip = np.array([x2, y2])
        back = tip - 12.0 * u + 5.0 * n
        back2 = tip - 12.0 * u - 5.0 * n
    fill_style = style.replace('fill="none" ', "").replace(' fill="none"', "")
    parts.append(
        f'<polygon points="{_fmt(tip[0])},{_fmt(tip[1])} {_fmt(back[0])},{_fmt(back[1])} '
        f'{_fmt(back2[0])},{_fmt(back2[1])}" {fill_style}/>'
    )
    return parts


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def render_svg(scene, result=None) -> str:
    """SVG for a scene; with a composition result, one group per move."""
    tag = scene.space
    flippers = list(scene.flippers.values())
    if result is not None:
        for move in result.steps:
            flippers.extend([move.after.tail, move.after.head])
        flippers.extend([result.biflipper.tail, result.biflipper.head])
    view = _view_for(tag, flippers)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(SIZE)}" height="{int(SIZE)}" '
        f'viewBox="0 0 {int(SIZE)} {int(SIZE)}">',
        f'<rect width="{int(SIZE)}" height="{int(SIZE)}" fill="#ffffff"/>',
    ]
    if tag == "H2":
        x, y = view.pt((0.0, 0.0))
        out.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(view.r(1.0))}" '
            f'fill="none" stroke="#888888" stroke-width="1"/>'
        )
    out.append('<g id="flippers">')
    for i, (ident, f) in enumerate(sorted(scene.flippers.items())):
        color = _PALETTE[i % len(_PALETTE)]
        style = f'stroke="{color}" stroke-width="2" fill="none"'
        out.append(f'<g id="flipper-{ident}">')
        out.extend(_draw_flipper(f, view, style))
        out.append("</g>")
    out.append("</g>")
    out.append('<g id="biflippers">')
    for ident, b in sorted(scene.biflippers.items()):
        style = 'stroke="#333333" stroke-width="1.5" fill="none"'
        out.append(f'<g id="biflipper-{ident}">')
        out.extend(_arrow(b.tail, b.head, view, style))
        out.append("</g>")
    out.append("</g>")
    if result is not None:
        for idx, move in enumerate(result.steps):
            out.append(f'<g id="step-{idx}" class="{move.kind}">')
            faded = 'stroke="#bbbbbb" stroke-width="1" fill="none"'
            solid = f'stroke="{_PALETTE[idx % len(_PALETTE)]}" stroke-width="1.5" fill="none"'
            for f in (move.before.tail, move.before.head):
                out.extend(_draw_flipper(f, view, faded))
            for f in (move.after.tail, move.after.head):
                out.extend(_draw_flipper(f, view, solid))
            out.extend(_arrow(move.after.tail, move.after.head, view, solid))
            out.append("</g>")
        out.append('<g id="result">')
        strong = 'stroke="#000000" stroke-width="2.5" fill="none"'
        for f in (result.biflipper.tail, result.biflipper.head):
            out.extend(_draw_flipper(f, view, strong))
        out.extend(_arrow(result.biflipper.tail, result.biflipper.head, view, strong))
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
