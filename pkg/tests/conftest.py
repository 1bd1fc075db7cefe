import numpy as np
import pytest

import biflip.numkernel as nk
from biflip import flips as F
from biflip import biflipper as B


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def rnd_disk_point(rng, rmax=0.8):
    while True:
        u = rng.uniform(-rmax, rmax, 2)
        if u @ u < rmax * rmax:
            return u


def rnd_ball_point(rng, rmax=0.7):
    while True:
        u = rng.uniform(-rmax, rmax, 3)
        if u @ u < rmax * rmax:
            return u


def rnd_flipper(space, rng):
    """A random proper flipper with well-separated defining data."""
    if space == "E1":
        return F.e_point("E1", [rng.uniform(-5, 5)])
    if space == "E2":
        if rng.integers(0, 2) == 0:
            return F.e_point("E2", rng.uniform(-5, 5, 2))
        return F.e_line("E2", rng.uniform(-5, 5, 2), rng.normal(size=2))
    if space == "E3":
        k = rng.integers(0, 3)
        if k == 0:
            return F.e_point("E3", rng.uniform(-5, 5, 3))
        if k == 1:
            return F.e_line("E3", rng.uniform(-5, 5, 3), rng.normal(size=3))
        return F.e_plane(rng.uniform(-5, 5, 3), rng.normal(size=3))
    if space == "S2":
        v = rng.normal(size=3)
        return F.s2_circle(v) if rng.integers(0, 2) == 0 else F.s2_pair(v)
    if space == "RP2":
        return F.rp2_point(rng.normal(size=3))
    if space == "H2":
        if rng.integers(0, 2) == 0:
            return F.h_point("H2", rnd_disk_point(rng), "poincare-disk")
        while True:
            p1, p2 = rnd_disk_point(rng, 0.6), rnd_disk_point(rng, 0.6)
            if np.linalg.norm(p1 - p2) > 0.15:
                return F.h2_line_through(p1, p2)
    if space == "H3":
        k = rng.integers(0, 3)
        if k == 0:
            return F.h_point("H3", rnd_ball_point(rng), "poincare-ball")
        if k == 1:
            return rnd_h3_line(rng)
        return rnd_h3_plane(rng)
    if space == "MOEB":
        if rng.integers(0, 2) == 0:
            return F.lorentz_flipper("MOEB", rnd_h3_plane(rng).data)
        return F.lorentz_flipper("MOEB", rnd_h3_line(rng).data)
    raise ValueError(space)


def rnd_h3_line(rng):
    while True:
        a, b = rnd_ball_point(rng), rnd_ball_point(rng)
        if np.linalg.norm(a - b) > 0.2:
            return F.h3_line_through(
                nk.model_convert(a, "poincare-ball", "hyperboloid"),
                nk.model_convert(b, "poincare-ball", "hyperboloid"),
            )


def rnd_h3_plane(rng):
    while True:
        n = rng.normal(size=4)
        if nk.SPACES["H3"].form.dot(n, n) < -0.1:
            return F.h3_plane_from_normal(n)


def rnd_biflipper(space, rng):
    return B.Biflipper(rnd_flipper(space, rng), rnd_flipper(space, rng))


def rnd_isometry(space, rng, odd=False):
    """Encode a random flipper pair, optionally composed with a third flip.

    Hyperbolic-plane samples are rejected when their fixed data sits far from
    the apex: two disk lines can meet far outside the scene, and any flip
    pair for such a rotation has entries ~ e^(2 distance), beyond what
    doubles can cancel to absolute 1e-9.  Tolerances in this suite are
    absolute, so scenes stay inside a bounded working region.
    """
    while True:
        t = B.encode(rnd_biflipper(space, rng))
        if odd:
            t = F.flip_of(rnd_flipper(space, rng)) @ t
        if space != "H2" or _h2_data_scale(t) < 20.0:
            return t


def _h2_data_scale(t):
    cls = B.classify(t)
    if cls.label in ("rotation",):
        return float(cls.params["center"][0])
    if cls.label in ("hyperbolic-translation", "glide-reflection", "reflection"):
        from biflip.biflipper import _h2_axis_frame

        q0, _ = _h2_axis_frame(cls.params["axis_normal"])
        return float(q0[0]) + abs(float(cls.params.get("length", 0.0)))
    if cls.label == "parallel-motion":
        return abs(float(cls.params["shift"]))
    return 1.0


def rel_scale(m):
    return max(1.0, float(np.max(np.abs(m))))
