import math

import numpy as np
import pytest

import biflip.numkernel as nk
from biflip import biflipper as B
from biflip import flips as F
from biflip import headtotail as H
from biflip.errors import DegenerateAxes, NotLinked, WrongFlipperKind
from conftest import rel_scale, rnd_biflipper, rnd_flipper


def oracle(b_t, b_s):
    return (B.encode(b_s) @ B.encode(b_t)).matrix


def check_result(res, b_t, b_s, tol=1e-8):
    want = oracle(b_t, b_s)
    got = B.encode(res.biflipper).matrix
    proj = b_t.space == "RP2"
    assert nk.approx_equal(got, want, tol * rel_scale(want), projective=proj)
    # every move preserves the isometry of the biflipper it touches
    for move in res.steps:
        before = B.encode(move.before).matrix
        after = B.encode(move.after).matrix
        assert np.max(np.abs(before - after)) < 1e-7 * rel_scale(before)


def test_two_plane_rotations():
    b1 = B.decompose(B.synthesize(B.IsometryClass("E2", "rotation",
                                                  {"center": np.zeros(2), "angle": math.pi / 2})))
    b2 = B.decompose(B.synthesize(B.IsometryClass("E2", "rotation",
                                                  {"center": np.array([2.0, 0.0]),
                                                   "angle": math.pi / 2})))
    res = H.head_to_tail(b1, b2, "strict")
    cls = B.classify(B.encode(res.biflipper))
    assert cls.label == "rotation"
    assert abs(abs(cls.params["angle"]) - math.pi) < 1e-9
    assert np.allclose(cls.params["center"], [1.0, -1.0])
    check_result(res, b1, b2)


def test_sphere_half_turns():
    b1 = B.decompose(F.Isometry("S2", np.diag([1.0, -1.0, -1.0])))
    b2 = B.decompose(F.Isometry("S2", np.diag([-1.0, -1.0, 1.0])))
    res = H.head_to_tail(b1, b2, "strict")
    assert np.allclose(B.encode(res.biflipper).matrix, np.diag([-1.0, 1.0, -1.0]))


def test_two_glides_cross():
    g1 = B.synthesize(B.IsometryClass("E2", "glide-reflection",
                                      {"axis_point": np.zeros(2),
                                       "axis_dir": np.array([1.0, 0.0]),
                                       "glide": np.array([1.0, 0.0])}))
    g2 = B.synthesize(B.IsometryClass("E2", "glide-reflection",
                                      {"axis_point": np.zeros(2),
                                       "axis_dir": np.array([0.0, 1.0]),
                                       "glide": np.array([0.0, 1.0])}))
    assert np.allclose(g1.apply([0.0, 0.0]), [1.0, 0.0])
    res = H.head_to_tail(B.decompose(g1), B.decompose(g2), "strict")
    cls = B.classify(B.encode(res.biflipper))
    assert cls.label == "rotation"
    assert abs(abs(cls.params["angle"]) - math.pi) < 1e-9
    assert np.allclose(cls.params["center"], [-0.5, 0.5])


def test_identity_operand_passthrough():
    b = rnd_biflipper("E2", np.random.default_rng(1))
    ident = B.Biflipper(F.whole("E2"), F.whole("E2"))
    assert H.head_to_tail(ident, b).biflipper is b
    assert H.head_to_tail(b, ident).biflipper is b


def test_soundness_random_pairs(rng):
    for space in ("E2", "S2", "RP2", "H2", "E3"):
        for _ in range(250):
            b_t = rnd_biflipper(space, rng)
            b_s = rnd_biflipper(space, rng)
            res = H.head_to_tail(b_t, b_s, "fallback")
            check_result(res, b_t, b_s)


def test_h3_and_moeb_composition(rng):
    for space in ("H3", "MOEB"):
        for _ in range(100):
            b_t = rnd_biflipper(space, rng)
            b_s = rnd_biflipper(space, rng)
            res = H.head_to_tail(b_t, b_s, "fallback")
            check_result(res, b_t, b_s)


def test_strict_mode_exhibits_common_flipper(rng):
    for _ in range(50):
        b_t = rnd_biflipper("E2", rng)
        b_s = rnd_biflipper("E2", rng)
        res = H.head_to_tail(b_t, b_s, "strict")
        rebases = [m for m in res.steps if m.kind == "rebase"]
        assert len(rebases) == 2
        assert F.flippers_equal(rebases[0].after.head, rebases[1].after.tail, 1e-6)


def test_linked_returns_common_flipper_e2(rng):
    for _ in range(100):
        s = B.encode(rnd_biflipper("E2", rng))
        t = B.encode(rnd_biflipper("E2", rng))
        e = H.linked(s, t)
        assert e is not None
        B.rebase(t, e, "head")
        B.rebase(s, e, "tail")


def test_linked_totality_orientation_preserving_e3(rng):
    for _ in range(200):
        def orp():
            k = rng.integers(0, 3)
            if k == 0:
                return B.Biflipper(F.e_point("E3", rng.uniform(-5, 5, 3)),
                                   F.e_point("E3", rng.uniform(-5, 5, 3)))
            if k == 1:
                return B.Biflipper(F.e_line("E3", rng.uniform(-5, 5, 3), rng.normal(size=3)),
                                   F.e_line("E3", rng.uniform(-5, 5, 3), rng.normal(size=3)))
            return B.Biflipper(F.e_plane(rng.uniform(-5, 5, 3), rng.normal(size=3)),
                               F.e_plane(rng.uniform(-5, 5, 3), rng.normal(size=3)))
        s, t = B.encode(orp()), B.encode(orp())
        assert H.linked(s, t) is not None


def _rotary(c, u, theta):
    return B.synthesize(B.IsometryClass("E3", "rotary-reflection",
                                        {"fixed_point": np.asarray(c, float),
                                         "axis_dir": nk.normalize(u), "angle": theta}))


def test_rotary_pair_not_linked_and_fallback(rng):
    for _ in range(25):
        t1 = _rotary([0, 0, rng.uniform(-3, 3)], [0, 0, 1], rng.uniform(0.3, 2.8))
        t2 = _rotary([1, rng.uniform(0.5, 3), 5], [0, 1, 0], rng.uniform(0.3, 2.8))
        assert H.linked(t2, t1) is None
        b1, b2 = B.decompose(t1), B.decompose(t2)
        with pytest.raises(NotLinked):
            H.head_to_tail(b1, b2, "strict")
        res = H.head_to_tail(b1, b2, "fallback")
        assert np.max(np.abs(B.encode(res.biflipper).matrix - (t2 @ t1).matrix)) < 1e-8
        assert any(m.kind == "commuting-transform" for m in res.steps)


def test_rotary_with_common_perpendicular_through_fixed_points_is_linked():
    # both fixed points on the common perpendicular of the axes
    t1 = _rotary([0, 0, 0], [0, 0, 1], 1.1)
    t2 = _rotary([3, 0, 0], [0, 1, 0], 0.7)
    e = H.linked(t2, t1)
    assert e is not None and e.kind == "line"


def test_rotary_times_screw_fallback(rng):
    for _ in range(25):
        t1 = _rotary([0, 0, rng.uniform(-2, 2)], [0, 0, 1], rng.uniform(0.3, 2.8))
        screw = B.synthesize(B.IsometryClass("E3", "screw-motion",
                                             {"axis_point": np.array([2.0, rng.uniform(1, 3), 4.0]),
                                              "axis_dir": np.array([0.0, 1.0, 0.0]),
                                              "angle": rng.uniform(0.3, 2.8),
                                              "translation": rng.uniform(0.5, 2.0)}))
        for b_t, b_s in ((B.decompose(t1), B.decompose(screw)),
                         (B.decompose(screw), B.decompose(t1))):
            res = H.head_to_tail(b_t, b_s, "fallback")
            check_result(res, b_t, b_s)


def test_compose_screws_examples():
    b1 = B.Biflipper(
        F.e_line("E3", [0, 0, 0], [1, 0, 0]),
        F.e_line("E3", [0, 0, 1], [math.cos(math.pi / 4), math.sin(math.pi / 4), 0]),
    )
    res = H.compose_screws(b1, b1)
    cls = B.classify(B.encode(res.biflipper))
    assert cls.label == "screw-motion"
    assert abs(abs(cls.params["angle"]) - math.pi) < 1e-9
    assert abs(abs(cls.params["translation"]) - 4.0) < 1e-9
    assert [m.kind for m in res.steps] == ["screw-adjust", "screw-adjust"]

    res = H.compose_screws(b1, b1.swap())
    assert B.encode(res.biflipper).is_identity(1e-9)


def test_compose_screws_random_perpendicular_axes(rng):
    for _ in range(100):
        def line():
            return F.e_line("E3", rng.uniform(-5, 5, 3), rng.normal(size=3))
        b1 = B.Biflipper(line(), line())
        b2 = B.Biflipper(line(), line())
        res = H.compose_screws(b1, b2)
        want = oracle(b1, b2)
        assert np.max(np.abs(B.encode(res.biflipper).matrix - want)) < 1e-8 * rel_scale(want)


def test_compose_screws_rejects_non_lines():
    b = B.Biflipper(F.e_point("E3", [0, 0, 0]), F.e_point("E3", [1, 0, 0]))
    with pytest.raises(WrongFlipperKind):
        H.compose_screws(b, b)


def test_compose_screws_identical_lines_degenerate():
    l = F.e_line("E3", [0, 0, 0], [1, 0, 0])
    with pytest.raises(DegenerateAxes):
        H.compose_screws(B.Biflipper(l, l), B.Biflipper(l, l))


def test_h2_degenerate_parallel_pair_falls_back(rng):
    # two translations whose axes meet only on the absolute are not linked
    xi = np.array([1.0, 1.0, 0.0])
    l1 = F.h2_line_from_normal(nk.lcross(xi, nk.model_convert([0.0, 0.3], "poincare-disk", "hyperboloid")))
    l2 = F.h2_line_from_normal(nk.lcross(xi, nk.model_convert([0.0, -0.4], "poincare-disk", "hyperboloid")))
    t1 = B.synthesize(B.IsometryClass("H2", "hyperbolic-translation",
                                      {"axis_normal": B._h2_line_normal(l1), "length": 0.9}))
    t2 = B.synthesize(B.IsometryClass("H2", "hyperbolic-translation",
                                      {"axis_normal": B._h2_line_normal(l2), "length": 1.4}))
    assert H.linked(t2, t1) is None
    b1, b2 = B.decompose(t1), B.decompose(t2)
    with pytest.raises(NotLinked):
        H.head_to_tail(b1, b2, "strict")
    res = H.head_to_tail(b1, b2, "fallback")
    check_result(res, b1, b2)


def test_h2_parallel_motions_share_pencil_line():
    p1 = B.synthesize(B.IsometryClass("H2", "parallel-motion",
                                      {"absolute_point": np.array([1.0, 1.0, 0.0]), "shift": 0.8}))
    p2 = B.synthesize(B.IsometryClass("H2", "parallel-motion",
                                      {"absolute_point": np.array([1.0, 0.0, 1.0]), "shift": -0.5}))
    e = H.linked(p2, p1)
    assert e is not None and e.kind == "line"
    # the common line joins the two absolute centers
    n = B._h2_line_normal(e)
    assert abs(B._ldot(n, [1.0, 1.0, 0.0])) < 1e-9
    assert abs(B._ldot(n, [1.0, 0.0, 1.0])) < 1e-9


def test_s2_head_to_tail_matches_quaternions(rng):
    from biflip import quaternion as Q

    for _ in range(100):
        v1, w1 = rng.normal(size=3), rng.normal(size=3)
        v2, w2 = rng.normal(size=3), rng.normal(size=3)
        b_t = B.Biflipper(F.s2_pair(v1), F.s2_pair(w1))
        b_s = B.Biflipper(F.s2_pair(v2), F.s2_pair(w2))
        res = H.head_to_tail(b_t, b_s, "fallback")
        got = B.encode(res.biflipper).matrix
        q = Q.qmul(Q.lift_biflipper(b_s), Q.lift_biflipper(b_t))
        assert np.max(np.abs(Q.rotation_matrix(q) - got)) < 1e-9


def test_compose_with_fallback_wrapper(rng):
    for space in ("E2", "E3", "H2"):
        for _ in range(30):
            t = B.encode(rnd_biflipper(space, rng))
            s = B.encode(rnd_biflipper(space, rng))
            res = H.compose_with_fallback(s, t)
            want = (s @ t).matrix
            assert np.max(np.abs(B.encode(res.biflipper).matrix - want)) < 1e-8 * rel_scale(want)
