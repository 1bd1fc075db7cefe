import math

import numpy as np
import pytest

import biflip.numkernel as nk
from biflip import biflipper as B
from biflip import flips as F
from biflip.errors import (
    IdentityHasNoPencil,
    NonEuclideanFactor,
    NotCommuting,
    NotCompatible,
    NotInCentralizer,
)
from conftest import rel_scale, rnd_biflipper, rnd_disk_point, rnd_flipper, rnd_isometry


# --- encode ------------------------------------------------------------------


def test_encode_point_pair_is_doubled_translation():
    b = B.Biflipper(F.e_point("E2", [0, 0]), F.e_point("E2", [1, 0]))
    cls = B.classify(B.encode(b))
    assert cls.label == "translation"
    assert np.allclose(cls.params["vector"], [2, 0])


def test_encode_lines_gives_paper_angle():
    a = math.radians(75.5)
    b = B.Biflipper(F.e_line("E2", [0, 0], [1, 0]),
                    F.e_line("E2", [0, 0], [math.cos(a), math.sin(a)]))
    cls = B.classify(B.encode(b))
    assert cls.label == "rotation"
    assert abs(abs(math.degrees(cls.params["angle"])) - 151.0) < 1e-9
    assert np.allclose(cls.params["center"], [0, 0])


def test_encode_skew_lines_is_screw():
    b = B.Biflipper(
        F.e_line("E3", [0, 0, 0], [1, 0, 0]),
        F.e_line("E3", [0, 0, 1], [math.cos(math.pi / 4), math.sin(math.pi / 4), 0]),
    )
    cls = B.classify(B.encode(b))
    assert cls.label == "screw-motion"
    assert abs(cls.params["angle"] - math.pi / 2) < 1e-9
    assert abs(abs(cls.params["translation"]) - 2.0) < 1e-9
    assert np.allclose(np.abs(cls.params["axis_dir"]), [0, 0, 1])


# --- classify ----------------------------------------------------------------


def test_classify_reflection_from_point_on_line():
    b = B.Biflipper(F.e_point("E2", [0, 0]), F.e_line("E2", [0, 0], [1, 0]))
    cls = B.classify(B.encode(b))
    assert cls.label == "reflection"
    assert np.allclose(cls.params["axis_point"], [0, 0])
    assert abs(abs(cls.params["axis_dir"][1]) - 1.0) < 1e-9  # mirror x = 0


def test_classify_glide_from_point_and_line():
    b = B.Biflipper(F.e_point("E2", [0, 1]), F.e_line("E2", [0, 0], [1, 0]))
    t = B.encode(b)
    assert np.allclose(t.apply([3.0, 4.0]), [-3.0, 2.0])  # (x,y) -> (-x, y-2)
    cls = B.classify(t)
    assert cls.label == "glide-reflection"
    assert np.allclose(cls.params["glide"], [0, -2], atol=1e-12)


def test_identity_biflipper():
    f = F.e_line("E2", [1, 2], [3, 1])
    assert B.classify(B.encode(B.Biflipper(f, f))).label == "identity"


def test_antipodal_map_from_polar_pair():
    b = B.Biflipper(F.s2_circle([0, 0, 1]), F.s2_pair([0, 0, 1]))
    t = B.encode(b)
    assert np.allclose(t.matrix, -np.eye(3))
    assert B.classify(t).label == "central-symmetry"


def test_classify_synthesize_roundtrip(rng):
    for space in ("E1", "E2", "E3", "S2", "RP2", "H2"):
        for _ in range(200):
            t = rnd_isometry(space, rng, odd=bool(rng.integers(0, 2)))
            cls = B.classify(t)
            t2 = B.synthesize(cls)
            proj = space == "RP2"
            assert nk.approx_equal(t2.matrix, t.matrix, 1e-7 * rel_scale(t.matrix),
                                   projective=proj), (space, cls.label)


def test_h3_coarse_labels(rng):
    seen = set()
    for _ in range(200):
        t = rnd_isometry("H3", rng, odd=bool(rng.integers(0, 2)))
        seen.add(B.classify(t).label)
    assert seen <= {"identity", "elliptic", "parabolic", "loxodromic",
                    "orientation-reversing-moebius"}
    assert "loxodromic" in seen and "orientation-reversing-moebius" in seen


# --- decompose ---------------------------------------------------------------


def test_decompose_translation_canonical():
    t = B.synthesize(B.IsometryClass("E2", "translation", {"vector": np.array([2.0, 0.0])}))
    b = B.decompose(t)
    assert b.tail.kind == "point" and b.head.kind == "point"
    assert np.allclose(b.tail.data.anchor, [0, 0])
    assert np.allclose(b.head.data.anchor, [1, 0])


def test_decompose_identity_improper():
    b = B.decompose(F.identity("S2"))
    assert b.tail.is_whole and b.head.is_whole
    assert not b.proper


def test_decompose_rotary_reflection_is_line_plane():
    t = B.synthesize(B.IsometryClass("E3", "rotary-reflection",
                                     {"fixed_point": np.zeros(3),
                                      "axis_dir": np.array([0.0, 0.0, 1.0]),
                                      "angle": math.pi / 2}))
    b = B.decompose(t)
    assert {b.tail.kind, b.head.kind} == {"line", "plane"}
    assert nk.approx_equal(B.encode(b).matrix, t.matrix, 1e-10)


def test_encode_decompose_identity_all_spaces(rng):
    for space in ("E1", "E2", "E3", "S2", "RP2", "H2", "H3", "MOEB"):
        for _ in range(1000):
            t = rnd_isometry(space, rng, odd=bool(rng.integers(0, 2)))
            b = B.decompose(t)
            proj = space == "RP2"
            assert nk.approx_equal(B.encode(b).matrix, t.matrix,
                                   1e-9 * rel_scale(t.matrix), projective=proj), space


# --- equivalence and moves ---------------------------------------------------


def test_equivalent_translations_and_rotations():
    b1 = B.Biflipper(F.e_point("E2", [0, 0]), F.e_point("E2", [1, 0]))
    b2 = B.Biflipper(F.e_point("E2", [5, 3]), F.e_point("E2", [6, 3]))
    assert B.equivalent(b1, b2)
    b3 = B.Biflipper(F.e_point("E2", [0, 0]), F.e_point("E2", [0, 1]))
    assert not B.equivalent(b1, b3)
    rot = B.Biflipper(F.e_line("E2", [1, 1], [1, 0]), F.e_line("E2", [1, 1], [1, 1]))
    g = B.synthesize(B.IsometryClass("E2", "rotation", {"center": np.array([1.0, 1.0]),
                                                        "angle": 0.37}))
    assert B.equivalent(rot, B.conjugate(rot, g))


def test_transform_commuting_perpendicular_lines():
    a = F.e_line("E2", [0, 0], [0, 1])
    bf = F.e_line("E2", [3, 0], [0, 1])
    c = F.e_line("E2", [0, 0], [1, 0])
    b = B.Biflipper(a, bf)
    out = B.transform_commuting(b, c)
    assert out.tail.kind == "point" and out.head.kind == "point"
    assert np.allclose(out.tail.data.anchor, [0, 0])
    assert np.allclose(out.head.data.anchor, [3, 0])
    assert B.equivalent(b, out)
    cls = B.classify(B.encode(out))
    assert np.allclose(cls.params["vector"], [6, 0])


def test_transform_commuting_whole_keeps_biflipper():
    b = B.Biflipper(F.e_line("E2", [0, 0], [0, 1]), F.e_line("E2", [3, 0], [0, 1]))
    out = B.transform_commuting(b, F.whole("E2"))
    assert F.flippers_equal(out.tail, b.tail) and F.flippers_equal(out.head, b.head)


def test_transform_commuting_rejects_generic_line():
    b = B.Biflipper(F.e_line("E2", [0, 0], [0, 1]), F.e_line("E2", [3, 0], [0, 1]))
    with pytest.raises(NotCommuting):
        B.transform_commuting(b, F.e_line("E2", [0, 0], [1, 1]))


def test_conjugate_requires_centralizer():
    rot = B.Biflipper(F.e_line("E2", [1, 1], [1, 0]), F.e_line("E2", [1, 1], [1, 1]))
    with pytest.raises(NotInCentralizer):
        B.conjugate(rot, B.synthesize(B.IsometryClass("E2", "translation",
                                                      {"vector": np.array([1.0, 0.0])})))


# --- rebase ------------------------------------------------------------------


def test_rebase_rotation_through_x_axis():
    t = B.synthesize(B.IsometryClass("E2", "rotation",
                                     {"center": np.zeros(2), "angle": math.pi / 2}))
    e = F.e_line("E2", [0, 0], [1, 0])
    out = B.rebase(t, e, "tail")
    assert out.head.kind == "line"
    d = out.head.data.direction.basis[0]
    assert abs(abs(d @ np.array([1, 1]) / math.sqrt(2)) - 1.0) < 1e-9  # 45 degrees
    assert nk.approx_equal(B.encode(out).matrix, t.matrix, 1e-10)


def test_rebase_translation_head_side():
    t = B.synthesize(B.IsometryClass("E2", "translation", {"vector": np.array([2.0, 0.0])}))
    e = F.e_line("E2", [5, 0], [0, 1])
    out = B.rebase(t, e, "head")
    assert out.tail.kind == "line"
    assert abs(out.tail.data.anchor[0] - 4.0) < 1e-9
    assert nk.approx_equal(B.encode(out).matrix, t.matrix, 1e-10)


def test_rebase_incompatible_line():
    t = B.synthesize(B.IsometryClass("E2", "translation", {"vector": np.array([2.0, 0.0])}))
    with pytest.raises(NotCompatible):
        B.rebase(t, F.e_line("E2", [0, 0], [1, 0]), "tail")


# --- witnesses, products, pencils ---------------------------------------------


def test_strong_reversibility_witness(rng):
    for space in ("E2", "S2", "H2", "E3", "H3"):
        for _ in range(50):
            t = rnd_isometry(space, rng, odd=bool(rng.integers(0, 2)))
            a, bf = B.strong_reversibility_witness(t)
            prod = F.flip_of(bf) @ F.flip_of(a)
            assert nk.approx_equal(prod.matrix, t.matrix, 1e-8 * rel_scale(t.matrix))
    a, bf = B.strong_reversibility_witness(F.identity("E2"))
    assert a.is_whole and bf.is_whole


def test_h2_parallel_motion_witness_is_line_pair(rng):
    xi = np.array([1.0, 0.6, 0.8])
    t = B.synthesize(B.IsometryClass("H2", "parallel-motion",
                                     {"absolute_point": xi, "shift": 1.3}))
    a, bf = B.strong_reversibility_witness(t)
    assert a.kind == "line" and bf.kind == "line"
    pen = B.invariant_pencil(t)
    assert pen.kind == "parabolic"
    assert pen.contains_line(a, 1e-9) and pen.contains_line(bf, 1e-9)


def test_product_biflipper_translations():
    b1 = B.Biflipper(F.e_point("E1", [0.0]), F.e_point("E1", [1.0]))
    b2 = B.Biflipper(F.e_point("E1", [0.0]), F.e_point("E1", [2.0]))
    bp = B.product_biflipper(b1, b2)
    cls = B.classify(B.encode(bp))
    assert cls.label == "translation" and np.allclose(cls.params["vector"], [2, 4])


def test_product_rotation_by_point_reflection_is_rotary():
    rot = B.decompose(B.synthesize(B.IsometryClass("E2", "rotation",
                                                   {"center": np.array([1.0, 2.0]),
                                                    "angle": 0.9})))
    refl = B.Biflipper(F.e_point("E1", [3.0]), F.whole("E1"))
    cls = B.classify(B.encode(B.product_biflipper(rot, refl)))
    assert cls.label == "rotary-reflection"


def test_product_with_identity_factor_ignores_the_flipper():
    rot = B.decompose(B.synthesize(B.IsometryClass("E2", "rotation",
                                                   {"center": np.array([1.0, 2.0]),
                                                    "angle": 0.9})))
    for c in (F.e_point("E1", [7.0]), F.whole("E1")):
        bp = B.product_biflipper(rot, B.Biflipper(c, c))
        cls = B.classify(B.encode(bp))
        assert cls.label == "rotation"
        assert abs(cls.params["angle"] - 0.9) < 1e-9


def test_product_rejects_non_euclidean():
    b = B.Biflipper(F.s2_pair([1, 0, 0]), F.s2_pair([0, 1, 0]))
    with pytest.raises(NonEuclideanFactor):
        B.product_biflipper(b, b)


def test_invariant_pencil_cases(rng):
    c = nk.model_convert([0.2, 0.1], "poincare-disk", "hyperboloid")
    rot = B.synthesize(B.IsometryClass("H2", "rotation", {"center": c, "angle": 1.0}))
    pen = B.invariant_pencil(rot)
    assert pen.kind == "elliptic"
    line = F.h2_line_through([0.2, 0.1], [-0.3, 0.4])
    assert pen.contains_line(line, 1e-9)

    axis = F.h2_line_through([-0.5, 0.0], [0.5, 0.0])
    from biflip.biflipper import _h2_line_normal

    tr = B.synthesize(B.IsometryClass("H2", "hyperbolic-translation",
                                      {"axis_normal": _h2_line_normal(axis), "length": 1.2}))
    pen = B.invariant_pencil(tr)
    assert pen.kind == "hyperbolic"

    par = B.synthesize(B.IsometryClass("H2", "parallel-motion",
                                       {"absolute_point": np.array([1.0, 1.0, 0.0]),
                                        "shift": 0.7}))
    assert B.invariant_pencil(par).kind == "parabolic"

    with pytest.raises(IdentityHasNoPencil):
        B.invariant_pencil(F.identity("H2"))


def test_swap_encodes_inverse(rng):
    for space in ("E2", "E3", "S2", "H2"):
        for _ in range(100):
            b = rnd_biflipper(space, rng)
            lhs = B.encode(b.swap()).matrix
            rhs = B.encode(b).inverse().matrix
            assert np.max(np.abs(lhs - rhs)) < 1e-9 * rel_scale(rhs)
