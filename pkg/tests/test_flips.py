import math

import numpy as np
import pytest

import biflip.numkernel as nk
from biflip import flips as F
from biflip.errors import EmptyFixedSet, InvalidFlipper, NotInvolution
from conftest import rel_scale, rnd_flipper


def test_point_flip_is_central_symmetry():
    t = F.flip_of(F.e_point("E2", [1.0, 0.0]))
    assert np.allclose(t.apply([0.0, 0.0]), [2.0, 0.0])


def test_great_circle_flip():
    t = F.flip_of(F.s2_circle([0, 0, 1]))
    assert np.allclose(t.matrix, np.diag([1.0, 1.0, -1.0]))


def test_h2_diameter_flip_mirrors_the_disk():
    line = F.h2_line_through([-0.5, 0.0], [0.5, 0.0])
    t = F.flip_of(line)
    p = nk.model_convert([0.0, 0.3], "poincare-disk", "hyperboloid")
    q = nk.model_convert(t.apply(p), "hyperboloid", "poincare-disk")
    assert np.allclose(q, [0.0, -0.3])


def test_flipper_of_involution_examples():
    f = F.flipper_of_involution(F.Isometry("S2", np.diag([1.0, 1.0, -1.0])))
    assert f.kind == "circle"
    assert np.allclose(f.data, [0, 0, 1])
    with pytest.raises(EmptyFixedSet):
        F.flipper_of_involution(F.Isometry("S2", -np.eye(3)))
    rot90 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(NotInvolution):
        F.flipper_of_involution(F.Isometry("E2", rot90))


def test_moeb_point_flip_has_empty_absolute_fixed_set():
    with pytest.raises(EmptyFixedSet):
        F.flipper_of_involution(F.Isometry("MOEB", np.diag([1.0, -1.0, -1.0, -1.0])))


def test_flip_roundtrip_all_spaces(rng):
    for space in ("E1", "E2", "E3", "S2", "RP2", "H2", "H3", "MOEB"):
        for _ in range(125):
            f = rnd_flipper(space, rng)
            t = F.flip_of(f)
            m = t.matrix
            n = m.shape[0]
            assert np.max(np.abs(m @ m - np.eye(n))) <= 1e-10 * rel_scale(m) ** 2
            f2 = F.flipper_of_involution(t)
            assert F.flippers_equal(f, f2, 1e-7), (space, f.kind, f2.kind)


def test_e2_orientation():
    assert F.flip_of(rnd_line()).det() < 0
    assert F.flip_of(F.e_point("E2", [2.0, 1.0])).det() > 0


def rnd_line():
    return F.e_line("E2", [0.3, -1.2], [2.0, 1.0])


def test_invalid_flippers_rejected():
    with pytest.raises(InvalidFlipper):
        F.h_point("H2", [0.5, 1.0, 0.0])  # spacelike
    with pytest.raises(InvalidFlipper):
        F.h2_line_from_normal([1.0, 0.0, 0.0])  # timelike normal
    with pytest.raises(InvalidFlipper):
        F.flipper_from_json("E2", {"kind": "circle", "coords": [0, 0, 1]})


def test_flipper_json_roundtrip(rng):
    for space in ("E1", "E2", "E3", "S2", "RP2", "H2", "H3", "MOEB"):
        for _ in range(40):
            f = rnd_flipper(space, rng)
            obj = F.flipper_to_json(f, "x")
            f2 = F.flipper_from_json(space, obj)
            assert F.flippers_equal(f, f2, 1e-7), (space, f.kind, obj)


def test_move_flipper_conjugates_the_flip(rng):
    for space in ("E2", "E3", "S2", "H2", "H3"):
        for _ in range(60):
            f = rnd_flipper(space, rng)
            g = rnd_flipper(space, rng)
            t = F.flip_of(g)
            moved = F.move_flipper(t, f)
            lhs = F.flip_of(moved).matrix
            rhs = t.matrix @ F.flip_of(f).matrix @ t.inverse().matrix
            assert np.max(np.abs(lhs - rhs)) < 1e-8 * rel_scale(rhs)
