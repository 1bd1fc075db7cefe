"""Rewriting of plane-reflection words by pencil and involution relations.

A word lists its mirror lines in application order (the leftmost letter acts
first), so [a, b, c] encodes flip(c) o flip(b) o flip(a).  Two rewriting
rules generate every relation among plane reflections: a flip squared is the
identity, and a pair of reflections may be replaced by any other pair
cutting the same angle or offset inside its pencil (all four lines parallel,
or all four through one point).

``reduce`` shortens any word below four letters: even words reach length at
most two, odd words length at most three, dropping to a single letter
exactly when the encoded isometry is a reflection.  A glide reflection needs
three mirrors, so no line-letter rewriting can do better; parity of the
word length is invariant because every rule replaces letters two at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numkernel as nk
from .biflipper import Biflipper, classify, encode, rebase
from .errors import WrongFlipperKind
from .flips import Flipper, Isometry, e_line, flip_of, flippers_equal, identity
from .numkernel import AffineSubspace, normalize


@dataclass(frozen=True)
class RewriteStep:
    kind: str                # involution | pencil-parallel | pencil-concurrent
    index: int               # position of the replaced letters
    removed: tuple
    inserted: tuple


@dataclass(frozen=True)
class Derivation:
    steps: tuple


def _check_letters(letters):
    for f in letters:
        if f.space != "E2" or f.kind != "line":
            raise WrongFlipperKind("reflection words take E2 line flippers")
    return list(letters)


def word_isometry(letters) -> Isometry:
    """The encoded isometry; the leftmost letter is applied first."""
    m = np.eye(3)
    for f in letters:
        m = flip_of(f).matrix @ m
    return Isometry("E2", m)


def replay(letters, derivation: Derivation):
    """Apply a derivation to a word, validating each replacement site."""
    word = _check_letters(letters)
    for step in derivation.steps:
        i = step.index
        if len(step.removed) > len(word) - i:
            raise ValueError("derivation does not match the word")
        for f, g in zip(word[i:i + len(step.removed)], step.removed):
            if not flippers_equal(f, g, 1e-7):
                raise ValueError("derivation does not match the word")
        word[i:i + len(step.removed)] = list(step.inserted)
    return word


def reduce(letters):
    """Shorten a reflection word below four letters.

    Returns the reduced word and the replayable derivation.  The encoded
    isometry and the parity of the length are preserved.
    """
    word = _check_letters(letters)
    steps = []

    def eliminate_adjacent():
        changed = True
        while changed:
            changed = False
            for i in range(len(word) - 1):
                if flippers_equal(word[i], word[i + 1], 1e-9):
                    steps.append(RewriteStep("involution", i, (word[i], word[i + 1]), ()))
                    del word[i:i + 2]
                    changed = True
                    break

    eliminate_adjacent()
    while len(word) >= 4:
        before = len(word)
        _reduce_window(word, steps)
        eliminate_adjacent()
        if len(word) >= before:
            raise RuntimeError("reduction failed to shorten the word")
    if len(word) == 3:
        _reduce_triple(word, steps)
        eliminate_adjacent()
    if len(word) == 2 and flippers_equal(word[0], word[1], 1e-9):
        steps.append(RewriteStep("involution", 0, (word[0], word[1]), ()))
        del word[0:2]
    return word, Derivation(tuple(steps))


def is_identity(letters) -> bool:
    reduced, _ = reduce(letters)
    return len(reduced) == 0


# ---------------------------------------------------------------------------


def _line_parts(f: Flipper):
    sub: AffineSubspace = f.data
    return sub.anchor, sub.direction.basis[0]


def _pair_class(k: Flipper, l: Flipper):
    return classify(encode(Biflipper(k, l)))


def _reduce_window(word, steps):
    k, l, m, n = word[0:4]
    t1 = _pair_class(k, l)
    s1 = _pair_class(m, n)
    if t1.label == "translation" and s1.label == "translation":
        _, dl = _line_parts(l)
        _, dm = _line_parts(m)
        if abs(dl[0] * dm[1] - dl[1] * dm[0]) > 1e-9:
            # turning the middle pair yields two rotations; rerun the window
            _turn_middle_pair(word, steps)
            _reduce_window(word, steps)
        else:
            _slide_first_pair(word, steps)
        return
    e = _common_pencil_line(t1, s1)
    t_iso = encode(Biflipper(k, l))
    s_iso = encode(Biflipper(m, n))
    first = rebase(t_iso, e, "head")      # (k', e) with same encoding
    second = rebase(s_iso, e, "tail")     # (e, n')
    kind1 = "pencil-concurrent" if t1.label == "rotation" else "pencil-parallel"
    kind2 = "pencil-concurrent" if s1.label == "rotation" else "pencil-parallel"
    steps.append(RewriteStep(kind1, 0, (k, l), (first.tail, first.head)))
    word[0:2] = [first.tail, first.head]
    steps.append(RewriteStep(kind2, 2, (m, n), (second.tail, second.head)))
    word[2:4] = [second.tail, second.head]


def _turn_middle_pair(word, steps):
    # middle lines meet: rotate the pair (l, m) by a right angle about the
    # intersection, creating two rotations out of two translations
    l, m = word[1], word[2]
    pl, dl = _line_parts(l)
    pm, dm = _line_parts(m)
    mat = np.column_stack([dl, -dm])
    t1, _ = np.linalg.solve(mat, pm - pl)
    center = pl + t1 * dl
    l2 = _rotate_line_about(l, center, math.pi / 2.0)
    m2 = _rotate_line_about(m, center, math.pi / 2.0)
    steps.append(RewriteStep("pencil-concurrent", 1, (l, m), (l2, m2)))
    word[1:3] = [l2, m2]


def _rotate_line_about(f: Flipper, center, angle):
    p, d = _line_parts(f)
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return e_line("E2", center + rot @ (p - center), rot @ d)


def _slide_first_pair(word, steps):
    # all four lines parallel: translate (k, l) so l lands on m
    k, l, m = word[0], word[1], word[2]
    pk, dk = _line_parts(k)
    pl, dl = _line_parts(l)
    sub_m: AffineSubspace = m.data
    shift = sub_m.foot(pl) - pl
    k2 = e_line("E2", pk + shift, dk)
    steps.append(RewriteStep("pencil-parallel", 0, (k, l), (k2, m)))
    word[0:2] = [k2, m]


def _common_pencil_line(t1, s1) -> Flipper:
    if t1.label == "rotation" and s1.label == "rotation":
        c1 = np.asarray(t1.params["center"], float)
        c2 = np.asarray(s1.params["center"], float)
        d = c2 - c1
        if np.linalg.norm(d) < 1e-12:
            d = np.array([1.0, 0.0])
        return e_line("E2", c1, d)
    if t1.label == "rotation":
        v = normalize(s1.params["vector"])
        return e_line("E2", t1.params["center"], np.array([-v[1], v[0]]))
    v = normalize(t1.params["vector"])
    return e_line("E2", s1.params["center"], np.array([-v[1], v[0]]))


def _reduce_triple(word, steps):
    # a three-letter word that encodes a reflection loses two letters by a
    # pencil move aligning the second mirror with the third
    t_all = word_isometry(word)
    if not t_all.is_involution(1e-8):
        return
    a, b, c = word
    t1 = encode(Biflipper(a, b))
    if t1.is_identity(nk.DEFAULT_TOL):
        return
    try:
        moved = rebase(t1, c, "head")      # (a', c)
    except Exception:
        return
    kind = "pencil-concurrent" if classify(t1).label == "rotation" else "pencil-parallel"
    steps.append(RewriteStep(kind, 0, (a, b), (moved.tail, moved.head)))
    word[0:2] = [moved.tail, moved.head]
