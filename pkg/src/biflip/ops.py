"""Operation layer shared by the CLI and the HTTP service.

Each function takes a parsed scene plus operation parameters and returns a
JSON-ready object.  Keeping this in one place is what makes CLI output and
service responses byte-identical.
"""

from __future__ import annotations

from . import biflipper as bf
from . import headtotail as h2t
from . import quaternion as quat
from . import scene as sc
from . import wordreduce as wr
from .errors import MalformedScene
from .numkernel import SPACES


def op_classify(scene: sc.Scene, biflipper_id: str, tol: float) -> dict:
    b = scene.biflipper(biflipper_id)
    return sc.class_json(bf.classify(bf.encode(b)))


def op_encode(scene: sc.Scene, biflipper_id: str, tol: float) -> dict:
    return sc.isometry_json(bf.encode(scene.biflipper(biflipper_id)))


def op_compose(scene: sc.Scene, first: str, second: str, mode: str, tol: float) -> dict:
    res = h2t.head_to_tail(scene.biflipper(first), scene.biflipper(second), mode, tol)
    return sc.h2t_json(res)


def op_equivalent(scene: sc.Scene, a: str, b: str, tol: float) -> dict:
    return {"equivalent": bf.equivalent(scene.biflipper(a), scene.biflipper(b), tol)}


def op_rebase(scene: sc.Scene, of: str, flipper_id: str, side: str, tol: float) -> dict:
    if side not in ("tail", "head"):
        raise MalformedScene("side must be 'tail' or 'head'")
    t = bf.encode(scene.biflipper(of))
    out = bf.rebase(t, scene.flipper(flipper_id), side)
    return sc.biflipper_json(out)


def op_linked(scene: sc.Scene, first: str, second: str, tol: float) -> dict:
    t = bf.encode(scene.biflipper(first))
    s = bf.encode(scene.biflipper(second))
    e = h2t.linked(s, t, tol)
    if e is None:
        return {"linked": False, "flipper": None}
    return {"linked": True, "flipper": sc.flipper_json(e)}


def op_reduce(scene: sc.Scene, word_id: str, tol: float) -> dict:
    word = scene.word(word_id)
    reduced, derivation = wr.reduce(word)
    return {"word": sc.word_json(reduced), "derivation": sc.derivation_json(derivation)}


def op_quat_lift(scene: sc.Scene, biflipper_id: str, tol: float) -> dict:
    q = quat.lift_biflipper(scene.biflipper(biflipper_id))
    return {"quaternion": list(q.as_array())}


def op_spaces() -> dict:
    return {"spaces": list(SPACES.keys())}
