"""Scene files and canonical JSON serialization.

A scene is a single JSON document naming flippers, biflippers and
reflection words in one space:

    {"space": "E2",
     "flippers":   [{"id": "a", "kind": "line", "coords": [[0,0],[1,0]]}],
     "biflippers": [{"id": "b", "tail": "a", "head": "a"}],
     "words":      [{"id": "w", "letters": ["a", "a"]}]}

Serialization is canonical: floats keep their shortest round-trip
representation, negative zero is normalized, keys keep insertion order, and
output ends with a newline, so identical inputs produce byte-identical
output everywhere (CLI and HTTP service share this module).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .biflipper import Biflipper, IsometryClass
from .errors import BiflipError, MalformedScene
from .flips import Flipper, Isometry, flipper_from_json, flipper_to_json
from .numkernel import space


@dataclass
class Scene:
    space: str
    flippers: dict = field(default_factory=dict)
    biflippers: dict = field(default_factory=dict)
    words: dict = field(default_factory=dict)

    def flipper(self, ident: str) -> Flipper:
        try:
            return self.flippers[ident]
        except KeyError:
            raise MalformedScene(f"unknown flipper id {ident!r}") from None

    def biflipper(self, ident: str) -> Biflipper:
        try:
            return self.biflippers[ident]
        except KeyError:
            raise MalformedScene(f"unknown biflipper id {ident!r}") from None

    def word(self, ident: str):
        try:
            return self.words[ident]
        except KeyError:
            raise MalformedScene(f"unknown word id {ident!r}") from None


def parse_scene(obj) -> Scene:
    if not isinstance(obj, dict):
        raise MalformedScene("scene must be a JSON object")
    try:
        tag = obj["space"]
    except KeyError:
        raise MalformedScene("scene is missing the 'space' field") from None
    try:
        space(tag)
    except BiflipError as exc:
        raise MalformedScene(str(exc)) from exc
    scene = Scene(tag)
    for entry in obj.get("flippers", []):
        ident = entry.get("id")
        if not isinstance(ident, str):
            raise MalformedScene("every flipper needs a string id")
        try:
            scene.flippers[ident] = flipper_from_json(tag, entry)
        except (BiflipError, ValueError, TypeError, IndexError, KeyError) as exc:
            raise MalformedScene(f"bad flipper {ident!r}: {exc}") from exc
    for entry in obj.get("biflippers", []):
        ident = entry.get("id")
        if not isinstance(ident, str):
            raise MalformedScene("every biflipper needs a string id")
        scene.biflippers[ident] = Biflipper(
            scene.flipper(entry.get("tail")), scene.flipper(entry.get("head"))
        )
    for entry in obj.get("words", []):
        ident = entry.get("id")
        if not isinstance(ident, str):
            raise MalformedScene("every word needs a string id")
        scene.words[ident] = [scene.flipper(l) for l in entry.get("letters", [])]
    return scene


def loads_scene(text: str) -> Scene:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedScene(f"invalid JSON: {exc}") from exc
    return parse_scene(obj)


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_scene(fh.read())


# ---------------------------------------------------------------------------
# canonical serialization


def jsonable(value):
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return 0.0 if v == 0.0 else v
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2) + "\n"


# ---------------------------------------------------------------------------
# result shapes


def isometry_json(t: Isometry) -> dict:
    return {"space": t.space, "matrix": t.matrix.tolist()}


def class_json(cls: IsometryClass) -> dict:
    out = {"space": cls.space, "label": cls.label}
    for key, value in cls.params.items():
        out[key] = value
    return out


def biflipper_json(b: Biflipper) -> dict:
    return {
        "space": b.space,
        "tail": flipper_to_json(b.tail),
        "head": flipper_to_json(b.head),
    }


def flipper_json(f: Flipper) -> dict:
    out = flipper_to_json(f)
    out["space"] = f.space
    return out


def h2t_json(result) -> dict:
    return {
        "biflipper": biflipper_json(result.biflipper),
        "steps": [
            {
                "kind": move.kind,
                "flipper": move.which,
                "before": biflipper_json(move.before),
                "after": biflipper_json(move.after),
            }
            for move in result.steps
        ],
    }


def word_json(letters) -> dict:
    return {"space": "E2", "letters": [flipper_to_json(l) for l in letters]}


def derivation_json(derivation) -> dict:
    return {
        "steps": [
            {
                "kind": s.kind,
                "index": s.index,
                "removed": [flipper_to_json(f) for f in s.removed],
                "inserted": [flipper_to_json(f) for f in s.inserted],
            }
            for s in derivation.steps
        ]
    }
