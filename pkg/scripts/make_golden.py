"""Regenerate the golden scene corpus under tests/golden/.

Each entry records a scene, a CLI invocation, the expected output file, and
(for JSON operations) the equivalent service request.  Run from the repo
root:  python3 scripts/make_golden.py
"""

import contextlib
import io
import json
import math
import os
import sys

GOLDEN = os.path.join(os.path.dirname(__file__), "..", "tests", "golden")


def scenes():
    rot2 = {
        "space": "E2",
        "flippers": [
            {"id": "a1", "kind": "line", "coords": [[0, 0], [1, 0]]},
            {"id": "a2", "kind": "line", "coords": [[0, 0], [1, 1]]},
            {"id": "b1", "kind": "line", "coords": [[2, 0], [0, 1]]},
            {"id": "b2", "kind": "line", "coords": [[2, 0], [1, 1]]},
        ],
        "biflippers": [
            {"id": "r1", "tail": "a1", "head": "a2"},
            {"id": "r2", "tail": "b1", "head": "b2"},
        ],
    }
    translations = {
        "space": "E2",
        "flippers": [
            {"id": "p0", "kind": "point", "coords": [0, 0]},
            {"id": "p1", "kind": "point", "coords": [1, 0]},
            {"id": "q0", "kind": "point", "coords": [5, 3]},
            {"id": "q1", "kind": "point", "coords": [6, 3]},
            {"id": "m", "kind": "line", "coords": [[0, 0], [1, 0]]},
        ],
        "biflippers": [
            {"id": "t1", "tail": "p0", "head": "p1"},
            {"id": "t2", "tail": "q0", "head": "q1"},
            {"id": "t3", "tail": "p0", "head": "q0"},
        ],
    }
    glide = {
        "space": "E2",
        "flippers": [
            {"id": "p", "kind": "point", "coords": [0, 1]},
            {"id": "l", "kind": "line", "coords": [[0, 0], [1, 0]]},
        ],
        "biflippers": [{"id": "g", "tail": "p", "head": "l"}],
    }
    word_scene = {
        "space": "E2",
        "flippers": [
            {"id": "v0", "kind": "line", "coords": [[0, 0], [0, 1]]},
            {"id": "v1", "kind": "line", "coords": [[1, 0], [0, 1]]},
            {"id": "v2", "kind": "line", "coords": [[2, 0], [0, 1]]},
            {"id": "v3", "kind": "line", "coords": [[3, 0], [0, 1]]},
            {"id": "d1", "kind": "line", "coords": [[0, 0], [1, 0]]},
            {"id": "d2", "kind": "line", "coords": [[0, 0], [1, 1]]},
            {"id": "d3", "kind": "line", "coords": [[0, 0], [0, 1]]},
        ],
        "words": [
            {"id": "w4", "letters": ["v0", "v1", "v2", "v3"]},
            {"id": "w3", "letters": ["d1", "d2", "d3"]},
        ],
    }
    c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
    e3 = {
        "space": "E3",
        "flippers": [
            {"id": "x", "kind": "line", "coords": [[0, 0, 0], [1, 0, 0]]},
            {"id": "sk", "kind": "line", "coords": [[0, 0, 1], [c, s, 0]]},
            {"id": "ln1", "kind": "line", "coords": [[0, 0, 0], [0, 1, 0]]},
            {"id": "pl1", "kind": "plane", "coords": [[0, 0, 0], [0, 1, 0]]},
            {"id": "ln2", "kind": "line", "coords": [[1, 2, 5], [0, 1, 0]]},
            {"id": "pl2", "kind": "plane", "coords": [[1, 2, 5], [0, 0, 1]]},
        ],
        "biflippers": [
            {"id": "screw", "tail": "x", "head": "sk"},
            {"id": "rr1", "tail": "ln1", "head": "pl1"},
            {"id": "rr2", "tail": "ln2", "head": "pl2"},
        ],
    }
    s2 = {
        "space": "S2",
        "flippers": [
            {"id": "cx", "kind": "circle", "coords": [1, 0, 0]},
            {"id": "cz", "kind": "circle", "coords": [0, 0, 1]},
            {"id": "px", "kind": "point-pair", "coords": [1, 0, 0]},
            {"id": "py", "kind": "point-pair", "coords": [0, 1, 0]},
        ],
        "biflippers": [
            {"id": "rot", "tail": "cx", "head": "cz"},
            {"id": "half", "tail": "px", "head": "py"},
        ],
    }
    rp2 = {
        "space": "RP2",
        "flippers": [
            {"id": "u", "kind": "point", "coords": [1, 0, 0]},
            {"id": "v", "kind": "point", "coords": [0, 1, 0]},
            {"id": "w", "kind": "point", "coords": [0, 0, 1]},
        ],
        "biflippers": [
            {"id": "m1", "tail": "u", "head": "v"},
            {"id": "m2", "tail": "v", "head": "w"},
        ],
    }
    h2 = {
        "space": "H2",
        "flippers": [
            {"id": "l1", "kind": "line", "coords": [[-0.4, 0.0], [0.4, 0.2]], "chart": "poincare-disk"},
            {"id": "l2", "kind": "line", "coords": [[0.0, -0.5], [0.1, 0.5]], "chart": "poincare-disk"},
            {"id": "l3", "kind": "line", "coords": [[-0.2, 0.4], [0.5, -0.1]], "chart": "poincare-disk"},
            {"id": "c", "kind": "point", "coords": [0.2, 0.1], "chart": "poincare-disk"},
        ],
        "biflippers": [
            {"id": "g1", "tail": "l1", "head": "l2"},
            {"id": "g2", "tail": "l2", "head": "l3"},
        ],
    }
    h3 = {
        "space": "H3",
        "flippers": [
            {"id": "pl", "kind": "plane", "coords": [0.0, 1.0, 0.0, 0.0], "chart": "hyperboloid"},
            {"id": "ln", "kind": "line", "coords": [[0.1, 0.0, 0.2], [-0.2, 0.3, 0.0]], "chart": "poincare-ball"},
            {"id": "pt", "kind": "point", "coords": [0.0, 0.1, 0.3], "chart": "poincare-ball"},
        ],
        "biflippers": [
            {"id": "h1", "tail": "pl", "head": "ln"},
            {"id": "h2", "tail": "ln", "head": "pt"},
        ],
    }
    moeb = {
        "space": "MOEB",
        "flippers": [
            {"id": "c1", "kind": "circle", "coords": [0.0, 0.0, 0.0, 1.0], "chart": "hyperboloid"},
            {"id": "c2", "kind": "circle", "coords": [0.3, 1.0, 0.2, 0.0], "chart": "hyperboloid"},
            {"id": "pp", "kind": "point-pair", "coords": [[1, 0, 0], [-1, 0, 0]], "chart": "sphere"},
        ],
        "biflippers": [
            {"id": "mo1", "tail": "c1", "head": "pp"},
            {"id": "mo2", "tail": "c2", "head": "c1"},
        ],
    }
    return {
        "rot2": rot2, "translations": translations, "glide": glide,
        "word": word_scene, "e3": e3, "s2": s2, "rp2": rp2, "h2": h2,
        "h3": h3, "moeb": moeb,
    }


ENTRIES = [
    ("classify_translation", "translations", ["classify", "--biflipper", "t1"],
     "json", {"op": "classify", "body": {"biflipper": "t1"}}),
    ("classify_glide", "glide", ["classify", "--biflipper", "g"],
     "json", {"op": "classify", "body": {"biflipper": "g"}}),
    ("classify_screw", "e3", ["classify", "--biflipper", "screw"],
     "json", {"op": "classify", "body": {"biflipper": "screw"}}),
    ("classify_h2", "h2", ["classify", "--biflipper", "g1"],
     "json", {"op": "classify", "body": {"biflipper": "g1"}}),
    ("classify_moeb", "moeb", ["classify", "--biflipper", "mo2"],
     "json", {"op": "classify", "body": {"biflipper": "mo2"}}),
    ("equiv_translations", "translations", ["equiv", "--a", "t1", "--b", "t2"],
     "json", {"op": "equivalent", "body": {"a": "t1", "b": "t2"}}),
    ("equiv_negative", "translations", ["equiv", "--a", "t1", "--b", "t3"],
     "json", {"op": "equivalent", "body": {"a": "t1", "b": "t3"}}),
    ("compose_rotations", "rot2", ["compose", "--first", "r1", "--second", "r2"],
     "json", {"op": "compose", "body": {"first": "r1", "second": "r2"}}),
    ("compose_translations", "translations", ["compose", "--first", "t1", "--second", "t2"],
     "json", {"op": "compose", "body": {"first": "t1", "second": "t2"}}),
    ("compose_s2", "s2", ["compose", "--first", "rot", "--second", "half"],
     "json", {"op": "compose", "body": {"first": "rot", "second": "half"}}),
    ("compose_rp2", "rp2", ["compose", "--first", "m1", "--second", "m2"],
     "json", {"op": "compose", "body": {"first": "m1", "second": "m2"}}),
    ("compose_h2", "h2", ["compose", "--first", "g1", "--second", "g2"],
     "json", {"op": "compose", "body": {"first": "g1", "second": "g2"}}),
    ("compose_h3", "h3", ["compose", "--first", "h1", "--second", "h2"],
     "json", {"op": "compose", "body": {"first": "h1", "second": "h2"}}),
    ("compose_moeb", "moeb", ["compose", "--first", "mo1", "--second", "mo2"],
     "json", {"op": "compose", "body": {"first": "mo1", "second": "mo2"}}),
    ("compose_rotary_fallback", "e3", ["compose", "--first", "rr1", "--second", "rr2"],
     "json", {"op": "compose", "body": {"first": "rr1", "second": "rr2"}}),
    ("rebase_screw", "e3", ["rebase", "--of", "screw", "--flipper", "x", "--side", "tail"],
     "json", {"op": "rebase", "body": {"of": "screw", "flipper": "x", "side": "tail"}}),
    ("reduce_word", "word", ["reduce", "--word", "w4"],
     "json", {"op": "reduce", "body": {"word": "w4"}}),
    ("quat_lift", "s2", ["quat", "--lift", "half"],
     "json", {"op": "quaternion/lift", "body": {"biflipper": "half"}}),
    ("render_e2", "rot2", ["render", "--svg", "OUT", "--compose", "r1,r2"], "svg", None),
    ("render_h2", "h2", ["render", "--svg", "OUT", "--compose", "g1,g2"], "svg", None),
    ("render_s2", "s2", ["render", "--svg", "OUT"], "svg", None),
    ("render_moeb", "moeb", ["render", "--svg", "OUT"], "svg", None),
]


def main():
    sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
    from biflip.cli import run

    os.makedirs(GOLDEN, exist_ok=True)
    all_scenes = scenes()
    for name, obj in all_scenes.items():
        with open(os.path.join(GOLDEN, f"scene_{name}.json"), "w") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")
    manifest = []
    for name, scene_name, argv, kind, service in ENTRIES:
        scene_path = os.path.join(GOLDEN, f"scene_{scene_name}.json")
        if kind == "svg":
            out_name = f"out_{name}.svg"
            out_path = os.path.join(GOLDEN, out_name)
            full = [argv[0], scene_path] + [
                out_path if a == "OUT" else a for a in argv[1:]
            ]
            code = run(full)
            assert code == 0, (name, code)
        else:
            out_name = f"out_{name}.json"
            buf = io.StringIO()
            with contextlib.redirect_stdout(buf):
                code = run([argv[0], scene_path] + argv[1:])
            assert code == 0, (name, code)
            with open(os.path.join(GOLDEN, out_name), "w") as fh:
                fh.write(buf.getvalue())
        manifest.append({
            "name": name,
            "scene": f"scene_{scene_name}.json",
            "argv": argv,
            "output": out_name,
            "service": service,
        })
    with open(os.path.join(GOLDEN, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(manifest)} golden entries")


if __name__ == "__main__":
    main()
