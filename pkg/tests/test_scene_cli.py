import contextlib
import io
import json
import os

import pytest

from biflip.cli import run
from biflip.errors import MalformedScene
from biflip.scene import dumps, loads_scene

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def cli(argv):
    buf = io.StringIO()
    err = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(err):
        code = run(argv)
    return code, buf.getvalue(), err.getvalue()


def manifest():
    with open(os.path.join(GOLDEN, "manifest.json")) as fh:
        return json.load(fh)


def test_golden_corpus_byte_identical(tmp_path):
    for entry in manifest():
        scene_path = os.path.join(GOLDEN, entry["scene"])
        expected = open(os.path.join(GOLDEN, entry["output"]), "rb").read()
        argv = entry["argv"]
        if entry["output"].endswith(".svg"):
            out_path = tmp_path / entry["output"]
            full = [argv[0], scene_path] + [str(out_path) if a == "OUT" else a
                                            for a in argv[1:]]
            code, _, _ = cli(full)
            assert code == 0, entry["name"]
            assert out_path.read_bytes() == expected, entry["name"]
        else:
            code, out, _ = cli([argv[0], scene_path] + argv[1:])
            assert code == 0, entry["name"]
            assert out.encode() == expected, entry["name"]


def test_cli_is_deterministic_across_runs(tmp_path):
    scene_path = os.path.join(GOLDEN, "scene_rot2.json")
    runs = [cli(["compose", scene_path, "--first", "r1", "--second", "r2"])[1]
            for _ in range(2)]
    assert runs[0] == runs[1]
    svg1, svg2 = tmp_path / "a.svg", tmp_path / "b.svg"
    cli(["render", scene_path, "--svg", str(svg1), "--compose", "r1,r2"])
    cli(["render", scene_path, "--svg", str(svg2), "--compose", "r1,r2"])
    assert svg1.read_bytes() == svg2.read_bytes()


def test_svg_has_one_group_per_move():
    scene_path = os.path.join(GOLDEN, "scene_rot2.json")
    code, out, _ = cli(["compose", scene_path, "--first", "r1", "--second", "r2"])
    steps = json.loads(out)["steps"]
    svg = open(os.path.join(GOLDEN, "out_render_e2.svg")).read()
    for i in range(len(steps)):
        assert f'<g id="step-{i}"' in svg
    assert svg.count('<g id="step-') == len(steps)
    assert '<g id="result">' in svg


def test_strict_not_linked_exits_one():
    scene_path = os.path.join(GOLDEN, "scene_e3.json")
    code, out, err = cli(["compose", scene_path, "--first", "rr1", "--second", "rr2",
                          "--strict"])
    assert code == 1
    assert "NotLinked" in err
    assert out == ""


def test_malformed_inputs_exit_two(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli(["classify", str(bad), "--biflipper", "x"])[0] == 2
    scene = tmp_path / "scene.json"
    scene.write_text(json.dumps({"space": "E2", "flippers": [], "biflippers": []}))
    code, _, err = cli(["classify", str(scene), "--biflipper", "nope"])
    assert code == 2 and "MalformedScene" in err
    scene.write_text(json.dumps({"space": "XX"}))
    assert cli(["classify", str(scene), "--biflipper", "b"])[0] == 2
    assert cli(["classify", str(tmp_path / "missing.json"), "--biflipper", "b"])[0] == 2


def test_scene_parse_errors():
    with pytest.raises(MalformedScene):
        loads_scene("[]")
    with pytest.raises(MalformedScene):
        loads_scene(json.dumps({"space": "E2", "flippers": [{"kind": "point"}]}))
    with pytest.raises(MalformedScene):
        loads_scene(json.dumps({"space": "E2",
                                "flippers": [{"id": "a", "kind": "circle", "coords": []}]}))
    with pytest.raises(MalformedScene):
        loads_scene(json.dumps({"space": "E2", "biflippers": [
            {"id": "b", "tail": "missing", "head": "missing"}]}))


def test_dumps_normalizes_negative_zero():
    assert dumps({"x": -0.0}) == '{\n  "x": 0.0\n}\n'


def test_equiv_projective_rp2():
    scene_path = os.path.join(GOLDEN, "scene_rp2.json")
    code, out, _ = cli(["equiv", scene_path, "--a", "m1", "--b", "m1"])
    assert code == 0 and json.loads(out)["equivalent"] is True


def test_all_spaces_accept_scene_roundtrip():
    for entry in manifest():
        scene_path = os.path.join(GOLDEN, entry["scene"])
        scene = loads_scene(open(scene_path).read())
        assert scene.space
