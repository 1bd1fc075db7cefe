import contextlib
import io
import json
import os

import pytest
from fastapi.testclient import TestClient

from biflip.cli import run
from biflip.service import create_app

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def load(name):
    with open(os.path.join(GOLDEN, name)) as fh:
        return json.load(fh)


def test_spaces_endpoint(client):
    r = client.get("/api/v1/spaces")
    assert r.status_code == 200
    assert json.loads(r.text)["spaces"] == ["E1", "E2", "E3", "S2", "RP2", "H2", "H3", "MOEB"]


def test_service_matches_cli_bytes(client):
    checked = 0
    for entry in load("manifest.json"):
        if not entry.get("service"):
            continue
        scene = load(entry["scene"])
        body = {"scene": scene, **entry["service"]["body"]}
        r = client.post(f"/api/v1/{entry['service']['op']}", json=body)
        assert r.status_code == 200, entry["name"]
        expected = open(os.path.join(GOLDEN, entry["output"]), "rb").read()
        assert r.content == expected, entry["name"]
        checked += 1
    assert checked >= 18


def test_request_id_echoed_in_header_not_body(client):
    scene = load("scene_translations.json")
    body = {"scene": scene, "biflipper": "t1", "request_id": "req-42"}
    r = client.post("/api/v1/classify", json=body)
    assert r.headers["x-request-id"] == "req-42"
    assert "req-42" not in r.text


def test_domain_error_is_422_with_core_name(client):
    scene = load("scene_e3.json")
    body = {"scene": scene, "first": "rr1", "second": "rr2", "mode": "strict"}
    r = client.post("/api/v1/compose", json=body)
    assert r.status_code == 422
    payload = json.loads(r.text)
    assert payload["name"] == "NotLinked"
    body = {"scene": load("scene_translations.json"), "of": "t1",
            "flipper": "m", "side": "tail"}
    r = client.post("/api/v1/rebase", json=body)
    assert r.status_code == 422
    assert json.loads(r.text)["name"] == "NotCompatible"


def test_malformed_is_400(client):
    r = client.post("/api/v1/classify", content=b"{nope")
    assert r.status_code == 400
    r = client.post("/api/v1/classify", json={"scene": {"space": "E2"}, "biflipper": "x"})
    assert r.status_code == 400
    assert json.loads(r.text)["name"] == "MalformedScene"
    r = client.post("/api/v1/classify", json={"scene": {"space": "E2"}})
    assert r.status_code == 400
    r = client.post("/api/v1/quaternion/lift",
                    json={"scene": load("scene_s2.json"), "biflipper": "rot"})
    assert r.status_code == 422  # circle flippers do not lift


def test_unknown_endpoint_is_404(client):
    assert client.post("/api/v1/nonsense", json={}).status_code == 404


def test_linked_endpoint(client):
    scene = load("scene_e3.json")
    r = client.post("/api/v1/linked", json={"scene": scene, "first": "rr1", "second": "rr2"})
    assert r.status_code == 200
    assert json.loads(r.text) == {"linked": False, "flipper": None}
    r = client.post("/api/v1/linked", json={"scene": scene, "first": "screw", "second": "screw"})
    assert json.loads(r.text)["linked"] is True


def test_encode_endpoint(client):
    scene = load("scene_translations.json")
    r = client.post("/api/v1/encode", json={"scene": scene, "biflipper": "t1"})
    out = json.loads(r.text)
    assert out["space"] == "E2"
    assert out["matrix"][0][2] == 2.0


def test_statelessness_under_permutation(client):
    scene = load("scene_rot2.json")
    requests = [
        ("classify", {"scene": scene, "biflipper": "r1"}),
        ("compose", {"scene": scene, "first": "r1", "second": "r2"}),
        ("equivalent", {"scene": scene, "a": "r1", "b": "r2"}),
    ]
    first = [client.post(f"/api/v1/{op}", json=body).content for op, body in requests]
    second = [client.post(f"/api/v1/{op}", json=body).content
              for op, body in reversed(requests)]
    assert first == list(reversed(second))
