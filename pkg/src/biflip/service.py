"""Stateless HTTP facade over the core operations.

One endpoint per operation under /api/v1; request bodies carry a scene
fragment plus parameters, responses are byte-identical to the CLI output
for the same input (both go through the ops layer and the canonical
serializer).  A request id, when provided, is echoed in the X-Request-Id
header so the body stays CLI-identical.  Errors use the core error names:
400 for malformed input, 422 for domain errors, 404 for unknown endpoints.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware

from . import ops
from .errors import BiflipError, MalformedScene
from .scene import dumps, parse_scene

_OPS = {
    "encode": (ops.op_encode, ("biflipper",)),
    "classify": (ops.op_classify, ("biflipper",)),
    "compose": (ops.op_compose, ("first", "second", "mode")),
    "equivalent": (ops.op_equivalent, ("a", "b")),
    "rebase": (ops.op_rebase, ("of", "flipper", "side")),
    "linked": (ops.op_linked, ("first", "second")),
    "reduce": (ops.op_reduce, ("word",)),
    "quaternion/lift": (ops.op_quat_lift, ("biflipper",)),
}

_DEFAULTS = {"mode": "fallback", "side": "tail"}


def _json_response(obj, request_id=None, status=200) -> Response:
    headers = {}
    if request_id is not None:
        headers["X-Request-Id"] = str(request_id)
    return Response(content=dumps(obj), media_type="application/json",
                    status_code=status, headers=headers)


def create_app() -> FastAPI:
    app = FastAPI(title="biflip", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request, exc):
        return _json_response({"name": "MalformedRequest", "message": str(exc)}, status=400)

    @app.get("/api/v1/spaces")
    async def spaces():
        return _json_response(ops.op_spaces())

    def make_handler(name, fn, keys):
        async def handler(request: Request):
            rid = None
            try:
                body = await request.json()
            except json.JSONDecodeError:
                return _json_response(
                    {"name": "MalformedRequest", "message": "body is not valid JSON"},
                    status=400,
                )
            if not isinstance(body, dict):
                return _json_response(
                    {"name": "MalformedRequest", "message": "body must be a JSON object"},
                    status=400,
                )
            rid = body.get("request_id")
            try:
                scene = parse_scene(body.get("scene", {}))
                params = []
                for key in keys:
                    if key in body:
                        params.append(body[key])
                    elif key in _DEFAULTS:
                        params.append(_DEFAULTS[key])
                    else:
                        raise MalformedScene(f"missing parameter {key!r}")
                tol = float(body.get("tol", 1e-9))
                out = fn(scene, *params, max(tol, 1e-9))
                return _json_response(out, rid)
            except MalformedScene as exc:
                return _json_response({"name": exc.name, "message": exc.message}, rid, 400)
            except BiflipError as exc:
                return _json_response({"name": exc.name, "message": exc.message}, rid, 422)
            except (ValueError, TypeError) as exc:
                return _json_response({"name": "MalformedRequest", "message": str(exc)}, rid, 400)

        handler.__name__ = f"op_{name.replace('/', '_')}"
        return handler

    for name, (fn, keys) in _OPS.items():
        app.post(f"/api/v1/{name}")(make_handler(name, fn, keys))
    return app


app = create_app()
