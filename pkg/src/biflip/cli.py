"""Command-line front end.

Subcommands: classify, compose, equiv, rebase, reduce, quat, render, serve.
Scene files follow the schema documented in the README.  Output is
deterministic for a given scene and flags; exit code 0 on success, 1 on
domain errors (NotLinked in strict mode, NotInvolution, ...), 2 on
malformed input.
"""

from __future__ import annotations

import argparse
import sys

from . import ops
from .errors import BiflipError, MalformedScene
from .scene import dumps, load_scene


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biflip",
                                     description="isometry calculus on flipper pairs")
    parser.add_argument("--tol", type=float, default=1e-9, help="comparison tolerance")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for sample generators (kept for reproducibility)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify the isometry a biflipper encodes")
    p.add_argument("scene")
    p.add_argument("--biflipper", required=True)

    p = sub.add_parser("compose", help="head-to-tail composition of two biflippers")
    p.add_argument("scene")
    p.add_argument("--first", required=True, help="applied first")
    p.add_argument("--second", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", action="store_true", help="fail when the pair is not linked")
    mode.add_argument("--fallback", action="store_true", help="allow multi-step reductions (default)")
    p.add_argument("--svg", help="also write an SVG of the construction")
    p.add_argument("--json", action="store_true", help="print the JSON result (default)")

    p = sub.add_parser("equiv", help="do two biflippers encode the same isometry")
    p.add_argument("scene")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = sub.add_parser("rebase", help="redo a decomposition through a chosen flipper")
    p.add_argument("scene")
    p.add_argument("--of", required=True, help="biflipper whose isometry is rebased")
    p.add_argument("--flipper", required=True)
    p.add_argument("--side", choices=["tail", "head"], default="tail")

    p = sub.add_parser("reduce", help="reduce a reflection word")
    p.add_argument("scene")
    p.add_argument("--word", required=True)

    p = sub.add_parser("quat", help="quaternion operations")
    p.add_argument("scene")
    p.add_argument("--lift", required=True, help="0-dimensional S2 biflipper to lift")

    p = sub.add_parser("render", help="emit an SVG figure of the scene")
    p.add_argument("scene")
    p.add_argument("--svg", required=True, help="output path")
    p.add_argument("--compose", help="FIRST,SECOND: draw this composition's moves")
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except MalformedScene as exc:
        print(f"error: {exc.name}: {exc.message}", file=sys.stderr)
        return 2
    except BiflipError as exc:
        print(f"error: {exc.name}: {exc.message}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
        return 0
    scene = load_scene(args.scene)
    tol = args.tol
    if cmd == "classify":
        out = ops.op_classify(scene, args.biflipper, tol)
    elif cmd == "compose":
        mode = "strict" if args.strict else "fallback"
        from . import headtotail as h2t
        from .scene import h2t_json

        result = h2t.head_to_tail(scene.biflipper(args.first),
                                  scene.biflipper(args.second), mode, max(tol, 1e-8))
        if args.svg:
            _write_svg(scene, result, args.svg)
        out = h2t_json(result)
    elif cmd == "equiv":
        out = ops.op_equivalent(scene, args.a, args.b, tol)
    elif cmd == "rebase":
        out = ops.op_rebase(scene, args.of, args.flipper, args.side, tol)
    elif cmd == "reduce":
        out = ops.op_reduce(scene, args.word, tol)
    elif cmd == "quat":
        out = ops.op_quat_lift(scene, args.lift, tol)
    elif cmd == "render":
        result = None
        if args.compose:
            first, second = args.compose.split(",")
            from . import headtotail as h2t

            mode = "strict" if args.strict else "fallback"
            result = h2t.head_to_tail(scene.biflipper(first.strip()),
                                      scene.biflipper(second.strip()), mode, max(tol, 1e-8))
        _write_svg(scene, result, args.svg)
        return 0
    else:  # pragma: no cover
        raise MalformedScene(f"unknown command {cmd!r}")
    sys.stdout.write(dumps(out))
    return 0


def _write_svg(scene, result, path):
    from .render import render_svg

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_svg(scene, result))


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
