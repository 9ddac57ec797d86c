"""Command-line interface.

Subcommands: synth, build-map, chat, bench gen, bench run, serve.
Exit codes: 0 on success, 1 on engine errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .errors import BevlangError


def _packaged_script() -> str:
    return str(resources.files("bevlang").joinpath("scripts/with_so_script.json"))


def _make_llm(args):
    from .orchestrator import HttpLlm, NumericGuessLlm, ScriptedLlm

    if getattr(args, "llm_url", None):
        return HttpLlm(args.llm_url)
    if getattr(args, "numeric", False):
        return NumericGuessLlm()
    script = getattr(args, "script", None) or _packaged_script()
    return ScriptedLlm.from_file(script)


def _load_map(path: str):
    from .objects import parse_map

    return parse_map(Path(path).read_text(encoding="utf-8"))


def _cmd_synth(args) -> int:
    from .bundle import save_bundle
    from .synth import generate_synthetic_scene

    bundle = generate_synthetic_scene(
        scene_token=args.token,
        seed=args.seed,
        n_objects=args.objects,
        render=not args.no_render,
    )
    save_bundle(bundle, args.out)
    print(f"wrote scene {args.token!r} ({args.objects} objects) to {args.out}")
    return 0


def _cmd_build_map(args) -> int:
    from .bundle import load_bundle
    from .captioning import (
        MockDenseCaptioner,
        MockLvlmCaptioner,
        MockOcr,
        build_gt_map,
        build_language_map,
    )
    from .objects import serialize_map

    bundle = load_bundle(args.bundle)
    if args.gt:
        map_ = build_gt_map(bundle, MockDenseCaptioner(), MockOcr())
    else:
        map_ = build_language_map(bundle, MockLvlmCaptioner())
    text = serialize_map(map_)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote map with {len(map_.objects)} objects to {args.out}")
    else:
        print(text)
    return 0


def _cmd_chat(args) -> int:
    from .orchestrator import Conversation, ask

    map_ = _load_map(args.map)
    conversation = Conversation(map=map_, llm=_make_llm(args))
    questions = [args.question] if args.question else None
    if questions is None:
        questions = [line.strip() for line in sys.stdin if line.strip()]
    for question in questions:
        response = ask(conversation, question)
        print(json.dumps(response.to_dict(), indent=2))
    return 0


def _cmd_bench_gen(args) -> int:
    from .bench import generate_questions, generate_spatial_queries

    map_ = _load_map(args.map)
    doc = {
        "scene_token": map_.scene_token,
        "questions": [q.to_dict() for q in generate_questions(map_, seed=args.seed)],
        "spatial_queries": [
            q.to_dict() for q in generate_spatial_queries(map_, seed=args.seed)
        ],
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {len(doc['questions'])} questions to {args.out}")
    else:
        print(text)
    return 0


def _cmd_bench_run(args) -> int:
    from .bench import (
        OrchestratorSpatialAnswerer,
        RandomSpatialAnswerer,
        make_spatial_suite,
        run_bench,
    )
    from .orchestrator import NumericGuessLlm, ScriptedLlm

    if args.mode == "with_so":
        answerer = OrchestratorSpatialAnswerer(
            ScriptedLlm.from_file(args.script or _packaged_script()),
            name="with-spatial-operators",
        )
    elif args.mode == "no_so":
        answerer = OrchestratorSpatialAnswerer(NumericGuessLlm(), name="no-spatial-operators")
    else:
        answerer = RandomSpatialAnswerer(seed=args.seed)
    suite = make_spatial_suite(
        n_scenes=args.scenes, n_objects=args.objects, seed_base=args.seed
    )
    report = run_bench(suite, spatial_answerer=answerer)
    text = json.dumps({"mode": args.mode, "report": report.to_dict()}, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote report to {args.out}")
    else:
        print(text)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .captioning import MockLvlmCaptioner, build_language_map
    from .bundle import load_bundle
    from .service import create_app
    from .synth import generate_synthetic_scene

    scenes = {}
    grids = {}
    captioner = MockLvlmCaptioner()
    for bundle_dir in args.bundle or []:
        bundle = load_bundle(bundle_dir)
        scenes[bundle.scene_token] = build_language_map(bundle, captioner)
        grids[bundle.scene_token] = bundle.grid
    for i in range(args.synthetic):
        bundle = generate_synthetic_scene(
            f"synth-{i:04d}", seed=args.seed + i, n_objects=args.objects, render=False
        )
        scenes[bundle.scene_token] = build_language_map(bundle, captioner)
        grids[bundle.scene_token] = bundle.grid
    if not scenes:
        print("no scenes: pass --bundle or --synthetic", file=sys.stderr)
        return 2
    app = create_app(scenes, _make_llm(args), grids=grids)
    print(f"serving {len(scenes)} scene(s) on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _add_llm_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--script", help="scripted LLM rules file (JSON)")
    parser.add_argument("--numeric", action="store_true", help="use the no-operator ablation LLM")
    parser.add_argument("--llm-url", help="base URL of an LLM completion service")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bevlang", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene bundle")
    p.add_argument("--out", required=True, help="bundle directory to write")
    p.add_argument("--token", default="synth-0000")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objects", type=int, default=8)
    p.add_argument("--no-render", action="store_true", help="skip camera images")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("build-map", help="build a language map from a bundle")
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--out", help="output map JSON file (stdout when omitted)")
    p.add_argument("--gt", action="store_true", help="caption ground-truth objects instead")
    p.set_defaults(func=_cmd_build_map)

    p = sub.add_parser("chat", help="ask questions about a map")
    p.add_argument("--map", required=True, help="map JSON file")
    p.add_argument("question", nargs="?", help="one question (stdin lines when omitted)")
    _add_llm_flags(p)
    p.set_defaults(func=_cmd_chat)

    p = sub.add_parser("bench", help="benchmark tools")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)

    p2 = bench_sub.add_parser("gen", help="generate questions for a map")
    p2.add_argument("--map", required=True)
    p2.add_argument("--seed", type=int, default=0)
    p2.add_argument("--out")
    p2.set_defaults(func=_cmd_bench_gen)

    p2 = bench_sub.add_parser("run", help="score an answerer on synthetic scenes")
    p2.add_argument("--mode", choices=("with_so", "no_so", "random"), default="with_so")
    p2.add_argument("--scenes", type=int, default=5)
    p2.add_argument("--objects", type=int, default=8)
    p2.add_argument("--seed", type=int, default=100)
    p2.add_argument("--script", help="scripted LLM rules file for with_so")
    p2.add_argument("--out")
    p2.set_defaults(func=_cmd_bench_run)

    p = sub.add_parser("serve", help="run the REST service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--bundle", action="append", help="bundle directory (repeatable)")
    p.add_argument("--synthetic", type=int, default=0, help="also serve N synthetic scenes")
    p.add_argument("--seed", type=int, default=100)
    p.add_argument("--objects", type=int, default=8)
    _add_llm_flags(p)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BevlangError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
