"""Command-line entry point.

Subcommands:
  validate <corpus>      check every episode document in a directory
  derive <corpus>        re-derive spatial info and report divergence
  inspect <episode>      pretty-print an episode's clips and spatial info
  run                    execute seeded trials of a bundled task
  eval <transcript-dir>  score transcripts, write tables and figures
  serve-oracle           serve ground-truth plans for an episode corpus

Exit codes: 0 success, 1 validation/evaluation failure, 2 usage error.
The default corpus is the bundled fixture set; override with the
SKILLBENCH_CORPUS environment variable or an explicit path argument.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import fixtures
from .demos import generate_demo
from .engine import (
    EngineConfig,
    load_transcript,
    run_trials,
    save_transcript,
)
from .episodes import load_episode_file, spatial_max_divergence, validate_corpus
from .grammar import format_destination, format_skill
from .protocol import EndpointPlanner, OraclePlanner, parse_endpoint, serve_oracle
from .report import evaluate_transcripts, write_report
from .sim import FailureInjection, SimConfig

SPATIAL_TOLERANCE = 1e-9


def _default_corpus() -> Path:
    env = os.environ.get("SKILLBENCH_CORPUS")
    return Path(env) if env else fixtures.bundled_episode_dir()


def _cmd_validate(args) -> int:
    report = validate_corpus(args.corpus)
    print(report.summary())
    return 0 if report.ok else 1


def _cmd_derive(args) -> int:
    ok = True
    for path in sorted(Path(args.corpus).glob("*.json")):
        try:
            episode = load_episode_file(path)
            divergence = spatial_max_divergence(episode)
        except Exception as exc:  # noqa: BLE001 - reported per file
            print(f"FAIL {path}: {exc}")
            ok = False
            continue
        status = "PASS" if divergence < SPATIAL_TOLERANCE else "DIVERGED"
        if status != "PASS":
            ok = False
        print(f"{status} {path} (max divergence {divergence:.3e})")
    return 0 if ok else 1


def _cmd_inspect(args) -> int:
    episode = load_episode_file(args.episode)
    print(f"episode {episode.id} (task: {episode.task})")
    print(f"  description: {episode.task_description}")
    if episode.scene_caption:
        print(f"  scene: {episode.scene_caption}")
    print(f"  records: {len(episode.records)}")
    for i, clip in enumerate(episode.clips):
        print(f"  clip {i}: frames [{clip.start_frame}, {clip.end_frame}] {format_skill(clip.skill)}")
        if clip.spatial is not None:
            sp = clip.spatial
            print(f"    destination {format_destination(sp.destination)}")
            if sp.direction is not None:
                print(
                    "    direction [" + ", ".join(f"{v:.3f}" for v in sp.direction) + "]"
                )
            print(f"    trajectory {len(sp.trajectory)} waypoints")
    return 0


def _planner_for(args):
    if args.planner == "oracle":

        def factory(task, world):
            episode, _ = generate_demo(task, world, SimConfig(chunk_size=args.chunk_size))
            return OraclePlanner(episode)

        return factory
    if not args.planner.startswith("endpoint="):
        raise ValueError(f"planner must be 'oracle' or 'endpoint=HOST:PORT', got {args.planner!r}")
    address = parse_endpoint(args.planner.removeprefix("endpoint="))
    return lambda task, world: EndpointPlanner(address)


def _cmd_run(args) -> int:
    try:
        task = fixtures.bundled_task(args.task)
    except KeyError:
        candidate = Path(args.task)
        if not candidate.exists():
            print(f"error: unknown task {args.task!r} (bundled: {', '.join(fixtures.TASK_NAMES)})", file=sys.stderr)
            return 2
        from .sim import load_task_file

        task = load_task_file(candidate)

    config = EngineConfig(
        max_steps=args.max_steps,
        sim=SimConfig(chunk_size=args.chunk_size),
        failure_injection=FailureInjection(
            destination_noise_sigma=args.noise_sigma,
            grasp_failure_prob=args.grasp_failure_prob,
            seed=args.failure_seed,
        ),
    )
    results = run_trials(task, _planner_for(args), args.trials, config, base_seed=args.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for result in results:
        path = out / f"{task.name}_seed{result.seed:05d}.json"
        save_transcript(result.transcript, path)
        summary.append(
            {
                "task": result.task,
                "seed": result.seed,
                "success": result.success,
                "terminal": result.transcript.terminal,
                "steps": len(result.entries),
                "error": result.error,
                "transcript": path.name,
            }
        )
    rate = sum(r.success for r in results) / len(results)
    (out / "summary.json").write_text(
        json.dumps({"task": task.name, "planner": args.planner, "trials": args.trials,
                    "base_seed": args.seed, "success_rate": rate, "results": summary}, indent=1)
        + "\n"
    )
    for row in summary:
        note = f" ({row['error']})" if row["error"] else ""
        print(f"seed {row['seed']}: {'ok' if row['success'] else 'FAIL'} [{row['terminal']}]{note}")
    print(f"success rate {rate:.2f} over {args.trials} trials -> {out}")
    return 0


def _cmd_eval(args) -> int:
    paths = sorted(Path(args.transcripts).glob("*.json"))
    by_task = {}
    for path in paths:
        if path.name == "summary.json" or path.name.startswith("report"):
            continue
        transcript = load_transcript(path)
        by_task.setdefault(transcript.task, []).append(transcript)
    if not by_task:
        print(f"error: no transcripts under {args.transcripts}", file=sys.stderr)
        return 1

    references = None
    if not args.no_references:
        references = {}
        for task in by_task:
            try:
                references[task] = fixtures.bundled_episode(task)
            except (FileNotFoundError, KeyError):
                pass
    report = evaluate_transcripts(by_task, references)
    written = write_report(report, args.out)
    print(report.render_text())
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_serve_oracle(args) -> int:
    corpus = Path(args.corpus)
    episodes = [load_episode_file(p) for p in sorted(corpus.glob("*.json"))]
    if not episodes:
        print(f"error: no episodes under {corpus}", file=sys.stderr)
        return 1
    service = serve_oracle(episodes, parse_endpoint(args.bind))
    host, port = service.address
    print(f"serving {len(episodes)} episodes on {host}:{port} (ctrl-c to stop)")
    try:
        service._thread.join()
    except KeyboardInterrupt:
        print("shutting down")
        service.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skillbench",
        description="desk-scale plan-execute harness for primitive-skill manipulation agents",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate an episode corpus")
    p.add_argument("corpus", nargs="?", default=None, type=Path)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("derive", help="re-derive spatial info and report divergence")
    p.add_argument("corpus", nargs="?", default=None, type=Path)
    p.set_defaults(func=_cmd_derive)

    p = sub.add_parser("inspect", help="pretty-print one episode")
    p.add_argument("episode", type=Path)
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("run", help="run seeded trials of a task")
    p.add_argument("--task", required=True, help="bundled task name or task file path")
    p.add_argument("--planner", default="oracle", help="'oracle' or 'endpoint=HOST:PORT'")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=fixtures.CANONICAL_SEED)
    p.add_argument("--max-steps", type=int, default=32)
    p.add_argument("--chunk-size", type=int, default=5)
    p.add_argument("--noise-sigma", type=float, default=0.0, help="destination noise, metres")
    p.add_argument("--grasp-failure-prob", type=float, default=0.0)
    p.add_argument("--failure-seed", type=int, default=0)
    p.add_argument("--out", default="runs", type=Path)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="score a directory of transcripts")
    p.add_argument("transcripts", type=Path)
    p.add_argument("--out", default="eval-report", type=Path)
    p.add_argument("--no-references", action="store_true", help="skip bundled reference annotations")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve-oracle", help="serve ground-truth plans over the wire protocol")
    p.add_argument("--corpus", default=None, type=Path)
    p.add_argument("--bind", default="127.0.0.1:0")
    p.set_defaults(func=_cmd_serve_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "corpus") and args.corpus is None:
        args.corpus = _default_corpus()
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
