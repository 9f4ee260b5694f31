"""Command-line interface: train, eval, and inspect subcommands."""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .dot import import_dot
from .environments import make_environment
from .errors import TpgError
from .runner import evaluate_graph, train_and_write


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tpg",
        description="Train and run tangled-program-graph policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run the evolution loop")
    train.add_argument("--config", required=True, help="JSON configuration file")
    train.add_argument("--seed", type=int, help="override the configured seed")
    train.add_argument("--threads", type=int,
                       help="worker count (default: $TPG_THREADS or hardware)")
    train.add_argument("--env", help="override the configured environment")
    train.add_argument("--iset", help="override the configured instruction set")
    train.add_argument("--out", required=True, help="champion DOT output path")
    train.add_argument("--log", required=True, help="CSV training log path")
    train.add_argument("--log-timings", choices=("on", "off"), default=None,
                       help="include wall-clock columns in the CSV (default on)")

    evaluate = sub.add_parser("eval", help="score a serialized policy")
    evaluate.add_argument("--graph", required=True, help="DOT file to load")
    evaluate.add_argument("--env", required=True)
    evaluate.add_argument("--episodes", type=int, default=10)
    evaluate.add_argument("--seed", type=int, required=True)

    inspect = sub.add_parser("inspect", help="print statistics of a DOT graph")
    inspect.add_argument("--graph", required=True, help="DOT file to load")
    return parser


def _read_file(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(2) from None


def _cmd_train(args) -> int:
    text = _read_file(args.config)
    threads = args.threads
    if threads is None and os.environ.get("TPG_THREADS"):
        threads = int(os.environ["TPG_THREADS"])
    overrides = {
        "seed": args.seed,
        "nbThreads": threads,
        "env": args.env,
        "iset": args.iset,
        "out": args.out,
        "log": args.log,
    }
    if args.log_timings is not None:
        overrides["logTimings"] = args.log_timings == "on"
    config = load_config(text, overrides)
    result = train_and_write(config)
    print(
        f"trained {config.params.nb_generations} generations on {config.env} "
        f"(seed {config.params.seed}); champion T{result.champion_id} "
        f"fitness {result.champion_fitness!r}"
    )
    print(f"wrote {config.out} and {config.log}")
    return 0


def _cmd_eval(args) -> int:
    graph = import_dot(_read_file(args.graph))
    env = make_environment(args.env)
    scores = evaluate_graph(graph, env, args.episodes, args.seed)
    for i, score in enumerate(scores):
        print(f"episode {i}: {score!r}")
    print(f"mean: {sum(scores) / len(scores)!r}")
    return 0


def _cmd_inspect(args) -> int:
    graph = import_dot(_read_file(args.graph))
    lengths = [len(e.program) for e in graph.edges.values()]
    sample = next(iter(graph.edges.values())).program
    print(f"teams: {graph.team_count}")
    print(f"roots: {len(graph.roots())}")
    print(f"actions: {graph.nb_actions}")
    print(f"edges: {graph.edge_count}")
    print(f"instruction set: {sample.iset.name}")
    print(f"registers: {sample.nb_registers}")
    print(
        "program length: "
        f"min {min(lengths)}, mean {sum(lengths) / len(lengths):.2f}, "
        f"max {max(lengths)}"
    )
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"train": _cmd_train, "eval": _cmd_eval, "inspect": _cmd_inspect}
    try:
        return handlers[args.command](args)
    except SystemExit as exc:
        raise exc
    except TpgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
