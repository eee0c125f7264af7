"""Command-line entry point: ``run``, ``corpus validate``, ``serve``, ``report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from .corpus import CorpusError, load_corpus, validate_corpus
from .report import render_csv, render_table
from .runner import RunConfig, emit_report, load_results, run_benchmark
from .server import serve

logger = logging.getLogger("tabletop_agent")

RUN_REQUIRED = ("mode", "model")


def load_config_file(path: str) -> dict[str, Any]:
    """Flags from a JSON or YAML file; keys use the long flag names (``max_steps`` or ``max-steps``)."""
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise SystemExit(f"{path}: config file must contain a mapping of flag names to values")
    return {k.replace("-", "_"): v for k, v in data.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabletop-agent", description="Planner/executor tabletop benchmark")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the benchmark for one (mode, model) configuration")
    run.add_argument("--config", help="JSON or YAML file supplying any of these flags")
    run.add_argument("--mode", choices=("cap", "tap"))
    run.add_argument("--model", help="'replay', 'mock:<file.json>' or 'model@base_url[#KEY_ENV]'")
    run.add_argument("--judges", default="oracle", help="'oracle' or three comma-separated model specs")
    run.add_argument("--corpus", help="corpus directory (defaults to the bundled corpus)")
    run.add_argument("--env", type=int, choices=(1, 2, 3))
    run.add_argument("--task", type=int, choices=(1, 2, 3))
    run.add_argument("--category", choices=("CAN", "LEX", "SYN", "SEM", "HLR", "can", "lex", "syn", "sem", "hlr"))
    run.add_argument("--parallel", type=int, default=1)
    run.add_argument("--repeat", type=int, default=1)
    run.add_argument("--out", default="results")
    run.add_argument("--seed-tag", default="")
    run.add_argument("--server", help="action server base URL; in-process worlds when omitted")
    run.add_argument("--max-steps", type=int, default=20)
    run.add_argument("--max-tool-steps", type=int, default=15)
    run.add_argument("--temperature", type=float, default=0.0)
    run.add_argument("--timeout", type=float, default=120.0)
    run.add_argument("--retries", type=int, default=2)

    corpus = sub.add_parser("corpus", help="corpus utilities")
    corpus_sub = corpus.add_subparsers(dest="corpus_command", required=True)
    validate = corpus_sub.add_parser("validate", help="load and check every instance")
    validate.add_argument("--corpus", help="corpus directory (defaults to the bundled corpus)")

    srv = sub.add_parser("serve", help="start the HTTP action server")
    srv.add_argument("--bind", default="127.0.0.1:8000")
    srv.add_argument("--env", type=int, default=3, choices=(1, 2, 3), help="environment of the default session")
    srv.add_argument("--corpus")

    report = sub.add_parser("report", help="summarize a results directory")
    report.add_argument("results_dir")
    report.add_argument("--format", choices=("csv", "table"), default="table")
    parser.set_defaults(run_parser=run)
    return parser


def parse_run_args(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    """Parse twice so a config file supplies defaults and explicit flags still win."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = load_config_file(args.config)
        run_parser = args.run_parser
        known = {a.dest for a in run_parser._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            parser.error(f"unknown keys in {args.config}: {', '.join(unknown)}")
        if isinstance(values.get("judges"), list):
            values["judges"] = ",".join(values["judges"])
        run_parser.set_defaults(**values)
        args = parser.parse_args(argv)
    missing = [f"--{name}" for name in RUN_REQUIRED if getattr(args, name) is None]
    if missing:
        parser.error(f"run requires {' and '.join(missing)} (on the command line or in --config)")
    return args


def cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig(
        mode=args.mode, model=args.model, judges=args.judges, corpus=args.corpus, env=args.env,
        task=args.task, category=args.category, parallel=args.parallel, out=args.out, seed_tag=args.seed_tag,
        repeat=args.repeat, server=args.server, max_steps=args.max_steps, max_tool_steps=args.max_tool_steps,
        temperature=args.temperature, timeout=args.timeout, retries=args.retries,
    )
    result_set = run_benchmark(config)
    sys.stdout.write(render_table([result_set.table]))
    errors = [r for r in result_set.results if r.error]
    if errors:
        logger.warning("%d of %d tasks recorded errors", len(errors), len(result_set.results))
    return 0


def cmd_corpus_validate(args: argparse.Namespace) -> int:
    try:
        corpus = load_corpus(args.corpus)
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    findings = validate_corpus(corpus)
    for finding in findings:
        print(finding)
    print(f"{len(corpus)} instances, {len(findings)} problems")
    return 1 if findings else 0


def cmd_report(args: argparse.Namespace) -> int:
    result_set = load_results(args.results_dir)
    emit_report(result_set, args.results_dir)
    render = render_csv if args.format == "csv" else render_table
    sys.stdout.write(render([result_set.table]))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(parse_run_args(parser, argv))
        if args.command == "corpus":
            return cmd_corpus_validate(args)
        if args.command == "serve":
            serve(args.bind, args.corpus, args.env)
            return 0
        return cmd_report(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
