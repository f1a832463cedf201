"""Command-line entry points.

Subcommands: collect, simulate, analyze, predict, report, selftest.
Exit codes: 0 success, 1 usage error, 2 data error, 3 selftest failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .collector import (
    AuthenticationError,
    http_transport,
    read_records,
    records_from_sequences,
    run_sweep,
    write_records,
)
from .config import (
    ReportOptions,
    endpoint_from_config,
    load_config,
    options_from_config,
    plan_from_config,
)
from .generators import GeneratorSpec, generate
from .predictor import CVConfig, cross_validated_mse
from .report import build_report, emit
from .selftest import run_selftest, selftest_report_bytes
from .sequences import extract_windows, flips_from_string
from .stats import InsufficientDataError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SELFTEST = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="flipbench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"flipbench {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("collect", help="sweep prompts x temperatures against an endpoint")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--endpoint", dest="base_url", help="chat-completions URL")
    p.add_argument("--model", help="model id")
    p.add_argument("--replicates", type=int)
    p.add_argument("--temps", help="comma-separated temperatures")

    p = sub.add_parser("simulate", help="emit synthetic records from a seeded generator")
    p.add_argument("--config", help="accepted for interface uniformity; no generator settings live in config")
    p.add_argument("--kind", required=True, choices=["bernoulli", "markov-alternation", "fixed-pattern"])
    p.add_argument("--length", type=int, default=20)
    p.add_argument("--count", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p-heads", type=float, default=0.5)
    p.add_argument("--p-alternate", type=float, default=0.5)
    p.add_argument("--p-first-heads", type=float, default=0.5)
    p.add_argument("--pattern", default="HT", help="pattern string for fixed-pattern, e.g. HT")
    p.add_argument("--prompt-id", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("analyze", help="build a report document from records")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--window", type=int)
    p.add_argument("--run-length", type=int, dest="run_length")
    p.add_argument("--baseline", choices=["exact", "monte-carlo"], dest="baseline_mode")
    p.add_argument("--ngram-scope", choices=["window", "sequence"], dest="ngram_scope")
    p.add_argument("--mc-samples", type=int, dest="mc_samples")
    p.add_argument("--mc-seed", type=int, dest="mc_seed")
    p.add_argument("--include-partial", action="store_true", default=None, dest="include_partial")
    p.add_argument("--no-predictor", action="store_false", default=None, dest="predictor")
    p.add_argument("--folds", type=int)
    p.add_argument("--cv-seed", type=int, dest="cv_seed")

    p = sub.add_parser("predict", help="cross-validated next-flip MSE per cell")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="output JSON (default: stdout)")
    p.add_argument("--config")
    p.add_argument("--window", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--cv-seed", type=int, dest="cv_seed")

    p = sub.add_parser("report", help="emit the CSV table bundle")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--report", dest="report_file", help="existing report document")
    src.add_argument("--in", dest="infile", help="records JSONL (report built first)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config")
    p.add_argument("--window", type=int)
    p.add_argument("--run-length", type=int, dest="run_length")
    p.add_argument("--ngram-scope", choices=["window", "sequence"], dest="ngram_scope")

    p = sub.add_parser("selftest", help="seeded fair-randomness self-consistency suite")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--out", help="write the selftest report document here")

    return parser


def _options_from_args(args) -> ReportOptions:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    overrides = {}
    for name in (
        "window",
        "run_length",
        "baseline_mode",
        "ngram_scope",
        "mc_samples",
        "mc_seed",
        "include_partial",
        "predictor",
        "folds",
        "cv_seed",
    ):
        if hasattr(args, name) and getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    return options_from_config(cfg, **overrides)


def _cmd_collect(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    endpoint = endpoint_from_config(cfg, base_url=args.base_url, model=args.model)
    if not endpoint.base_url or not endpoint.model:
        raise _UsageError("collect requires --endpoint and --model (or a config file)")
    temps = None
    if args.temps:
        temps = tuple(float(t) for t in args.temps.split(","))
    plan = plan_from_config(cfg, replicates=args.replicates, temperatures=temps)
    try:
        records = run_sweep(plan, endpoint, http_transport(endpoint))
    except AuthenticationError as exc:
        print(f"flipbench: authentication failed: {exc}", file=sys.stderr)
        return EXIT_DATA
    write_records(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.config:
        load_config(args.config)  # validated for uniformity; nothing consumed
    kind = args.kind.replace("-", "_")
    spec = GeneratorSpec(
        kind=kind,
        length=args.length,
        count=args.count,
        seed=args.seed,
        p_heads=args.p_heads,
        p_alternate=args.p_alternate,
        p_first_heads=args.p_first_heads,
        pattern=flips_from_string(args.pattern) if kind == "fixed_pattern" else (),
    )
    records = records_from_sequences(generate(spec), prompt_id=args.prompt_id)
    write_records(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    records = read_records(args.infile)
    if not records:
        print(f"flipbench: no records in {args.infile}", file=sys.stderr)
        return EXIT_DATA
    options = _options_from_args(args)
    report = build_report(records, options)
    emit(report, args.out, "json")
    print(f"wrote report for {len(report['cells'])} cells to {args.out}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    records = read_records(args.infile)
    if not records:
        print(f"flipbench: no records in {args.infile}", file=sys.stderr)
        return EXIT_DATA
    from .report import _sequences_of  # shared record filtering

    options = _options_from_args(args)
    by_cell = {}
    for rec in records:
        by_cell.setdefault((rec.model, rec.prompt_id, rec.temperature), []).append(rec)
    blocks = []
    for key in sorted(by_cell):
        seqs = _sequences_of(by_cell[key], include_partial=options.include_partial)
        windows = extract_windows(seqs, options.window)
        block = {"model": key[0], "prompt_id": key[1], "temperature": key[2], "windows": len(windows)}
        try:
            cv = cross_validated_mse(windows, CVConfig(folds=options.folds, seed=options.cv_seed))
            block.update(
                {
                    "lambda": cv.best_lambda,
                    "mse": cv.mse,
                    "fold_mses": list(cv.fold_mses),
                    "weights": dict(zip(cv.model.feature_names, cv.model.weights)),
                    "intercept": cv.model.intercept,
                }
            )
        except (InsufficientDataError, ValueError) as exc:
            block["error"] = str(exc)
        blocks.append(block)
    payload = json.dumps({"version": __version__, "cells": blocks}, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
        print(f"wrote predictor blocks for {len(blocks)} cells to {args.out}")
    else:
        print(payload, end="")
    return EXIT_OK


def _cmd_report(args) -> int:
    if args.report_file:
        with open(args.report_file, encoding="utf-8") as fh:
            report = json.load(fh)
    else:
        records = read_records(args.infile)
        if not records:
            print(f"flipbench: no records in {args.infile}", file=sys.stderr)
            return EXIT_DATA
        report = build_report(records, _options_from_args(args))
    paths = emit(report, args.out_dir, "csv")
    print(f"wrote {len(paths)} tables to {args.out_dir}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    folds = args.folds
    if folds is None:
        cfg = load_config(args.config) if args.config else {}
        folds = options_from_config(cfg).folds
    result = run_selftest(seed=args.seed, samples=args.samples, folds=folds)
    for check in result.checks:
        print(check.line())
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(selftest_report_bytes(result))
        print(f"wrote selftest report to {args.out}")
    if not result.ok:
        print("selftest: FAILED", file=sys.stderr)
        return EXIT_SELFTEST
    print("selftest: OK")
    return EXIT_OK


_COMMANDS = {
    "collect": _cmd_collect,
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "predict": _cmd_predict,
    "report": _cmd_report,
    "selftest": _cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"flipbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --version / --help
        return int(exc.code or 0)
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"flipbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"flipbench: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, InsufficientDataError) as exc:
        print(f"flipbench: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
