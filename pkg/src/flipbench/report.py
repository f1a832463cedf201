"""Aggregate records into per-cell statistic reports and emit them.

The report is one self-contained JSON-ready document: re-rendering any
table needs only the document, never the original JSONL.  Building is a
pure function of (records, options, tool version), so identical inputs
give byte-identical emissions.

Document layout::

    {
      "tool", "version", "config_digest", "baseline_digest",
      "report_digest", "options", "thresholds", "human_baselines",
      "baselines": {"window": {...}, "runs": {...}},
      "cells": [ per (model, prompt_id, temperature) stat blocks ],
      "tables": {"single_flip_heads", "first_flip_heads",
                 "prompt_order", "mse_series"}
    }
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from collections import defaultdict
from typing import Optional, Sequence

from . import __version__
from .baselines import BaselineTable, exact_baseline, monte_carlo_baseline
from .collector import CollectionRecord
from .config import ReportOptions
from .predictor import CVConfig, cross_validated_mse, gap_ratio
from .sequences import FlipSequence, ParseKind, SequenceMeta, Window, extract_windows
from .stats import (
    HEADS_FIRST,
    TAILS_FIRST,
    InsufficientDataError,
    alternation_histogram,
    correlation_matrix,
    heads_count_histogram,
    heads_proportion,
    ngram_fractions,
    ngram_fractions_sequences,
    positional_correlation,
    primacy_table,
    run_length_stats,
    run_ratio,
)

PARSE_KINDS = ("parsed", "partial", "refusal", "unparseable")


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _digest(obj) -> str:
    return hashlib.sha256(_canonical_json(obj).encode("utf-8")).hexdigest()


def _baseline_dict(table: BaselineTable) -> dict:
    return {
        "k": table.k,
        "heads_count_pmf": {str(k): v for k, v in table.heads_count_pmf.items()},
        "alternation_pmf": {str(k): v for k, v in table.alternation_pmf.items()},
        "alternation_mean": table.alternation_mean,
        "expected_runs_per_window": {
            str(k): v for k, v in table.expected_runs_per_window.items()
        },
        "ngram_fractions": {
            str(n): dict(f) for n, f in table.ngram_fractions.items()
        },
        "mse_floor": table.mse_floor,
        "samples": table.samples,
    }


def order_tag_of(prompt_id: str) -> Optional[str]:
    """Prompt-order variant recovered from the prompt id naming convention."""
    if HEADS_FIRST in prompt_id:
        return HEADS_FIRST
    if TAILS_FIRST in prompt_id:
        return TAILS_FIRST
    return None


def _sequences_of(records: Sequence[CollectionRecord], include_partial: bool) -> list[FlipSequence]:
    kinds = {ParseKind.PARSED.value}
    if include_partial:
        kinds.add(ParseKind.PARTIAL.value)
    seqs = []
    for rec in records:
        if rec.parse_kind in kinds and rec.flips:
            meta = SequenceMeta(rec.model, rec.prompt_id, rec.temperature, rec.replicate)
            seqs.append(FlipSequence(rec.flip_tuple, meta))
    return seqs


def _baselines_for(options: ReportOptions) -> tuple[BaselineTable, BaselineTable]:
    ns = tuple(sorted({1, *options.ngram_ns}))
    if options.baseline_mode == "monte-carlo":
        win = monte_carlo_baseline(
            options.window, options.mc_samples, options.mc_seed, ngram_ns=ns
        )
        run = monte_carlo_baseline(
            options.run_length, options.mc_samples, options.mc_seed, ngram_ns=ns
        )
    else:
        win = exact_baseline(options.window, ngram_ns=ns)
        run = exact_baseline(options.run_length, ngram_ns=ns)
    return win, run


def _cell_stats(
    seqs: list[FlipSequence],
    options: ReportOptions,
    base_win: BaselineTable,
    base_run: BaselineTable,
) -> dict:
    """Battery + predictor block for one cell; marks anything it cannot
    compute with the threshold that failed instead of omitting it."""
    thr = options.thresholds
    cell: dict = {"sequences_used": len(seqs)}
    insufficient: dict[str, str] = {}
    flags: dict[str, bool] = {}

    try:
        cell["heads_first_proportion"] = heads_proportion(seqs, 0) if seqs else None
    except (InsufficientDataError, ValueError):
        cell["heads_first_proportion"] = None
    if cell["heads_first_proportion"] is None:
        insufficient["heads_first_proportion"] = "no parsed sequences"

    windows = extract_windows(seqs, options.window) if seqs else []
    cell["window_count"] = len(windows)

    if len(windows) < thr.min_windows_for_stats:
        insufficient["battery"] = (
            f"needs >= {thr.min_windows_for_stats} windows of length "
            f"{options.window}, have {len(windows)}"
        )
    else:
        hist = heads_count_histogram(windows)
        mid = (hist.k + 1) // 2
        p_mid = base_win.heads_count_pmf[mid]
        se_mid = math.sqrt(p_mid * (1 - p_mid) / hist.window_count)
        cell["heads_count"] = {
            "k": hist.k,
            "mass": {str(x): v for x, v in hist.mass.items()},
            "mean": hist.mean,
            "mid_bin": mid,
            "mid_mass": hist.mass[mid],
            "baseline_mid_mass": p_mid,
            "delta_mid_mass": hist.mass[mid] - p_mid,
        }
        flags["over_balance"] = hist.mass[mid] > p_mid + thr.over_balance_se * se_mid

        alts = alternation_histogram(windows)
        se_alt = base_win.alternation_std / math.sqrt(alts.window_count)
        cell["alternations"] = {
            "k": alts.k,
            "mass": {str(a): v for a, v in alts.mass.items()},
            "mean": alts.mean,
            "baseline_mean": base_win.alternation_mean,
            "delta_mean": alts.mean - base_win.alternation_mean,
        }
        flags["excess_alternation"] = (
            alts.mean > base_win.alternation_mean + thr.excess_alternation_se * se_alt
        )

        run_windows = [
            Window(w.bits[: options.run_length], w.offset, w.parent) for w in windows
        ]
        stats = run_length_stats(run_windows)
        ratios = run_ratio(stats, base_run)
        cell["runs"] = {
            "window_length": stats.window_length,
            "window_count": stats.window_count,
            "counts": {str(L): c for L, c in sorted(stats.counts.items())},
            "expected_per_window": {
                str(L): base_run.expected_runs_per_window[L]
                for L in range(1, options.run_length + 1)
            },
            "ratios": {str(L): r for L, r in ratios.items()},
        }
        aversion_lengths = range(
            max(thr.run_aversion_min_length, 2), options.run_length + 1
        )
        flags["run_aversion"] = bool(aversion_lengths) and all(
            ratios[L] < 1.0 for L in aversion_lengths
        )

        cell["ngrams"] = {}
        for n in options.ngram_ns:
            if options.ngram_scope == "sequence":
                table = ngram_fractions_sequences(seqs, n)
            else:
                table = ngram_fractions(windows, n)
            expected = base_win.ngram_fractions[n]
            cell["ngrams"][str(n)] = {
                "total": table.total,
                "counts": dict(sorted(table.counts.items())),
                "fractions": dict(sorted(table.fractions.items())),
                "expected": dict(sorted(expected.items())),
                "delta": {
                    key: table.fractions[key] - expected[key]
                    for key in sorted(table.fractions)
                },
            }

        corr = positional_correlation(windows, target=options.window)
        cell["correlation"] = {
            "target": corr.target,
            "entries": {str(i): v for i, v in corr.entries.items()},
        }
        cell["correlation_matrix"] = correlation_matrix(windows)

    prop = cell["heads_first_proportion"]
    flags["first_flip_bias"] = bool(
        prop is not None and prop > thr.first_flip_bias_cutoff
    )

    min_pred = options.folds * thr.min_windows_per_fold_for_predictor
    if not options.predictor:
        insufficient["predictor"] = "disabled by options"
        cell["predictor"] = None
    elif len(windows) < min_pred:
        insufficient["predictor"] = (
            f"needs >= {min_pred} windows ({options.folds} folds x "
            f"{thr.min_windows_per_fold_for_predictor}), have {len(windows)}"
        )
        cell["predictor"] = None
    else:
        cfg = CVConfig(
            folds=options.folds,
            n_lambdas=options.n_lambdas,
            lambda_min_ratio=options.lambda_min_ratio,
            seed=options.cv_seed,
        )
        try:
            cv = cross_validated_mse(windows, cfg)
        except (InsufficientDataError, ValueError) as exc:
            insufficient["predictor"] = str(exc)
            cell["predictor"] = None
        else:
            human = options.human_baselines.min_human_mse.value
            cell["predictor"] = {
                "lambda": cv.best_lambda,
                "mse": cv.mse,
                "fold_mses": list(cv.fold_mses),
                "delta_mse": cv.mse - base_win.mse_floor,
                "gap_ratio": gap_ratio(cv.mse, human, base_win.mse_floor),
                "intercept": cv.model.intercept,
                "weights": dict(zip(cv.model.feature_names, cv.model.weights)),
                "n_windows": cv.n_windows,
            }

    cell["flags"] = {name: bool(v) for name, v in sorted(flags.items())}
    cell["flag_thresholds"] = {
        "excess_alternation": f"mean alternations > baseline + "
        f"{thr.excess_alternation_se} SE",
        "over_balance": f"mid-bin heads-count mass > baseline + "
        f"{thr.over_balance_se} SE",
        "first_flip_bias": f"heads proportion at position 0 > "
        f"{thr.first_flip_bias_cutoff}",
        "run_aversion": f"run ratio < 1 for every length >= "
        f"{thr.run_aversion_min_length}",
    }
    cell["insufficient"] = insufficient
    return cell


def build_report(records: Sequence[CollectionRecord], options: ReportOptions | None = None) -> dict:
    options = options or ReportOptions()
    options.validate()
    if not records:
        raise InsufficientDataError("no records supplied")

    base_win, base_run = _baselines_for(options)

    by_cell: dict[tuple[str, str, float], list[CollectionRecord]] = defaultdict(list)
    for rec in records:
        by_cell[(rec.model, rec.prompt_id, rec.temperature)].append(rec)

    cells = []
    for key in sorted(by_cell):
        model, prompt_id, temperature = key
        recs = by_cell[key]
        counts = {kind: 0 for kind in PARSE_KINDS}
        for rec in recs:
            counts[rec.parse_kind] = counts.get(rec.parse_kind, 0) + 1
        seqs = _sequences_of(recs, options.include_partial)
        cell = {
            "model": model,
            "prompt_id": prompt_id,
            "temperature": temperature,
            "order_tag": order_tag_of(prompt_id),
            "yield": {"records": len(recs), **counts},
        }
        cell.update(_cell_stats(seqs, options, base_win, base_run))
        cells.append(cell)

    tables = _cross_cell_tables(cells, by_cell, options)

    opts_dict = options.canonical_dict()
    body = {
        "tool": "flipbench",
        "version": __version__,
        "options": opts_dict,
        "thresholds": opts_dict["thresholds"],
        "human_baselines": opts_dict["human_baselines"],
        "config_digest": _digest({"options": opts_dict, "version": __version__}),
        "baselines": {
            "window": _baseline_dict(base_win),
            "runs": _baseline_dict(base_run),
        },
        "baseline_digest": _digest(
            {"window": _baseline_dict(base_win), "runs": _baseline_dict(base_run)}
        ),
        "cells": cells,
        "tables": tables,
    }
    body["report_digest"] = _digest(body)
    return body


def _modal_length(records: Sequence[CollectionRecord]) -> int:
    lengths = defaultdict(int)
    for rec in records:
        if rec.parse_kind == ParseKind.PARSED.value and rec.flips:
            lengths[len(rec.flips)] += 1
    if not lengths:
        return 0
    return max(sorted(lengths), key=lambda n: lengths[n])


def _cross_cell_tables(cells, by_cell, options: ReportOptions) -> dict:
    single_rows = []
    first_rows = []
    mse_rows = []
    for cell in cells:
        key = (cell["model"], cell["prompt_id"], cell["temperature"])
        modal = _modal_length(by_cell[key])
        row = {
            "model": cell["model"],
            "prompt_id": cell["prompt_id"],
            "temperature": cell["temperature"],
            "n_sequences": cell["sequences_used"],
            "heads_proportion": cell["heads_first_proportion"],
        }
        if modal == 1:
            single_rows.append(row)
        elif modal > 1:
            first_rows.append(row)
        pred = cell.get("predictor")
        mse_rows.append(
            {
                "model": cell["model"],
                "prompt_id": cell["prompt_id"],
                "temperature": cell["temperature"],
                "windows": cell["window_count"],
                "lambda": pred["lambda"] if pred else None,
                "mse": pred["mse"] if pred else None,
                "delta_mse": pred["delta_mse"] if pred else None,
                "gap_ratio": pred["gap_ratio"] if pred else None,
            }
        )

    # Prompt-order contingency, pooled over temperatures per model.
    firsts: dict[str, dict[str, list[int]]] = defaultdict(lambda: {HEADS_FIRST: [], TAILS_FIRST: []})
    for key, recs in by_cell.items():
        model = key[0]
        tag = order_tag_of(key[1])
        if tag is None:
            continue
        for rec in recs:
            if rec.parse_kind == ParseKind.PARSED.value and rec.flips:
                firsts[model][tag].append(rec.flip_tuple[0])
    primacy_rows = []
    for model in sorted(firsts):
        try:
            result = primacy_table(firsts[model])
        except InsufficientDataError as exc:
            primacy_rows.append({"model": model, "error": str(exc)})
            continue
        (a, b), (c, d) = result.counts
        primacy_rows.append(
            {
                "model": model,
                "heads_first_prompt": {"heads_first": a, "tails_first": b},
                "tails_first_prompt": {"heads_first": c, "tails_first": d},
                "chi_square": result.chi_square,
                "significant": result.significant,
                "low_expected_cells": [list(c_) for c_ in result.low_expected_cells],
                "heads_first_rate_by_variant": result.heads_first_rate_by_variant,
            }
        )

    return {
        "single_flip_heads": single_rows,
        "first_flip_heads": first_rows,
        "prompt_order": primacy_rows,
        "mse_series": mse_rows,
    }


def emit(report: dict, out: str, format: str = "json") -> list[str]:
    """Write the report; json -> one document at ``out``, csv -> a bundle
    of plot-ready tables in directory ``out``.  Byte-stable."""
    if format == "json":
        data = report_bytes(report)
        with open(out, "wb") as fh:
            fh.write(data)
        return [out]
    if format == "csv":
        return emit_csv_bundle(report, out)
    raise ValueError(f"unknown emit format {format!r}")


def report_bytes(report: dict) -> bytes:
    return (json.dumps(report, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def emit_csv_bundle(report: dict, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    cells = report["cells"]
    written = []

    def cell_key(cell):
        return [cell["model"], cell["prompt_id"], cell["temperature"]]

    specs: list[tuple[str, list[str], list[list]]] = []

    rows = []
    for cell in cells:
        hc = cell.get("heads_count")
        if not hc:
            continue
        base = report["baselines"]["window"]["heads_count_pmf"]
        for x in range(hc["k"] + 1):
            frac = hc["mass"][str(x)]
            rows.append(cell_key(cell) + [hc["k"], x, frac, base[str(x)], frac - base[str(x)]])
    specs.append(
        (
            "heads_count_histogram.csv",
            ["model", "prompt_id", "temperature", "k", "heads", "fraction", "expected", "delta"],
            rows,
        )
    )

    rows = []
    for cell in cells:
        alt = cell.get("alternations")
        if not alt:
            continue
        base = report["baselines"]["window"]["alternation_pmf"]
        for a in range(alt["k"]):
            frac = alt["mass"][str(a)]
            rows.append(cell_key(cell) + [alt["k"], a, frac, base[str(a)], frac - base[str(a)]])
    specs.append(
        (
            "alternation_histogram.csv",
            ["model", "prompt_id", "temperature", "k", "alternations", "fraction", "expected", "delta"],
            rows,
        )
    )

    rows = []
    for cell in cells:
        runs = cell.get("runs")
        if not runs:
            continue
        for L_str, ratio in sorted(runs["ratios"].items(), key=lambda kv: int(kv[0])):
            L = int(L_str)
            realized = runs["counts"].get(L_str, 0)
            expected = runs["expected_per_window"][L_str] * runs["window_count"]
            rows.append(
                cell_key(cell)
                + [runs["window_length"], L, realized, expected, ratio]
            )
    specs.append(
        (
            "run_ratios.csv",
            ["model", "prompt_id", "temperature", "window_length", "run_length", "realized", "expected", "ratio"],
            rows,
        )
    )

    rows = []
    for cell in cells:
        for n_str, table in sorted((cell.get("ngrams") or {}).items()):
            for key in sorted(table["fractions"]):
                rows.append(
                    cell_key(cell)
                    + [
                        int(n_str),
                        key,
                        table["counts"][key],
                        table["fractions"][key],
                        table["expected"][key],
                        table["delta"][key],
                    ]
                )
    specs.append(
        (
            "ngram_fractions.csv",
            ["model", "prompt_id", "temperature", "n", "ngram", "count", "fraction", "expected", "delta"],
            rows,
        )
    )

    rows = []
    for cell in cells:
        corr = cell.get("correlation")
        if not corr:
            continue
        for i_str, phi in sorted(corr["entries"].items(), key=lambda kv: int(kv[0])):
            rows.append(cell_key(cell) + [corr["target"], int(i_str), "" if phi is None else phi])
    specs.append(
        (
            "correlation_vector.csv",
            ["model", "prompt_id", "temperature", "target", "position", "phi"],
            rows,
        )
    )

    rows = []
    for cell in cells:
        mat = cell.get("correlation_matrix")
        if not mat:
            continue
        for i, row in enumerate(mat, start=1):
            for j, phi in enumerate(row, start=1):
                rows.append(cell_key(cell) + [i, j, "" if phi is None else phi])
    specs.append(
        (
            "correlation_matrix.csv",
            ["model", "prompt_id", "temperature", "i", "j", "phi"],
            rows,
        )
    )

    for name, table_key in (
        ("single_flip_heads.csv", "single_flip_heads"),
        ("first_flip_heads.csv", "first_flip_heads"),
    ):
        rows = [
            [
                r["model"],
                r["prompt_id"],
                r["temperature"],
                r["n_sequences"],
                "" if r["heads_proportion"] is None else r["heads_proportion"],
            ]
            for r in report["tables"][table_key]
        ]
        specs.append(
            (name, ["model", "prompt_id", "temperature", "n_sequences", "heads_proportion"], rows)
        )

    rows = []
    for r in report["tables"]["prompt_order"]:
        if "error" in r:
            rows.append([r["model"], "", "", "", "", "", "", r["error"]])
            continue
        rows.append(
            [
                r["model"],
                r["heads_first_prompt"]["heads_first"],
                r["heads_first_prompt"]["tails_first"],
                r["tails_first_prompt"]["heads_first"],
                r["tails_first_prompt"]["tails_first"],
                r["chi_square"],
                r["significant"],
                "",
            ]
        )
    specs.append(
        (
            "prompt_order_contingency.csv",
            [
                "model",
                "heads_first_prompt_heads_first",
                "heads_first_prompt_tails_first",
                "tails_first_prompt_heads_first",
                "tails_first_prompt_tails_first",
                "chi_square",
                "significant",
                "note",
            ],
            rows,
        )
    )

    rows = [
        [
            r["model"],
            r["prompt_id"],
            r["temperature"],
            r["windows"],
            "" if r["lambda"] is None else r["lambda"],
            "" if r["mse"] is None else r["mse"],
            "" if r["delta_mse"] is None else r["delta_mse"],
            "" if r["gap_ratio"] is None else r["gap_ratio"],
        ]
        for r in report["tables"]["mse_series"]
    ]
    specs.append(
        (
            "mse_series.csv",
            ["model", "prompt_id", "temperature", "windows", "lambda", "mse", "delta_mse", "gap_ratio"],
            rows,
        )
    )

    for name, header, rows in specs:
        path = os.path.join(out_dir, name)
        _write_csv(path, header, rows)
        written.append(path)
    return written
