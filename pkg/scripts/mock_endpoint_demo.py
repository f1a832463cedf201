#!/usr/bin/env python3
"""Full collect -> analyze -> tables pipeline against an in-process mock.

The mock endpoint behaves like the degenerate-to-chaotic spectrum seen in
real chat models: at temperature 0 it always answers the same alternating
sequence, at moderate temperatures it samples with a heads/alternation
bias, and at the top of the range it sometimes refuses or returns noise.
Useful for eyeballing report output without any network access.

Usage:
    python scripts/mock_endpoint_demo.py [--out-dir out/mock] [--replicates 30]
"""
import argparse
import os
import sys

from flipbench.collector import EndpointConfig, SweepPlan, default_plan, run_sweep, write_records
from flipbench.config import ReportOptions
from flipbench.report import build_report, emit
from flipbench.rng import Xorshift64Star, derive_seed
from flipbench.sequences import flips_to_text


def make_mock_transport(seed: int = 0):
    state = {"i": 0}

    def transport(request):
        idx = state["i"]
        state["i"] += 1
        rng = Xorshift64Star(derive_seed(seed, idx))
        temperature = request["temperature"]
        prompt = request["messages"][0]["content"]
        n = 20 if "20" in prompt else 1

        if temperature >= 1.5 and rng.random() < 0.2:
            text = "#@!~ unintelligible %% output" if rng.random() < 0.5 else (
                "I am a language model and cannot flip coins."
            )
            return {"choices": [{"message": {"content": text}}]}

        if temperature == 0.0:
            flips = [(1, 0)[i % 2] for i in range(n)]
        else:
            p_alt = max(0.5, 0.9 - 0.2 * temperature)
            flips = [1 if rng.random() < 0.8 else 0]
            for _ in range(n - 1):
                flips.append(flips[-1] ^ 1 if rng.random() < p_alt else flips[-1])
        return {"choices": [{"message": {"content": flips_to_text(flips)}}]}

    return transport


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/mock")
    ap.add_argument("--replicates", type=int, default=30)
    args = ap.parse_args()

    base = default_plan(replicates=args.replicates)
    plan = SweepPlan(base.prompts, (0.0, 0.5, 1.0, 1.5), replicates=args.replicates)
    endpoint = EndpointConfig(base_url="mock://demo", model="mock-chat", max_retries=2)
    records = run_sweep(plan, endpoint, make_mock_transport(), sleep=lambda s: None)

    os.makedirs(args.out_dir, exist_ok=True)
    runs_path = os.path.join(args.out_dir, "runs.jsonl")
    write_records(runs_path, records)

    report = build_report(records, ReportOptions())
    emit(report, os.path.join(args.out_dir, "report.json"), "json")
    emit(report, os.path.join(args.out_dir, "tables"), "csv")

    parsed = sum(1 for r in records if r.parse_kind == "parsed")
    refused = sum(1 for r in records if r.parse_kind == "refusal")
    garbage = sum(1 for r in records if r.parse_kind == "unparseable")
    print(f"{len(records)} records: {parsed} parsed, {refused} refusals, {garbage} unparseable")
    for row in report["tables"]["mse_series"]:
        if row["mse"] is not None:
            print(
                f"  {row['model']} {row['prompt_id']:28} t={row['temperature']:<4} "
                f"mse={row['mse']:.4f}"
            )
    print(f"\nwrote {runs_path}, report.json and tables/ under {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
