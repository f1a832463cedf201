"""Config file loading and the report-side option/threshold dataclasses.

One JSON document configures everything; sections are optional:

    {
      "endpoint":  {"base_url": ..., "model": ..., "max_retries": 3, ...},
      "plan":      {"prompts": [{"id", "template", "expected_flips",
                                 "order_tag"}], "temperatures": [...],
                    "replicates": 30, "seed": 0},
      "options":   {"window": 8, "run_length": 7, ...},
      "thresholds": {"excess_alternation_se": 2.0, ...},
      "human_baselines": {"alternation_rate": {"value", "citation"}, ...}
    }
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields

from .baselines import (
    DEFAULT_HUMAN_BASELINES,
    HumanBaselineRegistry,
    HumanConstant,
    load_human_baselines,
)
from .collector import EndpointConfig, PromptSpec, SweepPlan, default_plan


@dataclass(frozen=True)
class Thresholds:
    """Humanness-flag cutoffs.  These are reporting conventions, not
    published values; every emitted flag is accompanied by the threshold
    that produced it."""

    excess_alternation_se: float = 2.0  # mean alts > baseline + n*SE
    over_balance_se: float = 2.0  # mid-bin mass > baseline + n*SE
    first_flip_bias_cutoff: float = 0.6  # heads proportion at position 0
    run_aversion_min_length: int = 3  # ratios < 1 for all L >= this
    min_windows_for_stats: int = 30
    min_windows_per_fold_for_predictor: int = 10


@dataclass(frozen=True)
class ReportOptions:
    window: int = 8
    run_length: int = 7  # run analysis uses this prefix of each window
    ngram_ns: tuple[int, ...] = (2, 3)
    ngram_scope: str = "window"  # "window" | "sequence" (whole responses)
    baseline_mode: str = "exact"  # "exact" | "monte-carlo"
    mc_samples: int = 100_000
    mc_seed: int = 0
    include_partial: bool = False
    predictor: bool = True
    folds: int = 5
    cv_seed: int = 0
    n_lambdas: int = 50
    lambda_min_ratio: float = 1e-3
    thresholds: Thresholds = field(default_factory=Thresholds)
    human_baselines: HumanBaselineRegistry = field(
        default_factory=lambda: DEFAULT_HUMAN_BASELINES
    )

    def validate(self) -> None:
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if not 1 <= self.run_length <= self.window:
            raise ValueError("run_length must be in 1..window")
        if self.baseline_mode not in ("exact", "monte-carlo"):
            raise ValueError(f"unknown baseline mode {self.baseline_mode!r}")
        if self.ngram_scope not in ("window", "sequence"):
            raise ValueError(f"unknown ngram scope {self.ngram_scope!r}")
        for n in self.ngram_ns:
            if not 1 <= n <= self.window:
                raise ValueError(f"ngram n {n} out of range 1..{self.window}")

    def canonical_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["human_baselines"] = self.human_baselines.as_dict()
        return d


def load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValueError(f"malformed config {path}: expected an object")
    return cfg


def endpoint_from_config(cfg: dict, **overrides) -> EndpointConfig:
    section = dict(cfg.get("endpoint", {}))
    section.update({k: v for k, v in overrides.items() if v is not None})
    allowed = {f.name for f in fields(EndpointConfig)}
    unknown = set(section) - allowed
    if unknown:
        raise ValueError(f"unknown endpoint keys: {sorted(unknown)}")
    return EndpointConfig(**section)


def plan_from_config(cfg: dict, **overrides) -> SweepPlan:
    section = dict(cfg.get("plan", {}))
    section.update({k: v for k, v in overrides.items() if v is not None})
    if "prompts" in section:
        try:
            prompts = tuple(
                PromptSpec(
                    id=p["id"],
                    template=p["template"],
                    expected_flips=int(p["expected_flips"]),
                    order_tag=p.get("order_tag"),
                )
                for p in section["prompts"]
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad prompt entry in plan config: {exc}") from exc
    else:
        prompts = default_plan().prompts
    temperatures = tuple(float(t) for t in section.get("temperatures", default_plan().temperatures))
    return SweepPlan(
        prompts=prompts,
        temperatures=temperatures,
        replicates=int(section.get("replicates", 30)),
        seed=int(section.get("seed", 0)),
        allow_high_temperature=bool(section.get("allow_high_temperature", False)),
    )


def options_from_config(cfg: dict, **overrides) -> ReportOptions:
    section = dict(cfg.get("options", {}))
    section.update({k: v for k, v in overrides.items() if v is not None})
    if "ngram_ns" in section:
        section["ngram_ns"] = tuple(int(n) for n in section["ngram_ns"])

    thr_section = cfg.get("thresholds", {})
    if thr_section:
        allowed_thr = {f.name for f in fields(Thresholds)}
        unknown_thr = set(thr_section) - allowed_thr
        if unknown_thr:
            raise ValueError(f"unknown threshold keys: {sorted(unknown_thr)}")
        section["thresholds"] = Thresholds(**thr_section)

    hb_section = cfg.get("human_baselines", {})
    if hb_section:
        values = dict(vars(DEFAULT_HUMAN_BASELINES))
        for name, entry in hb_section.items():
            if name not in values:
                raise ValueError(f"unknown baseline constant {name!r}")
            if not entry.get("citation"):
                raise ValueError(f"baseline override {name!r} requires a citation")
            values[name] = HumanConstant(float(entry["value"]), entry["citation"])
        section["human_baselines"] = HumanBaselineRegistry(**values)
    elif "human_baselines_path" in section:
        section["human_baselines"] = load_human_baselines(section.pop("human_baselines_path"))

    allowed = {f.name for f in fields(ReportOptions)}
    unknown = set(section) - allowed
    if unknown:
        raise ValueError(f"unknown option keys: {sorted(unknown)}")
    opts = ReportOptions(**section)
    opts.validate()
    return opts
