"""Self-consistency suite: the battery must call seeded fair randomness random.

Generates i.i.d. fair sequences from the built-in PRNG, pushes them
through the full record -> report pipeline, and checks every statistic
against its exact fair-coin reference at fixed tolerances.  Any failed
check is a violated invariant of the suite itself.
"""
from __future__ import annotations

from dataclasses import dataclass

from .collector import records_from_sequences
from .config import ReportOptions
from .generators import GeneratorSpec, generate
from .report import build_report, report_bytes


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"selftest: {'PASS' if self.ok else 'FAIL'} {self.name} ({self.detail})"


@dataclass(frozen=True)
class SelftestResult:
    checks: tuple[Check, ...]
    report: dict

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)


def run_selftest(seed: int = 7, samples: int = 10_000, folds: int = 5) -> SelftestResult:
    """Battery + predictor on ``samples`` seeded fair windows of length 8."""
    spec = GeneratorSpec("bernoulli", length=8, count=samples, seed=seed)
    records = records_from_sequences(generate(spec), prompt_id=f"selftest_seed{seed}")
    options = ReportOptions(window=8, run_length=7, folds=folds, cv_seed=seed)
    report = build_report(records, options)
    cell = report["cells"][0]

    checks: list[Check] = []

    def check(name: str, ok: bool, detail: str) -> None:
        checks.append(Check(name, bool(ok), detail))

    alts = cell.get("alternations")
    if alts is None:
        check("alternation_mean within 3.5 +/- 0.05", False, "battery insufficient")
        check("histogram masses sum to 1 +/- 1e-9", False, "battery insufficient")
    else:
        check(
            "alternation_mean within 3.5 +/- 0.05",
            abs(alts["mean"] - 3.5) <= 0.05,
            f"mean={alts['mean']:.4f}",
        )
        alt_sum = sum(alts["mass"].values())
        hc_sum = sum(cell["heads_count"]["mass"].values())
        check(
            "histogram masses sum to 1 +/- 1e-9",
            abs(alt_sum - 1.0) <= 1e-9 and abs(hc_sum - 1.0) <= 1e-9,
            f"alt={alt_sum!r} heads={hc_sum!r}",
        )

    grams = cell.get("ngrams")
    if not grams or "3" not in grams:
        check("every 3-gram fraction within 0.125 +/- 0.01", False, "battery insufficient")
    else:
        tri = grams["3"]["fractions"]
        worst_key = max(tri, key=lambda key: abs(tri[key] - 0.125))
        check(
            "every 3-gram fraction within 0.125 +/- 0.01",
            all(abs(v - 0.125) <= 0.01 for v in tri.values()),
            f"worst {worst_key}={tri[worst_key]:.4f}",
        )

    corr = cell.get("correlation")
    if corr is None:
        check("every |phi| < 0.05", False, "battery insufficient")
    else:
        offdiag = {
            i: v
            for i, v in corr["entries"].items()
            if int(i) != corr["target"] and v is not None
        }
        worst_pos = max(offdiag, key=lambda i: abs(offdiag[i]))
        check(
            "every |phi| < 0.05",
            all(abs(v) < 0.05 for v in offdiag.values()),
            f"worst position {worst_pos} phi={offdiag[worst_pos]:.4f}",
        )

    runs = cell.get("runs")
    if runs is None:
        check("all run ratios within 1.0 +/- 0.07", False, "battery insufficient")
    else:
        ratios = runs["ratios"]
        worst_L = max(ratios, key=lambda L: abs(ratios[L] - 1.0))
        check(
            "all run ratios within 1.0 +/- 0.07",
            all(abs(r - 1.0) <= 0.07 for r in ratios.values()),
            f"worst L={worst_L} ratio={ratios[worst_L]:.4f}",
        )

    set_flags = [name for name, v in cell["flags"].items() if v]
    check("zero humanness flags", not set_flags, f"set={set_flags or 'none'}")

    pred = cell.get("predictor")
    if pred is None:
        reason = cell["insufficient"].get("predictor", "predictor skipped")
        check("cross-validated MSE in [0.24, 0.26]", False, reason)
    else:
        check(
            "cross-validated MSE in [0.24, 0.26]",
            0.24 <= pred["mse"] <= 0.26,
            f"mse={pred['mse']:.4f} lambda={pred['lambda']:.5f}",
        )

    return SelftestResult(tuple(checks), report)


def selftest_report_bytes(result: SelftestResult) -> bytes:
    return report_bytes(result.report)
