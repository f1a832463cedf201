"""Fair-coin reference values for every battery statistic.

``exact_baseline`` enumerates all 2^k equally likely windows with integer
counts (bit tricks on packed window values, deliberately a separate code
path from the battery's per-column counting so the two can cross-check
each other).  ``monte_carlo_baseline`` estimates the same table from a
seeded stream for window lengths beyond the enumeration bound, or for a
biased coin.  A small registry of published human-bias constants rides
along for report comparisons.
"""
from __future__ import annotations

import math
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rng import Xorshift64Star, derive_seed
from .stats import ngram_key

ENUMERATION_LIMIT = 24
DEFAULT_NGRAM_NS = (1, 2, 3)

#: Fair-coin mean squared error floor for the next-flip predictor.
MSE_FLOOR = 0.25

_CHUNK = 1 << 20


@dataclass(frozen=True)
class BaselineTable:
    k: int
    heads_count_pmf: dict[int, float]  # x in 0..k
    alternation_pmf: dict[int, float]  # a in 0..k-1
    alternation_mean: float
    expected_runs_per_window: dict[int, float]  # L in 1..k
    ngram_fractions: dict[int, dict[str, float]]
    mse_floor: float = MSE_FLOOR
    samples: Optional[int] = None  # None => exact enumeration
    stderr: Optional[dict] = None  # per-statistic standard errors (MC only)

    @property
    def alternation_std(self) -> float:
        mean = self.alternation_mean
        var = sum(a * a * p for a, p in self.alternation_pmf.items()) - mean * mean
        return math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class HumanConstant:
    value: float
    citation: str


@dataclass(frozen=True)
class HumanBaselineRegistry:
    """Published human-bias constants used for report comparisons only."""

    alternation_rate: HumanConstant
    first_flip_heads_rate: HumanConstant
    heads_first_given_heads_first_prompt: HumanConstant
    tails_first_given_tails_first_prompt: HumanConstant
    min_human_mse: HumanConstant

    def as_dict(self) -> dict:
        return {
            name: {"value": c.value, "citation": c.citation}
            for name, c in vars(self).items()
        }


DEFAULT_HUMAN_BASELINES = HumanBaselineRegistry(
    alternation_rate=HumanConstant(
        0.6, "survey estimate across human binary-sequence production studies"
    ),
    first_flip_heads_rate=HumanConstant(
        0.8, "human simulated coin-toss experiments: ~80% of first tosses are heads"
    ),
    heads_first_given_heads_first_prompt=HumanConstant(
        0.87, "prompt-order experiments on human respondents, heads-first instructions"
    ),
    tails_first_given_tails_first_prompt=HumanConstant(
        0.67, "prompt-order experiments on human respondents, tails-first instructions"
    ),
    min_human_mse=HumanConstant(
        0.24, "held-out MSE floor for predicting the 8th flip of human 8-flip sequences"
    ),
)


class _Accumulator:
    """Integer-count accumulation over packed window values."""

    def __init__(self, k: int, ngram_ns: tuple[int, ...], track_variance: bool):
        self.k = k
        self.ns = ngram_ns
        self.track_variance = track_variance
        self.windows = 0
        self.heads_counts = np.zeros(k + 1, dtype=np.int64)
        self.alt_counts = np.zeros(k, dtype=np.int64)
        self.alt_sum = 0
        self.alt_sumsq = 0
        self.run_totals = np.zeros(k + 1, dtype=np.int64)
        self.run_sumsq = np.zeros(k + 1, dtype=np.int64)
        self.ngram_counts = {n: np.zeros(2 ** n, dtype=np.int64) for n in ngram_ns}

    def add(self, values: np.ndarray) -> None:
        """Accumulate a chunk of packed windows (bit i of a value = flip i)."""
        k = self.k
        m = values.shape[0]
        self.windows += m

        heads = np.bitwise_count(values)
        self.heads_counts += np.bincount(heads, minlength=k + 1)

        alt_bits = (values ^ (values >> np.uint64(1))) & np.uint64((1 << (k - 1)) - 1)
        alts = np.bitwise_count(alt_bits)
        self.alt_counts += np.bincount(alts, minlength=k)
        self.alt_sum += int(alts.sum())
        if self.track_variance:
            self.alt_sumsq += int((alts.astype(np.int64) ** 2).sum())

        # Boundary word: bit 0 and bit k are sentinels, bits 1..k-1 mark
        # positions where adjacent flips differ.  A maximal run of exact
        # length L corresponds to set bits at distance L with zeros between.
        ext = (alt_bits.astype(np.uint64) << np.uint64(1)) | np.uint64(1) | np.uint64(1 << k)
        for L in range(1, k + 1):
            per_window = np.zeros(m, dtype=np.int64)
            between = np.uint64(((1 << (L - 1)) - 1) << 1) if L > 1 else np.uint64(0)
            for p in range(0, k - L + 1):
                lo = (ext >> np.uint64(p)) & np.uint64(1)
                hi = (ext >> np.uint64(p + L)) & np.uint64(1)
                mid_mask = np.uint64(int(between) << p)
                hit = (lo & hi).astype(bool) & ((ext & mid_mask) == 0)
                per_window += hit
            self.run_totals[L] += int(per_window.sum())
            if self.track_variance:
                self.run_sumsq[L] += int((per_window ** 2).sum())

        for n in self.ns:
            mask = np.uint64((1 << n) - 1)
            binc = np.zeros(2 ** n, dtype=np.int64)
            for off in range(0, k - n + 1):
                vals = ((values >> np.uint64(off)) & mask).astype(np.int64)
                binc += np.bincount(vals, minlength=2 ** n)
            self.ngram_counts[n] += binc

    def table(self, samples: Optional[int], stderr: Optional[dict]) -> BaselineTable:
        k = self.k
        m = self.windows
        heads_pmf = {x: int(self.heads_counts[x]) / m for x in range(k + 1)}
        alt_pmf = {a: int(self.alt_counts[a]) / m for a in range(k)}
        runs = {L: int(self.run_totals[L]) / m for L in range(1, k + 1)}
        ngrams = {
            n: {
                ngram_key(v, n): int(c) / (m * (k - n + 1))
                for v, c in enumerate(self.ngram_counts[n])
            }
            for n in self.ns
        }
        return BaselineTable(
            k=k,
            heads_count_pmf=heads_pmf,
            alternation_pmf=alt_pmf,
            alternation_mean=self.alt_sum / m,
            expected_runs_per_window=runs,
            ngram_fractions=ngrams,
            samples=samples,
            stderr=stderr,
        )


def exact_baseline(k: int, ngram_ns: tuple[int, ...] = DEFAULT_NGRAM_NS) -> BaselineTable:
    """Exact fair-coin reference by full enumeration of all 2^k windows."""
    if not 1 <= k <= ENUMERATION_LIMIT:
        raise ValueError(
            f"k must be in 1..{ENUMERATION_LIMIT} for enumeration; "
            "use monte_carlo_baseline for longer windows"
        )
    ns = tuple(n for n in ngram_ns if n <= k)
    acc = _Accumulator(k, ns, track_variance=False)
    total = 1 << k
    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        acc.add(np.arange(start, stop, dtype=np.uint64))
    return acc.table(samples=None, stderr=None)


def monte_carlo_baseline(
    k: int,
    samples: int,
    seed: int,
    p_heads: float = 0.5,
    ngram_ns: tuple[int, ...] = DEFAULT_NGRAM_NS,
) -> BaselineTable:
    """Seeded sampled reference table with per-statistic standard errors.

    ``p_heads`` other than 0.5 is supported for generator validation only.
    """
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 <= p_heads <= 1.0:
        raise ValueError("p_heads must be in [0, 1]")

    rng = Xorshift64Star(derive_seed(seed, 0xBA5E11))
    ns = tuple(n for n in ngram_ns if n <= k)
    acc = _Accumulator(k, ns, track_variance=True)
    for start in range(0, samples, _CHUNK):
        stop = min(start + _CHUNK, samples)
        vals = np.empty(stop - start, dtype=np.uint64)
        for i in range(stop - start):
            v = 0
            for bit in range(k):
                if rng.random() < p_heads:
                    v |= 1 << bit
            vals[i] = v
        acc.add(vals)

    m = acc.windows
    alt_mean = acc.alt_sum / m
    alt_var = acc.alt_sumsq / m - alt_mean ** 2
    stderr: dict = {
        "alternation_mean": math.sqrt(max(alt_var, 0.0) / m),
        "heads_count_pmf": {
            x: _pmf_se(int(acc.heads_counts[x]) / m, m) for x in range(k + 1)
        },
        "alternation_pmf": {
            a: _pmf_se(int(acc.alt_counts[a]) / m, m) for a in range(k)
        },
        "expected_runs_per_window": {},
        "ngram_fractions": {},
    }
    for L in range(1, k + 1):
        mean = int(acc.run_totals[L]) / m
        var = int(acc.run_sumsq[L]) / m - mean ** 2
        stderr["expected_runs_per_window"][L] = math.sqrt(max(var, 0.0) / m)
    for n in ns:
        grams = m * (k - n + 1)
        stderr["ngram_fractions"][n] = {
            ngram_key(v, n): _pmf_se(int(c) / grams, grams)
            for v, c in enumerate(acc.ngram_counts[n])
        }
    return acc.table(samples=samples, stderr=stderr)


def _pmf_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


_REGISTRY_FIELDS = {
    "alternation_rate": (0.0, 1.0),
    "first_flip_heads_rate": (0.0, 1.0),
    "heads_first_given_heads_first_prompt": (0.0, 1.0),
    "tails_first_given_tails_first_prompt": (0.0, 1.0),
    "min_human_mse": (0.0, 0.25),
}


def load_human_baselines(path: str | None = None) -> HumanBaselineRegistry:
    """Shipped defaults, optionally overridden by a JSON registry file.

    Override entries are ``{"name": {"value": v, "citation": "..."}}``;
    a citation is mandatory for every override.
    """
    if path is None:
        return DEFAULT_HUMAN_BASELINES
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed baseline registry {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"malformed baseline registry {path}: expected an object")

    values = {name: const for name, const in vars(DEFAULT_HUMAN_BASELINES).items()}
    for name, entry in raw.items():
        if name not in _REGISTRY_FIELDS:
            raise ValueError(f"unknown baseline constant {name!r}")
        if not isinstance(entry, dict) or "value" not in entry:
            raise ValueError(f"baseline constant {name!r} must be an object with a value")
        citation = entry.get("citation", "")
        if not citation:
            raise ValueError(f"baseline override {name!r} requires a citation")
        value = float(entry["value"])
        lo, hi = _REGISTRY_FIELDS[name]
        if name == "min_human_mse":
            if not lo < value <= hi:
                raise ValueError(f"{name} must be in ({lo}, {hi}], got {value}")
        elif not lo <= value <= hi:
            raise ValueError(f"{name} must be in [{lo}, {hi}], got {value}")
        values[name] = HumanConstant(value, citation)
    return HumanBaselineRegistry(**values)
