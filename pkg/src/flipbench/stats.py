"""Descriptive statistics for pooled flip windows.

Every statistic is a ratio of exact integer counts, so results are
independent of input order and of any parallel split of the counting.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .sequences import FlipSequence, Window

HEADS_FIRST = "heads_first"
TAILS_FIRST = "tails_first"

#: chi-square critical value, 1 degree of freedom, alpha = 0.05
CHI_SQUARE_CRITICAL_1DF = 3.841


class InsufficientDataError(ValueError):
    """Raised when a statistic is requested on too little data."""


@dataclass(frozen=True)
class HeadsCountHistogram:
    k: int
    mass: dict[int, float]  # heads count x in 0..k -> fraction of windows
    mean: float
    window_count: int


@dataclass(frozen=True)
class AlternationHistogram:
    k: int
    mass: dict[int, float]  # alternation count a in 0..k-1 -> fraction
    mean: float
    window_count: int


@dataclass(frozen=True)
class RunLengthStats:
    counts: dict[int, int]  # run length L -> total maximal runs across windows
    window_count: int
    window_length: int


@dataclass(frozen=True)
class NGramTable:
    n: int
    counts: dict[str, int]  # bitstring key, first flip first, heads = "1"
    fractions: dict[str, float]
    total: int


@dataclass(frozen=True)
class CorrelationVector:
    target: int  # 1-indexed position being predicted
    entries: dict[int, Optional[float]]  # position -> phi, None when undefined


@dataclass(frozen=True)
class PrimacyResult:
    """2x2 prompt-order contingency: rows are prompt variants, columns are
    the first parsed flip of the response."""

    counts: tuple[tuple[int, int], tuple[int, int]]
    chi_square: float
    significant: bool
    low_expected_cells: tuple[tuple[int, int], ...]
    heads_first_rate_by_variant: dict[str, float]


def _as_matrix(windows: Sequence[Window]) -> np.ndarray:
    if not windows:
        raise InsufficientDataError("no windows supplied")
    k = len(windows[0].bits)
    if any(len(w.bits) != k for w in windows):
        raise ValueError("windows have mixed lengths")
    return np.array([w.bits for w in windows], dtype=np.uint8)


def heads_proportion(seqs: Sequence[FlipSequence], position: int = 0) -> float:
    """Fraction of sequences whose flip at ``position`` (0-indexed) is heads."""
    if not seqs:
        raise InsufficientDataError("no sequences supplied")
    offenders = [s.meta.replicate for s in seqs if len(s.flips) <= position]
    if offenders:
        raise ValueError(
            f"position {position} out of range for replicates {offenders}"
        )
    heads = sum(s.flips[position] for s in seqs)
    return heads / len(seqs)


def heads_count_histogram(windows: Sequence[Window]) -> HeadsCountHistogram:
    arr = _as_matrix(windows)
    n, k = arr.shape
    counts = arr.sum(axis=1)
    binc = np.bincount(counts, minlength=k + 1)
    mass = {x: int(binc[x]) / n for x in range(k + 1)}
    mean = int(counts.sum()) / n
    return HeadsCountHistogram(k, mass, mean, n)


def alternation_histogram(windows: Sequence[Window]) -> AlternationHistogram:
    arr = _as_matrix(windows)
    n, k = arr.shape
    if k < 2:
        raise ValueError("alternations need window length >= 2")
    alts = (arr[:, 1:] != arr[:, :-1]).sum(axis=1)
    binc = np.bincount(alts, minlength=k)
    mass = {a: int(binc[a]) / n for a in range(k)}
    mean = int(alts.sum()) / n
    return AlternationHistogram(k, mass, mean, n)


def count_maximal_runs(window: Window) -> dict[int, int]:
    """Decompose one window into maximal same-symbol blocks; block-length counts."""
    bits = window.bits
    if not bits:
        raise ValueError("window must be non-empty")
    counts: Counter[int] = Counter()
    run = 1
    for prev, cur in zip(bits, bits[1:]):
        if cur == prev:
            run += 1
        else:
            counts[run] += 1
            run = 1
    counts[run] += 1
    return dict(counts)


def run_length_stats(windows: Sequence[Window]) -> RunLengthStats:
    if not windows:
        raise InsufficientDataError("no windows supplied")
    k = len(windows[0].bits)
    if any(len(w.bits) != k for w in windows):
        raise ValueError("windows have mixed lengths")
    totals: Counter[int] = Counter()
    for w in windows:
        totals.update(count_maximal_runs(w))
    return RunLengthStats(dict(totals), len(windows), k)


def run_ratio(stats: RunLengthStats, baseline) -> dict[int, float]:
    """Realized / expected count of maximal runs, per length L in 2..k.

    ``baseline`` is a BaselineTable for the same window length; 1.0 means
    exactly the fair-coin expectation, below 1.0 means run aversion.
    """
    if baseline.k != stats.window_length:
        raise ValueError(
            f"baseline window length {baseline.k} != stats window length "
            f"{stats.window_length}"
        )
    out: dict[int, float] = {}
    for L in range(2, stats.window_length + 1):
        expected = baseline.expected_runs_per_window[L] * stats.window_count
        out[L] = stats.counts.get(L, 0) / expected
    return out


def ngram_key(value: int, n: int) -> str:
    """Bitstring key for an n-gram value whose bit i is the i-th flip."""
    return "".join("1" if (value >> i) & 1 else "0" for i in range(n))


def ngram_fractions(windows: Sequence[Window], n: int) -> NGramTable:
    """n-gram fractions counted within windows, never across boundaries."""
    arr = _as_matrix(windows)
    m, k = arr.shape
    if n < 1 or n > k:
        raise ValueError(f"n must be in 1..{k}, got {n}")
    binc = np.zeros(2 ** n, dtype=np.int64)
    for off in range(k - n + 1):
        vals = np.zeros(m, dtype=np.int64)
        for i in range(n):
            vals |= arr[:, off + i].astype(np.int64) << i
        binc += np.bincount(vals, minlength=2 ** n)
    total = m * (k - n + 1)
    counts = {ngram_key(v, n): int(binc[v]) for v in range(2 ** n)}
    fractions = {key: c / total for key, c in counts.items()}
    return NGramTable(n, counts, fractions, total)


def ngram_fractions_sequences(seqs: Sequence[FlipSequence], n: int) -> NGramTable:
    """Whole-sequence n-gram mode: counts run over each complete response
    instead of its windows, so interior flips are not re-weighted by the
    overlap.  Sequences shorter than n contribute nothing."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    binc = [0] * (2 ** n)
    total = 0
    for s in seqs:
        bits = s.flips
        for off in range(len(bits) - n + 1):
            value = 0
            for i in range(n):
                value |= bits[off + i] << i
            binc[value] += 1
            total += 1
    if total == 0:
        raise InsufficientDataError(f"no sequence of length >= {n} supplied")
    counts = {ngram_key(v, n): binc[v] for v in range(2 ** n)}
    fractions = {key: c / total for key, c in counts.items()}
    return NGramTable(n, counts, fractions, total)


def phi_coefficient(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    """Pearson correlation of two 0/1 columns; None when either is constant."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n11 = int((a & b).sum())
    n10 = int((a & (1 - b)).sum())
    n01 = int(((1 - a) & b).sum())
    n00 = int(((1 - a) & (1 - b)).sum())
    denom = (n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)
    if denom == 0:
        return None
    return (n11 * n00 - n10 * n01) / math.sqrt(denom)


def positional_correlation(
    windows: Sequence[Window], target: int = 8
) -> CorrelationVector:
    """Phi of each position's column with the target position's column.

    Positions are 1-indexed.  Zero-variance columns (common in degenerate
    low-diversity cells) give None entries rather than a fault.
    """
    arr = _as_matrix(windows)
    m, k = arr.shape
    if m < 2:
        raise InsufficientDataError("need at least 2 windows for correlation")
    if not 1 <= target <= k:
        raise ValueError(f"target position must be in 1..{k}, got {target}")
    tcol = arr[:, target - 1]
    entries = {i: phi_coefficient(arr[:, i - 1], tcol) for i in range(1, k + 1)}
    return CorrelationVector(target, entries)


def correlation_matrix(windows: Sequence[Window]) -> list[list[Optional[float]]]:
    """Full position-by-position phi matrix (heatmap-ready)."""
    arr = _as_matrix(windows)
    _, k = arr.shape
    mat: list[list[Optional[float]]] = []
    for i in range(k):
        mat.append([phi_coefficient(arr[:, i], arr[:, j]) for j in range(k)])
    return mat


def primacy_table(
    first_flips_by_variant: Mapping[str, Sequence[int]],
    critical: float = CHI_SQUARE_CRITICAL_1DF,
) -> PrimacyResult:
    """Prompt-order 2x2 test: does the first response flip track the order
    in which heads/tails were mentioned in the instructions?

    Input maps variant tags (``heads_first`` / ``tails_first``) to the
    first flip of each parsed response under that prompt variant.
    """
    rows = []
    rates = {}
    for variant in (HEADS_FIRST, TAILS_FIRST):
        firsts = first_flips_by_variant.get(variant, ())
        if len(firsts) == 0:
            raise InsufficientDataError(f"no parsed records for variant {variant!r}")
        h = sum(1 for f in firsts if f == 1)
        rows.append((h, len(firsts) - h))
        rates[variant] = h / len(firsts)

    (a, b), (c, d) = rows
    total = a + b + c + d
    chi = 0.0
    low: list[tuple[int, int]] = []
    row_sums = (a + b, c + d)
    col_sums = (a + c, b + d)
    if 0 not in row_sums and 0 not in col_sums:
        chi = total * (a * d - b * c) ** 2 / (
            row_sums[0] * row_sums[1] * col_sums[0] * col_sums[1]
        )
    for i, rs in enumerate(row_sums):
        for j, cs in enumerate(col_sums):
            if rs * cs / total < 5:
                low.append((i, j))
    return PrimacyResult(
        counts=((a, b), (c, d)),
        chi_square=chi,
        significant=chi > critical,
        low_expected_cells=tuple(low),
        heads_first_rate_by_variant=rates,
    )
