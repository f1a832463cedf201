"""Shared fixtures and independent brute-force oracles.

The oracles here deliberately avoid the library's counting code:
run decomposition uses itertools.groupby, enumeration uses
itertools.product, correlations use numpy.corrcoef.
"""
from itertools import groupby, product

import pytest

from flipbench.sequences import FlipSequence, SequenceMeta, Window


def bits(s: str) -> tuple[int, ...]:
    """'HTH' -> (1, 0, 1)"""
    return tuple(1 if ch in "Hh" else 0 for ch in s)


def window(s: str, offset: int = 0, parent: int = 0) -> Window:
    return Window(bits(s), offset, parent)


def seq(s: str, **meta) -> FlipSequence:
    return FlipSequence(bits(s), SequenceMeta(**meta))


def oracle_run_counts(b: tuple[int, ...]) -> dict[int, int]:
    out: dict[int, int] = {}
    for _, g in groupby(b):
        L = len(list(g))
        out[L] = out.get(L, 0) + 1
    return out


def all_windows(k: int):
    """Every length-k binary window, as tuples."""
    return list(product((0, 1), repeat=k))


@pytest.fixture(scope="session")
def fair_windows_10k():
    """10,000 independent seeded fair windows of length 8 (shared: slow-ish)."""
    from flipbench.generators import GeneratorSpec, generate
    from flipbench.sequences import extract_windows

    seqs = generate(GeneratorSpec("bernoulli", length=8, count=10_000, seed=7))
    return extract_windows(seqs, 8)
