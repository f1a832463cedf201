"""Seeded synthetic flip sources used as oracles and test fixtures.

Three kinds:

* ``bernoulli`` — i.i.d. flips, P(heads) = p_heads.
* ``markov_alternation`` — minimal human-style model: first flip is heads
  with probability p_first_heads, each later flip differs from its
  predecessor with probability p_alternate.
* ``fixed_pattern`` — cyclic repetition of a literal pattern, modelling
  the degenerate low-diversity responses seen at temperature 0.

Every sequence draws from its own sub-stream derived from (seed,
replicate), so generation order and parallel splits never change output.
"""
from __future__ import annotations

from dataclasses import dataclass

from .rng import Xorshift64Star, derive_seed
from .sequences import FlipSequence, SequenceMeta

KINDS = ("bernoulli", "markov_alternation", "fixed_pattern")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    length: int = 20
    count: int = 1
    seed: int = 0
    p_heads: float = 0.5
    p_alternate: float = 0.5
    p_first_heads: float = 0.5
    pattern: tuple[int, ...] = ()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        for name in ("p_heads", "p_alternate", "p_first_heads"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.kind == "fixed_pattern":
            if not self.pattern:
                raise ValueError("fixed_pattern requires a non-empty pattern")
            if any(b not in (0, 1) for b in self.pattern):
                raise ValueError("pattern entries must be 0 or 1")


def generate(spec: GeneratorSpec) -> list[FlipSequence]:
    spec.validate()
    out = []
    for rep in range(spec.count):
        rng = Xorshift64Star(derive_seed(spec.seed, rep))
        if spec.kind == "bernoulli":
            flips = tuple(
                1 if rng.random() < spec.p_heads else 0 for _ in range(spec.length)
            )
        elif spec.kind == "markov_alternation":
            bits = [1 if rng.random() < spec.p_first_heads else 0]
            for _ in range(spec.length - 1):
                alternate = rng.random() < spec.p_alternate
                bits.append(bits[-1] ^ 1 if alternate else bits[-1])
            flips = tuple(bits)
        else:  # fixed_pattern
            flips = tuple(
                spec.pattern[i % len(spec.pattern)] for i in range(spec.length)
            )
        meta = SequenceMeta(
            model=f"synthetic:{spec.kind}",
            prompt_id="synthetic",
            temperature=0.0,
            replicate=rep,
        )
        out.append(FlipSequence(flips, meta))
    return out
