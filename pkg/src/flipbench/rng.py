"""Deterministic 64-bit PRNG shared by every stochastic component.

The generator is a plain xorshift64* with splitmix64 seed scrambling,
written out in full instead of wrapping ``random.Random`` so that any
port of this suite can reproduce bit-identical streams from identical
seeds.  Sub-streams (one per replicate, per fold, etc.) are derived with
:func:`derive_seed` rather than by jumping a single stream, which keeps
parallel generation deterministic regardless of scheduling.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_XS_MULT = 0x2545F4914F6CDD1D


def splitmix64(z: int) -> int:
    """One splitmix64 output step for the 64-bit input ``z``."""
    z = (z + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, salt: int) -> int:
    """Mix ``seed`` with ``salt`` into an independent sub-stream seed.

    Used to give each replicate / fold its own stream; identical
    (seed, salt) pairs always yield the same sub-seed.
    """
    return splitmix64(splitmix64(seed & MASK64) ^ ((salt & MASK64) * _GOLDEN & MASK64))


class Xorshift64Star:
    """xorshift64* stream; state is a single nonzero 64-bit word."""

    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        state = splitmix64(seed & MASK64)
        # xorshift state must never be zero
        self.state = state if state != 0 else _GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * _XS_MULT) & MASK64

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def spawn(self, salt: int) -> "Xorshift64Star":
        """Independent sub-stream keyed by ``salt`` off this stream's state."""
        return Xorshift64Star(derive_seed(self.state, salt))

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            items[i], items[j] = items[j], items[i]
