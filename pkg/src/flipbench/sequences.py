"""Canonical coin-flip sequences: representation, free-text parsing, windowing.

Flips are stored as ints with heads = 1 and tails = 0 throughout the
package.  The canonical text form is single uppercase letters joined by
comma-space, e.g. ``"H, T, T, H"``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

HEADS = 1
TAILS = 0

#: Case-insensitive refusal phrases; consulted only when a response
#: yields zero flip tokens.
DEFAULT_REFUSAL_LEXICON = (
    "cannot",
    "unable",
    "random number generator",
    "language model",
)

# Tokens are the words heads/tails or the bare letters H/T.  The single
# letters must not be the tail of a contraction ("can't" is not a Tails),
# hence the lookbehinds for word-char + apostrophe.
_TOKEN_RE = re.compile(r"(?i)\b(heads|tails)\b|(?<!\w')(?<!\w’)\b([ht])\b")


class ParseKind(str, Enum):
    PARSED = "parsed"
    REFUSAL = "refusal"
    UNPARSEABLE = "unparseable"
    PARTIAL = "partial"


@dataclass(frozen=True)
class SequenceMeta:
    """Provenance of one collected sequence."""

    model: str = ""
    prompt_id: str = ""
    temperature: float = 0.0
    replicate: int = 0


@dataclass(frozen=True)
class FlipSequence:
    flips: tuple[int, ...]
    meta: SequenceMeta = field(default_factory=SequenceMeta)

    def __post_init__(self):
        if any(f not in (0, 1) for f in self.flips):
            raise ValueError("flips must be 0 (tails) or 1 (heads)")

    def __len__(self) -> int:
        return len(self.flips)


@dataclass(frozen=True)
class ParseOutcome:
    kind: ParseKind
    flips: Optional[tuple[int, ...]]
    note: str = ""


@dataclass(frozen=True)
class Window:
    """Fixed-length contiguous slice of a parent sequence.

    ``parent`` indexes the sequence the window was cut from within one
    extraction call; predictor cross-validation groups folds by it.
    """

    bits: tuple[int, ...]
    offset: int
    parent: int = 0

    def __len__(self) -> int:
        return len(self.bits)


def flips_to_text(flips: Sequence[int]) -> str:
    """Canonical serialization: ``"H, T, H"``."""
    return ", ".join("H" if f else "T" for f in flips)


def flips_to_string(flips: Sequence[int]) -> str:
    """Compact form used in persisted records: ``"HTH"``."""
    return "".join("H" if f else "T" for f in flips)


def flips_from_string(s: str) -> tuple[int, ...]:
    out = []
    for ch in s:
        if ch in "Hh":
            out.append(1)
        elif ch in "Tt":
            out.append(0)
        else:
            raise ValueError(f"invalid flip character {ch!r}")
    return tuple(out)


def encode(seq: FlipSequence) -> list[int]:
    """Heads -> 1, tails -> 0, order preserved."""
    return list(seq.flips)


def decode(bits: Iterable[int], meta: SequenceMeta | None = None) -> FlipSequence:
    return FlipSequence(tuple(int(b) for b in bits), meta or SequenceMeta())


def parse_response(
    text: str,
    expected_count: int | None = None,
    refusal_lexicon: Sequence[str] = DEFAULT_REFUSAL_LEXICON,
) -> ParseOutcome:
    """Read coin flips out of arbitrary response text.

    Recognizes H/T/Heads/Tails (case-insensitive) separated by commas,
    whitespace, newlines or numbered-list prefixes; other lines (retry
    annotations, chatter) are skipped.  Never raises: every failure mode
    is a :class:`ParseKind`.
    """
    if expected_count is not None and expected_count < 1:
        raise ValueError("expected_count must be >= 1 when given")

    flips: list[int] = []
    for m in _TOKEN_RE.finditer(text):
        token = (m.group(1) or m.group(2)).lower()
        flips.append(1 if token.startswith("h") else 0)

    if not flips:
        lowered = text.lower()
        if any(phrase in lowered for phrase in refusal_lexicon):
            return ParseOutcome(ParseKind.REFUSAL, None, "matched refusal lexicon")
        return ParseOutcome(ParseKind.UNPARSEABLE, None, "no flip tokens found")

    note = ""
    if expected_count is not None:
        if len(flips) > expected_count:
            note = f"truncated {len(flips)} flips to expected {expected_count}"
            flips = flips[:expected_count]
        elif len(flips) < expected_count:
            return ParseOutcome(
                ParseKind.PARTIAL,
                tuple(flips),
                f"expected {expected_count} flips, found {len(flips)}",
            )
    return ParseOutcome(ParseKind.PARSED, tuple(flips), note)


def windows(seq: FlipSequence, k: int) -> list[Window]:
    """All overlapping length-``k`` windows, offsets 0..len-k."""
    if k < 1:
        raise ValueError("window length k must be >= 1")
    n = len(seq.flips)
    return [Window(seq.flips[i : i + k], i) for i in range(n - k + 1)]


def extract_windows(seqs: Sequence[FlipSequence], k: int) -> list[Window]:
    """Pool windows over many sequences, tagging each with its parent index."""
    out: list[Window] = []
    for parent, seq in enumerate(seqs):
        for w in windows(seq, k):
            out.append(Window(w.bits, w.offset, parent))
    return out
