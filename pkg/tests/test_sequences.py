import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import bits, seq
from flipbench.sequences import (
    FlipSequence,
    ParseKind,
    Window,
    decode,
    encode,
    extract_windows,
    flips_to_text,
    parse_response,
    windows,
)

flip_lists = st.lists(st.integers(min_value=0, max_value=1), max_size=40)


class TestParseResponse:
    def test_plain_comma_list(self):
        out = parse_response("H, T, T, H", 4)
        assert out.kind == ParseKind.PARSED
        assert out.flips == (1, 0, 0, 1)

    def test_retry_annotation_skipped(self):
        out = parse_response("1. Heads\n2. bad flip (retrying)\n2. Tails", 2)
        assert out.kind == ParseKind.PARSED
        assert out.flips == (1, 0)

    def test_refusal(self):
        out = parse_response("I am an AI and cannot flip a physical coin.")
        assert out.kind == ParseKind.REFUSAL
        assert out.flips is None

    def test_refusal_rng_phrase(self):
        out = parse_response("As a random number generator I decline.")
        assert out.kind == ParseKind.REFUSAL

    def test_unparseable(self):
        out = parse_response("qwerty 123 zxcvb")
        assert out.kind == ParseKind.UNPARSEABLE
        assert out.flips is None

    def test_partial(self):
        out = parse_response("H, T", 5)
        assert out.kind == ParseKind.PARTIAL
        assert out.flips == (1, 0)
        assert "expected 5" in out.note

    def test_overlong_truncated_with_note(self):
        out = parse_response("H, T, H, T, H", 3)
        assert out.kind == ParseKind.PARSED
        assert out.flips == (1, 0, 1)
        assert "truncated" in out.note

    def test_mixed_token_styles(self):
        out = parse_response("Heads, T, tails, h", 4)
        assert out.flips == (1, 0, 0, 1)

    def test_numbered_list(self):
        text = "\n".join(f"{i}. {x}" for i, x in enumerate(["Heads", "Tails"] * 3, 1))
        out = parse_response(text, 6)
        assert out.kind == ParseKind.PARSED
        assert out.flips == (1, 0, 1, 0, 1, 0)

    def test_contractions_are_not_flips(self):
        out = parse_response("I can't and won't flip; it doesn't work.")
        assert out.kind == ParseKind.UNPARSEABLE

    def test_quoted_letters_are_flips(self):
        out = parse_response("'H', 'T', 'H'", 3)
        assert out.flips == (1, 0, 1)

    def test_flips_in_textual_order(self):
        out = parse_response("T H T T H")
        assert out.flips == (0, 1, 0, 0, 1)

    def test_custom_lexicon(self):
        out = parse_response("nope.", refusal_lexicon=("nope",))
        assert out.kind == ParseKind.REFUSAL

    @given(st.text(max_size=300))
    def test_total_never_raises(self, text):
        out = parse_response(text)
        assert out.kind in set(ParseKind)

    @given(flip_lists.filter(lambda f: len(f) > 0))
    def test_reserialize_roundtrip(self, flips):
        text = flips_to_text(flips)
        out = parse_response(text, len(flips))
        assert out.kind == ParseKind.PARSED
        assert out.flips == tuple(flips)


class TestWindows:
    def test_twenty_flip_sequence_gives_thirteen_windows(self):
        assert len(windows(seq("HT" * 10), 8)) == 13

    def test_exact_length_single_window(self):
        assert len(windows(seq("HTHTHTHT"), 8)) == 1

    def test_short_sequence_empty(self):
        assert windows(seq("HTHTHTH"), 8) == []

    def test_k_zero_rejected(self):
        with pytest.raises(ValueError):
            windows(seq("HT"), 0)

    def test_offsets_and_overlap(self):
        ws = windows(seq("HHTTHHTT"), 3)
        assert [w.offset for w in ws] == list(range(6))
        for a, b in zip(ws, ws[1:]):
            assert a.bits[1:] == b.bits[:-1]

    @given(flip_lists, st.integers(min_value=1, max_value=10))
    def test_count_formula(self, flips, k):
        s = FlipSequence(tuple(flips))
        assert len(windows(s, k)) == max(len(flips) - k + 1, 0)

    @given(flip_lists, st.integers(min_value=1, max_value=10))
    def test_reconstruction(self, flips, k):
        s = FlipSequence(tuple(flips))
        ws = windows(s, k)
        if not ws:
            return
        rebuilt = tuple(w.bits[0] for w in ws) + ws[-1].bits[1:]
        assert rebuilt == tuple(flips)

    def test_extract_windows_parents(self):
        seqs = [seq("HTHTHTHTH"), seq("TTTTTTTTT")]
        ws = extract_windows(seqs, 8)
        assert [w.parent for w in ws] == [0, 0, 1, 1]


class TestEncode:
    def test_encode_values(self):
        assert encode(seq("HTH")) == [1, 0, 1]

    def test_encode_empty(self):
        assert encode(FlipSequence(())) == []

    @given(flip_lists)
    def test_roundtrip(self, flips):
        s = FlipSequence(tuple(flips))
        assert decode(encode(s)).flips == s.flips

    def test_bad_flip_value_rejected(self):
        with pytest.raises(ValueError):
            FlipSequence((0, 2, 1))
