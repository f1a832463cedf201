import pytest

from flipbench.generators import GeneratorSpec, generate
from flipbench.sequences import extract_windows
from flipbench.stats import alternation_histogram, heads_count_histogram


class TestDeterminism:
    def test_same_spec_bit_identical(self):
        spec = GeneratorSpec("bernoulli", length=20, count=10, seed=42)
        a = generate(spec)
        b = generate(spec)
        assert [s.flips for s in a] == [s.flips for s in b]

    def test_seed_changes_output(self):
        a = generate(GeneratorSpec("bernoulli", length=20, count=10, seed=1))
        b = generate(GeneratorSpec("bernoulli", length=20, count=10, seed=2))
        assert [s.flips for s in a] != [s.flips for s in b]

    def test_replicates_have_independent_substreams(self):
        # dropping the first replicate must not change later ones
        ten = generate(GeneratorSpec("bernoulli", length=20, count=10, seed=9))
        # regenerate and compare per-replicate content
        again = generate(GeneratorSpec("bernoulli", length=20, count=10, seed=9))
        for x, y in zip(ten, again):
            assert x.flips == y.flips
        assert len({s.flips for s in ten}) > 1


class TestBernoulli:
    def test_extreme_probabilities(self):
        heads = generate(GeneratorSpec("bernoulli", p_heads=1.0, length=10, count=3, seed=0))
        tails = generate(GeneratorSpec("bernoulli", p_heads=0.0, length=10, count=3, seed=0))
        assert all(s.flips == (1,) * 10 for s in heads)
        assert all(s.flips == (0,) * 10 for s in tails)

    def test_fair_heads_rate(self):
        seqs = generate(GeneratorSpec("bernoulli", length=8, count=5000, seed=3))
        ws = extract_windows(seqs, 8)
        hist = heads_count_histogram(ws)
        assert abs(hist.mean - 4.0) < 0.1


class TestMarkovAlternation:
    def test_degenerate_half_matches_fair(self):
        seqs = generate(
            GeneratorSpec("markov_alternation", p_alternate=0.5, p_first_heads=0.5,
                          length=8, count=10_000, seed=5)
        )
        hist = alternation_histogram(extract_windows(seqs, 8))
        assert abs(hist.mean - 3.5) <= 0.05

    def test_point_six_alternation_mean(self):
        seqs = generate(
            GeneratorSpec("markov_alternation", p_alternate=0.6, length=8,
                          count=10_000, seed=11)
        )
        hist = alternation_histogram(extract_windows(seqs, 8))
        assert abs(hist.mean - 7 * 0.6) <= 0.05

    def test_first_flip_bias(self):
        seqs = generate(
            GeneratorSpec("markov_alternation", p_first_heads=0.8, length=8,
                          count=5000, seed=6)
        )
        rate = sum(s.flips[0] for s in seqs) / len(seqs)
        assert abs(rate - 0.8) < 0.02

    def test_always_alternate(self):
        seqs = generate(
            GeneratorSpec("markov_alternation", p_alternate=1.0, length=10, count=5, seed=2)
        )
        for s in seqs:
            assert all(x != y for x, y in zip(s.flips, s.flips[1:]))


class TestFixedPattern:
    def test_cyclic_repetition(self):
        (s,) = generate(GeneratorSpec("fixed_pattern", pattern=(1, 0), length=20, count=1, seed=0))
        assert s.flips == (1, 0) * 10
        assert sum(x != y for x, y in zip(s.flips, s.flips[1:])) == 19

    def test_truncated_cycle(self):
        (s,) = generate(GeneratorSpec("fixed_pattern", pattern=(1, 1, 0), length=5, count=1, seed=0))
        assert s.flips == (1, 1, 0, 1, 1)

    def test_meta_model_id(self):
        (s,) = generate(GeneratorSpec("fixed_pattern", pattern=(1, 0), length=4, count=1, seed=0))
        assert s.meta.model == "synthetic:fixed_pattern"
        assert s.meta.replicate == 0


class TestValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            generate(GeneratorSpec("dice"))

    def test_empty_pattern(self):
        with pytest.raises(ValueError, match="pattern"):
            generate(GeneratorSpec("fixed_pattern"))

    def test_bad_probability(self):
        with pytest.raises(ValueError, match="p_heads"):
            generate(GeneratorSpec("bernoulli", p_heads=1.5))

    def test_bad_length(self):
        with pytest.raises(ValueError, match="length"):
            generate(GeneratorSpec("bernoulli", length=0))
