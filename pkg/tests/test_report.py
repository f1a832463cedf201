import json

import pytest

from flipbench.collector import (
    EndpointConfig,
    PromptSpec,
    SweepPlan,
    records_from_sequences,
    run_sweep,
)
from flipbench.config import ReportOptions, Thresholds
from flipbench.generators import GeneratorSpec, generate
from flipbench.report import build_report, emit, order_tag_of, report_bytes
from flipbench.sequences import flips_to_text
from flipbench.stats import InsufficientDataError

ENDPOINT = EndpointConfig(base_url="http://test", model="test-model")


def chat_response(text):
    return {"choices": [{"message": {"content": text}}]}


def scripted_transport(texts):
    """Returns each text in turn, cycling."""
    state = {"i": 0}

    def transport(request):
        text = texts[state["i"] % len(texts)]
        state["i"] += 1
        return chat_response(text)

    return transport


def no_sleep(_s):
    pass


def twenty(first):
    """A 20-flip response starting with ``first``, then alternating."""
    rest = ("T, H" if first == "H" else "H, T") * 1
    seq = [first] + [("T" if first == "H" else "H"), first] * 9 + ["T"]
    return ", ".join(seq[:20])


@pytest.fixture(scope="module")
def fair_report():
    seqs = generate(GeneratorSpec("bernoulli", length=8, count=10_000, seed=7))
    records = records_from_sequences(seqs, prompt_id="fair")
    return build_report(records, ReportOptions(cv_seed=7))


@pytest.fixture(scope="module")
def pattern_report():
    seqs = generate(GeneratorSpec("fixed_pattern", pattern=(1, 0), length=20, count=100, seed=0))
    records = records_from_sequences(seqs, prompt_id="pattern")
    return build_report(records, ReportOptions())


class TestFixtureReproduction:
    def test_single_flip_all_heads_cell(self):
        """Degenerate always-heads endpoint reproduces a 1.00 table cell."""
        plan = SweepPlan(
            (PromptSpec("flip_one", "Flip a coin.", 1),), (0.0,), replicates=30
        )
        records = run_sweep(plan, ENDPOINT, scripted_transport(["H"]), sleep=no_sleep)
        report = build_report(records, ReportOptions())
        rows = report["tables"]["single_flip_heads"]
        assert len(rows) == 1
        assert rows[0]["heads_proportion"] == 1.0

    def test_first_flip_sixteen_of_twentyone(self):
        """16 heads-first vs 5 tails-first 20-flip responses -> 0.762."""
        texts = [twenty("H")] * 16 + [twenty("T")] * 5
        plan = SweepPlan(
            (PromptSpec("flip20", "Flip 20 coins.", 20),), (0.0,), replicates=21
        )
        records = run_sweep(plan, ENDPOINT, scripted_transport(texts), sleep=no_sleep)
        report = build_report(records, ReportOptions())
        rows = report["tables"]["first_flip_heads"]
        assert len(rows) == 1
        assert round(rows[0]["heads_proportion"], 3) == 0.762

    def test_cell_at_temperature_0p9(self):
        """83% heads-first sequences -> a 0.83 matrix entry at its cell."""
        texts = [twenty("H")] * 83 + [twenty("T")] * 17
        plan = SweepPlan(
            (PromptSpec("flip20_fair", "Flip 20 fair coins.", 20),),
            (0.9,),
            replicates=100,
        )
        records = run_sweep(plan, ENDPOINT, scripted_transport(texts), sleep=no_sleep)
        report = build_report(records, ReportOptions())
        row = report["tables"]["first_flip_heads"][0]
        assert row["temperature"] == 0.9
        assert row["heads_proportion"] == 0.83

    def test_prompt_order_table(self):
        """Contingency counts flow through to the prompt-order table."""
        plan = SweepPlan(
            (
                PromptSpec("flip20_fair_heads_first", "hf prompt", 20, order_tag="heads_first"),
                PromptSpec("flip20_fair_tails_first", "tf prompt", 20, order_tag="tails_first"),
            ),
            (0.0,),
            replicates=39,
        )
        hf_texts = [twenty("H")] * 33 + [twenty("T")] * 6
        tf_texts = [twenty("H")] * 35 + [twenty("T")] * 4
        records = run_sweep(
            plan, ENDPOINT, scripted_transport(hf_texts + tf_texts), sleep=no_sleep
        )
        report = build_report(records, ReportOptions())
        (row,) = report["tables"]["prompt_order"]
        assert row["heads_first_prompt"] == {"heads_first": 33, "tails_first": 6}
        assert row["tails_first_prompt"] == {"heads_first": 35, "tails_first": 4}
        assert round(row["heads_first_rate_by_variant"]["heads_first"], 3) == 0.846
        assert round(row["heads_first_rate_by_variant"]["tails_first"], 3) == 0.897


class TestFlags:
    def test_fixed_pattern_sets_bias_flags(self, pattern_report):
        (cell,) = pattern_report["cells"]
        flags = cell["flags"]
        assert flags["excess_alternation"]
        assert flags["run_aversion"]
        assert flags["first_flip_bias"]

    def test_fair_data_sets_no_flags(self, fair_report):
        (cell,) = fair_report["cells"]
        assert not any(cell["flags"].values())

    def test_excess_alternation_monotone_in_p_alternate(self):
        """Strengthening the alternation bias never clears a set flag."""
        seen = []
        for p_alt in (0.55, 0.6, 0.7, 0.8):
            seqs = generate(
                GeneratorSpec(
                    "markov_alternation", p_alternate=p_alt, length=8,
                    count=2000, seed=21,
                )
            )
            records = records_from_sequences(seqs, prompt_id=f"p{p_alt}")
            report = build_report(records, ReportOptions(predictor=False))
            (cell,) = report["cells"]
            seen.append(cell["flags"]["excess_alternation"])
        assert seen == sorted(seen)  # False...True, never True->False
        assert seen[-1]

    def test_thresholds_printed_beside_flags(self, pattern_report):
        (cell,) = pattern_report["cells"]
        assert set(cell["flag_thresholds"]) == set(cell["flags"])


class TestInsufficientData:
    def test_small_cell_marked_never_dropped(self):
        seqs = generate(GeneratorSpec("bernoulli", length=8, count=5, seed=1))
        records = records_from_sequences(seqs, prompt_id="tiny")
        report = build_report(records, ReportOptions())
        (cell,) = report["cells"]
        assert "battery" in cell["insufficient"]
        assert "needs >= 30" in cell["insufficient"]["battery"]
        assert "predictor" in cell["insufficient"]
        assert cell["predictor"] is None
        assert cell["yield"]["parsed"] == 5

    def test_refusal_only_cell(self):
        from flipbench.collector import CollectionRecord

        records = [
            CollectionRecord("", "m", "p", 0.0, i, "I cannot.", "refusal", "", 1, "")
            for i in range(10)
        ]
        report = build_report(records, ReportOptions())
        (cell,) = report["cells"]
        assert cell["yield"]["refusal"] == 10
        assert cell["heads_first_proportion"] is None
        assert cell["sequences_used"] == 0

    def test_partial_records_excluded_by_default(self):
        from flipbench.collector import CollectionRecord

        records = [
            CollectionRecord("", "m", "p", 0.0, 0, "H, T", "partial", "HT", 1, ""),
            CollectionRecord("", "m", "p", 0.0, 1, flips_to_text((1,) * 8), "parsed", "H" * 8, 1, ""),
        ]
        report = build_report(records, ReportOptions())
        (cell,) = report["cells"]
        assert cell["sequences_used"] == 1
        report = build_report(records, ReportOptions(include_partial=True))
        (cell,) = report["cells"]
        assert cell["sequences_used"] == 2

    def test_empty_records_rejected(self):
        with pytest.raises(InsufficientDataError):
            build_report([], ReportOptions())


class TestDeterminism:
    def test_report_digest_pure(self):
        seqs = generate(GeneratorSpec("bernoulli", length=8, count=50, seed=3))
        records = records_from_sequences(seqs, prompt_id="d")
        a = build_report(records, ReportOptions())
        b = build_report(records, ReportOptions())
        assert a["report_digest"] == b["report_digest"]
        assert report_bytes(a) == report_bytes(b)

    def test_two_emissions_identical_bytes(self, tmp_path, pattern_report):
        p1 = tmp_path / "r1.json"
        p2 = tmp_path / "r2.json"
        emit(pattern_report, str(p1), "json")
        emit(pattern_report, str(p2), "json")
        assert p1.read_bytes() == p2.read_bytes()

        d1 = tmp_path / "csv1"
        d2 = tmp_path / "csv2"
        emit(pattern_report, str(d1), "csv")
        emit(pattern_report, str(d2), "csv")
        for f1, f2 in zip(sorted(d1.iterdir()), sorted(d2.iterdir())):
            assert f1.name == f2.name
            assert f1.read_bytes() == f2.read_bytes()

    def test_csv_rebuild_from_document_only(self, tmp_path, pattern_report):
        """CSV emission must need nothing but the report document."""
        path = tmp_path / "report.json"
        emit(pattern_report, str(path), "json")
        loaded = json.loads(path.read_text())
        out = tmp_path / "tables"
        paths = emit(loaded, str(out), "csv")
        assert len(paths) >= 9


@pytest.fixture(scope="module")
def bundle(tmp_path_factory, fair_report):
    out = tmp_path_factory.mktemp("bundle")
    emit(fair_report, str(out), "csv")
    return out


class TestCsvBundle:
    def test_expected_files(self, bundle):
        names = {p.name for p in bundle.iterdir()}
        assert names == {
            "heads_count_histogram.csv",
            "alternation_histogram.csv",
            "run_ratios.csv",
            "ngram_fractions.csv",
            "correlation_vector.csv",
            "correlation_matrix.csv",
            "single_flip_heads.csv",
            "first_flip_heads.csv",
            "prompt_order_contingency.csv",
            "mse_series.csv",
        }

    def test_ngram_header(self, bundle):
        header = (bundle / "ngram_fractions.csv").read_text().splitlines()[0]
        assert header.endswith("ngram,count,fraction,expected,delta")

    def test_mse_series_rows(self, bundle, fair_report):
        lines = (bundle / "mse_series.csv").read_text().splitlines()
        assert lines[0] == "model,prompt_id,temperature,windows,lambda,mse,delta_mse,gap_ratio"
        assert len(lines) == 1 + len(fair_report["tables"]["mse_series"])

    def test_correlation_matrix_full(self, bundle):
        lines = (bundle / "correlation_matrix.csv").read_text().splitlines()
        assert len(lines) == 1 + 8 * 8  # one cell, 8x8 positions


class TestReportShape:
    def test_order_tag_recovery(self):
        assert order_tag_of("flip20_fair_heads_first") == "heads_first"
        assert order_tag_of("flip20_fair_tails_first") == "tails_first"
        assert order_tag_of("flip20_fair") is None

    def test_predictor_block_contents(self, fair_report):
        (cell,) = fair_report["cells"]
        pred = cell["predictor"]
        assert 0.24 <= pred["mse"] <= 0.26
        assert set(pred["weights"]) == set(
            [f"flip_{i}" for i in range(1, 8)]
            + ["heads_count", "alternation_count"]
            + [f"run_count_{L}" for L in range(1, 8)]
            + ["terminal_run_length"]
        )
        assert pred["gap_ratio"] is not None

    def test_baseline_deltas_present(self, fair_report):
        (cell,) = fair_report["cells"]
        assert abs(cell["alternations"]["delta_mean"]) < 0.05
        assert "delta_mid_mass" in cell["heads_count"]
        for table in cell["ngrams"].values():
            assert set(table["delta"]) == set(table["fractions"])

    def test_self_describing_document(self, fair_report):
        for key in (
            "tool", "version", "options", "thresholds", "human_baselines",
            "config_digest", "baseline_digest", "report_digest", "baselines",
            "cells", "tables",
        ):
            assert key in fair_report


class TestRobustness:
    def test_window_two_marks_predictor_insufficient(self):
        seqs = generate(GeneratorSpec("bernoulli", length=8, count=60, seed=4))
        records = records_from_sequences(seqs, prompt_id="w2")
        report = build_report(
            records, ReportOptions(window=2, run_length=2, ngram_ns=(2,))
        )
        (cell,) = report["cells"]
        assert cell["predictor"] is None
        assert "predictor" in cell["insufficient"]

    def test_tiny_run_length_never_vacuously_flags(self):
        seqs = generate(GeneratorSpec("bernoulli", length=8, count=200, seed=4))
        records = records_from_sequences(seqs, prompt_id="rl2")
        report = build_report(
            records, ReportOptions(window=8, run_length=2, predictor=False)
        )
        (cell,) = report["cells"]
        # min aversion length is 3, so no length participates: never flagged
        assert cell["flags"]["run_aversion"] is False
        assert list(cell["runs"]["ratios"]) == ["2"]

    def test_custom_ngram_ns_flow_through_baselines(self):
        seqs = generate(GeneratorSpec("bernoulli", length=8, count=60, seed=2))
        records = records_from_sequences(seqs, prompt_id="n4")
        report = build_report(
            records, ReportOptions(ngram_ns=(4,), predictor=False)
        )
        (cell,) = report["cells"]
        table = cell["ngrams"]["4"]
        assert len(table["fractions"]) == 16
        assert all(v == 1 / 16 for v in table["expected"].values())

    def test_primacy_error_row_in_csv(self, tmp_path):
        from flipbench.collector import CollectionRecord

        records = [
            CollectionRecord("", "m", "p_heads_first", 0.0, i,
                             "H, T" + ", H" * 18, "parsed", "HT" + "H" * 18, 1, "")
            for i in range(3)
        ]
        # tails_first variant entirely missing -> error row, not a crash
        records.append(
            CollectionRecord("", "m", "p_tails_first", 0.0, 0, "junk", "unparseable", "", 1, "")
        )
        report = build_report(records, ReportOptions(predictor=False))
        (row,) = report["tables"]["prompt_order"]
        assert "error" in row
        out = tmp_path / "t"
        emit(report, str(out), "csv")
        lines = (out / "prompt_order_contingency.csv").read_text().splitlines()
        assert len(lines) == 2
        assert "no parsed records" in lines[1]
