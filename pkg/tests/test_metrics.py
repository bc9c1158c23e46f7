"""Accuracy metrics against hand values and a golden regression fixture."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from golden_fixtures import COEFF_TOL, GOLDEN_MEANS, GOLDEN_ROWS
from woodleaf.errors import ParameterError
from woodleaf.metrics import (AccuracyReport, ConfusionCounts,
                              DegenerateMetricWarning, confusion, evaluate,
                              kappa, mcc, overall_accuracy, throughput)


class TestGoldenRows:
    @pytest.mark.parametrize(
        "tp,tn,fp,fn,want_oa,want_kappa,want_mcc", GOLDEN_ROWS,
        ids=[f"row{i + 1:02d}" for i in range(len(GOLDEN_ROWS))])
    def test_coefficients(self, tp, tn, fp, fn, want_oa, want_kappa, want_mcc):
        counts = ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)
        assert overall_accuracy(counts) == pytest.approx(want_oa, abs=COEFF_TOL)
        assert kappa(counts) == pytest.approx(want_kappa, abs=COEFF_TOL)
        assert mcc(counts) == pytest.approx(want_mcc, abs=COEFF_TOL)

    def test_fixture_means(self):
        reports = [(overall_accuracy(c), kappa(c), mcc(c))
                   for row in GOLDEN_ROWS
                   for c in [ConfusionCounts(*row[:4])]]
        means = np.mean(reports, axis=0)
        for got, want in zip(means, GOLDEN_MEANS):
            assert got == pytest.approx(want, abs=COEFF_TOL)

    def test_counts_recovered_from_label_arrays(self):
        # Rebuild one golden row as actual label arrays and count again.
        tp, tn, fp, fn = GOLDEN_ROWS[4][:4]
        predicted = np.concatenate([np.ones(tp + fp, dtype=np.int64),
                                    np.zeros(tn + fn, dtype=np.int64)])
        reference = np.concatenate([np.ones(tp, dtype=np.int64),
                                    np.zeros(fp + tn, dtype=np.int64),
                                    np.ones(fn, dtype=np.int64)])
        perm = np.random.default_rng(7).permutation(predicted.size)
        counts = confusion(predicted[perm], reference[perm])
        assert (counts.tp, counts.tn, counts.fp, counts.fn) == (tp, tn, fp, fn)


class TestHandValues:
    def test_overall_accuracy(self):
        assert overall_accuracy(ConfusionCounts(3, 3, 1, 1)) == 0.75

    def test_balanced_errors(self):
        counts = ConfusionCounts(tp=40, tn=40, fp=10, fn=10)
        assert kappa(counts) == pytest.approx(0.6, rel=1e-12)
        assert mcc(counts) == pytest.approx(0.6, rel=1e-12)

    def test_perfect_agreement(self):
        counts = ConfusionCounts(tp=70, tn=30, fp=0, fn=0)
        assert overall_accuracy(counts) == 1.0
        assert kappa(counts) == pytest.approx(1.0, rel=1e-12)
        assert mcc(counts) == pytest.approx(1.0, rel=1e-12)

    def test_total_disagreement(self):
        counts = ConfusionCounts(tp=0, tn=0, fp=5, fn=5)
        assert overall_accuracy(counts) == 0.0
        assert kappa(counts) == pytest.approx(-1.0, rel=1e-12)
        assert mcc(counts) == pytest.approx(-1.0, rel=1e-12)

    def test_billions_of_points_do_not_overflow(self):
        # A naive integer formulation would overflow 64-bit products here.
        counts = ConfusionCounts(tp=6 * 10**9, tn=6 * 10**9,
                                 fp=10**9, fn=10**9)
        assert kappa(counts) == pytest.approx(5 / 7, rel=1e-12)
        assert mcc(counts) == pytest.approx(5 / 7, rel=1e-12)


class TestDegenerateInputs:
    def test_single_class_kappa_warns_and_returns_zero(self):
        counts = confusion(np.zeros(10, dtype=int), np.zeros(10, dtype=int))
        with pytest.warns(DegenerateMetricWarning):
            assert kappa(counts) == 0.0
        with pytest.warns(DegenerateMetricWarning):
            assert mcc(counts) == 0.0
        assert overall_accuracy(counts) == 1.0

    def test_empty_marginal_mcc(self):
        # Reference has both classes but nothing was predicted leaf.
        counts = ConfusionCounts(tp=0, tn=8, fp=0, fn=2)
        with pytest.warns(DegenerateMetricWarning):
            assert mcc(counts) == 0.0

    def test_evaluate_flags_degenerate(self):
        report = evaluate(np.ones(5, dtype=int), np.ones(5, dtype=int), 1.0)
        assert report.degenerate
        assert report.oa == 1.0 and report.kappa == 0.0 and report.mcc == 0.0
        assert "degenerate" in report.as_table()

    def test_zero_points_rejected(self):
        counts = ConfusionCounts(0, 0, 0, 0)
        for fn in (overall_accuracy, kappa, mcc):
            with pytest.raises(ParameterError):
                fn(counts)


class TestSymmetries:
    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)),
                    min_size=1, max_size=60))
    def test_class_swap_and_transpose_invariance(self, pairs):
        pred = np.array([p for p, _ in pairs])
        ref = np.array([r for _, r in pairs])
        base = confusion(pred, ref)
        swapped = confusion(1 - pred, 1 - ref)
        assert (swapped.tp, swapped.tn) == (base.tn, base.tp)
        assert (swapped.fp, swapped.fn) == (base.fn, base.fp)
        transposed = confusion(ref, pred)
        assert (transposed.fp, transposed.fn) == (base.fn, base.fp)
        with warnings.catch_warnings():
            # Degenerate marginals are legal here; both sides return 0.
            warnings.simplefilter("ignore", DegenerateMetricWarning)
            for counts in (swapped, transposed):
                assert overall_accuracy(counts) == pytest.approx(
                    overall_accuracy(base), rel=1e-12)
                assert kappa(counts) == pytest.approx(kappa(base), abs=1e-12)
                assert mcc(counts) == pytest.approx(mcc(base), abs=1e-12)


class TestValidation:
    def test_non_binary_label_located(self):
        with pytest.raises(ParameterError, match="index 2 holds 3"):
            confusion(np.array([0, 1, 3, 1]), np.array([0, 1, 1, 1]))

    def test_length_mismatch(self):
        with pytest.raises(ParameterError, match="lengths differ"):
            confusion(np.array([0, 1]), np.array([0, 1, 1]))

    def test_matrix_rejected(self):
        with pytest.raises(ParameterError, match="one-dimensional"):
            confusion(np.zeros((2, 2), dtype=int), np.zeros(4, dtype=int))


class TestThroughput:
    def test_simple_rate(self):
        pps, ms_per_million = throughput(1.0, 1_000_000)
        assert pps == pytest.approx(1e6)
        assert ms_per_million == pytest.approx(1000.0)

    def test_golden_timing_row(self):
        # 1.901 s over 1,064,546 points comes out near 1786 ms per million.
        pps, ms_per_million = throughput(1.901, 1_064_546)
        assert ms_per_million == pytest.approx(1785.7, abs=0.1)
        assert pps == pytest.approx(1_064_546 / 1.901, rel=1e-12)

    @pytest.mark.parametrize("elapsed,count", [(0.0, 10), (-1.0, 10),
                                               (1.0, 0), (1.0, -5)])
    def test_guards(self, elapsed, count):
        with pytest.raises(ParameterError):
            throughput(elapsed, count)


class TestReportFormatting:
    def test_key_value_order(self):
        report = evaluate(np.array([1, 1, 0, 0, 1]),
                          np.array([1, 0, 0, 0, 1]), 0.5)
        keys = [line.split("=")[0] for line in report.as_key_values().splitlines()]
        assert keys == ["tp", "tn", "fp", "fn", "oa", "kappa", "mcc",
                        "elapsed_ms", "ms_per_million"]

    def test_small_evaluation(self):
        report = evaluate(np.array([1, 1, 0, 0, 1]),
                          np.array([1, 0, 0, 0, 1]), 0.5)
        c = report.counts
        assert (c.tp, c.tn, c.fp, c.fn) == (2, 2, 1, 0)
        assert report.oa == pytest.approx(0.8)
        assert report.points_per_second == pytest.approx(10.0)
        assert not report.degenerate
        assert "overall accuracy" in report.as_table()

    def test_ms_per_million_property(self):
        report = AccuracyReport(counts=ConfusionCounts(500_000, 500_000, 0, 0),
                                oa=1.0, kappa=1.0, mcc=1.0,
                                elapsed_seconds=2.0, points_per_second=5e5)
        assert report.ms_per_million == pytest.approx(2000.0)
