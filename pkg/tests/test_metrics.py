import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusetl.errors import ConfigError, DegenerateLabelsError, ValidationError
from fusetl.metrics import (
    ConfusionMatrix,
    confusion_at_threshold,
    evaluate_scores,
    pr_curve,
    prob_histogram,
    roc_auc,
    roc_curve,
    scalar_metrics,
)


def mann_whitney(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


class TestConfusion:
    def test_threshold_is_inclusive(self):
        cm = confusion_at_threshold([0.5, 0.49, 0.9, 0.1], [1, 1, 0, 0])
        assert cm == ConfusionMatrix(tp=1, fp=1, tn=1, fn=1)

    def test_counting_oracle(self, rng):
        s = rng.random(200)
        y = rng.integers(0, 2, 200)
        cm = confusion_at_threshold(s, y)
        counts = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
        for score, label in zip(s, y):
            key = ("t" if (score >= 0.5) == label else "f") + ("p" if score >= 0.5 else "n")
            counts[key] += 1
        assert cm.to_dict() == counts
        assert cm.total == 200

    def test_input_validation(self):
        with pytest.raises(ValidationError):
            confusion_at_threshold([0.1, 0.2], [1])
        with pytest.raises(ValidationError):
            confusion_at_threshold([0.1], [2])


class TestScalars:
    def test_worked_example(self):
        m = scalar_metrics(ConfusionMatrix(tp=50, fp=10, tn=30, fn=10))
        assert m.accuracy == pytest.approx(0.8, abs=1e-12)
        for v in (m.precision, m.recall, m.f1):
            assert v == pytest.approx(5 / 6, abs=1e-12)

    def test_no_positive_predictions(self):
        m = scalar_metrics(ConfusionMatrix(tp=0, fp=0, tn=5, fn=5))
        assert m.precision is None and m.f1 is None
        assert m.recall == 0.0 and m.accuracy == 0.5

    def test_tp_zero_f1_undefined(self):
        assert scalar_metrics(ConfusionMatrix(tp=0, fp=3, tn=2, fn=4)).f1 is None

    def test_perfect(self):
        m = scalar_metrics(ConfusionMatrix(tp=7, fp=0, tn=3, fn=0))
        assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_empty(self):
        with pytest.raises(ValidationError):
            scalar_metrics(ConfusionMatrix(0, 0, 0, 0))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
    def test_exact_against_fractions(self, tp, fp, tn, fn):
        if tp + fp + tn + fn == 0:
            return
        m = scalar_metrics(ConfusionMatrix(tp, fp, tn, fn))
        assert m.accuracy == float(Fraction(tp + tn, tp + fp + tn + fn))
        if m.f1 is not None:
            p, r = Fraction(tp, tp + fp), Fraction(tp, tp + fn)
            assert m.f1 == float(2 * p * r / (p + r))
            assert min(m.precision, m.recall) <= m.f1 <= max(m.precision, m.recall)


class TestRoc:
    def test_examples(self):
        assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])[1] == 0.75
        assert roc_auc([0.9, 0.8, 0.2], [1, 1, 0])[1] == 1.0
        assert roc_auc([0.5] * 6, [1, 0, 1, 0, 0, 1])[1] == 0.5

    def test_endpoints(self, rng):
        c = roc_curve(rng.random(30), np.r_[np.ones(10), np.zeros(20)])
        assert (c.x[0], c.y[0]) == (0.0, 0.0)
        assert (c.x[-1], c.y[-1]) == (1.0, 1.0)
        assert all(np.diff(c.x) >= 0) and all(np.diff(c.y) >= 0)

    def test_single_class(self):
        with pytest.raises(DegenerateLabelsError):
            roc_auc([0.2, 0.3], [1, 1])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 1)), min_size=2, max_size=40))
    def test_mann_whitney(self, pairs):
        s = [v / 8 for v, _ in pairs]
        y = [label for _, label in pairs]
        if len(set(y)) < 2:
            return
        assert abs(roc_auc(s, y)[1] - mann_whitney(s, y)) <= 1e-12

    def test_monotone_relabeling(self, rng):
        s = rng.random(50)
        y = rng.integers(0, 2, 50)
        y[:2] = [0, 1]
        assert roc_auc(s, y)[1] == roc_auc(np.exp(3 * s) - 1, y)[1]


class TestPr:
    def test_example(self):
        c = pr_curve([0.9, 0.8, 0.7], [1, 0, 1])
        assert c.x == (0.5, 0.5, 1.0)
        assert c.y[:2] == (1.0, 0.5)
        assert c.y[2] == pytest.approx(2 / 3, abs=1e-15)
        assert c.thresholds == (0.9, 0.8, 0.7)

    def test_ties_collapse(self):
        assert len(pr_curve([0.5, 0.5, 0.2], [1, 0, 1])) == 2

    def test_no_positives(self):
        with pytest.raises(DegenerateLabelsError):
            pr_curve([0.3], [0])


class TestHistogram:
    def test_boundaries(self):
        edges, counts = prob_histogram([0.0, 0.1, 0.95, 1.0], bins=10)
        assert edges[0] == 0.0 and edges[-1] == 1.0 and len(edges) == 11
        assert counts[0] == 1 and counts[1] == 1 and counts[9] == 2
        assert counts.sum() == 4

    def test_uniform_scores(self, rng):
        n = 10000
        _, counts = prob_histogram(rng.random(n), bins=10)
        sigma = np.sqrt(n * 0.1 * 0.9)
        assert np.all(np.abs(counts - n / 10) <= 5 * sigma)

    def test_bad_bins(self):
        with pytest.raises(ConfigError):
            prob_histogram([0.5], bins=0)


class TestEvaluate:
    def test_report(self, rng):
        y = np.r_[np.ones(20), np.zeros(20)]
        s = np.clip(y * 0.6 + rng.random(40) * 0.4, 0, 1)
        r = evaluate_scores(s, y, model="m")
        assert r.confusion.total == 40
        assert r.roc_auc == roc_auc(s, y)[1]
        assert set(r.to_dict()) >= {"model", "accuracy", "precision", "recall", "f1", "roc_auc"}

    def test_single_class_leaves_auc_undefined(self):
        r = evaluate_scores([0.7, 0.8], [1, 1])
        assert r.roc_auc is None and r.roc is None and r.pr is not None
