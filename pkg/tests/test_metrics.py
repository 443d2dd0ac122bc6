import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgedetect.metrics import (
    Confusion,
    MetricsReport,
    accuracy,
    auc,
    f1,
    kappa,
    precision,
    recall,
    report_from_scores,
)
from helpers import brute_force_auc


def test_hand_example():
    c = Confusion(tp=2, fp=1, tn=3, fn=0)
    assert precision(c) == pytest.approx(2 / 3, abs=1e-15)
    assert recall(c) == 1.0
    assert f1(c) == pytest.approx(0.8, abs=1e-15)
    assert accuracy(c) == pytest.approx(5 / 6, abs=1e-15)
    assert kappa(c) == pytest.approx(2 / 3, abs=1e-15)


def test_zero_denominators():
    c = Confusion(tp=0, fp=0, tn=5, fn=0)
    assert precision(c) == recall(c) == f1(c) == 0.0
    assert kappa(c) == 1.0
    assert kappa(Confusion(0, 3, 0, 0)) == 0.0
    with pytest.raises(ValueError):
        kappa(Confusion(0, 0, 0, 0))


def test_from_predictions():
    c = Confusion.from_predictions([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert c == Confusion(tp=2, fp=1, tn=1, fn=1)


def test_auc_examples():
    assert auc([0.9, 0.1], [1, 0]) == 1.0
    assert auc([0.4] * 6, [1, 0, 1, 0, 0, 1]) == 0.5
    assert auc([0.8, 0.8, 0.3, 0.1], [1, 0, 1, 0]) == 0.625
    with pytest.raises(ValueError):
        auc([0.2, 0.3], [1, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.booleans()), min_size=2, max_size=60))
def test_auc_matches_pair_enumeration(pairs):
    scores = [s / 20 for s, _ in pairs]
    labels = [int(b) for _, b in pairs]
    if len(set(labels)) < 2:
        return
    assert auc(scores, labels) == brute_force_auc(scores, labels)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_auc_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    scores = rng.random(80)
    labels = np.arange(80) % 2
    base = auc(scores, labels)
    for transform in (np.exp, lambda s: s ** 3, lambda s: 5 * s - 2, np.arctan):
        assert auc(transform(scores), labels) == base


def _exact(c):
    tp, fp, tn, fn = (Fraction(v) for v in (c.tp, c.fp, c.tn, c.fn))
    n = tp + fp + tn + fn
    p = tp / (tp + fp) if tp + fp else Fraction(0)
    r = tp / (tp + fn) if tp + fn else Fraction(0)
    f = 2 * p * r / (p + r) if p + r else Fraction(0)
    po = (tp + tn) / n
    pe = ((tp + fp) * (tp + fn) + (tn + fn) * (tn + fp)) / (n * n)
    k = Fraction(1) if fp == fn == 0 else (Fraction(0) if pe == 1 else (po - pe) / (1 - pe))
    return po, p, r, f, k


@given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.integers(0, 500))
def test_closed_forms_against_rational_arithmetic(tp, fp, tn, fn):
    c = Confusion(tp, fp, tn, fn)
    if c.total == 0:
        return
    got = (accuracy(c), precision(c), recall(c), f1(c), kappa(c))
    for value, exact in zip(got, _exact(c)):
        assert abs(value - float(exact)) <= 1e-12


def test_random_scores_are_uninformative():
    aucs, kappas = [], []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        labels = rng.permutation(np.arange(10_000) % 2)
        scores = rng.random(10_000)
        aucs.append(auc(scores, labels))
        kappas.append(kappa(Confusion.from_predictions(labels, scores >= 0.5)))
    assert all(abs(a - 0.5) <= 0.02 for a in aucs)
    assert all(abs(k) <= 0.03 for k in kappas)


def test_perfect_classifier():
    labels = np.array([0, 1, 1, 0, 1])
    r = report_from_scores(labels * 0.9 + 0.05, labels, 0.8, loss=0.0)
    assert r.accuracy == r.precision == r.recall == r.f1 == r.kappa == r.auc == 1.0


def test_report_recomputable_and_shuffle_invariant():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 2, 300)
    scores = np.clip(labels * 0.4 + rng.random(300) * 0.7, 0, 1)
    r = report_from_scores(scores, labels, 0.8, loss=0.1)
    c = r.confusion
    assert abs(r.precision - c.tp / (c.tp + c.fp)) <= 1e-12
    assert abs(r.recall - c.tp / (c.tp + c.fn)) <= 1e-12
    assert r.f1 == 2 * r.precision * r.recall / (r.precision + r.recall)
    perm = rng.permutation(300)
    s = report_from_scores(scores[perm], labels[perm], 0.8, loss=0.1)
    assert s.to_dict() == r.to_dict()


def test_single_class_report_has_nan_auc():
    r = report_from_scores(np.array([0.1, 0.9]), np.array([0, 0]), 0.8, loss=0.0)
    assert np.isnan(r.auc)


def test_report_json_fields():
    r = report_from_scores(np.array([0.1, 0.9, 0.85]), np.array([0, 1, 0]), 0.8, loss=0.3,
                           cell="FastGRNN", wall_time=0.5)
    d = json.loads(r.to_json())
    assert list(d) == ["cell", "accuracy", "loss", "precision", "recall", "f1", "auc", "kappa",
                       "confusion", "test_wall_time_s"]
    assert set(d["confusion"]) == {"tp", "fp", "tn", "fn"}
    assert MetricsReport.from_dict(d) == r
    assert r.f1_percent == 100 * r.f1
