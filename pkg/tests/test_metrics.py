#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for the classification, retrieval and geometry metrics."""

import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from echo_contrast import metrics


def pairwise_auc(scores, labels):
    positives = [s for s, y in zip(scores, labels) if y]
    negatives = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in positives:
        for n in negatives:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(positives) * len(negatives))


def unit_rows(x):
    x = np.asarray(x, dtype=np.float64)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_auc_cases():
    assert metrics.auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert metrics.auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0
    assert metrics.auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5


def test_auc_single_class():
    with pytest.raises(ValueError, match="only one class"):
        metrics.auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError, match="only one class"):
        metrics.auc([0.1, 0.2], [0, 0])


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(min_value=0, max_value=5), st.booleans()),
        min_size=2,
        max_size=30,
    ).filter(lambda pairs: len({y for _, y in pairs}) == 2)
)
def test_auc_matches_pairwise_count(pairs):
    scores = [s / 5 for s, _ in pairs]
    labels = [y for _, y in pairs]
    assert metrics.auc(scores, labels) == pytest.approx(pairwise_auc(scores, labels))


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(min_value=-50, max_value=50), st.booleans()),
        min_size=2,
        max_size=30,
    ).filter(lambda pairs: len({y for _, y in pairs}) == 2),
    st.sampled_from(["exp", "cube", "affine", "logistic"]),
)
def test_auc_ignores_monotone_transforms(pairs, transform):
    scores = np.array([s / 10 for s, _ in pairs])
    labels = [y for _, y in pairs]
    transformed = {
        "exp": np.exp(scores),
        "cube": scores**3,
        "affine": 3.0 * scores - 7.0,
        "logistic": 1.0 / (1.0 + np.exp(-scores)),
    }[transform]
    assert metrics.auc(transformed, labels) == pytest.approx(
        metrics.auc(scores, labels)
    )


def test_precision_recall_f1():
    result = metrics.precision_recall_f1([1, 1, 0, 0], [1, 0, 1, 0])
    assert (result.precision, result.recall, result.f1) == (0.5, 0.5, 0.5)
    assert not result.precision_undefined

    result = metrics.precision_recall_f1([0, 0, 0], [1, 0, 1])
    assert result.precision == 0.0
    assert result.recall == 0.0
    assert result.f1 == 0.0
    assert result.precision_undefined

    result = metrics.precision_recall_f1([1, 1], [1, 1])
    assert (result.precision, result.recall, result.f1) == (1.0, 1.0, 1.0)


def test_recall_at_k_identity():
    x = np.eye(4)
    for k in range(1, 5):
        assert metrics.retrieval_recall_at_k(x, x, k) == 1.0


def test_recall_at_k_reversed():
    queries = np.eye(3)
    targets = np.eye(3)[[1, 2, 0]]
    assert metrics.retrieval_recall_at_k(queries, targets, 1) == 0.0
    assert metrics.retrieval_recall_at_k(queries, targets, 3) == 1.0


def test_recall_at_k_ties_go_to_lower_index():
    queries = np.ones((2, 2))
    targets = np.ones((2, 2))
    # Every similarity ties, so query 0 finds target 0 first and query 1 misses
    assert metrics.retrieval_recall_at_k(queries, targets, 1) == 0.5


def test_recall_at_k_errors():
    with pytest.raises(ValueError, match="between 1"):
        metrics.retrieval_recall_at_k(np.eye(3), np.eye(3), 4)
    with pytest.raises(ValueError, match="targets"):
        metrics.retrieval_recall_at_k(np.eye(3), np.eye(2, 3), 1)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=20),
    d=st.integers(min_value=1, max_value=8),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_recall_at_k_grows_with_k(n, d, seed):
    rng = np.random.default_rng(seed)
    queries = rng.normal(size=(n, d))
    targets = rng.normal(size=(n, d))
    values = [
        metrics.retrieval_recall_at_k(queries, targets, k) for k in range(1, n + 1)
    ]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert values[-1] == 1.0


def test_knn_cases():
    train = unit_rows([[1, 0], [0.9, 0.1], [0, 1], [0.1, 0.9]])
    labels = [0, 0, 1, 1]
    queries = unit_rows([[1, 0.05], [0.05, 1]])
    predictions = metrics.knn_classify(train, labels, queries, k=3, temperature=0.1)
    assert predictions.tolist() == [0, 1]


def test_knn_k_larger_than_train():
    train = unit_rows([[1, 0], [0, 1]])
    predictions = metrics.knn_classify(train, [0, 1], unit_rows([[1, 0.2]]), k=20)
    assert predictions.tolist() == [0]


def test_knn_tie_goes_to_lower_class():
    train = unit_rows([[1, 1], [1, 1]])
    predictions = metrics.knn_classify(train, [1, 0], unit_rows([[1, 1]]), k=2)
    assert predictions.tolist() == [0]


def scalar_knn(train, labels, query, k, temperature):
    similarities = [float(np.dot(query, t)) for t in train]
    order = sorted(range(len(train)), key=lambda i: (-similarities[i], i))[:k]
    votes = {}
    for i in order:
        votes[labels[i]] = votes.get(labels[i], 0.0) + math.exp(
            similarities[i] / temperature
        )
    best = max(votes.values())
    return min(c for c, v in votes.items() if v == best)


def test_knn_matches_scalar_vote():
    rng = np.random.default_rng(5)
    train = unit_rows(rng.standard_normal((40, 6)))
    labels = rng.integers(0, 4, size=40).tolist()
    queries = unit_rows(rng.standard_normal((15, 6)))
    predictions = metrics.knn_classify(train, labels, queries, k=7, temperature=0.5)
    expected = [scalar_knn(train, labels, q, 7, 0.5) for q in queries]
    assert predictions.tolist() == expected


def test_knn_errors():
    with pytest.raises(ValueError, match="unit norm"):
        metrics.knn_classify(np.ones((2, 2)), [0, 1], unit_rows([[1, 0]]))
    with pytest.raises(ValueError, match="labels"):
        metrics.knn_classify(unit_rows([[1, 0]]), [0, 1], unit_rows([[1, 0]]))


def test_classification_report():
    report = metrics.classification_report(
        [0, 1, 1, 2, 2, 2], [0, 1, 2, 2, 2, 1], class_names=["a4c", "plax", "psax"]
    )
    assert report.accuracy == pytest.approx(4 / 6)
    assert report.balanced_accuracy == pytest.approx((1 + 0.5 + 2 / 3) / 3)
    assert report.per_class_balanced_accuracy["a4c"] == 1.0
    assert list(report.confusion.index) == ["a4c", "plax", "psax"]
    assert report.confusion.loc["psax", "plax"] == 1
    assert int(report.confusion.to_numpy().sum()) == 6
    data = report.to_dict()
    assert set(data) == {
        "accuracy",
        "f1",
        "precision",
        "balanced_accuracy",
        "per_class_balanced_accuracy",
    }


def test_view_margin():
    embeddings = [[1, 0], [1, 0.01], [0, 1], [0.01, 1]]
    assert metrics.view_margin(embeddings, [0, 0, 1, 1]) > 0.9
    assert metrics.view_margin(embeddings, [0, 1, 0, 1]) < 0
    with pytest.raises(ValueError, match="both"):
        metrics.view_margin(embeddings, [0, 0, 0, 0])


def test_negation_separation():
    text = [[1.0, 0.0], [0.0, 1.0]]
    assert metrics.negation_separation(text, [[0, 1], [1, 0]], 10.0) == 0.5
    assert metrics.negation_separation(text, [[-1, 0], [0, -1]], 20.0) < 1e-8
