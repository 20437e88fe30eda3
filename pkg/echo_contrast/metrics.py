# -*- coding: utf-8 -*-

"""Metrics for classification, retrieval and the geometry of the embedding
space."""

from dataclasses import dataclass, field
import logging

import numpy as np
import pandas
from sklearn.metrics import (
    balanced_accuracy_score,
    confusion_matrix,
    f1_score,
    precision_recall_fscore_support,
    precision_score,
    roc_auc_score,
)
import torch

logger = logging.getLogger(__name__)

KNN_K = 20
KNN_TEMPERATURE = 0.07


def as_array(x):
    if hasattr(x, "rows"):
        x = x.rows
    if isinstance(x, torch.Tensor):
        x = x.detach().cpu().numpy()
    return np.asarray(x, dtype=np.float64)


def auc(scores, labels):
    """Area under the ROC curve; ties count one half.

    Raises
    ------
    ValueError
        If the labels are all of one class.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores but {labels.size} labels")
    if labels.all() or not labels.any():
        raise ValueError("AUC undefined: the labels contain only one class")
    return float(roc_auc_score(labels, scores))


@dataclass(frozen=True)
class PrecisionRecall:
    precision: float
    recall: float
    f1: float
    # True when nothing was predicted positive and precision was set to 0
    precision_undefined: bool = False


def precision_recall_f1(predictions, labels):
    """Binary precision, recall and F1 with 0/0 taken as 0."""
    predictions = np.asarray(predictions, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    if predictions.shape != labels.shape:
        raise ValueError(
            f"{predictions.size} predictions but {labels.size} labels"
        )
    precision, recall, f1, _ = precision_recall_fscore_support(
        labels, predictions, average="binary", pos_label=True, zero_division=0
    )
    return PrecisionRecall(
        float(precision), float(recall), float(f1), not bool(predictions.any())
    )


def retrieval_recall_at_k(queries, targets, k):
    """Fraction of queries whose own target ranks in the top k.

    The i-th target is the match of the i-th query. Similarity is the dot
    product; ties go to the lower index.
    """
    queries = as_array(queries)
    targets = as_array(targets)
    n = queries.shape[0]
    if targets.shape[0] != n:
        raise ValueError(f"{n} queries but {targets.shape[0]} targets")
    if not 1 <= k <= n:
        raise ValueError(f"k must be between 1 and the corpus size {n}, not {k}")
    similarities = queries @ targets.T
    order = np.argsort(-similarities, axis=1, kind="stable")
    ranks = np.argmax(order == np.arange(n)[:, None], axis=1)
    return float(np.mean(ranks < k))


def _check_unit_norm(x, name):
    norms = np.linalg.norm(x, axis=1)
    if not np.allclose(norms, 1.0, atol=1e-6):
        raise ValueError(f"The {name} embeddings are not unit norm")


def knn_classify(
    train_embeddings,
    train_labels,
    queries,
    k=KNN_K,
    temperature=KNN_TEMPERATURE,
    n_classes=None,
):
    """Similarity-weighted k-nearest-neighbor vote.

    The k' = min(k, N_train) most similar training rows vote for their class
    with weight exp(similarity / temperature); the heaviest class wins, the
    lowest class id on ties.

    Returns
    -------
    numpy.ndarray
        The predicted class of every query.
    """
    train = as_array(train_embeddings)
    queries = as_array(queries)
    labels = np.asarray(train_labels, dtype=np.int64)
    if train.shape[0] == 0:
        raise ValueError("k-NN classification needs training embeddings")
    if labels.shape[0] != train.shape[0]:
        raise ValueError(f"{train.shape[0]} training rows but {labels.shape[0]} labels")
    _check_unit_norm(train, "training")
    _check_unit_norm(queries, "query")

    if n_classes is None:
        n_classes = int(labels.max()) + 1
    k = min(k, train.shape[0])
    similarities = queries @ train.T
    neighbors = np.argsort(-similarities, axis=1, kind="stable")[:, :k]
    weights = np.exp(np.take_along_axis(similarities, neighbors, axis=1) / temperature)
    votes = np.zeros((queries.shape[0], n_classes))
    for i in range(queries.shape[0]):
        np.add.at(votes[i], labels[neighbors[i]], weights[i])
    return np.argmax(votes, axis=1)


@dataclass
class ClassificationReport:
    """Scores of a multi-class classifier."""

    accuracy: float
    f1: float
    precision: float
    balanced_accuracy: float
    per_class_balanced_accuracy: dict = field(default_factory=dict)
    confusion: pandas.DataFrame = None

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "f1": self.f1,
            "precision": self.precision,
            "balanced_accuracy": self.balanced_accuracy,
            "per_class_balanced_accuracy": dict(self.per_class_balanced_accuracy),
        }


def classification_report(predictions, labels, class_names=None):
    """Accuracy, macro F1 and precision, balanced accuracy and the confusion
    matrix. Per class, balanced accuracy is that of the one-vs-rest problem."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(f"{predictions.size} predictions but {labels.size} labels")
    classes = np.unique(np.concatenate([labels, predictions]))
    if class_names is None:
        names = [str(c) for c in classes]
    else:
        names = [class_names[int(c)] for c in classes]

    per_class = {}
    for c, name in zip(classes, names):
        truth = labels == c
        if truth.all() or not truth.any():
            continue
        per_class[name] = float(balanced_accuracy_score(truth, predictions == c))

    matrix = confusion_matrix(labels, predictions, labels=classes)
    return ClassificationReport(
        accuracy=float(np.mean(predictions == labels)),
        f1=float(f1_score(labels, predictions, average="macro", zero_division=0)),
        precision=float(
            precision_score(labels, predictions, average="macro", zero_division=0)
        ),
        balanced_accuracy=float(balanced_accuracy_score(labels, predictions)),
        per_class_balanced_accuracy=per_class,
        confusion=pandas.DataFrame(matrix, index=names, columns=names),
    )


def view_margin(embeddings, views):
    """Mean cosine similarity of same-view pairs minus that of other pairs."""
    x = as_array(embeddings)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    views = np.asarray(views)
    cosine = x @ x.T
    upper = np.triu(np.ones_like(cosine, dtype=bool), k=1)
    same = views[:, None] == views[None, :]
    intra = cosine[upper & same]
    inter = cosine[upper & ~same]
    if intra.size == 0 or inter.size == 0:
        raise ValueError("The view margin needs both same-view and cross-view pairs")
    return float(intra.mean() - inter.mean())


def negation_separation(text, negated, tau):
    """Mean sigmoid(tau <z_text_i, z_negated_i>) over unit-norm pairs."""
    t = as_array(text)
    n = as_array(negated)
    t = t / np.linalg.norm(t, axis=1, keepdims=True)
    n = n / np.linalg.norm(n, axis=1, keepdims=True)
    u = float(tau) * np.sum(t * n, axis=1)
    return float(np.mean(1.0 / (1.0 + np.exp(-u))))
