# -*- coding: utf-8 -*-

"""Evaluation of a trained dual encoder.

Cross-modal tasks:

* zero-shot disease classification, comparing each image with a positive and
  a negative prompt for the disease, and
* image-text retrieval, scored by recall@k.

Vision-only tasks on frozen image embeddings:

* view classification by a similarity-weighted k-nearest-neighbor vote, and
* view classification by a linear probe.

Two diagnostics of the embedding geometry complete the report: the view
margin of the image embeddings and the separation of captions from their
negations.
"""

from dataclasses import dataclass, field
import json
import logging
from pathlib import Path

import numpy as np
import pandas
from sklearn.metrics import confusion_matrix
import torch

from . import data_files
from .embedding import DTYPE, EmbeddingBatch, Role, normalize, temperature_value
from .encoders import DualEncoder, encode_images
from .guidelines import SeverityGrade, binarize_disease
from . import metrics
from .synthetic import read_manifest
from .training import load_checkpoint, warmup_cosine

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PromptPair:
    """The positive and negative zero-shot prompts of a disease."""

    disease: str
    positive_text: str
    negative_text: str

    def __post_init__(self):
        if self.positive_text.strip() == "" or self.negative_text.strip() == "":
            raise ValueError(f"The prompts for '{self.disease}' cannot be empty")
        if self.positive_text.strip() == self.negative_text.strip():
            raise ValueError(
                f"The positive and negative prompts for '{self.disease}' are the same"
            )


def load_prompts(path=None):
    """Read a prompt file, by default the one shipped with the package.

    Returns
    -------
    dict(str, PromptPair)
        The prompts keyed by disease.
    """
    if path is None:
        path = data_files.data_path("prompts.txt")
    _, data = data_files.read_data_file(path, "prompts")
    prompts = {}
    for record in data:
        pair = PromptPair(record["disease"], record["positive"], record["negative"])
        if pair.disease in prompts:
            raise RuntimeError(f"{path}: duplicate prompts for '{pair.disease}'")
        prompts[pair.disease] = pair
    return prompts


def prompt_pairs_from_rules(rules, diseases):
    """Prompts phrased like the negation rules: 'severe X' against 'no X'."""
    pairs = {}
    for disease in diseases:
        rule = rules.rule_for(disease)
        pairs[disease] = PromptPair(
            disease, rule.interpretation(SeverityGrade.SEVERE), rule.negate("severe")
        )
    return pairs


def prompt_probabilities(z_image, z_positive, z_negative, tau):
    """p_pos, the two-way softmax of the temperature-scaled prompt similarities.

    Parameters
    ----------
    z_image : EmbeddingBatch
        Unit-norm image embeddings.
    z_positive, z_negative : torch.Tensor
        The unit-norm prompt embeddings, each of shape (d,).
    tau : float, torch.Tensor or Temperature

    Returns
    -------
    numpy.ndarray
    """
    if z_image.size == 0:
        raise ValueError("Cannot score an empty batch of images")
    tau = temperature_value(tau)
    s_positive = tau * (z_image.rows @ z_positive)
    s_negative = tau * (z_image.rows @ z_negative)
    return torch.sigmoid(s_positive - s_negative).detach().cpu().numpy()


def zero_shot_scores(image_embeddings, pair, model, tau=None):
    """The probability that each image shows the disease of the prompts.

    The predicted label is positive where the probability is at least one
    half, i.e. where the positive prompt is at least as similar.
    """
    tau = model.temperature if tau is None else tau
    with torch.no_grad():
        prompts = normalize(
            model.embed_texts([pair.positive_text, pair.negative_text], Role.TEXT)
        )
        return prompt_probabilities(
            normalize(image_embeddings), prompts.rows[0], prompts.rows[1], tau
        )


@dataclass
class ProbeConfig:
    """Training settings of the linear probe."""

    base_lr: float = 1e-2
    weight_decay: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 100
    warmup_epochs: int = 10
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"The probe needs at least one epoch, not {self.epochs}")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError(
                f"warmup_epochs must be in [0, {self.epochs}), not {self.warmup_epochs}"
            )
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive: {self.batch_size}")


def linear_probe(
    train_embs, train_labels, test_embs, test_labels, cfg=None, class_names=None
):
    """Train a linear classifier on frozen embeddings and score it.

    The schedule is a linear warmup over ``warmup_epochs`` and a cosine decay
    over the remaining epochs, stepped once per batch.

    Returns
    -------
    metrics.ClassificationReport
    """
    cfg = ProbeConfig() if cfg is None else cfg
    x_train = torch.as_tensor(metrics.as_array(train_embs), dtype=DTYPE)
    x_test = torch.as_tensor(metrics.as_array(test_embs), dtype=DTYPE)
    y_train = torch.as_tensor(np.asarray(train_labels), dtype=torch.long)
    if x_train.shape[0] == 0:
        raise ValueError("The linear probe needs training embeddings")
    n_classes = int(max(y_train.max(), int(np.max(test_labels)))) + 1

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        layer = torch.nn.Linear(x_train.shape[1], n_classes, dtype=DTYPE)
    optimizer = torch.optim.AdamW(
        layer.parameters(),
        lr=cfg.base_lr,
        betas=(cfg.beta1, cfg.beta2),
        weight_decay=cfg.weight_decay,
    )

    n = x_train.shape[0]
    steps_per_epoch = -(-n // cfg.batch_size)
    total_steps = steps_per_epoch * cfg.epochs
    warmup_steps = steps_per_epoch * cfg.warmup_epochs
    step = 0
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = torch.from_numpy(order[start : start + cfg.batch_size])
            lr = warmup_cosine(step, total_steps, cfg.base_lr, warmup_steps)
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.zero_grad(set_to_none=True)
            logits = layer(x_train[batch])
            loss = torch.nn.functional.cross_entropy(logits, y_train[batch])
            loss.backward()
            optimizer.step()
            step += 1
    logger.debug(f"Linear probe: final batch loss {float(loss):.4f}")

    with torch.no_grad():
        predictions = layer(x_test).argmax(dim=1).numpy()
    return metrics.classification_report(
        predictions, np.asarray(test_labels), class_names
    )


@dataclass
class EvalConfig:
    """Settings of an evaluation run."""

    split: str = "test"
    knn_k: int = metrics.KNN_K
    knn_temperature: float = metrics.KNN_TEMPERATURE
    positive_threshold: SeverityGrade = SeverityGrade.MILD
    recall_ks: tuple = (5, 10)
    linear_probe: bool = True
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    batch_size: int = 512

    def __post_init__(self):
        self.positive_threshold = SeverityGrade.parse(self.positive_threshold)
        self.recall_ks = tuple(sorted(int(k) for k in self.recall_ks))
        if self.knn_k < 1:
            raise ValueError(f"knn_k must be positive, not {self.knn_k}")
        if not self.knn_temperature > 0:
            raise ValueError(
                f"knn_temperature must be positive: {self.knn_temperature}"
            )
        if any(k < 1 for k in self.recall_ks):
            raise ValueError(f"recall@k needs positive k, not {self.recall_ks}")


@dataclass
class DiseaseScores:
    """Zero-shot scores of one disease."""

    disease: str
    auc: float
    precision: float
    recall: float
    f1: float
    precision_undefined: bool
    n_positive: int
    n_negative: int
    confusion: pandas.DataFrame = None

    def to_dict(self):
        return {
            "auc": self.auc,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "precision_undefined": self.precision_undefined,
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
        }


def _keyed(recalls):
    return {str(k): v for k, v in recalls.items()}


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if len(values) > 0 else None


@dataclass
class MetricReport:
    """Everything measured in one evaluation."""

    split: str
    n_samples: int
    temperature: float
    diseases: dict = field(default_factory=dict)
    image_to_text_recall: dict = field(default_factory=dict)
    text_to_image_recall: dict = field(default_factory=dict)
    knn: metrics.ClassificationReport = None
    linear_probe: metrics.ClassificationReport = None
    view_margin: float = None
    negation_separation: float = None

    @property
    def macro_auc(self):
        return _mean(d.auc for d in self.diseases.values())

    @property
    def macro_precision(self):
        return _mean(d.precision for d in self.diseases.values())

    @property
    def macro_recall(self):
        return _mean(d.recall for d in self.diseases.values())

    def to_dict(self):
        return {
            "split": self.split,
            "n_samples": self.n_samples,
            "temperature": self.temperature,
            "zero_shot": {
                "macro_auc": self.macro_auc,
                "macro_precision": self.macro_precision,
                "macro_recall": self.macro_recall,
                "diseases": {name: d.to_dict() for name, d in self.diseases.items()},
            },
            "retrieval": {
                "image_to_text": _keyed(self.image_to_text_recall),
                "text_to_image": _keyed(self.text_to_image_recall),
            },
            "knn": None if self.knn is None else self.knn.to_dict(),
            "linear_probe": (
                None if self.linear_probe is None else self.linear_probe.to_dict()
            ),
            "view_margin": self.view_margin,
            "negation_separation": self.negation_separation,
        }

    def to_table(self):
        """The zero-shot scores per disease as a DataFrame."""
        table = pandas.DataFrame(
            [d.to_dict() for d in self.diseases.values()],
            index=list(self.diseases),
            columns=["auc", "precision", "recall", "f1", "n_positive", "n_negative"],
        )
        table.loc["macro"] = [
            self.macro_auc,
            self.macro_precision,
            self.macro_recall,
            _mean(d.f1 for d in self.diseases.values()),
            None,
            None,
        ]
        return table

    def summary_text(self):
        """An aligned, human-readable rendering of the report."""
        lines = [
            f"Evaluation of the {self.split} split ({self.n_samples} samples), "
            f"temperature {self.temperature:.3f}",
            "",
            "Zero-shot disease classification",
            self.to_table().to_string(float_format=lambda x: f"{x:.3f}", na_rep=""),
            "",
            "Retrieval recall@k",
        ]
        recall = pandas.DataFrame(
            {
                "image to text": self.image_to_text_recall,
                "text to image": self.text_to_image_recall,
            }
        )
        recall.index.name = "k"
        lines.append(recall.to_string(float_format=lambda x: f"{x:.3f}"))
        for title, report in (
            ("k-NN view classification", self.knn),
            ("Linear-probe view classification", self.linear_probe),
        ):
            if report is None:
                continue
            lines.extend(["", title])
            scores = pandas.Series(
                {
                    k: v
                    for k, v in report.to_dict().items()
                    if k != "per_class_balanced_accuracy"
                }
            )
            lines.append(scores.to_string(float_format=lambda x: f"{x:.3f}"))
        lines.extend(["", "Embedding geometry"])
        if self.view_margin is not None:
            lines.append(f"    view margin          {self.view_margin:.4f}")
        if self.negation_separation is not None:
            lines.append(f"    negation separation  {self.negation_separation:.4f}")
        return "\n".join(lines) + "\n"

    def write(self, directory):
        """Write report.json, report.txt and the confusion matrices as CSV."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "report.json", "w") as fd:
            json.dump(self.to_dict(), fd, indent=4, sort_keys=True)
        (directory / "report.txt").write_text(self.summary_text())
        for name, scores in self.diseases.items():
            if scores.confusion is not None:
                slug = name.replace(" ", "-")
                scores.confusion.to_csv(directory / f"confusion_{slug}.csv")
        for name, report in (("knn", self.knn), ("linear_probe", self.linear_probe)):
            if report is not None and report.confusion is not None:
                report.confusion.to_csv(directory / f"confusion_{name}.csv")
        return directory


@dataclass
class SplitEmbeddings:
    """The unit-norm embeddings of a set of samples."""

    image: object
    text: object
    negated: object
    views: np.ndarray


def embed_samples(model, samples, batch_size=512):
    """Encode the images, captions and negated captions of samples."""
    if len(samples) == 0:
        raise ValueError("There are no samples to embed")
    model.eval()
    images, texts, negated = [], [], []
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start : start + batch_size]
            images.append(normalize(encode_images(model, [s.image for s in chunk])))
            texts.append(
                normalize(model.embed_texts([s.caption for s in chunk], Role.TEXT))
            )
            negated.append(
                normalize(
                    model.embed_texts(
                        [s.negated_caption for s in chunk], Role.NEGATED_TEXT
                    )
                )
            )

    def stack(batches):
        return EmbeddingBatch(torch.cat([b.rows for b in batches]), batches[0].role)

    return SplitEmbeddings(
        stack(images),
        stack(texts),
        stack(negated),
        np.array([s.view for s in samples], dtype=np.int64),
    )


def _view_names(samples):
    names = {}
    for sample in samples:
        names.setdefault(sample.view, sample.view_name or str(sample.view))
    return [names.get(v, str(v)) for v in range(max(names) + 1)]


def _zero_shot(model, image_embeddings, samples, prompts, cfg):
    diseases = []
    for sample in samples:
        for disease in sample.grades:
            if disease not in diseases:
                diseases.append(disease)
    missing = [d for d in diseases if d not in prompts]
    if len(missing) > 0:
        raise ValueError(f"There are no prompts for: {', '.join(missing)}")

    results = {}
    for disease in diseases:
        p_positive = zero_shot_scores(image_embeddings, prompts[disease], model)
        labels = np.array(
            [
                binarize_disease(
                    s.grades.get(disease, SeverityGrade.NONE), cfg.positive_threshold
                )
                for s in samples
            ]
        )
        predictions = p_positive >= 0.5
        try:
            auc = metrics.auc(p_positive, labels)
        except ValueError:
            logger.warning(f"AUC is undefined for '{disease}': only one class present")
            auc = None
        scores = metrics.precision_recall_f1(predictions, labels)
        matrix = confusion_matrix(labels, predictions, labels=[False, True])
        results[disease] = DiseaseScores(
            disease,
            auc,
            scores.precision,
            scores.recall,
            scores.f1,
            scores.precision_undefined,
            int(labels.sum()),
            int((~labels).sum()),
            pandas.DataFrame(
                matrix,
                index=["true negative", "true positive"],
                columns=["predicted negative", "predicted positive"],
            ),
        )
    return results


def _recalls(queries, targets, ks):
    n = queries.size
    recalls = {}
    for k in ks:
        if k > n:
            logger.warning(f"Skipping recall@{k}: there are only {n} samples")
            continue
        recalls[k] = metrics.retrieval_recall_at_k(queries, targets, k)
    return recalls


def evaluate(checkpoint, manifest, prompts=None, cfg=None):
    """Evaluate a model on one split of a manifest.

    Parameters
    ----------
    checkpoint : path, TrainState or DualEncoder
    manifest : path or list of SamplePair
        The training split supplies the neighbors and probe data for view
        classification.
    prompts : path or dict(str, PromptPair), optional
        Defaults to the shipped prompt file.
    cfg : EvalConfig, optional

    Returns
    -------
    MetricReport
    """
    cfg = EvalConfig() if cfg is None else cfg
    if isinstance(checkpoint, DualEncoder):
        model = checkpoint
    elif isinstance(checkpoint, (str, Path)):
        model = load_checkpoint(checkpoint).model
    else:
        model = checkpoint.model
    if isinstance(manifest, (str, Path)):
        manifest = read_manifest(manifest)
    if prompts is None or isinstance(prompts, (str, Path)):
        prompts = load_prompts(prompts)

    samples = [s for s in manifest if s.split == cfg.split]
    if len(samples) == 0:
        raise ValueError(f"The manifest has no rows in the '{cfg.split}' split")
    reference = [s for s in manifest if s.split == "train"]
    if len(reference) == 0:
        raise ValueError("View classification needs rows in the 'train' split")
    logger.info(
        f"Evaluating {len(samples)} '{cfg.split}' samples against "
        f"{len(reference)} training samples"
    )

    test = embed_samples(model, samples, cfg.batch_size)
    train = embed_samples(model, reference, cfg.batch_size)
    tau = float(model.temperature)

    report = MetricReport(cfg.split, len(samples), tau)
    report.diseases = _zero_shot(model, test.image, samples, prompts, cfg)
    report.image_to_text_recall = _recalls(test.image, test.text, cfg.recall_ks)
    report.text_to_image_recall = _recalls(test.text, test.image, cfg.recall_ks)

    names = _view_names(manifest)
    predictions = metrics.knn_classify(
        train.image,
        train.views,
        test.image,
        k=cfg.knn_k,
        temperature=cfg.knn_temperature,
        n_classes=len(names),
    )
    report.knn = metrics.classification_report(predictions, test.views, names)
    if cfg.linear_probe:
        report.linear_probe = linear_probe(
            train.image, train.views, test.image, test.views, cfg.probe, names
        )

    n_views = len(set(test.views.tolist()))
    if 1 < n_views < len(samples):
        report.view_margin = metrics.view_margin(test.image, test.views)
    report.negation_separation = metrics.negation_separation(
        test.text, test.negated, tau
    )
    return report
