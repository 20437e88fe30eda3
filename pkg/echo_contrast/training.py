# -*- coding: utf-8 -*-

"""The training loop: one optimizer step per batch, a linear warmup and cosine
decay of the learning rate, per-epoch metrics and checkpoints.
"""

from dataclasses import asdict, dataclass, field, fields
import hashlib
import json
import logging
import math
from pathlib import Path

import numpy as np
from packaging.version import Version
import torch
from torch.utils.data import DataLoader

from .embedding import Role, ViewLabelBatch
from .encoders import DualEncoder, Vocabulary, encode_images
from .negation import default_rules
from .objectives import objective
from .synthetic import read_manifest

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "echo-contrast checkpoint"
CHECKPOINT_VERSION = "1.0"
CAPTION_FIELDS = ("caption", "raw_report")


@dataclass
class TrainConfig:
    """Hyperparameters of a training run.

    The defaults are those for pretraining at scale; :meth:`synthetic` gives
    the settings used on the synthetic corpus.
    """

    base_lr: float = 1e-4
    weight_decay: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 512
    warmup_steps: int = 200
    epochs: int = 20
    lambda_view: float = 0.5
    lambda_neg: float = 0.1
    seed: int = 0
    embed_dim: int = 32
    hidden_dim: int = 64
    caption_field: str = "caption"

    def __post_init__(self):
        for name in ("base_lr", "weight_decay", "lambda_view", "lambda_neg"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} cannot be negative: {getattr(self, name)}")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must be in [0, 1): {getattr(self, name)}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive: {self.eps}")
        for name in ("batch_size", "embed_dim", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive: {getattr(self, name)}")
        for name in ("warmup_steps", "epochs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} cannot be negative: {getattr(self, name)}")
        if self.caption_field not in CAPTION_FIELDS:
            raise ValueError(
                f"caption_field must be one of {', '.join(CAPTION_FIELDS)}, not "
                f"'{self.caption_field}'"
            )

    @classmethod
    def synthetic(cls, **overrides):
        """The configuration for the synthetic corpus."""
        settings = {"batch_size": 64, "base_lr": 3e-3, "warmup_steps": 60}
        settings.update(overrides)
        return cls(**settings)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"Unknown training settings: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)

    def digest(self):
        """SHA-256 of the settings."""
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def warmup_cosine(step, total_steps, base_lr, warmup_steps):
    """Linear from 0 to base_lr over the warmup, then cosine decay to 0 at
    ``total_steps``."""
    if total_steps < 1:
        raise ValueError(f"total_steps must be positive, not {total_steps}")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} is outside [0, {total_steps}]")
    if warmup_steps >= total_steps:
        raise ValueError(
            f"The warmup of {warmup_steps} steps does not end before the last "
            f"step, {total_steps}"
        )
    if step < warmup_steps:
        return base_lr * step / warmup_steps
    progress = (step - warmup_steps) / (total_steps - warmup_steps)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def lr_at(step, total_steps, cfg):
    """The learning rate for an update at ``step``."""
    return warmup_cosine(step, total_steps, cfg.base_lr, cfg.warmup_steps)


@dataclass
class TrainState:
    """Everything the training loop owns."""

    model: DualEncoder
    optimizer: torch.optim.Optimizer
    config: TrainConfig
    total_steps: int = 0
    step: int = 0
    epoch: int = 0
    history: list = field(default_factory=list)


@dataclass
class TrainResult:
    checkpoint: Path
    history: list
    state: TrainState


def build_optimizer(model, cfg):
    """AdamW with decay on the encoders and none on the temperature."""
    encoder_parameters = [
        p for name, p in model.named_parameters() if not name.startswith("temperature")
    ]
    return torch.optim.AdamW(
        [
            {"params": encoder_parameters, "weight_decay": cfg.weight_decay},
            {"params": [model.temperature.log_value], "weight_decay": 0.0},
        ],
        lr=cfg.base_lr,
        betas=(cfg.beta1, cfg.beta2),
        eps=cfg.eps,
    )


def create_state(cfg, vocabulary, n_features, total_steps):
    """A fresh model and optimizer.

    ``total_steps`` sizes the learning-rate schedule. With no schedule (zero
    steps) train_step falls back to the base learning rate.
    """
    model = DualEncoder(
        vocabulary, n_features, cfg.embed_dim, cfg.hidden_dim, seed=cfg.seed
    )
    return TrainState(model, build_optimizer(model, cfg), cfg, total_steps)


def build_vocabulary(samples, caption_field="caption", rules=None):
    """Words of the training texts, their negations and the prompt phrases."""
    rules = default_rules() if rules is None else rules
    texts = []
    for sample in samples:
        texts.extend(sample.text(caption_field))
    for rule in rules.finding_rules.values():
        texts.append(rule.interpretation("severe"))
        texts.append(rule.negate("severe"))
    return Vocabulary.from_texts(texts)


def batch_objective(model, batch, cfg):
    """Encode the three streams of a batch and evaluate the total loss."""
    images = encode_images(model, [sample.image for sample in batch])
    texts, negated = zip(*(sample.text(cfg.caption_field) for sample in batch))
    z_text = model.embed_texts(texts, Role.TEXT)
    z_negated = model.embed_texts(negated, Role.NEGATED_TEXT)
    views = ViewLabelBatch([sample.view for sample in batch])
    return objective(
        images,
        z_text,
        z_negated,
        views,
        model.temperature,
        cfg.lambda_view,
        cfg.lambda_neg,
    )


def evaluate_batch(state, batch):
    """The LossBreakdown of a batch without updating anything."""
    with torch.no_grad():
        _, breakdown = batch_objective(state.model, batch, state.config)
    return breakdown


def train_step(state, batch, lr=None):
    """One optimizer update on a batch.

    Parameters
    ----------
    state : TrainState
        Updated in place.
    batch : list of SamplePair
    lr : float, optional
        Overrides the scheduled learning rate.

    Returns
    -------
    (TrainState, LossBreakdown)
    """
    if len(batch) == 0:
        raise ValueError("Cannot train on an empty batch")
    if lr is None and state.total_steps < 1:
        lr = state.config.base_lr
    elif lr is None:
        lr = lr_at(state.step, state.total_steps, state.config)

    model = state.model
    model.train()
    state.optimizer.zero_grad(set_to_none=True)
    total, breakdown = batch_objective(model, batch, state.config)
    if not bool(torch.isfinite(total)):
        raise FloatingPointError(f"The total loss is not finite at step {state.step}")
    total.backward()
    for name, parameter in model.named_parameters():
        if parameter.grad is None:
            continue
        if not bool(torch.isfinite(parameter.grad).all()):
            raise FloatingPointError(
                f"The gradient of {name} is not finite at step {state.step}"
            )

    for group in state.optimizer.param_groups:
        group["lr"] = lr
    state.optimizer.step()
    model.temperature.clamp_()
    state.step += 1
    return state, breakdown


def epoch_batches(n_samples, batch_size, seed, epoch):
    """The shuffled batches of an epoch, dropping the last incomplete one."""
    order = np.random.default_rng([seed, epoch]).permutation(n_samples)
    n_batches = n_samples // batch_size
    return [
        order[i * batch_size : (i + 1) * batch_size].tolist() for i in range(n_batches)
    ]


def save_checkpoint(state, path):
    path = Path(path)
    model = state.model
    torch.save(
        {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": state.config.to_dict(),
            "config_hash": state.config.digest(),
            "model": model.settings(),
            "state_dict": model.state_dict(),
            "optimizer": state.optimizer.state_dict(),
            "total_steps": state.total_steps,
            "step": state.step,
            "epoch": state.epoch,
            "vocabulary": list(model.vocabulary.words[1:]),
            "pairs": list(model.vocabulary.pairs),
            "history": state.history,
        },
        path,
    )
    logger.info(f"Saved checkpoint at step {state.step} to {path}")
    return path


def load_checkpoint(path):
    """Restore a TrainState from a checkpoint file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"There is no checkpoint at {path}")
    data = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(data, dict) or data.get("format") != CHECKPOINT_FORMAT:
        raise RuntimeError(f"{path} is not an echo-contrast checkpoint")
    if Version(data["version"]) > Version(CHECKPOINT_VERSION):
        raise RuntimeError(
            f"{path} has checkpoint version {data['version']}, newer than "
            f"{CHECKPOINT_VERSION}"
        )
    cfg = TrainConfig.from_dict(data["config"])
    if cfg.digest() != data["config_hash"]:
        raise RuntimeError(f"The configuration in {path} does not match its hash")

    settings = data["model"]
    model = DualEncoder(
        Vocabulary(data["vocabulary"], data["pairs"]),
        settings["n_features"],
        settings["embed_dim"],
        settings["hidden_dim"],
        seed=settings["seed"],
    )
    model.load_state_dict(data["state_dict"])
    optimizer = build_optimizer(model, cfg)
    optimizer.load_state_dict(data["optimizer"])
    return TrainState(
        model,
        optimizer,
        cfg,
        total_steps=data["total_steps"],
        step=data["step"],
        epoch=data["epoch"],
        history=list(data["history"]),
    )


def _epoch_record(epoch, step, breakdowns, lr, cfg):
    record = {"epoch": epoch, "step": step}
    for name in ("l_clip", "l_view", "l_neg", "total"):
        record[name] = float(np.mean([getattr(b, name) for b in breakdowns]))
    record["lr"] = lr
    record["lambda_view"] = cfg.lambda_view
    record["lambda_neg"] = cfg.lambda_neg
    return record


def train(cfg, manifest, directory, resume=None, keep_checkpoints=False):
    """Train the encoders on the training split of a manifest.

    Parameters
    ----------
    cfg : TrainConfig
    manifest : list of SamplePair or path
    directory : path
        Receives ``metrics.jsonl`` and ``checkpoint.pt``.
    resume : path, optional
        A checkpoint of a run with the same configuration to continue.
    keep_checkpoints : bool
        Also keep the checkpoint written after every epoch.

    Returns
    -------
    TrainResult
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(manifest, (str, Path)):
        manifest = read_manifest(manifest)
    samples = [sample for sample in manifest if sample.split == "train"]
    if len(samples) == 0:
        raise ValueError("The manifest has no training rows")

    steps_per_epoch = len(samples) // cfg.batch_size
    if steps_per_epoch == 0:
        raise ValueError(
            f"The batch size {cfg.batch_size} is larger than the {len(samples)} "
            "training rows"
        )
    total_steps = steps_per_epoch * cfg.epochs
    if cfg.epochs > 0 and cfg.warmup_steps >= total_steps:
        raise ValueError(
            f"The warmup of {cfg.warmup_steps} steps is not shorter than the "
            f"{total_steps} training steps"
        )

    if resume is not None:
        state = load_checkpoint(resume)
        if state.config.digest() != cfg.digest():
            raise RuntimeError(
                f"Checkpoint {resume} was trained with a different configuration"
            )
        logger.info(f"Resuming from epoch {state.epoch}, step {state.step}")
    else:
        vocabulary = build_vocabulary(samples, cfg.caption_field)
        n_features = samples[0].image.pixels.size
        state = create_state(cfg, vocabulary, n_features, total_steps)

    metrics = directory / "metrics.jsonl"
    with open(metrics, "w") as fd:
        for record in state.history:
            fd.write(json.dumps(record) + "\n")

    checkpoint = directory / "checkpoint.pt"
    for epoch in range(state.epoch, cfg.epochs):
        loader = DataLoader(
            samples,
            batch_sampler=epoch_batches(len(samples), cfg.batch_size, cfg.seed, epoch),
            collate_fn=list,
        )
        breakdowns = []
        lr = 0.0
        for batch in loader:
            lr = lr_at(state.step, state.total_steps, cfg)
            state, breakdown = train_step(state, batch, lr)
            breakdowns.append(breakdown)

        record = _epoch_record(epoch + 1, state.step, breakdowns, lr, cfg)
        state.epoch = epoch + 1
        state.history.append(record)
        with open(metrics, "a") as fd:
            fd.write(json.dumps(record) + "\n")
        logger.info(
            f"epoch {record['epoch']}: total {record['total']:.4f} clip "
            f"{record['l_clip']:.4f} view {record['l_view']:.4f} neg "
            f"{record['l_neg']:.4f}"
        )
        save_checkpoint(state, checkpoint)
        if keep_checkpoints:
            save_checkpoint(state, directory / f"checkpoint-epoch-{state.epoch:04d}.pt")

    if not checkpoint.exists() or state.epoch == 0:
        save_checkpoint(state, checkpoint)
    return TrainResult(checkpoint, state.history, state)
