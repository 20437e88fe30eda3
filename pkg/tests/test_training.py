#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for the schedule, the training step, checkpoints and the loop."""

import json
import math

import pytest
import torch

from echo_contrast.synthetic import SyntheticSpec, generate
from echo_contrast.training import (
    TrainConfig,
    build_vocabulary,
    create_state,
    epoch_batches,
    evaluate_batch,
    load_checkpoint,
    lr_at,
    save_checkpoint,
    train,
    train_step,
    warmup_cosine,
)


def small_config(**overrides):
    settings = {"batch_size": 32, "warmup_steps": 5, "epochs": 4, "embed_dim": 8}
    settings["hidden_dim"] = 16
    settings.update(overrides)
    return TrainConfig.synthetic(**settings)


def train_rows(manifest):
    return [row for row in manifest if row.split == "train"]


def new_state(manifest, cfg, total_steps=100):
    rows = train_rows(manifest)
    vocabulary = build_vocabulary(rows, cfg.caption_field)
    return create_state(cfg, vocabulary, rows[0].image.pixels.size, total_steps)


def test_schedule_points():
    cfg = TrainConfig()
    assert lr_at(0, 1000, cfg) == 0.0
    assert lr_at(100, 1000, cfg) == pytest.approx(5e-5)
    assert lr_at(200, 1000, cfg) == pytest.approx(1e-4)
    assert lr_at(1000, 1000, cfg) == pytest.approx(0.0, abs=1e-20)
    assert lr_at(600, 1000, cfg) == pytest.approx(0.5e-4)


def test_schedule_continuous_at_warmup():
    before = warmup_cosine(199.999, 1000, 1.0, 200)
    after = warmup_cosine(200.001, 1000, 1.0, 200)
    assert before == pytest.approx(after, abs=1e-4)


def test_schedule_is_monotone_after_warmup():
    values = [warmup_cosine(step, 50, 1.0, 10) for step in range(10, 51)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_schedule_errors():
    cfg = TrainConfig()
    with pytest.raises(ValueError):
        lr_at(-1, 1000, cfg)
    with pytest.raises(ValueError):
        lr_at(1001, 1000, cfg)
    with pytest.raises(ValueError, match="warmup"):
        lr_at(0, 200, cfg)


def test_config_checks():
    with pytest.raises(ValueError, match="lambda_view"):
        TrainConfig(lambda_view=-0.1)
    with pytest.raises(ValueError, match="beta2"):
        TrainConfig(beta2=1.0)
    with pytest.raises(ValueError, match="caption_field"):
        TrainConfig(caption_field="summary")
    with pytest.raises(ValueError, match="Unknown training settings"):
        TrainConfig.from_dict({"learning_rate": 1e-3})
    cfg = TrainConfig.synthetic()
    assert (cfg.batch_size, cfg.base_lr, cfg.warmup_steps) == (64, 3e-3, 60)
    assert TrainConfig.from_dict(cfg.to_dict()).digest() == cfg.digest()


def test_epoch_batches():
    batches = epoch_batches(10, 3, seed=0, epoch=0)
    assert len(batches) == 3
    assert all(len(b) == 3 for b in batches)
    assert len({i for b in batches for i in b}) == 9
    assert batches == epoch_batches(10, 3, seed=0, epoch=0)
    assert batches != epoch_batches(10, 3, seed=0, epoch=1)


def test_zero_lr_leaves_parameters(small_manifest):
    cfg = small_config()
    state = new_state(small_manifest, cfg)
    before = state.model.params().vector
    batch = train_rows(small_manifest)[:16]
    state, breakdown = train_step(state, batch, lr=0.0)
    assert torch.equal(state.model.params().vector, before)
    assert math.isfinite(breakdown.total)
    assert state.step == 1


def test_small_step_lowers_loss(small_manifest):
    cfg = small_config()
    state = new_state(small_manifest, cfg)
    batch = train_rows(small_manifest)[:16]
    before = evaluate_batch(state, batch).total
    train_step(state, batch, lr=1e-5)
    assert evaluate_batch(state, batch).total < before


def test_empty_batch(small_manifest):
    state = new_state(small_manifest, small_config())
    with pytest.raises(ValueError, match="empty batch"):
        train_step(state, [], lr=0.0)


def test_unscheduled_state_uses_base_lr(small_manifest):
    cfg = small_config()
    state = new_state(small_manifest, cfg, total_steps=0)
    reference = new_state(small_manifest, cfg)
    batch = train_rows(small_manifest)[:16]
    train_step(state, batch)
    train_step(reference, batch, lr=cfg.base_lr)
    assert torch.equal(state.model.params().vector, reference.model.params().vector)


def test_raw_report_training(small_manifest, tmp_path):
    cfg = small_config(caption_field="raw_report", epochs=1, warmup_steps=2)
    rows = train_rows(small_manifest)
    vocabulary = build_vocabulary(rows, "raw_report")
    assert "windows" in vocabulary.words
    assert "adequate" in vocabulary.words
    assert "standard windows" in vocabulary.pairs
    assert "severe" in vocabulary.words

    result = train(cfg, small_manifest, tmp_path)
    assert math.isfinite(result.history[0]["total"])
    restored = load_checkpoint(result.checkpoint)
    assert restored.config.caption_field == "raw_report"
    assert restored.model.vocabulary == vocabulary


def test_checkpoint_round_trip(small_manifest, tmp_path):
    cfg = small_config()
    state = new_state(small_manifest, cfg)
    rows = train_rows(small_manifest)
    train_step(state, rows[:16], lr=1e-3)

    path = save_checkpoint(state, tmp_path / "checkpoint.pt")
    restored = load_checkpoint(path)
    assert restored.step == state.step
    assert restored.config.digest() == cfg.digest()

    batch = rows[16:32]
    _, expected = train_step(state, batch, lr=1e-3)
    _, actual = train_step(restored, batch, lr=1e-3)
    assert actual == expected
    assert torch.equal(restored.model.params().vector, state.model.params().vector)


def test_checkpoint_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.pt")
    path = tmp_path / "other.pt"
    torch.save({"format": "something else"}, path)
    with pytest.raises(RuntimeError, match="not an echo-contrast checkpoint"):
        load_checkpoint(path)


def test_train_is_deterministic(small_manifest, tmp_path):
    cfg = small_config()
    first = train(cfg, small_manifest, tmp_path / "a")
    second = train(cfg, small_manifest, tmp_path / "b")
    assert first.history == second.history
    assert (tmp_path / "a" / "metrics.jsonl").read_text() == (
        tmp_path / "b" / "metrics.jsonl"
    ).read_text()


def test_metrics_log(small_manifest, tmp_path):
    cfg = small_config(epochs=2)
    result = train(cfg, small_manifest, tmp_path)
    lines = (tmp_path / "metrics.jsonl").read_text().splitlines()
    records = [json.loads(line) for line in lines]
    assert len(records) == 2
    assert records == result.history
    for name in ("epoch", "step", "l_clip", "l_view", "l_neg", "total", "lr"):
        assert name in records[0]
    assert records[0]["lambda_view"] == cfg.lambda_view
    assert records[1]["step"] == 2 * (len(train_rows(small_manifest)) // 32)


def test_resume_matches_uninterrupted(small_manifest, tmp_path):
    cfg = small_config()
    full = train(cfg, small_manifest, tmp_path / "full", keep_checkpoints=True)
    middle = tmp_path / "full" / "checkpoint-epoch-0002.pt"
    assert middle.exists()

    resumed = train(cfg, small_manifest, tmp_path / "resumed", resume=middle)
    assert resumed.history == full.history
    assert torch.equal(
        resumed.state.model.params().vector, full.state.model.params().vector
    )


def test_resume_needs_same_config(small_manifest, tmp_path):
    first = small_config(epochs=1, warmup_steps=2)
    result = train(first, small_manifest, tmp_path / "a")
    second = small_config(epochs=2, warmup_steps=2)
    with pytest.raises(RuntimeError, match="different configuration"):
        train(second, small_manifest, tmp_path / "b", result.checkpoint)


def test_zero_epochs_is_initialization(small_manifest, tmp_path):
    cfg = small_config(epochs=0)
    result = train(cfg, small_manifest, tmp_path)
    assert result.history == []
    initial = new_state(small_manifest, cfg)
    restored = load_checkpoint(result.checkpoint)
    assert torch.equal(restored.model.params().vector, initial.model.params().vector)


def test_train_errors(small_manifest, tmp_path):
    no_train = [row for row in small_manifest if row.split != "train"]
    with pytest.raises(ValueError, match="no training rows"):
        train(small_config(), no_train, tmp_path)
    with pytest.raises(ValueError, match="larger than"):
        train(small_config(batch_size=1000), small_manifest, tmp_path)
    with pytest.raises(ValueError, match="warmup"):
        train(small_config(warmup_steps=100, epochs=1), small_manifest, tmp_path)


@pytest.mark.slow
def test_loss_falls_on_synthetic_corpus(tmp_path):
    manifest = generate(SyntheticSpec(n_samples=2000, seed=0))
    result = train(TrainConfig.synthetic(epochs=5), manifest, tmp_path)
    assert result.history[-1]["total"] < result.history[0]["total"]
