#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for the echo-contrast command line."""

import json

import pandas
import pytest

from echo_contrast.__main__ import (
    _flag_names,
    build_flowchart,
    create_parser,
    load_config,
    main,
    run_directory,
)
from echo_contrast.config import RunConfig
from echo_contrast.synthetic import read_manifest

SMALL = ["--n-samples", "200", "--n-views", "4"]
TINY_TRAINING = [
    "--epochs",
    "1",
    "--batch-size",
    "32",
    "--warmup-steps",
    "2",
    "--embed-dim",
    "8",
    "--hidden-dim",
    "16",
    "--probe-epochs",
    "2",
    "--probe-warmup-epochs",
    "0",
]
RATIO_LABELS = ["ratio 1.0/1.0", "ratio 0.25/0.5", "ratio 0.5/0.5", "ratio 0.5/0.1"]


def flags(command):
    return [flag for _, _, flag in _flag_names(command)]


def test_flag_names():
    assert "--n-samples" in flags("generate")
    assert "--manifest" in flags("curate")
    assert "--seed" in flags("train")
    pipeline = flags("pipeline")
    assert "--generate-seed" in pipeline
    assert "--train-seed" in pipeline
    assert "--seed" not in pipeline
    assert "--manifest" not in pipeline
    assert "--checkpoint" not in pipeline


def test_flags_reach_the_parameters():
    parser = create_parser()
    options = parser.parse_args(
        ["pipeline", "--train-seed", "4", "--no-linear-probe", "--split", "val"]
    )
    config = load_config(options)
    assert config.parameters("train")["seed"].get() == 4
    assert config.parameters("generate")["seed"].get() == 0
    assert config.parameters("eval")["linear_probe"].get() is False
    assert config.parameters("eval")["split"].get() == "val"


def test_config_file_and_flags(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[train]\nlambda_view = 0.25\nlambda_neg = 0.5\n")
    options = create_parser().parse_args(
        ["train", "--config", str(path), "--lambda-neg", "0.1"]
    )
    P = load_config(options).parameters("train")
    assert P["lambda_view"].get() == 0.25
    assert P["lambda_neg"].get() == 0.1


def test_run_directory(tmp_path):
    first = run_directory("train", tmp_path)
    second = run_directory("train", tmp_path)
    assert first.name.startswith("train_")
    assert first != second
    assert first.is_dir() and second.is_dir()
    exact = run_directory("train", tmp_path, tmp_path / "exact")
    assert exact == tmp_path / "exact"


def test_sweep_steps():
    config = RunConfig(text="[sweep]\nrows = objectives\n")
    flowchart = build_flowchart("sweep", config, None, manifest="m.jsonl")
    steps = flowchart.get_nodes()[1:]
    assert [type(s).__name__ for s in steps] == ["TrainNode", "EvalNode"] * 4
    lambdas = [
        (s.parameters["lambda_view"].get(), s.parameters["lambda_neg"].get())
        for s in steps[::2]
    ]
    assert lambdas == [(0.0, 0.0), (0.5, 0.0), (0.0, 0.1), (0.5, 0.1)]
    assert [s.label for s in steps[1::2]][0] == "clip only"
    assert flowchart.variables["manifest"] == "m.jsonl"


def test_loss_ratio_sweep_steps():
    config = RunConfig(text="[sweep]\nrows = loss ratios\n")
    flowchart = build_flowchart("sweep", config, None, manifest="m.jsonl")
    steps = flowchart.get_nodes()[1:]
    assert len(steps) == 8
    lambdas = [
        (s.parameters["lambda_view"].get(), s.parameters["lambda_neg"].get())
        for s in steps[::2]
    ]
    assert lambdas == [(1.0, 1.0), (0.25, 0.5), (0.5, 0.5), (0.5, 0.1)]
    assert [s.label for s in steps[1::2]] == RATIO_LABELS


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "echo-contrast version" in capsys.readouterr().out


def test_usage_errors(tmp_path):
    assert main([]) == 2
    assert main(["generate", "--no-such-flag"]) == 2
    assert main(["eval", "--split", "holdout"]) == 2

    bad = tmp_path / "bad.ini"
    bad.write_text("[train]\nepoch = 3\n")
    assert main(["train", "--config", str(bad), "--run-dir", str(tmp_path / "a")]) == 2
    assert main(["train", "--config", str(tmp_path / "missing.ini")]) == 2


def test_missing_manifest(tmp_path):
    missing = str(tmp_path / "missing.jsonl")
    run = str(tmp_path / "run")
    assert main(["curate", "--manifest", missing, "--run-dir", run]) == 2
    assert main(["pipeline", "--manifest", missing, "--run-dir", run]) == 2


def test_unresolved_reference(tmp_path):
    assert main(["train", "--run-dir", str(tmp_path / "run")]) == 2


def test_bad_value(tmp_path):
    run = str(tmp_path / "run")
    assert main(["generate", "--split-ratios", "0.5, 0.5, 0.5", "--run-dir", run]) == 2
    assert main(["generate", "--n-samples", "many", "--run-dir", run]) == 2


def test_dry_run(tmp_path, home):
    assert main(["pipeline", "--dry-run"] + SMALL) == 0
    assert not (tmp_path / "runs").exists()


def test_generate_and_curate(tmp_path):
    run = tmp_path / "generate"
    assert main(["generate", "--run-dir", str(run)] + SMALL) == 0
    for name in ("config.ini", "config.sha256", "flowchart.flow", "run.log"):
        assert (run / name).exists()
    assert (run / "0" / "run.json").exists()
    manifest = run / "1" / "manifest.jsonl"
    assert len(read_manifest(manifest)) == 200
    assert "n_samples = 200" in (run / "config.ini").read_text()

    curated = tmp_path / "curate"
    assert main(["curate", "--manifest", str(manifest), "--run-dir", str(curated)]) == 0
    summary = json.loads((curated / "1" / "consistency.json").read_text())
    assert summary["counts"]["inconsistent"] == 0


def test_generate_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["generate", "--run-dir", str(tmp_path / name)] + SMALL) == 0
    first = (tmp_path / "a" / "1" / "manifest.jsonl").read_bytes()
    second = (tmp_path / "b" / "1" / "manifest.jsonl").read_bytes()
    assert first == second
    assert (tmp_path / "a" / "config.sha256").read_text() == (
        tmp_path / "b" / "config.sha256"
    ).read_text()


def test_default_run_directory(tmp_path):
    assert main(["generate"] + SMALL) == 0
    runs = list((tmp_path / "runs").iterdir())
    assert len(runs) == 1
    assert runs[0].name.startswith("generate_")


def test_curate_contradiction_exits_one(tmp_path, manifest_path):
    lines = manifest_path.read_text().splitlines()
    record = json.loads(lines[0])
    grade = record["grades"]["systolic dysfunction"]
    record["grades"]["systolic dysfunction"] = "severe" if grade == "none" else "none"
    lines[0] = json.dumps(record)
    manifest_path.write_text("\n".join(lines) + "\n")
    run = str(tmp_path / "run")
    assert main(["curate", "--manifest", str(manifest_path), "--run-dir", run]) == 1


def test_pipeline(tmp_path):
    run = tmp_path / "pipeline"
    assert main(["pipeline", "--run-dir", str(run)] + SMALL + TINY_TRAINING) == 0
    assert (run / "3" / "checkpoint.pt").exists()
    assert (run / "3" / "metrics.jsonl").exists()
    report = json.loads((run / "4" / "report.json").read_text())
    assert report["split"] == "test"
    assert (run / "4" / "report.txt").exists()


def test_train_and_eval_commands(tmp_path, manifest_path):
    train_run = tmp_path / "train"
    args = ["train", "--manifest", str(manifest_path), "--run-dir", str(train_run)]
    args += ["--epochs", "1", "--batch-size", "32", "--warmup-steps", "2"]
    assert main(args) == 0
    checkpoint = train_run / "1" / "checkpoint.pt"
    assert checkpoint.exists()

    eval_run = tmp_path / "eval"
    args = ["eval", "--manifest", str(manifest_path), "--checkpoint", str(checkpoint)]
    args += ["--run-dir", str(eval_run), "--no-linear-probe", "--split", "val"]
    assert main(args) == 0
    report = json.loads((eval_run / "1" / "report.json").read_text())
    assert report["split"] == "val"
    assert report["linear_probe"] is None


@pytest.mark.slow
def test_sweep(tmp_path, manifest_path):
    run = tmp_path / "sweep"
    args = ["sweep", "--manifest", str(manifest_path), "--rows", "objectives"]
    args += ["--run-dir", str(run)] + TINY_TRAINING
    assert main(args) == 0
    table = pandas.read_csv(run / "summary.csv", index_col="label")
    assert list(table.index) == [
        "clip only",
        "clip + view",
        "clip + negation",
        "clip + view + negation",
    ]
    assert "macro_auc" in table.columns


@pytest.mark.slow
def test_loss_ratio_sweep_is_reproducible(tmp_path, manifest_path):
    summaries = []
    for name in ("first", "second"):
        run = tmp_path / name
        args = ["sweep", "--manifest", str(manifest_path), "--rows", "loss ratios"]
        args += ["--run-dir", str(run)] + TINY_TRAINING
        assert main(args) == 0
        summaries.append((run / "summary.csv").read_bytes())
    assert summaries[0] == summaries[1]

    table = pandas.read_csv(tmp_path / "first" / "summary.csv", index_col="label")
    assert list(table.index) == RATIO_LABELS
    assert len(table) == 4
