#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for run configuration files and the user's rc file."""

import pytest

from echo_contrast.config import RunConfig, UserRC
from echo_contrast.parameters import ConfigurationError

TEXT = """\
[VERSION]
file = 1.0

[train]
lambda_view = 0.25
lambda_neg = 0.5
"""


def test_file_overrides_defaults():
    config = RunConfig(text=TEXT)
    P = config.parameters("train")
    assert P["lambda_view"].get() == 0.25
    assert P["lambda_neg"].get() == 0.5
    assert P["epochs"].get() == 20


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(TEXT)
    config = RunConfig(path)
    config.override("train", {"lambda_view": "1.0"})
    P = config.parameters("train")
    assert P["lambda_view"].get() == 1.0
    assert P["lambda_neg"].get() == 0.5
    assert config.get("train", "lambda_view") == "1.0"
    assert config.get("train", "lambda_neg") == "0.5"
    assert config.get("train", "epochs", fallback=None) is None
    with pytest.raises(KeyError):
        config.get("train", "epochs")


def test_unknown_section_and_key():
    with pytest.raises(ConfigurationError, match="unknown section"):
        RunConfig(text="[training]\nepochs = 2\n")
    with pytest.raises(ConfigurationError, match="no setting 'epoch'"):
        RunConfig(text="[train]\nepoch = 2\n")
    with pytest.raises(ConfigurationError, match="no setting 'depth'"):
        RunConfig().override("eval", {"depth": 3})


def test_bad_value_fails_early():
    config = RunConfig(text="[train]\nepochs = many\n")
    with pytest.raises(ConfigurationError, match="Epochs"):
        config.parameters("train")


def test_newer_version():
    with pytest.raises(ConfigurationError, match="newer"):
        RunConfig(text="[VERSION]\nfile = 2.0\n")


def test_unparseable_and_missing(tmp_path):
    with pytest.raises(ConfigurationError, match="Cannot parse"):
        RunConfig(text="epochs = 2\n")
    with pytest.raises(FileNotFoundError):
        RunConfig(tmp_path / "missing.ini")


def test_write(tmp_path):
    config = RunConfig(text=TEXT)
    digest = config.write(tmp_path, ["train", "eval"])
    text = (tmp_path / "config.ini").read_text()
    assert "[train]" in text
    assert "lambda_view = 0.250" in text
    assert "[generate]" not in text
    assert (tmp_path / "config.sha256").read_text().strip() == digest
    assert digest == config.digest(["train", "eval"])
    assert digest != RunConfig().digest(["train", "eval"])

    reread = RunConfig(tmp_path / "config.ini")
    assert reread.digest(["train", "eval"]) == digest


def test_user_rc(home):
    rc = UserRC()
    assert rc.path == home / ".echo_contrast.d" / "echo_contrastrc"
    assert rc.path.exists()
    assert rc.user() == {}
    rc.set("USER", "name", "Doe, Jane")
    assert UserRC().user() == {"name": "Doe, Jane"}
    with pytest.raises(ConfigurationError, match="only"):
        rc.set("train", "epochs", "3")
