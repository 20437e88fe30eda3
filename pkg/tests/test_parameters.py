#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for the step parameters."""

import pytest

from echo_contrast import standard_parameters
from echo_contrast.parameters import ConfigurationError, Parameter, Parameters, to_bool


@pytest.fixture
def train():
    return Parameters(defaults=standard_parameters.train_parameters)


def test_defaults(train):
    assert train["batch_size"].get() == 64
    assert train["base_lr"].get() == pytest.approx(3e-3)
    assert train["keep_checkpoints"].get() is False
    assert train["caption_field"].get() == "caption"
    assert train["resume"].get() == ""


@pytest.mark.parametrize(
    "text, expected", [("yes", True), ("On", True), ("0", False), ("false", False)]
)
def test_to_bool(text, expected):
    assert to_bool(text) is expected


def test_to_bool_rejects():
    with pytest.raises(ConfigurationError):
        to_bool("maybe")


def test_conversion(train):
    train["epochs"].set("12")
    assert train["epochs"].get() == 12
    train["lambda_view"].set("0.25")
    assert train["lambda_view"].get() == 0.25
    train["keep_checkpoints"].set("yes")
    assert train["keep_checkpoints"].get() is True


def test_bad_values(train):
    train["epochs"].set("ten")
    with pytest.raises(ConfigurationError, match="Bad value"):
        train["epochs"].get()
    train["epochs"].set(2.5)
    with pytest.raises(ConfigurationError, match="not an integer"):
        train["epochs"].get()
    train["caption_field"].set("summary")
    with pytest.raises(ConfigurationError, match="not one of"):
        train["caption_field"].get()


def test_lists():
    P = Parameters(defaults=standard_parameters.eval_parameters)
    assert P["recall_ks"].get() == [5, 10]
    P["recall_ks"].set("[1, 5, 10]")
    assert P["recall_ks"].get() == [1, 5, 10]
    P["recall_ks"].set("")
    assert P["recall_ks"].get() is None


def test_workspace_reference():
    P = Parameters(defaults=standard_parameters.eval_parameters)
    assert P["checkpoint"].is_expr
    assert P["checkpoint"].get({"checkpoint": "run/checkpoint.pt"}) == (
        "run/checkpoint.pt"
    )
    with pytest.raises(ConfigurationError, match="no variable 'checkpoint'"):
        P["checkpoint"].get({})
    P["checkpoint"].set("other.pt")
    assert not P["checkpoint"].is_expr
    assert P["checkpoint"].get({}) == "other.pt"


def test_empty_optional_float():
    P = Parameters(defaults=standard_parameters.curate_parameters)
    assert P["default_margin"].get() is None
    assert P["excluded_categories"].get() == [
        "mitral valve disease",
        "mitral regurgitation",
        "stroke volume",
    ]


def test_set_values(train):
    train.set_values({"epochs": 3, "seed": "7"})
    assert train.current_values_to_dict({"manifest": "m.jsonl"})["seed"] == 7
    with pytest.raises(ConfigurationError, match="no parameter 'epoch'"):
        train.set_values({"epoch": 3})


def test_formatting(train):
    values = train.values_to_dict()
    assert values["base_lr"] == "0.003"
    assert values["epochs"] == "20"
    assert values["manifest"] == "$manifest"


def test_dict_round_trip(train):
    train["epochs"].set(9)
    other = Parameters(defaults=standard_parameters.train_parameters)
    other.from_dict(train.to_dict())
    assert other.to_dict() == train.to_dict()
    assert other["epochs"].get() == 9


def test_parameter_checks():
    with pytest.raises(RuntimeError, match="kind"):
        Parameter({"kind": "complex", "default": 0})
    with pytest.raises(ConfigurationError, match="attribute 'colour'"):
        Parameter({"kind": "string", "default": "", "colour": "blue"})


def test_every_section_converts():
    for name, defaults in standard_parameters.sections.items():
        P = Parameters(defaults=defaults)
        for key in P:
            if not P[key].is_expr:
                P[key].get()
