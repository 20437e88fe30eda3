#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for the framed data files."""

import pytest

from echo_contrast import data_files


def test_shipped_files():
    for filename, kind in (
        ("measurements.txt", "measurements"),
        ("negation_rules.txt", "negation-rules"),
        ("prompts.txt", "prompts"),
    ):
        metadata, data = data_files.read_data_file(
            data_files.data_path(filename), kind
        )
        assert "description" in metadata
        assert len(data) > 0


def test_write_and_read(tmp_path):
    path = tmp_path / "rules.txt"
    data = [{"id": "a", "kind": "finding", "finding": "a"}]
    data_files.write_data_file(path, "negation-rules", data, {"note": "test"})
    assert path.read_text().startswith("!echo-contrast negation-rules 1.0\n")
    metadata, read = data_files.read_data_file(path, "negation-rules")
    assert metadata == {"note": "test"}
    assert read == data


def test_metadata_is_optional():
    text = "!echo-contrast prompts 1.0\n#data\n[]\n#end\n"
    assert data_files.from_text(text, "prompts") == ({}, [])


@pytest.mark.parametrize(
    "text, message",
    [
        ("", "is empty"),
        ("!other prompts 1.0\n#data\n[]\n", "not an echo-contrast data file"),
        ("!echo-contrast measurements 1.0\n#data\n[]\n", "holds 'measurements'"),
        ("!echo-contrast prompts 2.0\n#data\n[]\n", "newer than"),
        ("!echo-contrast prompts 1.0\n#metadata\n{}\n", "no #data"),
        ("!echo-contrast prompts 1.0\n[]\n", "outside of a section"),
        ("!echo-contrast prompts 1.0\n#data\n[1,\n", "malformed JSON"),
    ],
)
def test_errors(text, message):
    with pytest.raises(RuntimeError, match=message):
        data_files.from_text(text, "prompts")
