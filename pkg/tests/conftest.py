#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Fixtures for testing the 'echo_contrast' package."""

import pytest

from echo_contrast.synthetic import SyntheticSpec, generate, write_manifest


@pytest.fixture(autouse=True)
def home(tmp_path, monkeypatch):
    """Keep the user's rc file and any run directories out of the real home."""
    monkeypatch.setenv("HOME", str(tmp_path / "home"))
    monkeypatch.setenv("ECHO_CONTRAST_OUTPUT", str(tmp_path / "runs"))
    return tmp_path / "home"


@pytest.fixture(scope="session")
def small_spec():
    return SyntheticSpec(n_samples=200, n_views=4, seed=3)


@pytest.fixture(scope="session")
def small_manifest(small_spec):
    return generate(small_spec)


@pytest.fixture
def manifest_path(small_manifest, tmp_path):
    path = tmp_path / "manifest.jsonl"
    write_manifest(small_manifest, path)
    return path
