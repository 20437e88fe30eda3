#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for the synthetic corpus and the manifest checks."""

import dataclasses
import json

import numpy as np
import pytest

from echo_contrast.guidelines import SeverityGrade, default_table
from echo_contrast.synthetic import (
    SPLITS,
    SyntheticSpec,
    generate,
    mixing_matrix,
    read_manifest,
    validate_manifest,
    write_manifest,
)


def records(manifest):
    return [row.to_record() for row in manifest]


def test_same_seed_same_manifest(small_spec, small_manifest):
    assert records(generate(small_spec)) == records(small_manifest)
    other = generate(dataclasses.replace(small_spec, seed=4))
    assert records(other) != records(small_manifest)


def test_row_contents(small_spec, small_manifest):
    table = default_table()
    row = small_manifest[0]
    assert row.id == "sample-000000"
    assert row.image.pixels.shape == (small_spec.feature_dim,)
    assert 0 <= row.view < small_spec.n_views
    assert row.caption.startswith(f"{row.view_name} view.")
    assert len(row.grades) == small_spec.n_diseases
    assert len(row.measurements) == small_spec.n_diseases
    for m in row.measurements:
        disease = table.entry(m.key).disease
        assert table.grade(m) == row.grades[disease]
    assert row.negated_caption != row.caption
    assert row.negation_rule != ""


def test_mixing_has_orthonormal_columns(small_spec):
    q = mixing_matrix(small_spec)
    assert q.shape == (small_spec.feature_dim, small_spec.latent_dim)
    np.testing.assert_allclose(q.T @ q, np.eye(small_spec.latent_dim), atol=1e-12)


def test_noiseless_vectors_depend_on_labels_only():
    spec = SyntheticSpec(n_samples=60, n_views=2, n_diseases=1, noise_sigma=0.0)
    manifest = generate(spec)
    seen = {}
    for row in manifest:
        label = (row.view, tuple(row.grades.values()))
        if label in seen:
            assert np.array_equal(row.image.pixels, seen[label])
        seen[label] = row.image.pixels
    assert len(seen) < len(manifest)


def test_views_are_separable_without_noise():
    spec = SyntheticSpec(n_samples=80, n_views=4, noise_sigma=0.0)
    manifest = generate(spec)
    x = np.array([row.image.pixels for row in manifest])
    views = np.array([row.view for row in manifest])
    centroids = np.array([x[views == v].mean(axis=0) for v in range(4)])
    distances = ((x[:, None, :] - centroids[None]) ** 2).sum(axis=2)
    assert np.array_equal(distances.argmin(axis=1), views)


def test_split_sizes():
    manifest = generate(SyntheticSpec(n_samples=1000, n_views=4, seed=1))
    counts = {split: 0 for split in SPLITS}
    for row in manifest:
        counts[row.split] += 1
    assert counts == {"train": 800, "val": 100, "test": 100}


def test_every_view_appears(small_spec, small_manifest):
    assert {row.view for row in small_manifest} == set(range(small_spec.n_views))


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"n_samples": 0}, "n_samples"),
        ({"n_views": 40}, "n_views"),
        ({"noise_sigma": -1.0}, "noise_sigma"),
        ({"feature_dim": 8}, "feature_dim"),
        ({"split_ratios": (0.5, 0.5, 0.5)}, "split_ratios"),
        ({"grade_probabilities": (0.5, 0.5)}, "grade_probabilities"),
    ],
)
def test_spec_checks(changes, message):
    with pytest.raises(ValueError, match=message):
        SyntheticSpec(**changes)


def test_too_many_diseases():
    with pytest.raises(ValueError, match="diseases are available"):
        generate(SyntheticSpec(n_samples=10, n_diseases=30, feature_dim=128))


def test_fresh_manifest_is_valid(small_manifest):
    report = validate_manifest(small_manifest)
    assert report.ok, [v.problems for v in report.violations]
    assert report.n_rows == len(small_manifest)


def test_flipped_negation_is_one_violation(small_manifest):
    rows = list(small_manifest)
    rows[7] = dataclasses.replace(rows[7], negated_caption=rows[7].caption)
    report = validate_manifest(rows)
    assert len(report.violations) == 1
    violation = report.violations[0]
    assert violation.row == 7
    assert violation.sample_id == rows[7].id
    assert "opposite polarity" in violation.problems[0]


def test_wrong_grade_is_a_violation(small_manifest):
    rows = list(small_manifest)
    row = rows[3]
    grades = dict(row.grades)
    disease = next(iter(grades))
    grades[disease] = (
        SeverityGrade.SEVERE
        if grades[disease] == SeverityGrade.NONE
        else SeverityGrade.NONE
    )
    rows[3] = dataclasses.replace(row, grades=grades)
    report = validate_manifest(rows)
    assert [v.row for v in report.violations] == [3]
    assert any(disease in p for p in report.violations[0].problems)


def test_skewed_splits_are_reported(small_manifest):
    rows = [dataclasses.replace(r, split="train") for r in small_manifest]
    report = validate_manifest(rows)
    problems = [p for v in report.violations for p in v.problems]
    assert all(v.row is None for v in report.violations)
    assert any("split 'val'" in p for p in problems)


def test_manifest_file(small_manifest, tmp_path):
    path = tmp_path / "manifest.jsonl"
    write_manifest(small_manifest, path)
    assert records(read_manifest(path)) == records(small_manifest)
    assert validate_manifest(path).ok


def test_empty_manifest_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    report = validate_manifest(path)
    assert report.ok
    assert report.n_rows == 0
    assert read_manifest(path) == []


def test_malformed_line(small_manifest, tmp_path):
    path = tmp_path / "manifest.jsonl"
    write_manifest(small_manifest[:2], path)
    with open(path, "a") as fd:
        fd.write(json.dumps({"id": "broken"}) + "\n")
    with pytest.raises(RuntimeError, match=":3: malformed"):
        read_manifest(path)
    report = validate_manifest(path, split_ratios=(1.0, 0.0, 0.0))
    malformed = [v for v in report.violations if v.line == 3]
    assert len(malformed) == 1
    assert malformed[0].problems[0].startswith("malformed")
