# -*- coding: utf-8 -*-

"""A seeded synthetic corpus of image feature vectors and grounded captions.

Each sample has a view and a severity grade for every disease. Its image
vector is a fixed linear map, with orthonormal columns, of::

    [view_scale * onehot(view), grades / 3, noise_sigma * N(0, I)]

so views are separable by a nearest-centroid rule on noiseless vectors. Its
caption names the view, states every disease's severity and adds one
quantitative sentence whose value lies inside the band of that disease's
grade. Sample i draws from its own substream of the seed.
"""

import dataclasses
from dataclasses import dataclass, field
import json
import logging
import math
from pathlib import Path

import jinja2
import numpy as np

from .encoders import ImageInput
from .guidelines import MeasurementRecord, SeverityGrade, Verdict, default_table
from .negation import batch_negate, default_rules

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
VIEW_NAMES = (
    "a4c",
    "plax",
    "psax",
    "a2c",
    "a3c",
    "a5c",
    "sc4c",
    "ssn",
    "plax-rvif",
    "psax-av",
    "psax-mv",
    "psax-pm",
    "psax-apex",
    "a4c-lv",
    "a4c-rv",
    "a2c-lv",
    "a3c-lv",
    "sc-ivc",
    "plax-zoom",
    "a4c-la",
    "a5c-lvot",
    "psax-rvot",
)

_environment = jinja2.Environment()
CAPTION_TEMPLATE = _environment.from_string(
    "{{ view }} view. {{ findings | join(', ') }}. {{ quantitative }}."
)
RAW_REPORT_TEMPLATE = _environment.from_string(
    "{{ view }} view. the study was performed with standard windows. "
    "image quality is adequate. see the full report for details."
)


@dataclass
class SyntheticSpec:
    """The knobs of the synthetic corpus."""

    n_samples: int = 2500
    n_views: int = 8
    n_diseases: int = 9
    d_latent: int = 16
    feature_dim: int = 64
    noise_sigma: float = 0.1
    view_scale: float = 4.0
    grade_probabilities: tuple = (0.45, 0.25, 0.18, 0.12)
    split_ratios: tuple = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        self.grade_probabilities = tuple(float(p) for p in self.grade_probabilities)
        self.split_ratios = tuple(float(r) for r in self.split_ratios)
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be positive, not {self.n_samples}")
        if not 1 <= self.n_views <= len(VIEW_NAMES):
            raise ValueError(
                f"n_views must be between 1 and {len(VIEW_NAMES)}, not {self.n_views}"
            )
        if self.n_diseases < 1:
            raise ValueError(f"n_diseases must be positive, not {self.n_diseases}")
        if self.d_latent < 0:
            raise ValueError(f"d_latent cannot be negative: {self.d_latent}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma cannot be negative: {self.noise_sigma}")
        if self.feature_dim < self.latent_dim:
            raise ValueError(
                f"feature_dim {self.feature_dim} is smaller than the latent "
                f"dimension {self.latent_dim}"
            )
        if len(self.grade_probabilities) != len(SeverityGrade) or any(
            p < 0 for p in self.grade_probabilities
        ):
            raise ValueError(
                "grade_probabilities needs 4 non-negative values, not "
                f"{self.grade_probabilities}"
            )
        if not math.isclose(sum(self.grade_probabilities), 1.0, abs_tol=1e-9):
            raise ValueError("grade_probabilities must sum to 1")
        if len(self.split_ratios) != 3 or any(r < 0 for r in self.split_ratios):
            raise ValueError(
                "split_ratios needs 3 non-negative values for train/val/test, not "
                f"{self.split_ratios}"
            )
        if not math.isclose(sum(self.split_ratios), 1.0, abs_tol=1e-9):
            raise ValueError(
                f"split_ratios must sum to 1, not {sum(self.split_ratios):g}"
            )

    @property
    def latent_dim(self):
        return self.n_views + self.n_diseases + self.d_latent

    def split_sizes(self):
        n_train = int(round(self.split_ratios[0] * self.n_samples))
        n_val = int(round(self.split_ratios[1] * self.n_samples))
        n_val = min(n_val, self.n_samples - n_train)
        return n_train, n_val, self.n_samples - n_train - n_val


@dataclass
class SamplePair:
    """One record of the manifest."""

    id: str
    image: ImageInput
    caption: str
    negated_caption: str
    view: int
    grades: dict
    measurements: list
    split: str
    view_name: str = ""
    raw_report: str = ""
    negation_rule: str = ""
    subjective: bool = False

    def text(self, caption_field="caption"):
        """The training text and its negation for the chosen caption source."""
        if caption_field == "caption":
            return self.caption, self.negated_caption
        if caption_field == "raw_report":
            return self.raw_report, default_rules().unmatched_negation
        raise ValueError(f"Unknown caption field '{caption_field}'")

    def to_record(self):
        return {
            "id": self.id,
            "image_features": self.image.pixels.reshape(-1).tolist(),
            "caption": self.caption,
            "negated_caption": self.negated_caption,
            "view": self.view,
            "grades": {d: g.label for d, g in self.grades.items()},
            "measurements": [m.to_dict() for m in self.measurements],
            "split": self.split,
            "view_name": self.view_name,
            "raw_report": self.raw_report,
            "negation_rule": self.negation_rule,
            "subjective": self.subjective,
        }

    @classmethod
    def from_record(cls, record):
        return cls(
            id=record["id"],
            image=ImageInput(np.asarray(record["image_features"]), record["id"]),
            caption=record["caption"],
            negated_caption=record.get("negated_caption", ""),
            view=int(record["view"]),
            grades={d: SeverityGrade.parse(g) for d, g in record["grades"].items()},
            measurements=[
                MeasurementRecord.from_dict(m) for m in record["measurements"]
            ],
            split=record["split"],
            view_name=record.get("view_name", ""),
            raw_report=record.get("raw_report", ""),
            negation_rule=record.get("negation_rule", ""),
            subjective=bool(record.get("subjective", False)),
        )


def mixing_matrix(spec):
    """The feature_dim x latent_dim map with orthonormal columns."""
    rng = np.random.default_rng([spec.seed, 0])
    gaussian = rng.standard_normal((spec.feature_dim, spec.latent_dim))
    q, r = np.linalg.qr(gaussian)
    # Fix the signs so the factorization is unique
    return q * np.sign(np.diag(r))


def _sample_value(entry, grade, rng):
    """A value on the key's decimal grid inside the band of the grade."""
    band = next(b for b in entry.bands if b.grade == grade)
    step = 10.0 ** -entry.decimals
    margin = entry.margin * band.width
    lo = math.ceil(round((band.lower + margin) / step, 6))
    hi = math.floor(round((band.upper - margin) / step, 6))
    if hi < lo:
        lo = math.ceil(round(band.lower / step, 6))
        hi = math.ceil(round(band.upper / step, 6)) - 1
    k = int(rng.integers(lo, hi + 1))
    return round(k * step, entry.decimals)


def generate(spec, table=None, rules=None):
    """Generate the manifest for a spec.

    Parameters
    ----------
    spec : SyntheticSpec
    table : guidelines.MeasurementTable, optional
    rules : negation.NegationRules, optional

    Returns
    -------
    list of SamplePair
    """
    table = default_table() if table is None else table
    rules = default_rules() if rules is None else rules

    diseases = table.diseases()
    if spec.n_diseases > len(diseases):
        raise ValueError(
            f"Only {len(diseases)} diseases are available, not {spec.n_diseases}"
        )
    diseases = diseases[: spec.n_diseases]
    entries = [table.key_for_disease(d) for d in diseases]
    sentences = [_environment.from_string(e.sentence) for e in entries]
    rules.check_coverage(diseases)

    mixing = mixing_matrix(spec)
    views = np.random.default_rng([spec.seed, 1]).permutation(
        np.arange(spec.n_samples) % spec.n_views
    )
    order = np.random.default_rng([spec.seed, 2]).permutation(spec.n_samples)
    n_train, n_val, _ = spec.split_sizes()
    split_of = np.empty(spec.n_samples, dtype=object)
    split_of[order[:n_train]] = "train"
    split_of[order[n_train : n_train + n_val]] = "val"
    split_of[order[n_train + n_val :]] = "test"

    manifest = []
    for i in range(spec.n_samples):
        rng = np.random.default_rng([spec.seed, 3, i])
        view = int(views[i])
        grade_ids = rng.choice(
            len(SeverityGrade), size=spec.n_diseases, p=spec.grade_probabilities
        )
        grades = {d: SeverityGrade(int(g)) for d, g in zip(diseases, grade_ids)}

        latent = np.zeros(spec.latent_dim)
        latent[view] = spec.view_scale
        latent[spec.n_views : spec.n_views + spec.n_diseases] = grade_ids / 3.0
        if spec.d_latent > 0 and spec.noise_sigma > 0:
            noise = rng.standard_normal(spec.d_latent)
            latent[spec.n_views + spec.n_diseases :] = spec.noise_sigma * noise
        features = mixing @ latent

        measurements = [
            MeasurementRecord(
                e.key, _sample_value(e, grades[d], rng), e.unit, e.category
            )
            for d, e in zip(diseases, entries)
        ]
        chosen = int(rng.integers(spec.n_diseases))
        quantitative = sentences[chosen].render(
            value=entries[chosen].format_value(measurements[chosen].value)
        )
        view_name = VIEW_NAMES[view]
        caption = CAPTION_TEMPLATE.render(
            view=view_name,
            findings=[rules.rule_for(d).interpretation(grades[d]) for d in diseases],
            quantitative=quantitative,
        )
        manifest.append(
            SamplePair(
                id=f"sample-{i:06d}",
                image=ImageInput(features, f"sample-{i:06d}"),
                caption=caption,
                negated_caption="",
                view=view,
                grades=grades,
                measurements=measurements,
                split=str(split_of[i]),
                view_name=view_name,
                raw_report=RAW_REPORT_TEMPLATE.render(view=view_name),
            )
        )
    logger.info(f"Generated {len(manifest)} synthetic samples")
    return batch_negate(manifest, rules)


def write_manifest(manifest, path):
    """Write one JSON record per line."""
    path = Path(path)
    with open(path, "w") as fd:
        for row in manifest:
            fd.write(json.dumps(row.to_record()) + "\n")
    logger.info(f"Wrote {len(manifest)} rows to {path}")


def _parse_lines(path):
    """Yield (line number, SamplePair or error message) for each line."""
    with open(path) as fd:
        for lineno, line in enumerate(fd, start=1):
            if line.strip() == "":
                continue
            try:
                yield lineno, SamplePair.from_record(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                yield lineno, f"{type(e).__name__}: {e}"


def read_manifest(path):
    """Read a manifest, raising on the first malformed line."""
    manifest = []
    for lineno, row in _parse_lines(path):
        if isinstance(row, str):
            raise RuntimeError(f"{path}:{lineno}: malformed manifest row: {row}")
        manifest.append(row)
    return manifest


@dataclass
class Violation:
    """The problems found with one row, or with the manifest as a whole."""

    problems: list
    row: int = None
    line: int = None
    sample_id: str = None

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class ValidationReport:
    n_rows: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return len(self.violations) == 0


def _row_problems(row, table, rules, excluded):
    problems = []
    if row.split not in SPLITS:
        problems.append(f"unknown split '{row.split}'")

    for check in table.measurement_checks(
        row.grades, row.caption, row.measurements, excluded
    ):
        if check.verdict.verdict != Verdict.INCONSISTENT:
            continue
        if check.source == "label":
            problems.append(f"grade of {check.disease}: {check.verdict.rationale}")
        else:
            problems.append(f"caption '{check.clause}': {check.verdict.rationale}")

    for finding in table.stated_findings(row.caption):
        if finding.grade is None or finding.value is not None:
            continue
        disease = table.entry(finding.key).disease
        if disease in excluded or disease not in row.grades:
            continue
        if finding.grade != row.grades[disease]:
            problems.append(
                f"caption states {finding.grade.label} {disease}, the label "
                f"is {row.grades[disease].label}"
            )

    expected = rules.negate(row.caption, row.measurements)
    if not expected.matched:
        if row.negated_caption != expected.text:
            problems.append("negated caption of an unmatched caption is not generic")
    else:
        polarity = rules.polarity(row.caption, row.measurements)
        negated = rules.polarity(row.negated_caption, row.measurements)
        if negated != tuple(p.opposite for p in polarity):
            problems.append("negated caption does not have the opposite polarity")
    return problems


def validate_manifest(manifest, table=None, rules=None, split_ratios=(0.8, 0.1, 0.1)):
    """Check every row of a manifest, and its split proportions.

    Parameters
    ----------
    manifest : list of SamplePair, or path
        A path is read leniently; malformed lines become violations naming
        their line number.

    Returns
    -------
    ValidationReport
    """
    table = default_table() if table is None else table
    rules = default_rules() if rules is None else rules
    excluded = table.excluded_categories

    if isinstance(manifest, (str, Path)):
        lines = list(_parse_lines(manifest))
    else:
        lines = [(None, row) for row in manifest]

    report = ValidationReport(n_rows=len(lines))
    counts = {split: 0 for split in SPLITS}
    for index, (lineno, row) in enumerate(lines):
        if isinstance(row, str):
            report.violations.append(Violation([f"malformed: {row}"], index, lineno))
            continue
        counts[row.split] = counts.get(row.split, 0) + 1
        problems = _row_problems(row, table, rules, excluded)
        if len(problems) > 0:
            report.violations.append(Violation(problems, index, lineno, row.id))

    n = report.n_rows
    if n > 0:
        tolerance = max(1.0, 0.01 * n)
        for split, ratio in zip(SPLITS, split_ratios):
            if abs(counts[split] - ratio * n) > tolerance:
                report.violations.append(
                    Violation(
                        [
                            f"split '{split}' has {counts[split]} of {n} rows, "
                            f"expected about {ratio * n:.0f}"
                        ]
                    )
                )
    return report
