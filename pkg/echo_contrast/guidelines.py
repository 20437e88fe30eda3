# -*- coding: utf-8 -*-

"""Measurement standardization and guideline-based consistency checks.

A :class:`MeasurementTable` holds the standard measurement keys with their
aliases, units, anatomical categories and severity bands. It grades a
measurement, decides whether a stated finding agrees with it, and picks the
most specific caption consistent with a block of measurements.
"""

from dataclasses import dataclass, field
import enum
import logging
import math
import re

from seamm_util import Q_

from . import data_files

logger = logging.getLogger(__name__)

UNIT_ALIASES = {"%": "percent", "none": "", "ratio": ""}


class SeverityGrade(enum.IntEnum):
    """The ordered severity of an abnormality."""

    NONE = 0
    MILD = 1
    MODERATE = 2
    SEVERE = 3

    @property
    def label(self):
        return self.name.lower()

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        try:
            return cls[str(text).strip().upper()]
        except KeyError:
            raise ValueError(f"'{text}' is not a severity grade") from None


class Verdict(enum.Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    SUBJECTIVE = "subjective"


# Words stating a grade. The first explicit one in a clause wins; the
# unqualified adjectives only count when no explicit word is present.
GRADE_WORDS = {
    "no": SeverityGrade.NONE,
    "normal": SeverityGrade.NONE,
    "without": SeverityGrade.NONE,
    "mild": SeverityGrade.MILD,
    "mildly": SeverityGrade.MILD,
    "moderate": SeverityGrade.MODERATE,
    "moderately": SeverityGrade.MODERATE,
    "severe": SeverityGrade.SEVERE,
    "severely": SeverityGrade.SEVERE,
}
UNQUALIFIED_WORDS = (
    "dilated",
    "enlarged",
    "reduced",
    "abnormal",
    "thickened",
    "depressed",
    "elevated",
    "increased",
    "impaired",
)

_NUMBER = re.compile(r"(?<![\w.])(\d+(?:\.\d+)?)")
# Periods followed by a digit are decimal points, not clause ends.
_CLAUSE_BREAK = re.compile(r"[,;]|\.(?!\d)")


def split_clauses(text):
    return [c.strip() for c in _CLAUSE_BREAK.split(text) if c.strip() != ""]


def canonical(raw_key):
    """Lowercase and drop everything that is not a letter or digit."""
    return re.sub(r"[^a-z0-9]+", "", raw_key.lower())


@dataclass(frozen=True)
class Band:
    grade: SeverityGrade
    lower: float
    upper: float

    @property
    def width(self):
        return self.upper - self.lower


@dataclass(frozen=True)
class MeasurementKey:
    """One standard measurement with its bands.

    The bands are sorted by lower edge and tile the range without gaps.
    """

    key: str
    unit: str
    category: str
    bands: tuple
    margin: float
    aliases: tuple = ()
    terms: tuple = ()
    disease: str = None
    finding: str = None
    sentence: str = None
    display_unit: str = ""
    decimals: int = 1

    def band_index(self, value):
        """The index of the band holding the value, clamped to the ends."""
        for i, band in enumerate(self.bands):
            if value < band.upper:
                return i
        return len(self.bands) - 1

    def grade(self, value):
        return self.bands[self.band_index(value)].grade

    def format_value(self, value):
        return f"{value:.{self.decimals}f}"


@dataclass(frozen=True)
class MeasurementRecord:
    """A standardized measurement."""

    key: str
    value: float
    unit: str
    category: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"The value of '{self.key}' is not finite: {self.value}")

    def to_dict(self):
        return {
            "key": self.key,
            "value": self.value,
            "unit": self.unit,
            "category": self.category,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["key"], float(data["value"]), data["unit"], data["category"])


@dataclass(frozen=True)
class KeyResolution:
    """The outcome of standardizing a raw key: a key, or a rejection reason."""

    raw: str
    key: str = None
    reason: str = ""

    @property
    def rejected(self):
        return self.key is None


@dataclass(frozen=True)
class ConsistencyVerdict:
    verdict: Verdict
    rationale: str
    key: str = ""
    value: float = None
    stated: SeverityGrade = None
    derived: SeverityGrade = None

    def to_dict(self):
        return {
            "key": self.key,
            "value": self.value,
            "stated": None if self.stated is None else self.stated.label,
            "derived": None if self.derived is None else self.derived.label,
            "verdict": self.verdict.value,
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class MeasurementCheck:
    """One label grade or caption clause checked against a measurement."""

    source: str
    disease: str
    verdict: ConsistencyVerdict
    clause: str = None


@dataclass(frozen=True)
class StatedFinding:
    """What one clause of a caption says about one measurement key."""

    key: str
    clause: str
    grade: SeverityGrade = None
    value: float = None


@dataclass
class GuidelineConfig:
    """Settings for curation checks."""

    excluded_categories: tuple = (
        "mitral valve disease",
        "mitral regurgitation",
        "stroke volume",
    )
    default_margin: float = None
    positive_threshold: SeverityGrade = SeverityGrade.MILD

    def __post_init__(self):
        self.excluded_categories = tuple(self.excluded_categories)
        self.positive_threshold = SeverityGrade.parse(self.positive_threshold)


class MeasurementTable:
    """The standard keys, aliases and bands.

    Parameters
    ----------
    entries : list of dict
        The records of the data file.
    metadata : dict
        The file's metadata: categories, default margin, non-clinical keys.
    default_margin : float, optional
        Overrides the file's borderline margin for keys without their own.
    """

    def __init__(self, entries, metadata=None, default_margin=None):
        metadata = {} if metadata is None else metadata
        self.metadata = metadata
        self.categories = tuple(metadata.get("categories", ()))
        if default_margin is None:
            default_margin = metadata.get("default_margin", 0.1)
        self.default_margin = default_margin
        self.excluded_categories = tuple(metadata.get("excluded_categories", ()))
        self.non_clinical = {canonical(k) for k in metadata.get("non_clinical", ())}
        self.non_clinical_words = set(metadata.get("non_clinical_words", ()))

        self.keys = {}
        self._lookup = {}
        for entry in entries:
            key = self._make_key(entry)
            self.keys[key.key] = key
            for name in (key.key,) + key.aliases:
                c = canonical(name)
                if c in self._lookup and self._lookup[c] != key.key:
                    raise RuntimeError(
                        f"Alias '{name}' of '{key.key}' also names "
                        f"'{self._lookup[c]}'"
                    )
                self._lookup[c] = key.key

        # Longest terms first so that the most specific reference wins
        self._terms = sorted(
            ((term, k.key) for k in self.keys.values() for term in k.terms),
            key=lambda x: -len(x[0]),
        )
        self._term_patterns = [
            (re.compile(rf"(?<![a-z0-9]){re.escape(term)}(?![a-z0-9])"), key)
            for term, key in self._terms
        ]

    def _make_key(self, entry):
        key = entry["key"]
        if self.categories and entry["category"] not in self.categories:
            raise RuntimeError(
                f"Measurement '{key}' has unknown category '{entry['category']}'"
            )
        bands = tuple(
            Band(SeverityGrade.parse(b["grade"]), float(b["lower"]), float(b["upper"]))
            for b in sorted(entry["bands"], key=lambda b: b["lower"])
        )
        if len(bands) == 0:
            raise RuntimeError(f"Measurement '{key}' has no bands")
        for lo, hi in zip(bands, bands[1:]):
            if lo.upper != hi.lower:
                raise RuntimeError(
                    f"The bands of '{key}' leave a gap or overlap at {lo.upper}"
                )
        return MeasurementKey(
            key=key,
            unit=entry.get("unit", ""),
            category=entry["category"],
            bands=bands,
            margin=entry.get("margin", self.default_margin),
            aliases=tuple(entry.get("aliases", ())),
            terms=tuple(t.lower() for t in entry.get("terms", ())),
            disease=entry.get("disease"),
            finding=entry.get("finding"),
            sentence=entry.get("sentence"),
            display_unit=entry.get("display_unit", ""),
            decimals=entry.get("decimals", 1),
        )

    @classmethod
    def load(cls, path=None, default_margin=None):
        """Read a band table, by default the one shipped with the package."""
        if path is None:
            path = data_files.data_path("measurements.txt")
        metadata, data = data_files.read_data_file(path, "measurements")
        return cls(data, metadata, default_margin=default_margin)

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self.keys

    def entry(self, key):
        try:
            return self.keys[key]
        except KeyError:
            raise ValueError(f"There is no band table entry for '{key}'") from None

    def diseases(self, excluded=None):
        """The disease names of keys that define one, in table order."""
        if excluded is None:
            excluded = self.excluded_categories
        return [
            k.disease
            for k in self.keys.values()
            if k.disease is not None and k.disease not in excluded
        ]

    def key_for_disease(self, disease):
        for k in self.keys.values():
            if k.disease == disease:
                return k
        raise ValueError(f"No measurement key grades the disease '{disease}'")

    def normalize_key(self, raw_key):
        """Map a raw key onto the standard table.

        Returns
        -------
        KeyResolution
            With the standard key, or with the reason the key was rejected.
        """
        if raw_key is None or raw_key.strip() == "":
            raise ValueError("A measurement key must be a nonempty string")
        c = canonical(raw_key)
        words = set(re.split(r"[^a-z0-9]+", raw_key.lower()))
        if c in self.non_clinical or words & self.non_clinical_words:
            return KeyResolution(raw_key, None, "non-clinical display element")
        if c in self._lookup:
            return KeyResolution(raw_key, self._lookup[c])
        return KeyResolution(raw_key, None, "not in the standard measurement table")

    def record(self, raw_key, value, unit=None):
        """Create a MeasurementRecord in the key's unit.

        Raises
        ------
        ValueError
            For rejected keys or incompatible units.
        """
        resolution = self.normalize_key(raw_key)
        if resolution.rejected:
            raise ValueError(f"Measurement '{raw_key}' rejected: {resolution.reason}")
        entry = self.keys[resolution.key]
        value = float(value)
        if unit is not None:
            unit = UNIT_ALIASES.get(unit.strip().lower(), unit.strip())
            if unit != entry.unit:
                try:
                    value = Q_(value, unit).m_as(entry.unit)
                except Exception as e:
                    raise ValueError(
                        f"Cannot express '{raw_key}' in {unit} as {entry.unit}: {e}"
                    ) from e
        return MeasurementRecord(entry.key, value, entry.unit, entry.category)

    def validate(self, m):
        """Check a record against the table."""
        entry = self.entry(m.key)
        if m.unit != entry.unit:
            raise ValueError(
                f"'{m.key}' is measured in '{entry.unit}', not '{m.unit}'"
            )
        if m.category != entry.category:
            raise ValueError(
                f"'{m.key}' belongs to category {entry.category}, not {m.category}"
            )
        return entry

    def grade(self, m):
        return self.validate(m).grade(m.value)

    def parse_stated(self, phrase, key=None):
        """The grade a phrase states, or None.

        Explicit severity words win, then the unqualified abnormal adjectives
        (which state mild), then a number graded through the bands of ``key``.
        """
        words = [w.strip(".,;:") for w in phrase.lower().split()]
        for word in words:
            if word in GRADE_WORDS:
                return GRADE_WORDS[word]
        for word in words:
            if word in UNQUALIFIED_WORDS:
                return SeverityGrade.MILD
        if key is not None:
            match = _NUMBER.search(phrase)
            if match is not None:
                return self.entry(key).grade(float(match.group(1)))
        return None

    def check(self, m, stated):
        """Decide whether a stated grade agrees with a measurement.

        Parameters
        ----------
        m : MeasurementRecord
        stated : str or SeverityGrade
            A phrase such as 'normal left atrium', or a grade.

        Returns
        -------
        ConsistencyVerdict
        """
        entry = self.validate(m)
        if isinstance(stated, SeverityGrade):
            grade = stated
        else:
            grade = self.parse_stated(stated, m.key)
            if grade is None:
                raise ValueError(f"Cannot tell what grade '{stated}' states")

        index = entry.band_index(m.value)
        band = entry.bands[index]
        derived = band.grade
        value_text = f"{m.key} {m.value:g} {entry.unit}".rstrip()
        where = f"band [{band.lower:g}, {band.upper:g}) is {derived.label}"

        if grade == derived:
            return ConsistencyVerdict(
                Verdict.CONSISTENT,
                f"{value_text}: {where}",
                m.key,
                m.value,
                grade,
                derived,
            )

        margin = entry.margin * band.width
        if index > 0 and m.value - band.lower <= margin:
            if entry.bands[index - 1].grade == grade:
                return ConsistencyVerdict(
                    Verdict.SUBJECTIVE,
                    f"{value_text}: {where}, within {margin:g} of the "
                    f"{grade.label} band at {band.lower:g}",
                    m.key,
                    m.value,
                    grade,
                    derived,
                )
        if index < len(entry.bands) - 1 and band.upper - m.value <= margin:
            if entry.bands[index + 1].grade == grade:
                return ConsistencyVerdict(
                    Verdict.SUBJECTIVE,
                    f"{value_text}: {where}, within {margin:g} of the "
                    f"{grade.label} band at {band.upper:g}",
                    m.key,
                    m.value,
                    grade,
                    derived,
                )
        return ConsistencyVerdict(
            Verdict.INCONSISTENT,
            f"{value_text}: {where}, but {grade.label} was stated",
            m.key,
            m.value,
            grade,
            derived,
        )

    def stated_findings(self, text):
        """Find the clauses of a text that speak about measurement keys.

        Each clause is attributed to the key of its longest matching term.
        """
        findings = []
        for clause in split_clauses(text.lower()):
            for pattern, key in self._term_patterns:
                if pattern.search(clause):
                    match = _NUMBER.search(clause)
                    findings.append(
                        StatedFinding(
                            key=key,
                            clause=clause,
                            grade=self.parse_stated(clause, key),
                            value=None if match is None else float(match.group(1)),
                        )
                    )
                    break
        return findings

    def measurement_checks(self, grades, caption, measurements, excluded=None):
        """Check label grades and caption statements against measurements.

        Diseases and measurement categories in ``excluded`` are skipped, as
        are grades and clauses with nothing measured to check them against.

        Returns
        -------
        list of MeasurementCheck
            Label checks first, then caption checks in clause order.
        """
        if excluded is None:
            excluded = self.excluded_categories
        measured = {m.key: m for m in measurements}
        checks = []

        for disease, grade in grades.items():
            if disease in excluded:
                continue
            try:
                key = self.key_for_disease(disease).key
            except ValueError:
                logger.debug(f"No measurement grades {disease}")
                continue
            m = measured.get(key)
            if m is None or m.category in excluded:
                continue
            checks.append(MeasurementCheck("label", disease, self.check(m, grade)))

        for finding in self.stated_findings(caption):
            if finding.grade is None or finding.key not in measured:
                continue
            m = measured[finding.key]
            disease = self.entry(finding.key).disease
            if disease in excluded or m.category in excluded:
                logger.debug(f"'{finding.clause}' is excluded from the checks")
                continue
            verdict = self.check(m, finding.grade)
            checks.append(MeasurementCheck("caption", disease, verdict, finding.clause))
        return checks


_default_table = None


def default_table():
    """The shipped measurement table, read once."""
    global _default_table
    if _default_table is None:
        _default_table = MeasurementTable.load()
    return _default_table


def normalize_key(raw_key, table=None):
    return (default_table() if table is None else table).normalize_key(raw_key)


def grade_from_measurement(m, table=None):
    return (default_table() if table is None else table).grade(m)


def check_consistency(m, stated, table=None):
    return (default_table() if table is None else table).check(m, stated)


def binarize_disease(grade, threshold=SeverityGrade.MILD):
    """Positive iff the grade is above the threshold (default: above mild)."""
    return SeverityGrade.parse(grade) > SeverityGrade.parse(threshold)


@dataclass
class CaptionChoice:
    """The outcome of choosing among candidate captions."""

    caption: str = None
    score: int = 0
    verdicts: list = field(default_factory=list)
    discarded: list = field(default_factory=list)


def select_caption(ocr_block, candidates, table=None, config=None):
    """Choose the most specific caption consistent with the measurements.

    A candidate is discarded if any of its statements is inconsistent with a
    measurement. Survivors are scored by how many of their statements refer
    to a measurement in the block; a score of zero is not grounded. The
    highest score wins, the earlier candidate on ties. The chosen text is
    returned unmodified.

    Parameters
    ----------
    ocr_block : list of MeasurementRecord
    candidates : list of str
    table : MeasurementTable, optional
    config : GuidelineConfig, optional

    Returns
    -------
    CaptionChoice
        ``caption`` is None when no candidate survives.
    """
    table = default_table() if table is None else table
    config = GuidelineConfig() if config is None else config
    measurements = {m.key: m for m in ocr_block}

    best = CaptionChoice()
    for candidate in candidates:
        verdicts = []
        for finding in table.stated_findings(candidate):
            entry = table.entry(finding.key)
            if entry.disease in config.excluded_categories:
                continue
            if finding.key not in measurements or finding.grade is None:
                continue
            verdicts.append(table.check(measurements[finding.key], finding.grade))
        if any(v.verdict == Verdict.INCONSISTENT for v in verdicts):
            logger.debug(f"Discarding caption with a conflict: {candidate}")
            best.discarded.append(candidate)
            continue
        if len(verdicts) > best.score:
            best = CaptionChoice(candidate, len(verdicts), verdicts, best.discarded)
    return best
