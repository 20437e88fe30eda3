# -*- coding: utf-8 -*-

"""Rule-based rewriting of captions into their negated counterparts.

Qualitative findings flip between presence and absence: "mild regurgitation"
becomes "no regurgitation" and "no pericardial effusion" becomes "mild
pericardial effusion". A quantitative statement is first graded through the
measurement bands, e.g. "left ventricular ejection fraction is 45%" states
mild systolic dysfunction, and then that interpretation is negated.

Every matched finding in a caption is rewritten, in a single pass over the
original text.
"""

import dataclasses
from dataclasses import dataclass
import enum
import functools
import logging
import re

import jinja2

from . import data_files
from .guidelines import SeverityGrade, default_table

logger = logging.getLogger(__name__)

UNMATCHED = "unmatched"
_VALUE = r"(?P<value>\d+(?:\.\d+)?)"

_environment = jinja2.Environment(keep_trailing_newline=False)


@functools.lru_cache(maxsize=None)
def _template(text):
    return _environment.from_string(text)


class Polarity(enum.Enum):
    PRESENT = "present"
    ABSENT = "absent"

    @property
    def opposite(self):
        return Polarity.ABSENT if self == Polarity.PRESENT else Polarity.PRESENT


def _flexible_spaces(pattern):
    return pattern.replace(r"\ ", r"\s+").replace(" ", r"\s+")


def sentence_pattern(sentence):
    """A regular expression matching a measurement sentence template."""
    head, _, tail = sentence.partition("{{ value }}")
    head, tail = (_flexible_spaces(re.escape(part)) for part in (head, tail))
    return head + _VALUE + tail


@dataclass(frozen=True)
class NegationRule:
    """How to interpret and negate one finding.

    ``key`` and ``pattern`` are set only for measurement rules, which grade
    the value captured by the pattern.
    """

    id: str
    kind: str
    finding: str
    interpretation_template: str
    negation_template: str
    affirmation_template: str
    key: str = None
    pattern: re.Pattern = None

    def interpretation(self, grade):
        """The severity phrase for a grade, e.g. 'mild la dilation'."""
        return _template(self.interpretation_template).render(
            grade=SeverityGrade.parse(grade).label, finding=self.finding
        )

    def negate(self, grade):
        """The negated phrase: absence for an abnormal grade, else mild."""
        template = (
            self.negation_template
            if SeverityGrade.parse(grade) > SeverityGrade.NONE
            else self.affirmation_template
        )
        return _template(template).render(finding=self.finding)


@dataclass(frozen=True)
class NegationResult:
    text: str
    rule_ids: tuple
    polarities: tuple = ()

    @property
    def matched(self):
        return self.rule_ids != (UNMATCHED,)

    @property
    def rule_id(self):
        """The applied rules joined with '+', or 'unmatched'."""
        return "+".join(self.rule_ids)


@dataclass(frozen=True)
class _Edit:
    start: int
    end: int
    replacement: str
    rule_id: str
    polarity: Polarity


class NegationRules:
    """A table of negation rules.

    Parameters
    ----------
    data : list of dict
        The rule records.
    metadata : dict
        Templates and severity vocabulary shared by all rules.
    table : guidelines.MeasurementTable, optional
        Bands used to interpret measurement statements.
    """

    def __init__(self, data, metadata=None, table=None):
        metadata = {} if metadata is None else metadata
        self.metadata = metadata
        self.table = default_table() if table is None else table
        self.severities = tuple(
            metadata.get("severities", ("mild", "moderate", "severe"))
        )
        self.absence = tuple(metadata.get("absence", ("no",)))
        self.unmatched_negation = metadata.get(
            "unmatched_negation", "no abnormal findings"
        )
        self.unmatched_affirmation = metadata.get(
            "unmatched_affirmation", "abnormal findings"
        )

        templates = {
            "interpretation_template": metadata.get(
                "interpretation_template",
                "{% if grade == 'none' %}no {{ finding }}"
                "{% else %}{{ grade }} {{ finding }}{% endif %}",
            ),
            "negation_template": metadata.get("negation_template", "no {{ finding }}"),
            "affirmation_template": metadata.get(
                "affirmation_template", "mild {{ finding }}"
            ),
        }

        self.rules = []
        for record in data:
            self.rules.append(self._make_rule(record, templates))

        self.finding_rules = {r.finding: r for r in self.rules if r.kind == "finding"}
        self.measurement_rules = [r for r in self.rules if r.kind == "measurement"]

        alternation = "|".join(
            _flexible_spaces(re.escape(f))
            for f in sorted(self.finding_rules, key=lambda f: (-len(f), f))
        )
        severity = "|".join(self.severities + self.absence)
        self._qualitative = re.compile(
            rf"(?<![a-z])(?P<severity>{severity})\s+"
            rf"(?P<finding>{alternation})(?![a-z])",
            re.IGNORECASE,
        )

    def _make_rule(self, record, templates):
        kind = record["kind"]
        fields = {k: record.get(k, v) for k, v in templates.items()}
        if kind == "finding":
            rule = NegationRule(
                id=record["id"], kind=kind, finding=record["finding"].lower(), **fields
            )
        elif kind == "measurement":
            entry = self.table.entry(record["key"])
            finding = record.get("finding", entry.finding)
            if finding is None:
                raise RuntimeError(
                    f"Rule '{record['id']}': '{entry.key}' grades no finding"
                )
            if "pattern" in record:
                pattern = record["pattern"]
            elif entry.sentence is not None:
                pattern = sentence_pattern(entry.sentence)
            else:
                raise RuntimeError(f"Rule '{record['id']}' has no pattern")
            rule = NegationRule(
                id=record["id"],
                kind=kind,
                finding=finding,
                key=entry.key,
                pattern=re.compile(pattern, re.IGNORECASE),
                **fields,
            )
        else:
            raise RuntimeError(f"Rule '{record.get('id')}' has unknown kind '{kind}'")

        for grade in (SeverityGrade.NONE, SeverityGrade.SEVERE):
            if rule.negate(grade) == rule.interpretation(grade):
                raise RuntimeError(
                    f"Rule '{rule.id}' does not change '{rule.interpretation(grade)}'"
                )
        return rule

    @classmethod
    def load(cls, path=None, table=None):
        """Read a rule table, by default the one shipped with the package."""
        if path is None:
            path = data_files.data_path("negation_rules.txt")
        metadata, data = data_files.read_data_file(path, "negation-rules")
        return cls(data, metadata, table=table)

    def __len__(self):
        return len(self.rules)

    def rule_for(self, finding):
        try:
            return self.finding_rules[finding]
        except KeyError:
            raise ValueError(f"No negation rule covers '{finding}'") from None

    def check_coverage(self, diseases):
        """Raise unless every disease has a finding rule."""
        missing = [d for d in diseases if d not in self.finding_rules]
        if len(missing) > 0:
            raise RuntimeError(f"No negation rules for: {', '.join(missing)}")

    def _edits(self, caption, measurements=()):
        values = {m.key: m.value for m in measurements}

        quantitative = []
        for rule in self.measurement_rules:
            for match in rule.pattern.finditer(caption):
                value = match.groupdict().get("value")
                if value is None:
                    if rule.key not in values:
                        logger.debug(f"No value for '{match.group(0)}'")
                        continue
                    value = values[rule.key]
                grade = self.table.entry(rule.key).grade(float(value))
                if grade > SeverityGrade.NONE:
                    polarity = Polarity.PRESENT
                else:
                    polarity = Polarity.ABSENT
                quantitative.append(
                    _Edit(
                        match.start(),
                        match.end(),
                        rule.negate(grade),
                        rule.id,
                        polarity,
                    )
                )

        edits = []
        for edit in sorted(quantitative, key=lambda e: e.start):
            if len(edits) == 0 or edit.start >= edits[-1].end:
                edits.append(edit)

        for match in self._qualitative.finditer(caption):
            if any(match.start() < e.end and e.start < match.end() for e in edits):
                continue
            finding = " ".join(match.group("finding").lower().split())
            rule = self.finding_rules[finding]
            if match.group("severity").lower() in self.absence:
                grade, polarity = SeverityGrade.NONE, Polarity.ABSENT
            else:
                grade, polarity = SeverityGrade.SEVERE, Polarity.PRESENT
            edits.append(
                _Edit(match.start(), match.end(), rule.negate(grade), rule.id, polarity)
            )
        return sorted(edits, key=lambda e: e.start)

    def polarity(self, caption, measurements=()):
        """Whether each matched finding is asserted present or absent."""
        return tuple(e.polarity for e in self._edits(caption, measurements))

    def negate(self, caption, measurements=()):
        """Rewrite a caption into its negated counterpart.

        Parameters
        ----------
        caption : str
        measurements : list of MeasurementRecord
            Values for measurement rules whose pattern captures no number.

        Returns
        -------
        NegationResult
        """
        if caption is None or caption.strip() == "":
            raise ValueError("Cannot negate an empty caption")

        edits = self._edits(caption, measurements)
        if len(edits) == 0:
            logger.warning(f"No negation rule matches '{caption}'")
            text = self.unmatched_negation
            if caption.strip().lower() == text:
                text = self.unmatched_affirmation
            return NegationResult(text, (UNMATCHED,))

        pieces = []
        position = 0
        for edit in edits:
            pieces.append(caption[position:edit.start])
            pieces.append(edit.replacement)
            position = edit.end
        pieces.append(caption[position:])
        return NegationResult(
            "".join(pieces),
            tuple(e.rule_id for e in edits),
            tuple(e.polarity.opposite for e in edits),
        )


_default_rules = None


def default_rules():
    global _default_rules
    if _default_rules is None:
        _default_rules = NegationRules.load()
    return _default_rules


def negate_caption(caption, measurements=(), rules=None):
    return (default_rules() if rules is None else rules).negate(caption, measurements)


def batch_negate(manifest, rules=None):
    """Fill in the negated caption and rule id of every row, keeping the order."""
    rules = default_rules() if rules is None else rules
    result = []
    for row in manifest:
        negation = rules.negate(row.caption, row.measurements)
        result.append(
            dataclasses.replace(
                row, negated_caption=negation.text, negation_rule=negation.rule_id
            )
        )
    n_unmatched = sum(1 for row in result if row.negation_rule == UNMATCHED)
    if n_unmatched > 0:
        logger.warning(f"{n_unmatched} of {len(result)} captions matched no rule")
    return result
