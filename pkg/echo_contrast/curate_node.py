# -*- coding: utf-8 -*-

"""The curation step: fill in the negated captions and check that what the
labels and captions state agrees with the measurements.
"""

import json
import logging

import pandas

from .guidelines import GuidelineConfig, MeasurementTable, Verdict
from .negation import UNMATCHED, NegationRules, batch_negate
from .node import VALIDATION_FAILED, Node
from .parameters import ConfigurationError
from . import standard_parameters
from .synthetic import read_manifest, write_manifest
import seamm_util.printing as printing
from seamm_util.printing import FormattedText as __

logger = logging.getLogger(__name__)
job = printing.getPrinter()
printer = printing.getPrinter("curate")


def consistency_verdicts(row, table, config):
    """Check the label grades and the caption statements of one row against
    its measurements.

    Parameters
    ----------
    row : SamplePair
    table : MeasurementTable
    config : GuidelineConfig

    Returns
    -------
    list of dict
        One record per check, holding the verdict and its rationale.
    """
    result = []
    for check in table.measurement_checks(
        row.grades, row.caption, row.measurements, config.excluded_categories
    ):
        record = {"id": row.id, "source": check.source}
        if check.clause is not None:
            record["clause"] = check.clause
        record.update(check.verdict.to_dict())
        result.append(record)
    return result


class CurateNode(Node):
    def __init__(self, flowchart=None, title="Curate the manifest"):
        super().__init__(
            flowchart=flowchart,
            title=title,
            parameters=standard_parameters.curate_parameters,
            logger=logger,
        )

    def description_text(self, P=None):
        if P is None:
            P = self.parameters.values_to_dict()
        table = P["measurements"] or "the standard measurement table"
        excluded = P["excluded_categories"]
        if not isinstance(excluded, str):
            excluded = ", ".join(excluded)
        return (
            f"Curate the manifest {P['manifest']} against {table}, leaving out "
            f"{excluded or 'no categories'}."
        )

    def run(self, printer=printer):
        next_node = super().run(printer)
        P = self.current_values()

        try:
            config = GuidelineConfig(
                excluded_categories=P["excluded_categories"],
                default_margin=P["default_margin"],
            )
        except ValueError as e:
            raise ConfigurationError(f"{self.title}: {e}") from None
        table = MeasurementTable.load(
            P["measurements"] or None, default_margin=config.default_margin
        )
        rules = NegationRules.load(P["negation_rules"] or None, table=table)
        for category in config.excluded_categories:
            logger.info(f"Category '{category}' is excluded from consistency checks")

        manifest = batch_negate(read_manifest(P["manifest"]), rules)

        verdicts = []
        curated = []
        for row in manifest:
            checks = consistency_verdicts(row, table, config)
            verdicts.extend(checks)
            row.subjective = any(
                check["verdict"] == Verdict.SUBJECTIVE.value for check in checks
            )
            curated.append(row)

        path = self.file_path("manifest.jsonl")
        write_manifest(curated, path)
        with open(self.file_path("verdicts.jsonl"), "w") as fd:
            for check in verdicts:
                fd.write(json.dumps(check) + "\n")

        counts = {verdict.value: 0 for verdict in Verdict}
        for check in verdicts:
            counts[check["verdict"]] += 1
        n_checks = len(verdicts)
        summary = {
            "n_rows": len(curated),
            "n_checks": n_checks,
            "counts": counts,
            "fractions": {
                key: (value / n_checks if n_checks > 0 else 0.0)
                for key, value in counts.items()
            },
            "n_subjective_rows": sum(1 for row in curated if row.subjective),
            "n_unmatched_negations": sum(
                1 for row in curated if row.negation_rule == UNMATCHED
            ),
            "excluded_categories": list(config.excluded_categories),
        }
        with open(self.file_path("consistency.json"), "w") as fd:
            json.dump(summary, fd, indent=4)
        self.set_variable("manifest", str(path))

        table_text = pandas.DataFrame(
            {
                "checks": pandas.Series(counts),
                "fraction": pandas.Series(summary["fractions"]),
            }
        ).to_string(float_format=lambda x: f"{x:.3f}")
        printer.normal(
            __(
                f"Curated {len(curated)} rows with {n_checks} consistency checks, "
                f"{summary['n_subjective_rows']} rows being borderline.",
                indent=4 * " ",
            )
        )
        printer.normal(table_text)
        printer.normal("")

        if counts[Verdict.INCONSISTENT.value] > 0:
            self.status = VALIDATION_FAILED
            printer.important(
                __(
                    f"{counts[Verdict.INCONSISTENT.value]} statements contradict "
                    "their measurements; see verdicts.jsonl.",
                    indent=4 * " ",
                )
            )
            printer.important("")
        return next_node
