# -*- coding: utf-8 -*-

"""The step generating the synthetic manifest and validating it"""

import json
import logging

import pandas

from .node import VALIDATION_FAILED, Node
from .parameters import ConfigurationError
from . import standard_parameters
from .synthetic import (
    SPLITS,
    SyntheticSpec,
    generate,
    validate_manifest,
    write_manifest,
)
import seamm_util.printing as printing
from seamm_util.printing import FormattedText as __

logger = logging.getLogger(__name__)
job = printing.getPrinter()
printer = printing.getPrinter("generate")


class GenerateNode(Node):
    def __init__(self, flowchart=None, title="Generate synthetic data"):
        super().__init__(
            flowchart=flowchart,
            title=title,
            parameters=standard_parameters.generate_parameters,
            logger=logger,
        )

    def spec(self, P=None):
        """The SyntheticSpec for the current parameters."""
        P = self.current_values() if P is None else P
        try:
            return SyntheticSpec(**P)
        except ValueError as e:
            raise ConfigurationError(f"{self.title}: {e}") from None

    def description_text(self, P=None):
        if P is None:
            P = self.parameters.values_to_dict()
        return (
            f"Generate {P['n_samples']} samples with {P['n_views']} views and "
            f"{P['n_diseases']} diseases, split {P['split_ratios']}, seed {P['seed']}."
        )

    def run(self, printer=printer):
        next_node = super().run(printer)
        spec = self.spec()

        manifest = generate(spec)
        path = self.file_path("manifest.jsonl")
        write_manifest(manifest, path)

        report = validate_manifest(manifest, split_ratios=spec.split_ratios)
        with open(self.file_path("violations.jsonl"), "w") as fd:
            for violation in report.violations:
                fd.write(json.dumps(violation.to_dict()) + "\n")
        self.set_variable("manifest", str(path))

        counts = pandas.Series([row.split for row in manifest]).value_counts()
        table = pandas.DataFrame(
            {"samples": [int(counts.get(split, 0)) for split in SPLITS]},
            index=list(SPLITS),
        )
        printer.normal(
            __(
                f"Generated {len(manifest)} samples and wrote them to {path}.",
                indent=4 * " ",
            )
        )
        printer.normal(table.to_string())
        printer.normal("")
        if report.ok:
            printer.normal(__("The manifest passed validation.", indent=4 * " "))
        else:
            self.status = VALIDATION_FAILED
            printer.important(
                __(
                    f"The manifest has {len(report.violations)} violations, listed in "
                    "violations.jsonl.",
                    indent=4 * " ",
                )
            )
            for violation in report.violations[:5]:
                where = violation.sample_id or "manifest"
                printer.important(f"        {where}: {violation.problems}")
        printer.normal("")
        return next_node
