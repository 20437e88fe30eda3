# -*- coding: utf-8 -*-

"""The evaluation step, and the summary of a sweep of evaluations"""

import logging
from pathlib import Path

import pandas

from .evaluation import EvalConfig, ProbeConfig, evaluate
from .node import Node
from .parameters import ConfigurationError, to_bool
from . import standard_parameters
import seamm_util.printing as printing
from seamm_util.printing import FormattedText as __

logger = logging.getLogger(__name__)
job = printing.getPrinter()
printer = printing.getPrinter("eval")


def sweep_row(label, report):
    """The headline numbers of one evaluation report, as a flat dict."""
    row = {"label": label}
    zero_shot = report["zero_shot"]
    row["macro_auc"] = zero_shot["macro_auc"]
    row["macro_precision"] = zero_shot["macro_precision"]
    row["macro_recall"] = zero_shot["macro_recall"]
    for direction in ("image_to_text", "text_to_image"):
        for k, value in report["retrieval"][direction].items():
            row[f"{direction}_r@{k}"] = value
    for name in ("knn", "linear_probe"):
        scores = report[name]
        if scores is not None:
            row[f"{name}_accuracy"] = scores["accuracy"]
            row[f"{name}_f1"] = scores["f1"]
    row["view_margin"] = report["view_margin"]
    row["negation_separation"] = report["negation_separation"]
    return row


def write_sweep_summary(reports, path):
    """Write one CSV row per (label, report dict) pair.

    Returns
    -------
    pandas.DataFrame
        The table as written.
    """
    table = pandas.DataFrame([sweep_row(label, report) for label, report in reports])
    if len(table) > 0:
        table = table.set_index("label")
    path = Path(path)
    table.to_csv(path)
    logger.info(f"Wrote the summary of {len(table)} evaluations to {path}")
    return table


class EvalNode(Node):
    """Evaluate a checkpoint on a split of a manifest.

    Parameters
    ----------
    label : str, optional
        Names this evaluation in the workspace variable 'reports', which
        collects (label, report) pairs for summaries. Defaults to the title.
    """

    def __init__(self, flowchart=None, title="Evaluate", label=None):
        super().__init__(
            flowchart=flowchart,
            title=title,
            parameters=standard_parameters.eval_parameters,
            logger=logger,
        )
        self.label = title if label is None else label

    def eval_config(self, P=None):
        P = self.current_values() if P is None else P
        try:
            probe = ProbeConfig(
                base_lr=P["probe_lr"],
                weight_decay=P["probe_weight_decay"],
                epochs=P["probe_epochs"],
                warmup_epochs=P["probe_warmup_epochs"],
                batch_size=P["probe_batch_size"],
            )
            return EvalConfig(
                split=P["split"],
                knn_k=P["knn_k"],
                knn_temperature=P["knn_temperature"],
                positive_threshold=P["positive_threshold"],
                recall_ks=P["recall_ks"],
                linear_probe=P["linear_probe"],
                probe=probe,
            )
        except ValueError as e:
            raise ConfigurationError(f"{self.title}: {e}") from None

    def description_text(self, P=None):
        if P is None:
            P = self.parameters.values_to_dict()
        text = (
            f"Evaluate {P['checkpoint']} on the {P['split']} split of "
            f"{P['manifest']}: zero-shot disease classification, retrieval and "
            f"{P['knn_k']}-NN view classification"
        )
        if to_bool(P["linear_probe"]):
            text += " and a linear probe"
        return text + "."

    def run(self, printer=printer):
        next_node = super().run(printer)
        P = self.current_values()
        cfg = self.eval_config(P)

        report = evaluate(P["checkpoint"], P["manifest"], P["prompts"] or None, cfg)
        report.write(self.directory)
        self.variables.append("reports", (self.label, report.to_dict()))

        for line in report.summary_text().splitlines():
            printer.normal("    " + line)
        printer.normal("")
        printer.normal(
            __(
                f"The report is in {self.file_path('report.json')}.", indent=4 * " "
            )
        )
        printer.normal("")
        return next_node
