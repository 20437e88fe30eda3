# -*- coding: utf-8 -*-

"""The training step"""

import logging
import time

import humanize
import pandas

from .node import Node
from .parameters import ConfigurationError
from . import standard_parameters
from . import training
import seamm_util.printing as printing
from seamm_util.printing import FormattedText as __

logger = logging.getLogger(__name__)
job = printing.getPrinter()
printer = printing.getPrinter("train")

# Parameters of the step that are not training hyperparameters
_STEP_KEYS = ("manifest", "resume", "keep_checkpoints")


class TrainNode(Node):
    """Train the dual encoder on the training split of the manifest and set
    the workspace variable 'checkpoint' to the final checkpoint."""

    def __init__(self, flowchart=None, title="Train the dual encoder"):
        super().__init__(
            flowchart=flowchart,
            title=title,
            parameters=standard_parameters.train_parameters,
            logger=logger,
        )

    def train_config(self, P=None):
        """The TrainConfig for the current parameters."""
        P = self.current_values() if P is None else P
        settings = {k: v for k, v in P.items() if k not in _STEP_KEYS}
        try:
            return training.TrainConfig.from_dict(settings)
        except ValueError as e:
            raise ConfigurationError(f"{self.title}: {e}") from None

    def description_text(self, P=None):
        if P is None:
            P = self.parameters.values_to_dict()
        text = (
            f"Train for {P['epochs']} epochs on {P['caption_field']} text with "
            f"batches of {P['batch_size']}, a peak learning rate of {P['base_lr']} "
            f"and loss weights {P['lambda_view']} (view) and {P['lambda_neg']} "
            "(negation)."
        )
        if P["resume"]:
            text += f" Resume from {P['resume']}."
        return text

    def run(self, printer=printer):
        next_node = super().run(printer)
        P = self.current_values()
        cfg = self.train_config(P)

        printer.normal(__(self.description_text(P), indent=4 * " "))
        printer.normal("")

        t0 = time.time()
        result = training.train(
            cfg,
            P["manifest"],
            self.directory,
            resume=P["resume"] or None,
            keep_checkpoints=P["keep_checkpoints"],
        )
        elapsed = time.time() - t0
        self.set_variable("checkpoint", str(result.checkpoint))

        if len(result.history) > 0:
            table = pandas.DataFrame(result.history).set_index("epoch")
            table = table[["step", "l_clip", "l_view", "l_neg", "total", "lr"]]
            printer.normal(
                table.to_string(
                    formatters={
                        "l_clip": "{:.4f}".format,
                        "l_view": "{:.4f}".format,
                        "l_neg": "{:.4f}".format,
                        "total": "{:.4f}".format,
                        "lr": "{:.2e}".format,
                    }
                )
            )
            printer.normal("")
        printer.normal(
            __(
                f"Trained to step {result.state.step} in "
                f"{humanize.naturaldelta(elapsed)}; the temperature is "
                f"{float(result.state.model.temperature):.3f}. The checkpoint is "
                f"{result.checkpoint}.",
                indent=4 * " ",
            )
        )
        printer.normal("")
        return next_node
