# -*- coding: utf-8 -*-

"""The start node in a pipeline"""

from datetime import datetime, timezone
import json
import logging
import platform

import cpuinfo
import numpy
import torch

from .config import UserRC
from .node import Node
import seamm_util.printing as printing
from seamm_util.printing import FormattedText as __

logger = logging.getLogger(__name__)
job = printing.getPrinter()
printer = printing.getPrinter("start")


def platform_metadata():
    """Where and with what a run was made."""
    info = cpuinfo.get_cpu_info()
    return {
        "hostname": platform.node(),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "cpu": info.get("brand_raw", ""),
        "arch": info.get("arch", ""),
        "cores": info.get("count", 0),
        "torch": torch.__version__,
        "numpy": numpy.__version__,
    }


class StartNode(Node):
    """The anchor of the pipeline, which records the run's metadata.

    Parameters
    ----------
    flowchart : Flowchart, optional
    rc_path : str, optional
        The user's rc file, holding who runs the job.
    """

    def __init__(self, flowchart=None, rc_path=None):
        logger.debug(f"Constructing start node {self}")
        super().__init__(flowchart=flowchart, title="Start", uid=1)
        self.rc_path = rc_path
        self.metadata = {}

    def description_text(self, P=None):
        return self.header + "\n"

    def run(self, printer=printer):
        """Record the platform, user and configuration of the run."""
        next_node = super().run(printer)

        rc = UserRC() if self.rc_path is None else UserRC(self.rc_path)
        self.metadata = {
            "started": datetime.now(timezone.utc).isoformat(),
            "version": self.version,
            "user": rc.user(),
            "platform": platform_metadata(),
            "flowchart_digest": self.flowchart.digest(),
        }
        config_digest = self.flowchart.metadata.get("config_digest")
        if config_digest is not None:
            self.metadata["config_digest"] = config_digest

        path = self.file_path("run.json")
        with open(path, "w") as fd:
            json.dump(self.metadata, fd, indent=4, sort_keys=True)

        name = self.metadata["user"].get("name", "an anonymous user")
        cpu = self.metadata["platform"]["cpu"] or self.metadata["platform"]["arch"]
        printer.normal(
            __(
                f"Run by {name} on {self.metadata['platform']['hostname']}, "
                f"{cpu} with {self.metadata['platform']['cores']} cores, "
                f"torch {torch.__version__}.",
                indent=4 * " ",
            )
        )
        printer.normal("")
        return next_node

    def setup_printing(self, aprinter):
        """Establish the handlers for printing. The start step prints only to
        the console.
        """
        self.close_printing(aprinter)

        console_handler = logging.StreamHandler()
        console_handler.setLevel(printing.JOB)
        console_handler.setFormatter(self.formatter)
        aprinter.addHandler(console_handler)
