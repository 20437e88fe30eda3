# -*- coding: utf-8 -*-

"""The base class for nodes (steps) in pipelines.
"""

import collections.abc
import hashlib
import logging
import os
from pathlib import Path
import uuid

from .parameters import Parameters
from seamm_util.printing import FormattedText as __
import seamm_util.printing as printing

logger = logging.getLogger(__name__)
job = printing.getPrinter()

# Exit status of a step whose work ran but whose output failed its checks
VALIDATION_FAILED = 1


class Node(collections.abc.Hashable):
    """The base class for nodes (steps) in pipelines.

    Parameters
    ----------
    flowchart : echo_contrast.Flowchart, optional
        The Flowchart that contains this node.
    title : str, optional
        The title of this step for use in output.
    parameters : dict, optional
        The definitions of the control parameters of this step.
    logger : logging.Logger, optional
        The logger to use for (debug) output.
    uid : int, optional
        A unique ID for the step, generated if not given.

    Attributes
    ----------
    status : int
        0 once the step has run and its output passed its checks, or
        VALIDATION_FAILED.
    """

    def __init__(
        self, flowchart=None, title="", parameters=None, logger=logger, uid=None
    ):
        if uid is None:
            uid = uuid.uuid4().int

        self._id = None
        self._title = title
        self._uuid = uid
        self._visited = False
        self.flowchart = flowchart
        self.logger = logger
        self.status = 0
        self.printer = None

        if parameters is None:
            self.parameters = None
        else:
            self.parameters = Parameters(defaults=parameters)

        # Set up our formatter for printing
        self.formatter = logging.Formatter(fmt="{message:s}", style="{")

    def __hash__(self):
        return self._uuid

    def __eq__(self, other):
        return self.__class__ == other.__class__ and self.digest() == other.digest()

    @property
    def directory(self):
        """The directory for output and files for this step."""
        return os.path.join(self.flowchart.root_directory, *self._id)

    @property
    def header(self):
        """A printable header for this section of output"""
        return "Step {}: {}  {}".format(
            ".".join(str(e) for e in self._id), self.title, self.version
        )

    @property
    def indent(self):
        """The amount to indent the output of this step."""
        return "" if self._id is None or len(self._id) <= 1 else 4 * " "

    @property
    def step_type(self):
        return self.__class__.__name__

    @property
    def title(self):
        return self._title

    @title.setter
    def title(self, value):
        self._title = value

    @property
    def uuid(self):
        return self._uuid

    @property
    def version(self):
        """The version of the package."""
        from . import __version__

        return __version__

    @property
    def variables(self):
        """The workspace variables of the flowchart."""
        return self.flowchart.variables

    @property
    def visited(self):
        return self._visited

    @visited.setter
    def visited(self, value):
        self._visited = value

    def set_id(self, node_id):
        """Set the id of this node and return the next node."""
        if self.visited:
            return None
        self.visited = True
        self._id = node_id
        return self.next()

    def reset_id(self):
        self._id = None

    def description_text(self, P=None):
        """Return a short description of this step.

        Parameters
        ----------
        P : dict, optional
            Parameter values to describe. If None, the current values are
            described as given, with any workspace references unresolved.
        """
        if self.parameters is None:
            return "This step has no parameters."
        if P is None:
            P = self.parameters.values_to_dict()
        width = max(len(self.parameters[key].description or key) for key in P)
        lines = []
        for key, value in P.items():
            label = self.parameters[key].description or key
            lines.append(f"{label:>{width}} {value}")
        return "\n".join(lines)

    def describe(self):
        """Write out information about what this node will do"""
        self.visited = True
        job.normal(__(self.header, indent=self.indent))
        job.normal(self.description_text())

        next_node = self.next()
        if next_node is None or next_node.visited:
            return None
        return next_node

    def digest(self, strict=False):
        """Generate a unique hash key for this node.

        Parameters
        ----------
        strict: bool
            Whether to include version information. Default: False

        Returns
        -------
        string
        """
        hasher = hashlib.sha256()
        hasher.update(bytes(self.step_type, "utf-8"))
        if strict:
            hasher.update(bytes(self.version, "utf-8"))
        if self.parameters is not None:
            hasher.update(bytes(str(self.parameters.to_dict()), "utf-8"))
        return hasher.hexdigest()

    def current_values(self):
        """The parameter values, with workspace references resolved."""
        P = self.parameters.current_values_to_dict(context=self.variables)
        if self.logger.isEnabledFor(logging.DEBUG):
            self.logger.debug(f"{self.title}: {P}")
        return P

    def run(self, printer=None):
        """Prepare to run: create the directory and the printing for this step,
        and print the header.

        Subclasses do their work after calling this.

        Returns
        -------
        Node
            The next node, or None at the end of the pipeline.
        """
        os.makedirs(self.directory, exist_ok=True)
        self.status = 0

        if printer is not None:
            self.printer = printer
            self.setup_printing(printer)
            printer.important(self.header)
            printer.important("")

        next_node = self.next()
        if next_node:
            self.logger.debug(f"returning next_node: {next_node.title}")
        else:
            self.logger.debug("returning next_node: None")
        return next_node

    def next(self):
        """Return the next node in the flow"""
        return self.flowchart.next_node(self)

    def previous(self):
        """Return the previous node in the flow"""
        return self.flowchart.previous_node(self)

    def get_variable(self, variable):
        return self.variables.get_variable(variable)

    def set_variable(self, variable, value):
        self.variables.set_variable(variable, value)

    def variable_exists(self, variable):
        return self.variables.exists(variable)

    def file_path(self, filename):
        """The path of a file in the directory of this step."""
        return Path(self.directory) / filename

    def setup_printing(self, printer):
        """Establish the handlers for printing: the console and the step.out
        file in the directory of this step.
        """
        # First remove any existing handlers
        self.close_printing(printer)

        # A handler for stdout
        console_handler = logging.StreamHandler()
        console_handler.setLevel(printing.JOB)
        console_handler.setFormatter(self.formatter)
        printer.addHandler(console_handler)

        # A handler for the file
        path = Path(self.directory) / "step.out"
        path.unlink(missing_ok=True)
        file_handler = logging.FileHandler(path, delay=True)
        file_handler.setLevel(printing.NORMAL)
        file_handler.setFormatter(self.formatter)
        printer.addHandler(file_handler)

    def close_printing(self, printer=None):
        """Close the handlers for printing, so that buffers are flushed, files
        closed, etc.
        """
        printer = self.printer if printer is None else printer
        if printer is not None:
            for handler in list(printer.handlers):
                handler.close()
                printer.removeHandler(handler)
