# -*- coding: utf-8 -*-

"""A flowchart, which is an ordered pipeline of steps. The first is always
the start step; each step runs in its own directory under the root directory
of the flowchart and hands its artifacts to later steps through the shared
workspace variables."""

import hashlib
import logging
from pathlib import Path
import time

import humanize

from . import data_files
from .node import VALIDATION_FAILED
from .start_node import StartNode
from .variables import Variables
import seamm_util.printing as printing

logger = logging.getLogger(__name__)
job = printing.getPrinter()


class Flowchart(object):
    """An ordered pipeline of nodes.

    Parameters
    ----------
    name : str
        A name for the flowchart.
    description : str
        A description of the flowchart.
    directory : str or pathlib.Path
        The root directory for files for this flowchart.
    variables : Variables, optional
        An initial workspace.
    rc_path : str, optional
        The user's rc file, read by the start step.
    """

    def __init__(
        self, name="", description="", directory=None, variables=None, rc_path=None
    ):
        self.metadata = {}
        self.reset_metadata(title=name, description=description)
        self.root_directory = None if directory is None else str(directory)
        self.variables = Variables() if variables is None else variables
        self._nodes = []

        # and make sure that the start node exists
        self.add_node(StartNode(flowchart=self, rc_path=rc_path))

    def __iter__(self):
        return iter(self._nodes)

    def __len__(self):
        return len(self._nodes)

    def add_node(self, node):
        """Append a node to the end of the pipeline."""
        node.flowchart = self
        self._nodes.append(node)
        return node

    def get_node(self, uuid):
        """Return the node with a given uuid"""
        for node in self:
            if str(node.uuid) == str(uuid):
                return node
        return None

    def get_nodes(self):
        """Return a list of all the nodes in the traversal."""
        return list(self._nodes)

    def _index(self, node):
        # By identity: steps with equal parameters compare equal
        for index, other in enumerate(self._nodes):
            if other is node:
                return index
        raise ValueError(f"'{node.title}' is not a step of this flowchart")

    def next_node(self, node):
        index = self._index(node)
        return self._nodes[index + 1] if index + 1 < len(self._nodes) else None

    def previous_node(self, node):
        index = self._index(node)
        return self._nodes[index - 1] if index > 0 else None

    def reset_visited(self):
        for node in self:
            node.visited = False

    def set_ids(self, node_id=()):
        """Sequentially number all nodes, the start node being 0."""
        for node in self:
            node.reset_id()
        self.reset_visited()

        next_node = self.get_node("1")
        n = 0
        while next_node:
            next_node = next_node.set_id((*node_id, str(n)))
            n += 1
        self.reset_visited()

    def digest(self, strict=False):
        """Generate a unique hash key for this flowchart.

        Parameters
        ----------
        strict: bool
            Whether to include version information. Default: False

        Returns
        -------
        string
        """
        hasher = hashlib.sha256()
        for node in self:
            hasher.update(bytes(node.digest(strict=strict), "utf-8"))
        return hasher.hexdigest()

    def to_dict(self):
        """Serialize the steps and their parameters in a dict"""
        data = {"class": self.__class__.__name__, "nodes": []}
        for node in self:
            data["nodes"].append(
                {
                    "class": node.step_type,
                    "title": node.title,
                    "parameters": (
                        None if node.parameters is None else node.parameters.to_dict()
                    ),
                }
            )
        return data

    def to_text(self):
        """Return the text describing the flowchart, as written to disk."""
        self.metadata["sha256"] = self.digest()
        self.metadata["sha256_strict"] = self.digest(strict=True)
        return data_files.to_text("flowchart", self.to_dict(), self.metadata)

    def write(self, filename):
        """Write the description of the flowchart to disk"""
        Path(filename).write_text(self.to_text())
        logger.info(f"Wrote flowchart to {filename}")

    def reset_metadata(self, **kwargs):
        self.metadata = {"title": "", "description": ""}
        self.metadata.update(kwargs)

    def describe(self):
        """Print what each step will do."""
        self.set_ids()
        self.reset_visited()
        node = self.get_node("1")
        while node:
            node = node.describe()
        self.reset_visited()

    def run(self):
        """Run the steps in order, stopping at the first whose output fails
        its checks.

        Returns
        -------
        int
            0 if every step succeeded, else VALIDATION_FAILED.
        """
        if self.root_directory is None:
            raise RuntimeError("The flowchart has no root directory")
        Path(self.root_directory).mkdir(parents=True, exist_ok=True)
        self.set_ids()
        self.write(Path(self.root_directory) / "flowchart.flow")

        t0 = time.time()
        node = self.get_node("1")
        while node:
            t_node = time.time()
            try:
                next_node = node.run()
            finally:
                node.close_printing()
            logger.info(
                f"{node.title} took {humanize.naturaldelta(time.time() - t_node)}"
            )
            if node.status != 0:
                job.job(
                    f"Step {'.'.join(node._id)}, {node.title}, failed its checks. "
                    "Stopping."
                )
                return VALIDATION_FAILED
            node = next_node

        job.job(f"Finished in {humanize.naturaldelta(time.time() - t0)}.")
        return 0
