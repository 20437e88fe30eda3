# -*- coding: utf-8 -*-

"""
A dictionary-like workspace through which the steps of a pipeline hand their
artifacts, e.g. the path of the manifest, to later steps.
"""

import collections.abc
import logging
import pprint

logger = logging.getLogger(__name__)


class Variables(collections.abc.MutableMapping):
    def __init__(self, **kwargs):
        self._data = dict(**kwargs)

    def __getitem__(self, key):
        return self._data[key]

    def __setitem__(self, key, value):
        self._data[key] = value

    def __delitem__(self, key):
        del self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        return repr(self._data)

    def __str__(self):
        return pprint.pformat(self._data)

    def __eq__(self, other):
        return self._data == other._data

    def copy(self):
        return self._data.copy()

    @staticmethod
    def variable(string):
        """The name of a variable written as name, $name or ${name}."""
        name = string.strip()
        if name.startswith("$"):
            name = name[1:]
            if name.startswith("{") and name.endswith("}"):
                name = name[1:-1]
        return name

    def value(self, string):
        """The value of a $name reference, or the string unchanged."""
        if isinstance(string, str) and string.startswith("$"):
            return self.get_variable(string)
        return string

    def set_variable(self, variable, value):
        name = self.variable(variable)
        logger.debug(f"Setting workspace variable '{name}' = {value!r}")
        self._data[name] = value

    def get_variable(self, variable):
        name = self.variable(variable)
        if name not in self._data:
            raise RuntimeError(f"Workspace variable '{name}' does not exist.")
        return self._data[name]

    def exists(self, variable):
        return self.variable(variable) in self._data

    def delete(self, variable):
        name = self.variable(variable)
        if name not in self._data:
            raise RuntimeError(f"Workspace variable '{name}' does not exist.")
        del self._data[name]

    def append(self, variable, value):
        """Add a value to a list-valued variable, creating it if needed."""
        name = self.variable(variable)
        self._data.setdefault(name, []).append(value)
