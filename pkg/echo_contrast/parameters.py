# -*- coding: utf-8 -*-

"""Control parameters for a step in a pipeline"""

import collections.abc
import json
import logging
import pprint

logger = logging.getLogger(__name__)

KINDS = ("integer", "float", "string", "boolean", "list", "enum")

_TRUE = ("y", "yes", "t", "true", "on", "1")
_FALSE = ("n", "no", "f", "false", "off", "0")


class ConfigurationError(ValueError):
    """A usage or configuration problem, as opposed to a failure of the work."""


def to_bool(value):
    """Convert the usual spellings of true and false to a bool."""
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ConfigurationError(f"'{value}' is not a boolean value")


class Parameter(collections.abc.MutableMapping):
    """A single parameter, with its default, kind, description, etc.

    This object is a dict-like mutable mapping with properties to make it
    appear to be a simple object with attributes.
    """

    def __init__(self, *args, **kwargs):
        self._data = {}
        self.reset()

        for data in args:
            if isinstance(data, dict):
                self.update(data)
            else:
                raise RuntimeError("Positional arguments must be dicts")
        self.update(kwargs)

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
        return f"Parameter({self.value!r})"

    def __str__(self):
        value = self.value
        if value is None:
            return ""
        if self.kind == "list" and not isinstance(value, str):
            return ", ".join(str(v) for v in value)
        fstring = self.format_string
        if fstring is None or fstring == "" or isinstance(value, str):
            return str(value)
        try:
            return f"{value:{fstring}}"
        except (TypeError, ValueError):
            return str(value)

    def __eq__(self, other):
        return self._data == other._data

    def copy(self):
        return self._data.copy()

    @property
    def value(self):
        """The current value, which may be a reference to a workspace
        variable, written $name."""
        if self._data.get("value") is None:
            return self._data["default"]
        return self._data["value"]

    @value.setter
    def value(self, value):
        self._data["value"] = value

    @property
    def default(self):
        return self._data["default"]

    @property
    def kind(self):
        """The type of the parameter: integer, float, string, boolean, list
        or enum."""
        return self._data["kind"]

    @kind.setter
    def kind(self, value):
        if value not in KINDS:
            raise RuntimeError(
                f"The 'kind' must be one of {', '.join(KINDS)}, not '{value}'"
            )
        self._data["kind"] = value

    @property
    def item_kind(self):
        """The kind of the items of a list."""
        return self._data["item_kind"]

    @property
    def enumeration(self):
        return self._data["enumeration"]

    @property
    def format_string(self):
        return self._data["format_string"]

    @property
    def description(self):
        """Short description of this parameter, preferably just a few words"""
        return self._data["description"]

    @property
    def help_text(self):
        """A longer description of this parameter, used for help text."""
        return self._data["help_text"]

    @property
    def is_expr(self):
        """Is the current value a reference to a workspace variable?"""
        value = self.value
        return isinstance(value, str) and len(value) > 1 and value[0] == "$"

    def get(self, context=None):
        """Return the value converted to its kind.

        Parameters
        ----------
        context : dict-like, optional
            The workspace variables used to resolve a $name value.
        """
        result = self.value
        if self.is_expr:
            name = result[1:].strip("{}")
            if context is None or name not in context:
                raise ConfigurationError(
                    f"'{self.description or name}' needs a value: the workspace "
                    f"has no variable '{name}'"
                )
            return context[name]

        if result is None or (self.kind != "string" and result == ""):
            return None
        return self.convert(result)

    def convert(self, value, kind=None):
        """Convert a value to the kind of this parameter."""
        kind = self.kind if kind is None else kind
        try:
            if kind == "integer":
                if isinstance(value, float) and not value.is_integer():
                    raise ValueError(f"{value} is not an integer")
                return int(value)
            if kind == "float":
                return float(value)
            if kind == "boolean":
                return to_bool(value)
            if kind == "list":
                return self._convert_list(value)
            if kind == "enum":
                value = str(value)
                if value not in self.enumeration:
                    raise ValueError(
                        f"'{value}' is not one of {', '.join(self.enumeration)}"
                    )
                return value
            return str(value)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigurationError):
                raise
            raise ConfigurationError(
                f"Bad value for '{self.description}': {e}"
            ) from None

    def _convert_list(self, value):
        if isinstance(value, str):
            text = value.strip()
            if text.startswith("["):
                value = json.loads(text)
            elif text == "":
                value = []
            else:
                value = [item.strip() for item in text.split(",")]
        item_kind = self.item_kind or "string"
        return [self.convert(item, item_kind) for item in value]

    def set(self, value):
        self.value = value

    def reset(self):
        """Reset to an empty state"""
        self._data = {
            "default": None,
            "kind": None,
            "item_kind": None,
            "enumeration": None,
            "format_string": None,
            "group": "",
            "description": None,
            "help_text": None,
        }

    def to_dict(self):
        """The value, which is all that is not fixed by the definition"""
        return {"value": self.value}

    def update(self, data):
        """Update values from a dict.

        This assumes that the static data such as 'kind' and 'default' has
        been created already.
        """
        for key, value in data.items():
            if key in ("value", "default"):
                self._data[key] = value
            elif key not in self:
                raise ConfigurationError(
                    "update: dictionary not compatible with Parameters, which do "
                    f"not have an attribute '{key}'"
                )
            elif key == "kind":
                self.kind = value
            else:
                self._data[key] = value


class Parameters(collections.abc.MutableMapping):
    """A dict-like container for parameters"""

    def __init__(self, defaults={}, data=None):
        self.defaults = defaults
        self._data = {}
        self.initialize()

        if data:
            if isinstance(data, dict):
                self.update(data)
            else:
                raise RuntimeError(
                    "A Parameters object can be initialized with a dict object"
                )

        if logger.isEnabledFor(logging.DEBUG):
            logger.debug("Parameters:\n" + pprint.pformat(self.to_dict()))

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
        return pprint.pformat(self.to_dict())

    def __eq__(self, other):
        return self._data == other._data

    def copy(self):
        return self._data.copy()

    def to_dict(self):
        """Return the values, which is all that the definitions do not fix."""
        return {key: self[key].to_dict() for key in self}

    def from_dict(self, data):
        """Recreate the object from a dictionary"""
        self._data = dict()
        self.initialize()
        self.update(data)

    def initialize(self):
        for key, value in self.defaults.items():
            self[key] = Parameter(value)

    def update(self, data):
        for key in data:
            if key not in self:
                raise ConfigurationError(f"There is no parameter '{key}'")
            self[key].update(data[key])

    def set_values(self, values):
        """Set the values of several parameters from a plain dict."""
        for key, value in values.items():
            if key not in self:
                raise ConfigurationError(f"There is no parameter '{key}'")
            self[key].set(value)

    def values_to_dict(self):
        """Return a dict of the raw values of the parameters formatted for
        printing"""
        data = {}
        for key in self:
            try:
                data[key] = str(self[key])
            except Exception as e:
                logger.warning(f"Cannot format '{key}': {e}")
                data[key] = "#err#"
        return data

    def current_values_to_dict(self, context=None):
        """Return the current values of the parameters, resolving any
        references to workspace variables in the given context."""
        return {key: self[key].get(context=context) for key in self}
