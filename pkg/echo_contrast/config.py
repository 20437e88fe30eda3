# -*- coding: utf-8 -*-

"""Run configuration files and the user's rc file.

A run configuration is an ini file with a [VERSION] section and one section
per command::

    [VERSION]
    file = 1.0

    [train]
    lambda_view = 0.25
    lambda_neg = 0.5

Values override the parameter defaults and are in turn overridden by
command-line flags. Unknown sections and keys are errors, so a typo cannot
silently leave a default in place.
"""

import configparser
import hashlib
import logging
from pathlib import Path

from packaging.version import Version

from .parameters import ConfigurationError, Parameters
from . import standard_parameters

logger = logging.getLogger(__name__)

FILE_VERSION = "1.0"

# Used in getters to indicate the default behaviour when a specific option is
# not found is to raise an exception, so that None is a valid fallback.
_UNSET = object()


class RunConfig(object):
    """The settings of a run, by command section.

    Parameters
    ----------
    path : str or pathlib.Path, optional
        An ini file to read.
    text : str, optional
        The contents of an ini file, instead of a path.
    """

    def __init__(self, path=None, text=None):
        self.path = None if path is None else Path(path)
        self._config = configparser.ConfigParser(interpolation=None)
        self._config.optionxform = str
        self._overrides = {}

        try:
            if self.path is not None:
                if not self.path.exists():
                    raise FileNotFoundError(f"There is no configuration file {path}")
                self._config.read(self.path)
            elif text is not None:
                self._config.read_string(text)
        except configparser.Error as e:
            raise ConfigurationError(f"Cannot parse the configuration: {e}") from None
        self._check()

    def _check(self):
        source = "the configuration" if self.path is None else str(self.path)
        if "VERSION" in self._config:
            version = self._config["VERSION"].get("file", FILE_VERSION)
            if Version(version) > Version(FILE_VERSION):
                raise ConfigurationError(
                    f"{source} has version {version}, newer than {FILE_VERSION}"
                )
        for section in self._config.sections():
            if section == "VERSION":
                continue
            if section not in standard_parameters.sections:
                raise ConfigurationError(
                    f"{source}: unknown section [{section}]; the sections are "
                    f"{', '.join(standard_parameters.sections)}"
                )
            known = standard_parameters.sections[section]
            for key in self._config[section]:
                if key not in known:
                    raise ConfigurationError(
                        f"{source}: [{section}] has no setting '{key}'"
                    )

    def override(self, section, values):
        """Apply command-line values on top of the file."""
        known = standard_parameters.sections[section]
        for key in values:
            if key not in known:
                raise ConfigurationError(f"[{section}] has no setting '{key}'")
        self._overrides.setdefault(section, {}).update(values)

    def get(self, section, option, fallback=_UNSET):
        if option in self._overrides.get(section, {}):
            return self._overrides[section][option]
        if self._config.has_option(section, option):
            return self._config.get(section, option)
        if fallback is _UNSET:
            raise KeyError(f"[{section}] {option} is not set")
        return fallback

    def parameters(self, section):
        """The Parameters of a section: defaults, then the file, then flags."""
        P = Parameters(defaults=standard_parameters.sections[section])
        if self._config.has_section(section):
            P.set_values(dict(self._config[section]))
        P.set_values(self._overrides.get(section, {}))
        # Convert now so bad values are reported before any work starts
        for key in P:
            if not P[key].is_expr:
                P[key].get()
        return P

    def to_text(self, sections=None):
        """The resolved configuration as an ini file."""
        sections = standard_parameters.sections if sections is None else sections
        resolved = configparser.ConfigParser(interpolation=None)
        resolved.optionxform = str
        resolved["VERSION"] = {"file": FILE_VERSION}
        for section in sections:
            P = self.parameters(section)
            resolved[section] = P.values_to_dict()
        lines = []
        for section in resolved.sections():
            lines.append(f"[{section}]")
            for key, value in resolved[section].items():
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)

    def digest(self, sections=None):
        """SHA-256 of the resolved configuration."""
        return hashlib.sha256(self.to_text(sections).encode()).hexdigest()

    def write(self, directory, sections=None):
        """Write the resolved configuration and its hash to a run directory."""
        directory = Path(directory)
        text = self.to_text(sections)
        digest = hashlib.sha256(text.encode()).hexdigest()
        (directory / "config.ini").write_text(text)
        (directory / "config.sha256").write_text(digest + "\n")
        logger.info(f"Resolved configuration {digest}")
        return digest


class Singleton(object):
    _instances = {}

    def __new__(class_, *args, **kwargs):
        if class_ not in class_._instances:
            class_._instances[class_] = super(Singleton, class_).__new__(class_)
        return class_._instances[class_]


class UserRC(Singleton):
    """The user's rc file, holding metadata about the person running jobs.

    Only [USER] information belongs here, never settings that change results,
    so a run is reproducible from its resolved configuration alone.
    """

    def __init__(self, path="~/.echo_contrast.d/echo_contrastrc"):
        self._config = configparser.ConfigParser(interpolation=None)
        self.path = Path(path).expanduser()

        if self.path.exists():
            self._config.read(self.path)
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._save()

        if "VERSION" not in self._config:
            self._config["VERSION"] = {"file": FILE_VERSION}
            self._save()

        for section in self._config.sections():
            if section not in ("VERSION", "USER"):
                logger.warning(
                    f"Ignoring section [{section}] of {self.path}: it holds only "
                    "[USER] information"
                )

    def __contains__(self, key):
        return key in self._config

    def get(self, section, option, fallback=_UNSET):
        if fallback is _UNSET:
            return self._config.get(section, option)
        return self._config.get(section, option, fallback=fallback)

    def set(self, section, option, value):
        if section != "USER":
            raise ConfigurationError(f"The rc file holds only [USER], not [{section}]")
        if not self._config.has_section(section):
            self._config.add_section(section)
        self._config.set(section, option, value)
        self._save()

    def user(self):
        """The [USER] metadata as a dict."""
        if "USER" not in self._config:
            return {}
        return dict(self._config["USER"])

    def _save(self):
        with open(self.path, "w") as fd:
            if "USER" not in self:
                fd.write(
                    """
# [USER]
# Who runs the jobs, recorded with every run

# name = Last, First
# ORCID = xxxx-xxxx-xxxx-xxxx
# affiliation = Your institution
"""
                )
            self._config.write(fd)

    def re_read(self):
        self._config.read(self.path)
