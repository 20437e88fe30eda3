# -*- coding: utf-8 -*-

"""The version of the installed distribution, from its metadata."""

from importlib.metadata import PackageNotFoundError, version

# Reported when running from a source tree that is not installed
FALLBACK_VERSION = "0+unknown"


def get_versions():
    """Return a dict of version information, as the package expects."""
    try:
        result = version("echo-contrast")
    except PackageNotFoundError:
        result = FALLBACK_VERSION
    return {
        "version": result,
        "full-revisionid": None,
        "dirty": None,
        "error": None if result != FALLBACK_VERSION else "not installed",
        "date": None,
    }
