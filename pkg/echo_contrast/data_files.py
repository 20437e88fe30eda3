# -*- coding: utf-8 -*-

"""Reading and writing the versioned text files used for rule tables, band
tables, prompt files and run descriptions.

The files use the same framing as a flowchart file: a magic line naming the
kind of data and its format version, then sections introduced by '#name' lines
holding JSON, terminated by '#end'::

    !echo-contrast measurements 1.0
    #metadata
    {...}
    #data
    [...]
    #end
"""

try:
    import importlib.resources as implib
except Exception:  # pragma: no cover
    import importlib_resources as implib
import json
import logging
from pathlib import Path

from packaging.version import Version

logger = logging.getLogger(__name__)

MAGIC = "!echo-contrast"

# The newest format version this code understands, per kind of file.
supported_versions = {
    "measurements": Version("1.0"),
    "negation-rules": Version("1.0"),
    "prompts": Version("1.0"),
    "flowchart": Version("1.0"),
}


def data_path(filename):
    """The path to a data file shipped with the package."""
    return Path(str(implib.files("echo_contrast") / "data" / filename))


def to_text(kind, data, metadata=None, version="1.0"):
    """Return the framed text for the data.

    Parameters
    ----------
    kind : str
        The kind of data, e.g. 'measurements'.
    data : list or dict
        The JSON-serializable payload.
    metadata : dict, optional
        Descriptive information written before the payload.
    version : str
        The format version.

    Returns
    -------
    str
    """
    text = f"{MAGIC} {kind} {version}\n"
    text += "#metadata\n"
    text += json.dumps({} if metadata is None else metadata, indent=4)
    text += "\n"
    text += "#data\n"
    text += json.dumps(data, indent=4)
    text += "\n"
    text += "#end\n"
    return text


def from_text(text, kind, source="<string>"):
    """Parse framed text, returning the metadata and data.

    Parameters
    ----------
    text : str
        The text of the file.
    kind : str
        The kind of data expected.
    source : str
        A name for the text used in error messages.

    Returns
    -------
    (dict, list or dict)
        The metadata and the data.
    """
    lines = iter(text.splitlines())

    try:
        line = next(lines)
    except StopIteration:
        raise RuntimeError(f"{source} is empty")

    tmp = line.split()
    if len(tmp) < 3 or tmp[0] != MAGIC:
        raise RuntimeError(f"{source} is not an echo-contrast data file -- {line}")
    if tmp[1] != kind:
        raise RuntimeError(f"{source} holds '{tmp[1]}' data, not '{kind}'")

    version = Version(tmp[2])
    if kind in supported_versions and version > supported_versions[kind]:
        raise RuntimeError(
            f"{source} has format version {version}, newer than the supported "
            f"{supported_versions[kind]}"
        )
    logger.debug(f"Reading {kind} version {version} from {source}")

    sections = {}
    section = None
    for lineno, line in enumerate(lines, start=2):
        if line.strip() == "":
            continue
        if line[0] == "#":
            name = line.strip()[1:]
            if name == "end":
                section = None
            else:
                section = sections[name] = []
            continue
        if section is None:
            raise RuntimeError(f"{source}:{lineno}: text outside of a section")
        section.append(line)

    if "data" not in sections:
        raise RuntimeError(f"{source} has no #data section")

    try:
        metadata = json.loads("\n".join(sections.get("metadata", ["{}"])))
        data = json.loads("\n".join(sections["data"]))
    except json.JSONDecodeError as e:
        raise RuntimeError(f"{source}: malformed JSON: {e}") from e

    return metadata, data


def read_data_file(path, kind):
    """Read a framed data file, returning (metadata, data)."""
    path = Path(path).expanduser()
    return from_text(path.read_text(), kind, source=str(path))


def write_data_file(path, kind, data, metadata=None, version="1.0"):
    """Write a framed data file."""
    path = Path(path).expanduser()
    path.write_text(to_text(kind, data, metadata=metadata, version=version))
    logger.info(f"Wrote {kind} data to {path}")
