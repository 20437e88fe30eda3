# -*- coding: utf-8 -*-

"""The command-line interface: generate, curate, train, eval, sweep and
pipeline, each running a pipeline of steps in a fresh run directory.

Exit codes: 0 on success, 1 when a step's output fails its checks or the
work fails, and 2 for usage and configuration errors.
"""

import argparse
from datetime import datetime
import logging
import os
from pathlib import Path
import sys

import echo_contrast
from .config import RunConfig
from .curate_node import CurateNode
from .eval_node import EvalNode, write_sweep_summary
from .flowchart import Flowchart
from .generate_node import GenerateNode
from .parameters import ConfigurationError
from . import standard_parameters
from .train_node import TrainNode
import seamm_util.printing as printing

logger = logging.getLogger(__name__)
job = printing.getPrinter()

USAGE_ERROR = 2
OUTPUT_ENVIRONMENT = "ECHO_CONTRAST_OUTPUT"

# The parameter sections each command reads
COMMAND_SECTIONS = {
    "generate": ("generate",),
    "curate": ("curate",),
    "train": ("train",),
    "eval": ("eval",),
    "pipeline": ("generate", "curate", "train", "eval"),
    "sweep": ("generate", "curate", "train", "eval", "sweep"),
}

COMMAND_HELP = {
    "generate": "Generate a synthetic manifest and validate it.",
    "curate": "Negate the captions of a manifest and check their consistency.",
    "train": "Train the dual encoder on the training split of a manifest.",
    "eval": "Evaluate a checkpoint on a split of a manifest.",
    "pipeline": "Generate, curate, train and evaluate in one run.",
    "sweep": "Train and evaluate over the loss-weight and objective rows.",
}


def _flag_names(command):
    """The command-line flag of each parameter of a command, as
    (section, key, flag). Keys shared by several sections are prefixed with
    the section name."""
    sections = COMMAND_SECTIONS[command]
    counts = {}
    for section in sections:
        for key in standard_parameters.sections[section]:
            counts[key] = counts.get(key, 0) + 1

    result = []
    for section in sections:
        for key, definition in standard_parameters.sections[section].items():
            default = definition["default"]
            # Multi-step commands chain these through the workspace
            if len(sections) > 1 and isinstance(default, str) and default[:1] == "$":
                continue
            name = key if counts[key] == 1 else f"{section}_{key}"
            result.append((section, key, "--" + name.replace("_", "-")))
    return result


def _add_parameter_flags(parser, command):
    groups = {}
    for section, key, flag in _flag_names(command):
        definition = standard_parameters.sections[section][key]
        if section not in groups:
            groups[section] = parser.add_argument_group(f"{section} options")
        group = groups[section]
        kwargs = {
            "dest": f"{section}.{key}",
            "default": argparse.SUPPRESS,
            "help": definition.get("help_text", "")
            + f" (default: {definition['default']})",
        }
        if definition["kind"] == "boolean":
            kwargs["action"] = argparse.BooleanOptionalAction
        else:
            kwargs["metavar"] = key.upper()
            if definition["kind"] == "enum":
                kwargs["choices"] = definition["enumeration"]
                kwargs.pop("metavar")
        group.add_argument(flag, **kwargs)


def create_parser():
    parser = argparse.ArgumentParser(
        prog="echo-contrast",
        description=(
            "Contrastive pretraining of paired echocardiogram and report "
            "encoders, with measurement-grounded curation and evaluation."
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"echo-contrast version {echo_contrast.__version__}",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    for command, help_text in COMMAND_HELP.items():
        subparser = subparsers.add_parser(command, help=help_text)
        subparser.add_argument(
            "--config", default=None, help="An ini file of settings, by section."
        )
        subparser.add_argument(
            "--output-dir",
            default=None,
            help=(
                f"Where to create the run directory, by default ${OUTPUT_ENVIRONMENT}"
                " or ./runs"
            ),
        )
        subparser.add_argument(
            "--run-dir",
            default=None,
            help="Use exactly this directory for the run.",
        )
        subparser.add_argument(
            "--dry-run",
            action="store_true",
            help="Describe the steps without running them.",
        )
        subparser.add_argument(
            "--log-level",
            default="WARNING",
            type=str.upper,
            choices=["NOTSET", "DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
            help="The level of informational output, default: '%(default)s'",
        )
        if command in ("pipeline", "sweep"):
            subparser.add_argument(
                "--manifest",
                default=None,
                help="Use this curated manifest instead of generating one.",
            )
        _add_parameter_flags(subparser, command)
    return parser


def run_directory(command, output_dir=None, run_dir=None):
    """Create the directory of a run, <command>_<timestamp> under the output
    directory unless given exactly."""
    if run_dir is not None:
        path = Path(run_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path

    if output_dir is None:
        output_dir = os.environ.get(OUTPUT_ENVIRONMENT, "runs")
    base = Path(output_dir) / f"{command}_{datetime.now():%Y%m%d-%H%M%S}"
    path = base
    n = 0
    while path.exists():
        n += 1
        path = base.with_name(f"{base.name}_{n}")
    path.mkdir(parents=True)
    return path


def load_config(options):
    """The run configuration: the file, if any, overridden by the flags."""
    config = RunConfig(options.config)
    overrides = {}
    for dest, value in vars(options).items():
        if "." in dest:
            section, key = dest.split(".", 1)
            overrides.setdefault(section, {})[key] = value
    for section, values in overrides.items():
        config.override(section, values)
    return config


def _sweep_rows(which):
    if which == "loss ratios":
        return standard_parameters.loss_ratio_rows
    if which == "objectives":
        return standard_parameters.objective_rows
    return standard_parameters.loss_ratio_rows + standard_parameters.objective_rows


def build_flowchart(command, config, directory, manifest=None):
    """Assemble the steps of a command."""
    flowchart = Flowchart(
        name=f"echo-contrast {command}",
        description=COMMAND_HELP[command],
        directory=directory,
    )

    def add(node, section):
        node.parameters = config.parameters(section)
        return flowchart.add_node(node)

    if command in ("generate", "pipeline", "sweep") and manifest is None:
        add(GenerateNode(flowchart), "generate")
    if command == "curate" or (command in ("pipeline", "sweep") and manifest is None):
        add(CurateNode(flowchart), "curate")
    if manifest is not None:
        flowchart.variables.set_variable("manifest", str(manifest))

    if command in ("train", "pipeline"):
        add(TrainNode(flowchart), "train")
    if command in ("eval", "pipeline"):
        add(EvalNode(flowchart), "eval")

    if command == "sweep":
        which = config.parameters("sweep")["rows"].get()
        for label, lambda_view, lambda_neg in _sweep_rows(which):
            node = add(TrainNode(flowchart, title=f"Train {label}"), "train")
            node.parameters["lambda_view"].set(lambda_view)
            node.parameters["lambda_neg"].set(lambda_neg)
            add(EvalNode(flowchart, title=f"Evaluate {label}", label=label), "eval")
    return flowchart


def _setup_logging(options, directory):
    logging.basicConfig(level=options.log_level)
    root = logging.getLogger()
    for handler in root.handlers:
        handler.setLevel(options.log_level)
    root.setLevel(min(root.level, logging.INFO))

    file_handler = logging.FileHandler(directory / "run.log")
    file_handler.setLevel(logging.INFO)
    file_handler.setFormatter(
        logging.Formatter("%(asctime)s %(name)s %(levelname)s: %(message)s")
    )
    root.addHandler(file_handler)

    job_handler = logging.FileHandler(directory / "job.out")
    job_handler.setLevel(printing.JOB)
    job_handler.setFormatter(logging.Formatter(fmt="{message:s}", style="{"))
    job.addHandler(job_handler)
    return [(root, file_handler), (job, job_handler)]


def run(options):
    """Run a parsed command line and return the exit code."""
    command = options.command
    config = load_config(options)
    sections = COMMAND_SECTIONS[command]
    manifest = getattr(options, "manifest", None)
    if manifest is not None and not Path(manifest).exists():
        raise FileNotFoundError(f"There is no manifest {manifest}")

    if options.dry_run:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(printing.NORMAL)
        job.addHandler(console_handler)
        try:
            build_flowchart(command, config, None, manifest).describe()
        finally:
            job.removeHandler(console_handler)
        return 0

    directory = run_directory(command, options.output_dir, options.run_dir)
    handlers = _setup_logging(options, directory)
    try:
        flowchart = build_flowchart(command, config, directory, manifest)
        flowchart.metadata["config_digest"] = config.write(directory, sections)
        status = flowchart.run()

        if command == "sweep" and flowchart.variables.exists("reports"):
            table = write_sweep_summary(
                flowchart.variables.get_variable("reports"), directory / "summary.csv"
            )
            job.job(table.to_string(float_format=lambda x: f"{x:.3f}"))
        logger.info(f"The run is in {directory}")
        return status
    finally:
        for owner, handler in handlers:
            handler.close()
            owner.removeHandler(handler)


def main(argv=None):
    """The entry point of the echo-contrast command.

    Returns
    -------
    int
        The exit code.
    """
    parser = create_parser()
    try:
        options = parser.parse_args(argv)
    except SystemExit as e:
        return e.code

    try:
        return run(options)
    except (ConfigurationError, FileNotFoundError) as e:
        parser.print_usage(sys.stderr)
        print(f"echo-contrast {options.command}: error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as e:
        logger.exception(f"{options.command} failed")
        print(f"echo-contrast {options.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
