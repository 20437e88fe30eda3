# -*- coding: utf-8 -*-

"""
echo_contrast
Contrastive pretraining of echocardiogram and report encoders, with
measurement-grounded curation and evaluation.
"""

# Bring up the main classes and functions so that they appear to be directly
# in the echo_contrast package.

from echo_contrast.parameters import ConfigurationError  # noqa: F401
from echo_contrast.parameters import Parameter  # noqa: F401
from echo_contrast.parameters import Parameters  # noqa: F401
import echo_contrast.standard_parameters  # noqa: F401
from echo_contrast.variables import Variables  # noqa: F401
from echo_contrast.config import RunConfig  # noqa: F401
from echo_contrast.config import UserRC  # noqa: F401
from echo_contrast.embedding import EmbeddingBatch  # noqa: F401
from echo_contrast.embedding import Role  # noqa: F401
from echo_contrast.embedding import Temperature  # noqa: F401
from echo_contrast.embedding import normalize  # noqa: F401
from echo_contrast.embedding import similarity  # noqa: F401
from echo_contrast.objectives import LossBreakdown  # noqa: F401
from echo_contrast.objectives import clip_loss  # noqa: F401
from echo_contrast.objectives import combined_loss  # noqa: F401
from echo_contrast.objectives import negation_loss  # noqa: F401
from echo_contrast.objectives import objective  # noqa: F401
from echo_contrast.objectives import view_contrastive_loss  # noqa: F401
from echo_contrast.encoders import DualEncoder  # noqa: F401
from echo_contrast.encoders import Vocabulary  # noqa: F401
from echo_contrast.guidelines import MeasurementTable  # noqa: F401
from echo_contrast.guidelines import SeverityGrade  # noqa: F401
from echo_contrast.guidelines import Verdict  # noqa: F401
from echo_contrast.guidelines import check_consistency  # noqa: F401
from echo_contrast.guidelines import select_caption  # noqa: F401
from echo_contrast.negation import NegationRules  # noqa: F401
from echo_contrast.negation import batch_negate  # noqa: F401
from echo_contrast.negation import negate_caption  # noqa: F401
from echo_contrast.synthetic import SamplePair  # noqa: F401
from echo_contrast.synthetic import SyntheticSpec  # noqa: F401
from echo_contrast.synthetic import generate  # noqa: F401
from echo_contrast.synthetic import read_manifest  # noqa: F401
from echo_contrast.synthetic import validate_manifest  # noqa: F401
from echo_contrast.training import TrainConfig  # noqa: F401
from echo_contrast.training import train  # noqa: F401
from echo_contrast.evaluation import EvalConfig  # noqa: F401
from echo_contrast.evaluation import MetricReport  # noqa: F401
from echo_contrast.evaluation import evaluate  # noqa: F401
from echo_contrast.node import Node  # noqa: F401
from echo_contrast.start_node import StartNode  # noqa: F401
from echo_contrast.flowchart import Flowchart  # noqa: F401

# Handle the version
from ._version import get_versions  # noqa: E402

versions = get_versions()
__version__ = versions["version"]
__git_revision__ = versions["full-revisionid"]
del get_versions, versions
