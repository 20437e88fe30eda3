# -*- coding: utf-8 -*-

"""Embedding batches, view labels, the learnable temperature and the
similarity matrices the contrastive objectives consume.

All tensors are float64 on the CPU. The diagonal of a masked image-image
similarity matrix holds -inf for display, but the objectives never push it
through exp(); they use the ``excluded`` mask instead.
"""

from dataclasses import dataclass, field
import enum
import logging
import math

import torch

logger = logging.getLogger(__name__)

DTYPE = torch.float64
INITIAL_TEMPERATURE = 1.0 / 0.07
MAXIMUM_TEMPERATURE = 100.0
SENTINEL = float("-inf")


class Role(enum.Enum):
    """What an embedding row represents."""

    IMAGE = "image"
    TEXT = "text"
    NEGATED_TEXT = "negated_text"


class SimilarityKind(enum.Enum):
    IMAGE_TEXT = "image_text"
    TEXT_IMAGE = "text_image"
    IMAGE_IMAGE = "image_image"
    IMAGE_IMAGE_MASKED = "image_image_masked"
    TEXT_TEXT = "text_text"


_TEXT_ROLES = (Role.TEXT, Role.NEGATED_TEXT)


def _kind_for(a, b):
    if a == Role.IMAGE and b == Role.IMAGE:
        return SimilarityKind.IMAGE_IMAGE
    if a == Role.IMAGE:
        return SimilarityKind.IMAGE_TEXT
    if b == Role.IMAGE:
        return SimilarityKind.TEXT_IMAGE
    return SimilarityKind.TEXT_TEXT


@dataclass
class EmbeddingBatch:
    """A B x d block of embedding rows sharing one role.

    Attributes
    ----------
    rows : torch.Tensor
        The B x d float64 embeddings. Gradients flow through them.
    role : Role
        Whether the rows are images, captions or negated captions.
    """

    rows: torch.Tensor
    role: Role = Role.IMAGE

    def __post_init__(self):
        self.role = Role(self.role)
        if not isinstance(self.rows, torch.Tensor):
            self.rows = torch.as_tensor(self.rows, dtype=DTYPE)
        elif self.rows.dtype != DTYPE:
            self.rows = self.rows.to(DTYPE)
        if self.rows.dim() != 2:
            raise ValueError(
                f"An embedding batch must be a B x d matrix, not shape "
                f"{tuple(self.rows.shape)}"
            )
        if self.rows.shape[0] < 1 or self.rows.shape[1] < 1:
            raise ValueError(
                f"An embedding batch needs B >= 1 and d >= 1, got shape "
                f"{tuple(self.rows.shape)}"
            )
        if not bool(torch.isfinite(self.rows).all()):
            bad = torch.nonzero(~torch.isfinite(self.rows).all(dim=1))[0, 0]
            raise ValueError(f"Embedding row {int(bad)} has non-finite entries")

    def __len__(self):
        return self.rows.shape[0]

    @property
    def size(self):
        """The number of rows, B."""
        return self.rows.shape[0]

    @property
    def dim(self):
        """The embedding dimension, d."""
        return self.rows.shape[1]


@dataclass
class ViewLabelBatch:
    """Integer-coded view labels, one per embedding row."""

    labels: torch.Tensor

    def __post_init__(self):
        self.labels = torch.as_tensor(self.labels, dtype=torch.long).reshape(-1)

    def __len__(self):
        return self.labels.shape[0]


class Temperature(torch.nn.Module):
    """The learnable temperature, tau = exp(log_value).

    The optimizer updates ``log_value`` freely and the trainer calls
    :meth:`clamp_` after each step, which keeps tau <= 100.
    """

    def __init__(self, value=INITIAL_TEMPERATURE, maximum=MAXIMUM_TEMPERATURE):
        super().__init__()
        if not value > 0:
            raise ValueError(f"The temperature must be positive, not {value}")
        self.maximum = maximum
        self.log_value = torch.nn.Parameter(
            torch.tensor(math.log(value), dtype=DTYPE)
        )

    @property
    def value(self):
        """tau as a 0-d tensor attached to the graph."""
        return torch.exp(self.log_value)

    def forward(self):
        return self.value

    @torch.no_grad()
    def clamp_(self):
        self.log_value.clamp_(max=math.log(self.maximum))
        return self

    def __float__(self):
        return float(self.value.detach())


def temperature_value(tau):
    """Return tau as a float64 tensor whatever form it was given in."""
    if isinstance(tau, Temperature):
        return tau.value
    if isinstance(tau, torch.Tensor):
        return tau.to(DTYPE)
    return torch.tensor(float(tau), dtype=DTYPE)


@dataclass
class SimilarityMatrix:
    """Temperature-scaled similarities between two embedding batches.

    ``excluded`` marks entries that take no part in any softmax. Only the
    masked image-image matrix has one.
    """

    entries: torch.Tensor
    kind: SimilarityKind
    excluded: torch.Tensor = field(default=None)

    @property
    def shape(self):
        return tuple(self.entries.shape)

    @property
    def is_square(self):
        shape = self.entries.shape
        return self.entries.dim() == 2 and shape[0] == shape[1]

    def transpose(self):
        """The matrix seen from the other side, e.g. text_image from image_text."""
        kind = {
            SimilarityKind.IMAGE_TEXT: SimilarityKind.TEXT_IMAGE,
            SimilarityKind.TEXT_IMAGE: SimilarityKind.IMAGE_TEXT,
        }.get(self.kind, self.kind)
        excluded = None if self.excluded is None else self.excluded.T
        return SimilarityMatrix(self.entries.T, kind, excluded)


def normalize(batch):
    """Scale every row to unit L2 norm.

    Parameters
    ----------
    batch : EmbeddingBatch

    Returns
    -------
    EmbeddingBatch
        A new batch with the same role.

    Raises
    ------
    ValueError
        If a row is zero, naming its index.
    """
    norms = torch.linalg.vector_norm(batch.rows, dim=1)
    zero = torch.nonzero(norms == 0)
    if zero.numel() > 0:
        raise ValueError(
            f"Cannot normalize embedding row {int(zero[0, 0])}: it is zero"
        )
    return EmbeddingBatch(batch.rows / norms.unsqueeze(1), batch.role)


def similarity(a, b, tau):
    """entries[i][j] = tau * <a_i, b_j>.

    The kind follows from the roles, e.g. image rows against text rows give
    an image_text matrix.
    """
    if a.dim != b.dim:
        raise ValueError(
            f"Embedding dimensions differ: {a.dim} for {a.role.value} and "
            f"{b.dim} for {b.role.value}"
        )
    entries = temperature_value(tau) * (a.rows @ b.rows.T)
    return SimilarityMatrix(entries, _kind_for(a.role, b.role))


def mask_self_similarity(s):
    """Remove each image's similarity with itself from the matrix.

    The diagonal shows the -inf sentinel and is recorded in ``excluded``;
    off-diagonal entries are untouched.
    """
    if not s.is_square:
        raise ValueError(
            f"Only a square similarity matrix can be masked, not shape {s.shape}"
        )
    if s.kind != SimilarityKind.IMAGE_IMAGE:
        raise ValueError(
            f"Only image_image similarities are masked, not {s.kind.value}"
        )
    n = s.entries.shape[0]
    excluded = torch.eye(n, dtype=torch.bool)
    entries = s.entries.masked_fill(excluded, SENTINEL)
    return SimilarityMatrix(entries, SimilarityKind.IMAGE_IMAGE_MASKED, excluded)
