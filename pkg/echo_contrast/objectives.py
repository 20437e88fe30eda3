# -*- coding: utf-8 -*-

"""The three pretraining losses and their weighted combination.

* the symmetric image-text InfoNCE loss,
* the view-informed supervised contrastive loss over image-image similarities,
  where images sharing a view are positives, and
* the negation loss, a binary cross-entropy with logits pushing each caption
  away from its negated rewrite.

The total is ``l_clip + lambda_view * l_view + lambda_neg * l_neg``.
"""

from dataclasses import asdict, dataclass
import logging
import math

import torch
import torch.nn.functional as F

from .embedding import (
    EmbeddingBatch,
    Role,
    SimilarityKind,
    ViewLabelBatch,
    mask_self_similarity,
    normalize,
    similarity,
    temperature_value,
)

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_VIEW = 0.5
DEFAULT_LAMBDA_NEG = 0.1


@dataclass(frozen=True)
class LossBreakdown:
    """The loss components of one step and the weights that combined them."""

    l_clip: float
    l_view: float
    l_neg: float
    total: float
    lambda_view: float = DEFAULT_LAMBDA_VIEW
    lambda_neg: float = DEFAULT_LAMBDA_NEG

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"Loss component '{name}' is not finite: {value}")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PositiveSetMask:
    """M[i][j] is true iff images i and j share a view and i != j."""

    matrix: torch.Tensor

    @property
    def n_positives(self):
        """The size of each anchor's positive set, |P(i)|."""
        return self.matrix.sum(dim=1)

    @property
    def denominators(self):
        """d_i = max(1, |P(i)|)."""
        return self.n_positives.clamp(min=1)


def positive_set_mask(views):
    if not isinstance(views, ViewLabelBatch):
        views = ViewLabelBatch(views)
    labels = views.labels
    same = labels.unsqueeze(0) == labels.unsqueeze(1)
    same.fill_diagonal_(False)
    return PositiveSetMask(same)


def ce_row(s):
    """Row-wise cross-entropy against the diagonal, averaged over rows.

    Parameters
    ----------
    s : SimilarityMatrix
        A square matrix with finite entries.

    Returns
    -------
    torch.Tensor
        A non-negative 0-d tensor.
    """
    if not s.is_square:
        raise ValueError(f"ce_row needs a square similarity matrix, not {s.shape}")
    if not bool(torch.isfinite(s.entries).all()):
        raise ValueError("ce_row needs finite similarity entries")
    targets = torch.arange(s.entries.shape[0])
    return F.cross_entropy(s.entries, targets)


def clip_loss(s_it, s_ti, atol=1e-10):
    """The symmetric image-text loss, 1/2 (ce_row(S_IT) + ce_row(S_TI))."""
    if s_it.shape != tuple(reversed(s_ti.shape)) or not torch.allclose(
        s_it.entries.detach(), s_ti.entries.detach().T, rtol=0.0, atol=atol
    ):
        raise ValueError(
            "The text-image similarities are not the transpose of the image-text "
            "similarities"
        )
    return 0.5 * (ce_row(s_it) + ce_row(s_ti))


def view_contrastive_loss(s_ii, views):
    """The view-informed contrastive loss over masked image-image similarities.

    For anchor i, each same-view image j contributes
    -log(exp(S_ij) / sum over k != i of exp(S_ik)); the contributions are
    divided by d_i = max(1, |P(i)|) and averaged over the batch. Anchors
    without positives contribute exactly 0.
    """
    if s_ii.kind != SimilarityKind.IMAGE_IMAGE_MASKED or s_ii.excluded is None:
        raise ValueError(
            "The view contrastive loss needs masked image_image similarities, "
            f"not {s_ii.kind.value}"
        )
    if not isinstance(views, ViewLabelBatch):
        views = ViewLabelBatch(views)
    n = s_ii.entries.shape[0]
    if len(views) != n:
        raise ValueError(
            f"There are {len(views)} view labels for a batch of {n} images"
        )

    excluded = s_ii.excluded
    valid = ~excluded
    positives = positive_set_mask(views)

    # Stable log-softmax over the valid entries of each row
    row_max = s_ii.entries.detach().amax(dim=1, keepdim=True)
    row_max = torch.where(torch.isfinite(row_max), row_max, torch.zeros_like(row_max))
    shifted = (s_ii.entries - row_max).masked_fill(excluded, 0.0)
    denominator = (torch.exp(shifted) * valid).sum(dim=1, keepdim=True)
    has_valid = valid.any(dim=1, keepdim=True)
    denominator = torch.where(has_valid, denominator, torch.ones_like(denominator))
    log_prob = shifted - torch.log(denominator)

    weights = positives.matrix.to(log_prob.dtype)
    per_anchor = -(weights * log_prob).sum(dim=1) / positives.denominators
    return per_anchor.mean()


def negation_loss(z_text, z_negated, tau):
    """BCE with logits against target 0 for u_i = tau <z_text_i, z_negated_i>."""
    if z_text.rows.shape != z_negated.rows.shape:
        raise ValueError(
            f"Caption embeddings {tuple(z_text.rows.shape)} and negated caption "
            f"embeddings {tuple(z_negated.rows.shape)} differ in shape"
        )
    if z_text.role != Role.TEXT or z_negated.role != Role.NEGATED_TEXT:
        raise ValueError(
            "The negation loss pairs text with negated_text rows, not "
            f"{z_text.role.value} with {z_negated.role.value}"
        )
    u = negation_logits(z_text, z_negated, tau)
    return F.binary_cross_entropy_with_logits(u, torch.zeros_like(u))


def negation_logits(z_text, z_negated, tau):
    return temperature_value(tau) * (z_text.rows * z_negated.rows).sum(dim=1)


def _scalar(value):
    if isinstance(value, torch.Tensor):
        return value.detach().item()
    return float(value)


def combined_loss(
    l_clip,
    l_view,
    l_neg,
    lambda_view=DEFAULT_LAMBDA_VIEW,
    lambda_neg=DEFAULT_LAMBDA_NEG,
):
    """Combine the three components into a LossBreakdown."""
    l_clip, l_view, l_neg = (_scalar(x) for x in (l_clip, l_view, l_neg))
    lambda_view, lambda_neg = float(lambda_view), float(lambda_neg)
    total = l_clip + lambda_view * l_view + lambda_neg * l_neg
    return LossBreakdown(l_clip, l_view, l_neg, total, lambda_view, lambda_neg)


def objective(
    z_image,
    z_text,
    z_negated,
    views,
    tau,
    lambda_view=DEFAULT_LAMBDA_VIEW,
    lambda_neg=DEFAULT_LAMBDA_NEG,
):
    """The total pretraining loss for one batch of raw embeddings.

    The embeddings are normalized here, so gradients are taken with respect
    to the raw encoder outputs.

    Returns
    -------
    (torch.Tensor, LossBreakdown)
        The total as a graph-attached tensor, and its components.
    """
    z_image = normalize(z_image)
    z_text = normalize(z_text)
    z_negated = normalize(z_negated)

    s_it = similarity(z_image, z_text, tau)
    s_ti = s_it.transpose()
    s_ii = mask_self_similarity(similarity(z_image, z_image, tau))

    l_clip = clip_loss(s_it, s_ti)
    l_view = view_contrastive_loss(s_ii, views)
    l_neg = negation_loss(z_text, z_negated, tau)
    for name, value in (("l_clip", l_clip), ("l_view", l_view), ("l_neg", l_neg)):
        if not bool(torch.isfinite(value)):
            raise FloatingPointError(f"The loss component {name} is not finite")

    total = l_clip + lambda_view * l_view + lambda_neg * l_neg
    breakdown = combined_loss(l_clip, l_view, l_neg, lambda_view, lambda_neg)
    return total, breakdown


@dataclass
class LossGradients:
    """Gradients of the total loss with respect to every input."""

    image: torch.Tensor
    text: torch.Tensor
    negated: torch.Tensor
    log_temperature: torch.Tensor
    breakdown: LossBreakdown


def loss_gradients(
    z_image,
    z_text,
    z_negated,
    views,
    log_temperature,
    lambda_view=DEFAULT_LAMBDA_VIEW,
    lambda_neg=DEFAULT_LAMBDA_NEG,
):
    """Differentiate the total loss by automatic differentiation.

    Parameters
    ----------
    z_image, z_text, z_negated : EmbeddingBatch
        Raw (unnormalized) embeddings.
    views : ViewLabelBatch or sequence of int
    log_temperature : float or torch.Tensor
        log(tau).

    Returns
    -------
    LossGradients
    """
    leaves = [
        z.rows.detach().clone().requires_grad_(True)
        for z in (z_image, z_text, z_negated)
    ]
    log_tau = torch.as_tensor(log_temperature, dtype=z_image.rows.dtype)
    log_tau = log_tau.detach().clone().requires_grad_(True)

    total, breakdown = objective(
        EmbeddingBatch(leaves[0], Role.IMAGE),
        EmbeddingBatch(leaves[1], Role.TEXT),
        EmbeddingBatch(leaves[2], Role.NEGATED_TEXT),
        views,
        torch.exp(log_tau),
        lambda_view,
        lambda_neg,
    )
    grads = torch.autograd.grad(total, leaves + [log_tau])
    for name, grad in zip(("image", "text", "negated", "log_temperature"), grads):
        if not bool(torch.isfinite(grad).all()):
            raise FloatingPointError(
                f"The gradient with respect to {name} is not finite"
            )
    return LossGradients(*grads, breakdown)
