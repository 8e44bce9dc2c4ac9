# -*- coding: utf-8 -*-

"""Per-batch training losses.

All three training losses share the regularization terms
``lambda_u / (|U| d) * sum |u - u_prev|^2`` and
``lambda_i / (|I| d) * sum |j - j_prev|^2`` over the nodes updated in the batch
and differ only in how the prediction term is normalized:

* ``tbatch`` divides by ``|S_b| * d``, so interactions in large batches weigh less;
* ``item-sum`` divides by ``d``;
* ``full-sum`` does not normalize.

The un-normalized reference loss is kept as a test oracle.
"""

import logging
import typing as ty
from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import ArgumentError, ModelConfigError, TempoEmbedError
from .numgrad import Tensor, add, constant, scale, squared_l2_distance

__all__ = [
    "LossBreakdown",
    "LossConfig",
    "LossKind",
    "TRAINING_LOSSES",
    "batch_loss",
    "traced_batch_loss",
]


class LossKind(Enum):
    """Enum for the type of batch loss."""

    TBATCH = "tbatch"  # Prediction term averaged over the batch and the dimension.
    ITEM_SUM = "item-sum"  # Prediction term averaged over the dimension only.
    FULL_SUM = "full-sum"  # Plain sum of squared prediction errors.
    UNBATCHED_REFERENCE = "unbatched-reference"  # No normalizers anywhere; tests only.

    @classmethod
    def from_name(cls, name: ty.Union[str, "LossKind"]) -> "LossKind":
        """Resolve a config spelling such as ``"item-sum"`` or ``"item_sum"``.

        :param name: The spelling, or a member.
        :type name: ty.Union[str, LossKind]
        :return: The member.
        :rtype: LossKind
        :raises ArgumentError: If the name is unknown.
        """
        logger = logging.getLogger(__name__)

        if isinstance(name, LossKind):
            return name

        key = str(name).strip().lower().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member

        msg = f"Unknown loss kind {name!r}."
        logger.error(msg)
        raise ArgumentError(msg)


TRAINING_LOSSES = (LossKind.TBATCH, LossKind.ITEM_SUM, LossKind.FULL_SUM)


class LossConfig(BaseModel):
    """Regularization strengths and the sizes the normalizers depend on."""

    model_config = ConfigDict(frozen=True)

    lambda_u: float = Field(1.0, ge=0.0)
    lambda_i: float = Field(1.0, ge=0.0)
    dim: int = Field(..., ge=1)
    num_users: int = Field(..., ge=1)
    num_items: int = Field(..., ge=1)


@dataclass(frozen=True)
class LossBreakdown:
    """Components of a loss value."""

    prediction_term: float
    user_reg_term: float
    item_reg_term: float

    @property
    def total(self) -> float:
        """Return the sum of the three terms."""
        return self.prediction_term + self.user_reg_term + self.item_reg_term

    @classmethod
    def zero(cls) -> "LossBreakdown":
        """Return a breakdown with all terms at zero."""
        return cls(0.0, 0.0, 0.0)

    def __add__(self, other: "LossBreakdown") -> "LossBreakdown":
        """Add two breakdowns term by term."""
        return LossBreakdown(
            self.prediction_term + other.prediction_term,
            self.user_reg_term + other.user_reg_term,
            self.item_reg_term + other.item_reg_term,
        )

    def to_dict(self) -> ty.Dict[str, float]:
        """Return the terms under the report's short keys.

        :return: Mapping with ``loss``, ``pred_term``, ``ureg`` and ``ireg``.
        :rtype: ty.Dict[str, float]
        """
        return {
            "loss": self.total,
            "pred_term": self.prediction_term,
            "ureg": self.user_reg_term,
            "ireg": self.item_reg_term,
        }


def _prediction_factor(kind: LossKind, cfg: LossConfig, batch_size: int) -> float:
    """Return the multiplier of the summed squared prediction errors."""
    if kind is LossKind.TBATCH:
        return 1.0 / (batch_size * cfg.dim)
    if kind is LossKind.ITEM_SUM:
        return 1.0 / cfg.dim
    return 1.0


def _regularization_factors(kind: LossKind, cfg: LossConfig) -> ty.Tuple[float, float]:
    """Return the multipliers of the summed user and item drift terms."""
    if kind is LossKind.UNBATCHED_REFERENCE:
        return cfg.lambda_u, cfg.lambda_i
    return cfg.lambda_u / (cfg.num_users * cfg.dim), cfg.lambda_i / (cfg.num_items * cfg.dim)


def traced_batch_loss(
    kind: LossKind,
    cfg: LossConfig,
    predicted: Tensor,
    target: Tensor,
    user_after: Tensor,
    user_before: Tensor,
    item_after: Tensor,
    item_before: Tensor,
) -> ty.Tuple[Tensor, LossBreakdown]:
    """Build the differentiable loss of one batch.

    :param kind: Which loss to apply.
    :type kind: LossKind
    :param cfg: Regularization strengths and sizes.
    :type cfg: LossConfig
    :param predicted: Predicted item embeddings, one row per interaction.
    :type predicted: Tensor
    :param target: Targets, same shape as ``predicted``.
    :type target: Tensor
    :param user_after: Updated user embeddings, (n_users_updated, dim).
    :type user_after: Tensor
    :param user_before: User embeddings before the batch, same shape.
    :type user_before: Tensor
    :param item_after: Updated item embeddings, (n_items_updated, dim).
    :type item_after: Tensor
    :param item_before: Item embeddings before the batch, same shape.
    :type item_before: Tensor
    :return: The scalar loss and its breakdown.
    :rtype: ty.Tuple[Tensor, LossBreakdown]
    :raises ArgumentError: If the batch is empty.
    :raises ModelConfigError: If a shape does not match the config.
    """
    logger = logging.getLogger(__name__)

    batch_size = predicted.shape[0] if predicted.value.ndim == 2 else 0
    if batch_size == 0:
        msg = "A batch loss needs at least one prediction."
        logger.error(msg)
        raise ArgumentError(msg)

    width = predicted.shape[1]
    if width not in (cfg.dim, cfg.dim + cfg.num_items) or target.shape != predicted.shape:
        msg = (
            f"Predictions of shape {predicted.shape} and targets of shape {target.shape} "
            f"do not fit dim={cfg.dim}, num_items={cfg.num_items}."
        )
        logger.error(msg)
        raise ModelConfigError(msg)

    for label, after, before in (
        ("user", user_after, user_before),
        ("item", item_after, item_before),
    ):
        if after.shape != before.shape or (after.value.size and after.shape[-1] != cfg.dim):
            msg = (
                f"{label.capitalize()} embeddings of shapes {after.shape} and {before.shape} "
                f"do not fit dim={cfg.dim}."
            )
            logger.error(msg)
            raise ModelConfigError(msg)

    prediction = scale(
        squared_l2_distance(predicted, target), _prediction_factor(kind, cfg, batch_size)
    )
    user_factor, item_factor = _regularization_factors(kind, cfg)

    terms = [prediction]
    user_value = item_value = 0.0
    if user_after.value.size:
        user_term = scale(squared_l2_distance(user_after, user_before), user_factor)
        user_value = user_term.item()
        terms.append(user_term)
    if item_after.value.size:
        item_term = scale(squared_l2_distance(item_after, item_before), item_factor)
        item_value = item_term.item()
        terms.append(item_term)

    total = terms[0]
    for term in terms[1:]:
        total = add(total, term)

    return total, LossBreakdown(prediction.item(), user_value, item_value)


def _as_rows(vectors: ty.Sequence[ty.Any], width: int) -> Tensor:
    """Stack vectors into a constant matrix, keeping an empty list as (0, width)."""
    if not vectors:
        return constant(np.zeros((0, width)))
    return constant(np.stack([np.asarray(v, dtype=np.float64).reshape(-1) for v in vectors]))


def batch_loss(
    kind: LossKind,
    cfg: LossConfig,
    predictions: ty.Sequence[ty.Tuple[ty.Any, ty.Any]],
    user_deltas: ty.Sequence[ty.Tuple[ty.Any, ty.Any]] = (),
    item_deltas: ty.Sequence[ty.Tuple[ty.Any, ty.Any]] = (),
) -> LossBreakdown:
    """Evaluate the loss of one batch on plain vectors.

    :param kind: Which loss to apply.
    :type kind: LossKind
    :param cfg: Regularization strengths and sizes.
    :type cfg: LossConfig
    :param predictions: Pairs of (predicted, target) vectors.
    :type predictions: ty.Sequence[ty.Tuple[ty.Any, ty.Any]]
    :param user_deltas: Pairs of (updated, previous) user embeddings.
    :type user_deltas: ty.Sequence[ty.Tuple[ty.Any, ty.Any]]
    :param item_deltas: Pairs of (updated, previous) item embeddings.
    :type item_deltas: ty.Sequence[ty.Tuple[ty.Any, ty.Any]]
    :return: The loss breakdown.
    :rtype: LossBreakdown
    :raises ArgumentError: If ``predictions`` is empty.
    :raises ModelConfigError: If the vectors have inconsistent lengths.
    """
    logger = logging.getLogger(__name__)

    if not predictions:
        msg = "A batch loss needs at least one prediction."
        logger.error(msg)
        raise ArgumentError(msg)

    try:
        predicted = _as_rows([p for p, _ in predictions], cfg.dim)
        target = _as_rows([t for _, t in predictions], cfg.dim)
        users_after = _as_rows([a for a, _ in user_deltas], cfg.dim)
        users_before = _as_rows([b for _, b in user_deltas], cfg.dim)
        items_after = _as_rows([a for a, _ in item_deltas], cfg.dim)
        items_before = _as_rows([b for _, b in item_deltas], cfg.dim)
    except TempoEmbedError:
        raise
    except ValueError as exc:
        msg = f"Loss inputs have inconsistent lengths: {exc}"
        logger.error(msg)
        raise ModelConfigError(msg) from exc

    _, breakdown = traced_batch_loss(
        kind, cfg, predicted, target, users_after, users_before, items_after, items_before
    )
    return breakdown
