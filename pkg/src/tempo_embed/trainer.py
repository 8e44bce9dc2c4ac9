# -*- coding: utf-8 -*-

"""Training loop over t-batches.

Batches are processed strictly in plan order. Consecutive batches are grouped
into spans of ``span_size``; the losses of a span are summed and the optimizer
steps once per span. Embeddings committed inside a span stay traced so later
batches backpropagate into them, and are detached when the span ends.
"""

import json
import logging
import os
import time
import typing as ty
from dataclasses import dataclass, field

import numpy as np
from more_itertools import chunked
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from .errors import EmptyLogError, NumericError
from .graphdata import InteractionLog, mean_time_delta
from .losses import TRAINING_LOSSES, LossBreakdown, LossConfig, LossKind, traced_batch_loss
from .model import (
    Checkpoint,
    EmbeddingStore,
    LiveEmbeddings,
    ModelParams,
    commit_batch,
    forward_batch,
    save_checkpoint,
)
from .numgrad import (
    Adam,
    ParameterSet,
    Tensor,
    add,
    backward,
    clip_grad_norm,
    finite_difference_check,
)
from .seeding import derive_rng
from .tbatcher import BatchPlan, BatchSizeDistribution, batch_size_distribution, build_batches
from .version import get_version

if ty.TYPE_CHECKING:
    from .evaluation import MetricsReport

__all__ = [
    "EpochRecord",
    "TrainConfig",
    "TrainReport",
    "Targets",
    "model_gradient_check",
    "run_epoch",
    "save_report",
    "train",
]

Targets = ty.Mapping[str, ty.Tuple[int, ty.Optional[int]]]
BatchCallback = ty.Callable[[int, ty.Tuple[int, ...]], None]


class TrainConfig(BaseModel):
    """Hyperparameters of a training run."""

    model_config = ConfigDict(frozen=True)

    loss_kind: LossKind = LossKind.TBATCH
    epochs: int = Field(10, ge=1)
    learning_rate: float = Field(1e-3, ge=0.0)
    weight_decay: float = Field(1e-5, ge=0.0)
    span_size: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    dim: int = Field(64, ge=1)
    lambda_u: float = Field(1.0, ge=0.0)
    lambda_i: float = Field(1.0, ge=0.0)
    clip_norm: float = Field(5.0, gt=0.0)

    @field_validator("loss_kind", mode="before")
    @classmethod
    def _parse_loss_kind(cls, value: ty.Any) -> LossKind:
        """Accept config spellings such as ``"item-sum"``; only training losses are allowed."""
        kind = LossKind.from_name(value)
        if kind not in TRAINING_LOSSES:
            allowed = ", ".join(member.value for member in TRAINING_LOSSES)
            raise ValueError(f"loss kind {kind.value!r} cannot train; choose one of {allowed}")
        return kind

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        """Return the JSON-ready resolved config.

        :return: Field name to value.
        :rtype: ty.Dict[str, ty.Any]
        """
        return self.model_dump(mode="json")


@dataclass
class EpochRecord:
    """Loss and, when validated, metrics of one epoch."""

    epoch: int
    breakdown: LossBreakdown
    metrics: ty.Optional["MetricsReport"] = None

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        """Return the report entry of the epoch.

        :return: Mapping with the loss terms and optional metrics.
        :rtype: ty.Dict[str, ty.Any]
        """
        entry: ty.Dict[str, ty.Any] = {"epoch": self.epoch, **self.breakdown.to_dict()}
        if self.metrics is not None:
            entry["mrr"] = self.metrics.mrr
            entry["r10"] = self.metrics.recall_at_10
            if self.metrics.accuracy_by_target:
                entry["accuracy_by_target"] = dict(self.metrics.accuracy_by_target)
        return entry


@dataclass
class TrainReport:
    """Outcome of :func:`train`."""

    config: TrainConfig
    epochs: ty.List[EpochRecord]
    wall_seconds: float
    batch_stats: BatchSizeDistribution
    checkpoint: Checkpoint
    checkpoint_path: ty.Optional[str] = None
    version: str = field(default_factory=get_version)

    @property
    def losses(self) -> ty.List[float]:
        """Return the total loss of every epoch."""
        return [record.breakdown.total for record in self.epochs]

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        """Return the report document.

        :return: JSON-ready mapping.
        :rtype: ty.Dict[str, ty.Any]
        """
        return {
            "epochs": [record.to_dict() for record in self.epochs],
            "wall_seconds": self.wall_seconds,
            "config": self.config.to_dict(),
            "batch_stats": self.batch_stats.to_dict(),
            "checkpoint": self.checkpoint_path,
            "version": self.version,
        }


def save_report(
    report: TrainReport,
    path: ty.Union[str, os.PathLike],
    extra: ty.Optional[ty.Mapping[str, ty.Any]] = None,
) -> None:
    """Write a training report as JSON.

    :param report: The report.
    :type report: TrainReport
    :param path: Destination path.
    :type path: ty.Union[str, os.PathLike]
    :param extra: Additional top-level entries, e.g. the invoking command line config.
    :type extra: ty.Optional[ty.Mapping[str, ty.Any]]
    """
    document = report.to_dict()
    document.update(extra or {})
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2)


def _batch_arrays(log: InteractionLog, batch: ty.Sequence[int]) -> ty.Tuple[np.ndarray, ...]:
    """Return users, items, timestamps and features of a batch's interactions."""
    positions = np.asarray(batch, dtype=np.int64)
    return (
        log.users[positions],
        log.items[positions],
        log.timestamps[positions],
        log.features[positions],
    )


def _span_loss(
    store: EmbeddingStore,
    params: ModelParams,
    log: InteractionLog,
    span: ty.Sequence[ty.Tuple[int, ty.Tuple[int, ...]]],
    kind: LossKind,
    loss_cfg: LossConfig,
    live: LiveEmbeddings,
    batch_callback: ty.Optional[BatchCallback] = None,
) -> ty.Tuple[Tensor, LossBreakdown]:
    """Forward a span of batches, committing each one, and sum their losses.

    :param store: Embeddings; mutated batch by batch.
    :type store: EmbeddingStore
    :param params: The parameters.
    :type params: ModelParams
    :param log: The log the batches index into.
    :type log: InteractionLog
    :param span: Pairs of (batch index, interaction positions).
    :type span: ty.Sequence[ty.Tuple[int, ty.Tuple[int, ...]]]
    :param kind: The loss.
    :type kind: LossKind
    :param loss_cfg: Loss sizes and strengths.
    :type loss_cfg: LossConfig
    :param live: Traced embeddings committed earlier in the span.
    :type live: LiveEmbeddings
    :param batch_callback: Called with every batch index and its positions.
    :type batch_callback: ty.Optional[BatchCallback]
    :return: The summed loss and its breakdown.
    :rtype: ty.Tuple[Tensor, LossBreakdown]
    :raises NumericError: If a batch produces a non-finite value.
    """
    logger = logging.getLogger(__name__)

    total: ty.Optional[Tensor] = None
    breakdown = LossBreakdown.zero()

    for batch_index, batch in span:
        if batch_callback is not None:
            batch_callback(batch_index, batch)

        users, items, timestamps, features = _batch_arrays(log, batch)
        user_deltas, item_deltas = store.deltas(users, items, timestamps)

        try:
            forward = forward_batch(
                store, params, users, items, features, user_deltas, item_deltas, live=live
            )
            loss, batch_breakdown = traced_batch_loss(
                kind,
                loss_cfg,
                forward.predicted,
                forward.target,
                forward.user_after,
                forward.user_before,
                forward.item_after,
                forward.item_before,
            )
        except NumericError as exc:
            msg = f"Non-finite loss at batch {batch_index}: {exc}"
            logger.error(msg)
            raise NumericError(msg) from exc

        commit_batch(store, forward, users, items, timestamps, live=live)
        total = loss if total is None else add(total, loss)
        breakdown = breakdown + batch_breakdown

    assert total is not None
    return total, breakdown


def run_epoch(
    log: InteractionLog,
    plan: BatchPlan,
    params: ModelParams,
    optimizer: Adam,
    cfg: TrainConfig,
    batch_callback: ty.Optional[BatchCallback] = None,
) -> ty.Tuple[EmbeddingStore, LossBreakdown]:
    """Train one epoch from freshly initialized embeddings.

    :param log: The training log.
    :type log: InteractionLog
    :param plan: Its batch plan.
    :type plan: BatchPlan
    :param params: The parameters; updated in place.
    :type params: ModelParams
    :param optimizer: The optimizer over ``params``.
    :type optimizer: Adam
    :param cfg: The run config.
    :type cfg: TrainConfig
    :param batch_callback: Called with every batch index and its positions.
    :type batch_callback: ty.Optional[BatchCallback]
    :return: Embeddings at the end of the epoch and the summed loss breakdown.
    :rtype: ty.Tuple[EmbeddingStore, LossBreakdown]
    """
    loss_cfg = LossConfig(
        lambda_u=cfg.lambda_u,
        lambda_i=cfg.lambda_i,
        dim=params.dim,
        num_users=params.num_users,
        num_items=params.num_items,
    )
    store = EmbeddingStore.for_params(params)
    live = LiveEmbeddings()
    epoch_breakdown = LossBreakdown.zero()

    for span in chunked(enumerate(plan.batches), cfg.span_size):
        loss, breakdown = _span_loss(
            store, params, log, span, cfg.loss_kind, loss_cfg, live, batch_callback
        )
        optimizer.zero_grad()
        backward(loss, params.parameters)
        clip_grad_norm(params.parameters, cfg.clip_norm)
        optimizer.step()
        live.clear()
        epoch_breakdown = epoch_breakdown + breakdown

    return store, epoch_breakdown


def train(
    log: InteractionLog,
    cfg: TrainConfig,
    validation: ty.Optional[InteractionLog] = None,
    targets: ty.Optional[Targets] = None,
    checkpoint_path: ty.Optional[ty.Union[str, os.PathLike]] = None,
    batch_callback: ty.Optional[BatchCallback] = None,
    show_progress: bool = False,
) -> TrainReport:
    """Train the embedding model on a log.

    :param log: The training log.
    :type log: InteractionLog
    :param cfg: The run config.
    :type cfg: TrainConfig
    :param validation: Log following ``log`` in time, evaluated after every epoch.
    :type validation: ty.Optional[InteractionLog]
    :param targets: Named (user, item) edges whose top-1 accuracy is tracked on ``validation``.
    :type targets: ty.Optional[Targets]
    :param checkpoint_path: Where to write the final checkpoint.
    :type checkpoint_path: ty.Optional[ty.Union[str, os.PathLike]]
    :param batch_callback: Called with every batch index and its positions.
    :type batch_callback: ty.Optional[BatchCallback]
    :param show_progress: Whether to show a progress bar over epochs.
    :type show_progress: bool
    :return: The report, holding the trained checkpoint.
    :rtype: TrainReport
    :raises EmptyLogError: If the log is empty.
    :raises NumericError: If a batch produces a non-finite loss.
    """
    from .evaluation import sequential_evaluate

    logger = logging.getLogger(__name__)

    if len(log) == 0:
        msg = f"Cannot train on the empty log {log.identifier}."
        logger.error(msg)
        raise EmptyLogError(msg)

    started = time.perf_counter()
    plan = build_batches(log)
    params = ModelParams(
        num_users=log.num_users,
        num_items=log.num_items,
        feature_dim=log.feature_dim,
        dim=cfg.dim,
        time_scale=mean_time_delta(log),
        rng=derive_rng(cfg.seed, "model.init"),
    )
    optimizer = Adam(
        params.parameters, learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay
    )

    records: ty.List[EpochRecord] = []
    store = EmbeddingStore.for_params(params)

    epochs = tqdm(
        range(cfg.epochs),
        desc=f"Training {cfg.loss_kind.value}",
        disable=not show_progress,
        leave=False,
    )
    for epoch in epochs:
        store, breakdown = run_epoch(log, plan, params, optimizer, cfg, batch_callback)

        metrics = None
        if validation is not None and len(validation):
            metrics = sequential_evaluate(Checkpoint(params, store), validation, targets=targets)

        records.append(EpochRecord(epoch=epoch + 1, breakdown=breakdown, metrics=metrics))
        summary = f"Epoch {epoch + 1}/{cfg.epochs}: loss {breakdown.total:.6f}"
        if metrics is not None:
            summary += f", MRR {metrics.mrr:.4f}, R@10 {metrics.recall_at_10:.4f}"
        logger.info(summary)

    checkpoint = Checkpoint(params=params, store=store, config=cfg.to_dict())
    if checkpoint_path is not None:
        save_checkpoint(checkpoint, checkpoint_path)

    return TrainReport(
        config=cfg,
        epochs=records,
        wall_seconds=time.perf_counter() - started,
        batch_stats=batch_size_distribution(plan),
        checkpoint=checkpoint,
        checkpoint_path=None if checkpoint_path is None else str(checkpoint_path),
    )


def _toy_log(seed: int) -> InteractionLog:
    """Build the three-interaction log with two features used by the gradient check."""
    rng = derive_rng(seed, "gradient_check.log")
    return InteractionLog(
        users=rng.integers(0, 2, size=3),
        items=rng.integers(0, 2, size=3),
        timestamps=np.cumsum(rng.uniform(0.5, 2.0, size=3)),
        features=rng.uniform(-1.0, 1.0, size=(3, 2)),
        num_users=2,
        num_items=2,
        identifier="gradient-check",
    )


def model_gradient_check(
    seed: int = 0,
    dim: int = 4,
    loss_kind: LossKind = LossKind.TBATCH,
    eps: float = 1e-5,
) -> float:
    """Compare analytic and numeric gradients of the full model on a toy log.

    All batches form a single span, so gradients also flow through embeddings
    committed by earlier batches.

    :param seed: Seed of the toy log and the initialization.
    :type seed: int
    :param dim: Embedding dimension.
    :type dim: int
    :param loss_kind: The loss.
    :type loss_kind: LossKind
    :param eps: Finite-difference step.
    :type eps: float
    :return: The maximum relative error over all parameter coordinates.
    :rtype: float
    """
    log = _toy_log(seed)
    plan = build_batches(log)
    params = ModelParams(
        num_users=log.num_users,
        num_items=log.num_items,
        feature_dim=log.feature_dim,
        dim=dim,
        time_scale=mean_time_delta(log),
        rng=derive_rng(seed, "model.init"),
    )

    # Nonzero biases so their gradients are exercised away from the origin.
    bias_rng = derive_rng(seed, "gradient_check.bias")
    for parameter in params.parameters:
        if parameter.value.ndim == 1:
            parameter.assign(bias_rng.uniform(-0.5, 0.5, size=parameter.shape))

    loss_cfg = LossConfig(dim=dim, num_users=log.num_users, num_items=log.num_items)

    def total_loss(_: ParameterSet) -> Tensor:
        store = EmbeddingStore.for_params(params)
        loss, _ = _span_loss(
            store,
            params,
            log,
            list(enumerate(plan.batches)),
            loss_kind,
            loss_cfg,
            LiveEmbeddings(),
        )
        return loss

    return finite_difference_check(total_loss, params.parameters, eps=eps)
