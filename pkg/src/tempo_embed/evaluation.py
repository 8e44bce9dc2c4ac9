# -*- coding: utf-8 -*-

"""Test-time protocol, ranking metrics and the experiment runners.

Evaluation walks a test log in time order. For every interaction it predicts
the next item of the user, records the rank of the true item among all items,
and then applies the ground-truth embedding updates (no parameter updates)
before moving on.
"""

import json
import logging
import math
import multiprocessing
import os
import typing as ty
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from tqdm import tqdm

from .errors import ArgumentError, EmptyLogError, ModelConfigError
from .graphdata import InteractionLog, chronological_split
from .losses import TRAINING_LOSSES, LossKind
from .model import Checkpoint, commit_batch, forward_batch, predict_item_embedding, true_item_rank
from .seeding import derive_seed
from .synthgen import (
    TYPE1_USER_3,
    TYPE2_SECOND_EDGE,
    Type2Spec,
    Type4Spec,
    gen_type1,
    gen_type2,
    gen_type3,
    gen_type4,
    optimal_accuracy,
    type2_batch_size_ratio,
)
from .trainer import Targets, TrainConfig, train

__all__ = [
    "DEFAULT_TRAIN_FRACTION",
    "TIDY_COLUMNS",
    "ExperimentResult",
    "MetricsReport",
    "ranks_to_metrics",
    "run_type1_sweep",
    "run_type2_batch_ratio",
    "run_type2_convergence",
    "run_type3_accuracy",
    "run_type4_comparison",
    "sequential_evaluate",
]

DEFAULT_TRAIN_FRACTION = 16.0 / 17.0
TIDY_COLUMNS = ["experiment", "loss", "param", "seed", "metric", "value"]


@dataclass
class MetricsReport:
    """Ranking metrics over a test log."""

    mrr: float
    recall_at_10: float
    n_test: int
    hits_at_1: int
    ranks: ty.List[int] = field(default_factory=list)
    accuracy_by_target: ty.Optional[ty.Dict[str, float]] = None

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        """Return the metrics without the rank list.

        :return: JSON-ready mapping.
        :rtype: ty.Dict[str, ty.Any]
        """
        document: ty.Dict[str, ty.Any] = {
            "mrr": self.mrr,
            "recall_at_10": self.recall_at_10,
            "n_test": self.n_test,
            "hits_at_1": self.hits_at_1,
        }
        if self.accuracy_by_target is not None:
            document["accuracy_by_target"] = dict(self.accuracy_by_target)
        return document


def ranks_to_metrics(ranks: ty.Sequence[int], k: int = 10) -> MetricsReport:
    """Aggregate 1-based ranks of true items.

    :param ranks: One rank per test interaction.
    :type ranks: ty.Sequence[int]
    :param k: Cutoff of the recall, 10 for R@10.
    :type k: int
    :return: MRR, recall at ``k`` and the number of rank-1 hits.
    :rtype: MetricsReport
    :raises ArgumentError: If there are no ranks or a rank is below 1.
    """
    logger = logging.getLogger(__name__)

    values = np.asarray(ranks, dtype=np.int64)
    if len(values) == 0 or values.min() < 1:
        msg = "Need at least one rank, and ranks start at 1."
        logger.error(msg)
        raise ArgumentError(msg)

    return MetricsReport(
        mrr=float(np.mean(1.0 / values)),
        recall_at_10=float(np.mean(values <= k)),
        n_test=len(values),
        hits_at_1=int(np.sum(values == 1)),
        ranks=values.tolist(),
    )


def sequential_evaluate(
    checkpoint: Checkpoint,
    test_log: InteractionLog,
    targets: ty.Optional[Targets] = None,
) -> MetricsReport:
    """Rank the true item of every test interaction, updating embeddings as it goes.

    The checkpoint's store is copied and left untouched.

    :param checkpoint: Trained parameters and the embeddings at the end of training.
    :type checkpoint: Checkpoint
    :param test_log: Interactions following the training log, over the same id spaces.
    :type test_log: InteractionLog
    :param targets: Named (user, item) edges; ``None`` as item matches any item of the user.
        Their top-1 accuracy is reported when they occur in the test log.
    :type targets: ty.Optional[Targets]
    :return: The metrics.
    :rtype: MetricsReport
    :raises ModelConfigError: If the id spaces differ from the checkpoint's.
    :raises EmptyLogError: If the test log is empty.
    """
    logger = logging.getLogger(__name__)

    params = checkpoint.params
    if (test_log.num_users, test_log.num_items, test_log.feature_dim) != (
        params.num_users,
        params.num_items,
        params.feature_dim,
    ):
        msg = (
            f"Test log {test_log.identifier} has {test_log.num_users} users, "
            f"{test_log.num_items} items and {test_log.feature_dim} features; the checkpoint "
            f"expects {params.num_users}, {params.num_items} and {params.feature_dim}."
        )
        logger.error(msg)
        raise ModelConfigError(msg)

    if len(test_log) == 0:
        msg = f"Cannot evaluate on the empty log {test_log.identifier}."
        logger.error(msg)
        raise EmptyLogError(msg)

    logger.debug(f"Evaluating on {len(test_log)} interactions of {test_log.identifier}...")

    store = checkpoint.store.copy()
    ranks: ty.List[int] = []

    for position in range(len(test_log)):
        users = test_log.users[position : position + 1]
        items = test_log.items[position : position + 1]
        timestamps = test_log.timestamps[position : position + 1]
        user, item = int(users[0]), int(items[0])

        user_deltas, item_deltas = store.deltas(users, items, timestamps)
        predicted = predict_item_embedding(store, params, user, float(user_deltas[0]))
        ranks.append(true_item_rank(store, predicted.value, item))

        forward = forward_batch(
            store,
            params,
            users,
            items,
            test_log.features[position : position + 1],
            user_deltas,
            item_deltas,
        )
        commit_batch(store, forward, users, items, timestamps)

    report = ranks_to_metrics(ranks)

    if targets:
        hits = np.asarray(ranks) == 1
        accuracy: ty.Dict[str, float] = {}
        for name, (user, item) in targets.items():
            mask = test_log.users == user
            if item is not None:
                mask &= test_log.items == item
            if mask.any():
                accuracy[name] = float(hits[mask].mean())
        report.accuracy_by_target = accuracy

    logger.debug(f"Evaluation done: MRR {report.mrr:.4f}, R@10 {report.recall_at_10:.4f}.")
    return report


@dataclass
class ExperimentResult:
    """Tidy per-cell records of an experiment and their summary table."""

    name: str
    records: pd.DataFrame
    summary: pd.DataFrame
    settings: ty.Dict[str, ty.Any] = field(default_factory=dict)

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        """Return the summary document, with non-finite numbers as ``None``.

        :return: JSON-ready mapping.
        :rtype: ty.Dict[str, ty.Any]
        """
        rows = json.loads(self.summary.to_json(orient="records"))
        return {"experiment": self.name, "settings": self.settings, "summary": rows}

    def save(
        self,
        csv_path: ty.Optional[ty.Union[str, os.PathLike]] = None,
        json_path: ty.Optional[ty.Union[str, os.PathLike]] = None,
    ) -> None:
        """Write the tidy records as CSV and the summary as JSON.

        :param csv_path: Destination of the records.
        :type csv_path: ty.Optional[ty.Union[str, os.PathLike]]
        :param json_path: Destination of the summary.
        :type json_path: ty.Optional[ty.Union[str, os.PathLike]]
        """
        if csv_path is not None:
            self.records.to_csv(csv_path, index=False)
        if json_path is not None:
            with open(json_path, "w", encoding="utf-8") as handle:
                json.dump(self.to_dict(), handle, indent=2)


Cell = ty.Tuple[ty.Any, ...]
CellRecords = ty.List[ty.Dict[str, ty.Any]]


def _run_cells(
    worker: ty.Callable[[Cell], CellRecords], cells: ty.Sequence[Cell], jobs: int, desc: str
) -> pd.DataFrame:
    """Run independent experiment cells, in worker processes when ``jobs > 1``.

    Results are collected in cell order either way.

    :param worker: Module-level function turning a cell into tidy records.
    :type worker: ty.Callable[[Cell], CellRecords]
    :param cells: The cells.
    :type cells: ty.Sequence[Cell]
    :param jobs: Number of worker processes.
    :type jobs: int
    :param desc: Progress bar label.
    :type desc: str
    :return: All records, with columns :data:`TIDY_COLUMNS`.
    :rtype: pd.DataFrame
    """
    logger = logging.getLogger(__name__)
    logger.debug(f"Running {len(cells)} cells of {desc} with {jobs} job(s)...")

    records: CellRecords = []
    if jobs > 1:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(processes=jobs) as pool:
            for result in tqdm(pool.imap(worker, cells), total=len(cells), desc=desc, leave=False):
                records.extend(result)
    else:
        for cell in tqdm(cells, desc=desc, leave=False):
            records.extend(worker(cell))

    return pd.DataFrame.from_records(records, columns=TIDY_COLUMNS)


def _record(
    experiment: str, loss: str, param: ty.Any, seed: int, metric: str, value: float
) -> ty.Dict[str, ty.Any]:
    """Build one tidy record."""
    return {
        "experiment": experiment,
        "loss": loss,
        "param": param,
        "seed": seed,
        "metric": metric,
        "value": value,
    }


def _type1_cell(cell: Cell) -> CellRecords:
    """Train every loss on one type-1 network and score user 3's test edges."""
    p, seed, k, train_fraction, cfg_data, losses = cell
    log = gen_type1(k, p, seed=derive_seed(seed, f"experiment.type1.{p}"))
    train_log, test_log = chronological_split(log, train_fraction)

    records = []
    for loss in losses:
        cfg = TrainConfig(**{**cfg_data, "loss_kind": loss, "seed": seed})
        report = train(train_log, cfg)
        metrics = sequential_evaluate(
            report.checkpoint, test_log, targets={"user3": (TYPE1_USER_3, None)}
        )
        accuracy = (metrics.accuracy_by_target or {}).get("user3", math.nan)
        records.append(_record("type1", loss, p, seed, "accuracy", accuracy))
    return records


def run_type1_sweep(
    p_grid: ty.Sequence[float],
    cfg: TrainConfig,
    n_seeds: int,
    k: int = 4000,
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    losses: ty.Sequence[LossKind] = TRAINING_LOSSES,
    jobs: int = 1,
) -> ExperimentResult:
    """Compare the top-1 accuracy on user 3's edges across losses on type-1 networks.

    Every (p, seed) network is shared by all losses.

    :param p_grid: Probabilities of the (3, 4) edge.
    :type p_grid: ty.Sequence[float]
    :param cfg: Template config; the loss and seed are overridden per cell.
    :type cfg: TrainConfig
    :param n_seeds: Number of networks per probability.
    :type n_seeds: int
    :param k: Interactions per network.
    :type k: int
    :param train_fraction: Share of each network used for training.
    :type train_fraction: float
    :param losses: The losses to compare.
    :type losses: ty.Sequence[LossKind]
    :param jobs: Number of worker processes.
    :type jobs: int
    :return: Per-cell accuracies and a summary with the optimal accuracy per loss.
    :rtype: ExperimentResult
    :raises ArgumentError: If a probability is outside [0, 1] or ``n_seeds < 1``.
    """
    logger = logging.getLogger(__name__)

    if any(not 0.0 <= p <= 1.0 for p in p_grid) or n_seeds < 1:
        msg = "p_grid values must lie in [0, 1] and n_seeds must be positive."
        logger.error(msg)
        raise ArgumentError(msg)

    cfg_data = cfg.to_dict()
    names = [loss.value for loss in losses]
    cells = [
        (float(p), cfg.seed + offset, k, train_fraction, cfg_data, names)
        for p in p_grid
        for offset in range(n_seeds)
    ]
    records = _run_cells(_type1_cell, cells, jobs, "type-1 sweep")

    summary = (
        records.groupby(["param", "loss"], sort=True)["value"]
        .agg(accuracy="mean", accuracy_std="std")
        .reset_index()
        .rename(columns={"param": "p"})
    )
    summary["theory_accuracy"] = [
        optimal_accuracy(p, LossKind.from_name(loss))
        for p, loss in zip(summary["p"], summary["loss"])
    ]
    summary["optimal_accuracy"] = [max(p, 1.0 - p) for p in summary["p"]]

    return ExperimentResult(
        name="type1",
        records=records,
        summary=summary,
        settings={"p_grid": list(p_grid), "n_seeds": n_seeds, "k": k, "config": cfg_data},
    )


def _type2_cell(cell: Cell) -> CellRecords:
    """Train one loss on a type-2 network and track the second edge's accuracy per epoch."""
    n_pairs, repetitions, test_repetitions, seed, cfg_data, loss = cell
    log = gen_type2(n_pairs, repetitions + test_repetitions)
    n_train = len(log) * repetitions // (repetitions + test_repetitions)
    train_log = log.slice(0, n_train, identifier=f"{log.identifier}:train")
    test_log = log.slice(n_train, len(log), identifier=f"{log.identifier}:test")

    cfg = TrainConfig(**{**cfg_data, "loss_kind": loss, "seed": seed})
    report = train(train_log, cfg, validation=test_log, targets={"second_edge": TYPE2_SECOND_EDGE})

    records = []
    epochs_to_perfect = math.inf
    for record in report.epochs:
        accuracy = (record.metrics.accuracy_by_target or {}).get("second_edge", math.nan)
        records.append(_record("type2", loss, record.epoch, seed, "accuracy", accuracy))
        if accuracy == 1.0 and math.isinf(epochs_to_perfect):
            epochs_to_perfect = float(record.epoch)
    records.append(_record("type2", loss, "all", seed, "epochs_to_perfect", epochs_to_perfect))
    return records


def run_type2_convergence(
    spec: Type2Spec,
    cfg: TrainConfig,
    n_seeds: int,
    test_repetitions: int = 10,
    losses: ty.Sequence[LossKind] = TRAINING_LOSSES,
    jobs: int = 1,
) -> ExperimentResult:
    """Count the epochs each loss needs to predict user 1's second edge perfectly.

    Training uses ``spec.repetitions`` copies of the base sequence; the test log
    is ``test_repetitions`` further copies.

    :param spec: The network.
    :type spec: Type2Spec
    :param cfg: Template config; the loss and seed are overridden per cell.
    :type cfg: TrainConfig
    :param n_seeds: Number of initializations per loss.
    :type n_seeds: int
    :param test_repetitions: Copies of the base sequence in the test log.
    :type test_repetitions: int
    :param losses: The losses to compare.
    :type losses: ty.Sequence[LossKind]
    :param jobs: Number of worker processes.
    :type jobs: int
    :return: Per-epoch accuracies and the mean epochs-to-perfect per loss (inf if never).
    :rtype: ExperimentResult
    """
    cfg_data = cfg.to_dict()
    cells = [
        (spec.n_pairs, spec.repetitions, test_repetitions, cfg.seed + offset, cfg_data, loss.value)
        for loss in losses
        for offset in range(n_seeds)
    ]
    records = _run_cells(_type2_cell, cells, jobs, "type-2 convergence")

    finals = records[records["metric"] == "epochs_to_perfect"]
    summary = (
        finals.groupby("loss", sort=False)["value"].agg(epochs_to_perfect="mean").reset_index()
    )

    return ExperimentResult(
        name="type2",
        records=records,
        summary=summary,
        settings={"spec": spec.model_dump(), "n_seeds": n_seeds, "config": cfg_data},
    )


def _type3_cell(cell: Cell) -> CellRecords:
    """Train one loss on a type-3 network and record the test accuracy per epoch."""
    n_users, seed, train_fraction, cfg_data, loss = cell
    log = gen_type3(n_users, seed=derive_seed(seed, "experiment.type3"))
    train_log, test_log = chronological_split(log, train_fraction)

    cfg = TrainConfig(**{**cfg_data, "loss_kind": loss, "seed": seed})
    report = train(train_log, cfg, validation=test_log)

    records = []
    for record in report.epochs:
        assert record.metrics is not None
        accuracy = record.metrics.hits_at_1 / record.metrics.n_test
        records.append(_record("type3", loss, record.epoch, seed, "accuracy", accuracy))
        records.append(_record("type3", loss, record.epoch, seed, "mrr", record.metrics.mrr))
    return records


def run_type3_accuracy(
    n_users: int,
    cfg: TrainConfig,
    n_seeds: int,
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    losses: ty.Sequence[LossKind] = TRAINING_LOSSES,
    jobs: int = 1,
) -> ExperimentResult:
    """Track the per-epoch top-1 test accuracy of each loss on type-3 networks.

    :param n_users: Users per network.
    :type n_users: int
    :param cfg: Template config; the loss and seed are overridden per cell.
    :type cfg: TrainConfig
    :param n_seeds: Number of networks per loss.
    :type n_seeds: int
    :param train_fraction: Share of each network used for training.
    :type train_fraction: float
    :param losses: The losses to compare.
    :type losses: ty.Sequence[LossKind]
    :param jobs: Number of worker processes.
    :type jobs: int
    :return: Per-epoch accuracies and their mean per (loss, epoch).
    :rtype: ExperimentResult
    """
    cfg_data = cfg.to_dict()
    cells = [
        (n_users, cfg.seed + offset, train_fraction, cfg_data, loss.value)
        for loss in losses
        for offset in range(n_seeds)
    ]
    records = _run_cells(_type3_cell, cells, jobs, "type-3 accuracy")

    accuracy = records[records["metric"] == "accuracy"]
    summary = (
        accuracy.groupby(["loss", "param"], sort=False)["value"]
        .agg(accuracy="mean")
        .reset_index()
        .rename(columns={"param": "epoch"})
    )

    return ExperimentResult(
        name="type3",
        records=records,
        summary=summary,
        settings={"n_users": n_users, "n_seeds": n_seeds, "config": cfg_data},
    )


def _type4_cell(cell: Cell) -> CellRecords:
    """Train every loss on one type-4 network and record MRR and R@10."""
    spec_data, train_size, sample, cfg_data, losses = cell
    spec = Type4Spec(
        **{
            **spec_data,
            "n_interactions": math.ceil(train_size / DEFAULT_TRAIN_FRACTION),
            "seed": derive_seed(spec_data["seed"], f"experiment.type4.{train_size}.{sample}"),
        }
    )
    log = gen_type4(spec)
    train_log, test_log = chronological_split(log, DEFAULT_TRAIN_FRACTION)

    records = []
    for loss in losses:
        cfg = TrainConfig(**{**cfg_data, "loss_kind": loss, "seed": cfg_data["seed"] + sample})
        report = train(train_log, cfg)
        metrics = sequential_evaluate(report.checkpoint, test_log)
        records.append(_record("type4", loss, train_size, sample, "mrr", metrics.mrr))
        records.append(_record("type4", loss, train_size, sample, "r10", metrics.recall_at_10))
    return records


def run_type4_comparison(
    spec: Type4Spec,
    train_sizes: ty.Sequence[int],
    n_samples: int,
    cfg: TrainConfig,
    losses: ty.Sequence[LossKind] = TRAINING_LOSSES,
    jobs: int = 1,
) -> ExperimentResult:
    """Compare MRR and R@10 of the losses on type-4 networks of several sizes.

    Each network has ``ceil(train_size * 17 / 16)`` interactions and is split
    16:1 into training and test interactions.

    :param spec: Network template; ``n_interactions`` is set per train size.
    :type spec: Type4Spec
    :param train_sizes: Numbers of training interactions.
    :type train_sizes: ty.Sequence[int]
    :param n_samples: Independently seeded networks per size.
    :type n_samples: int
    :param cfg: Template config; the loss is overridden per run.
    :type cfg: TrainConfig
    :param losses: The losses to compare; the first is the baseline.
    :type losses: ty.Sequence[LossKind]
    :param jobs: Number of worker processes.
    :type jobs: int
    :return: Per-sample metrics and a table with mean metrics and % change vs the baseline.
    :rtype: ExperimentResult
    :raises ArgumentError: If ``n_samples < 1``.
    """
    logger = logging.getLogger(__name__)

    if n_samples < 1:
        msg = f"n_samples must be positive, got {n_samples}."
        logger.error(msg)
        raise ArgumentError(msg)

    cfg_data = cfg.to_dict()
    spec_data = spec.model_dump()
    names = [loss.value for loss in losses]
    cells = [
        (spec_data, int(size), sample, cfg_data, names)
        for size in train_sizes
        for sample in range(n_samples)
    ]
    records = _run_cells(_type4_cell, cells, jobs, "type-4 comparison")

    summary = (
        records.pivot_table(
            index=["param", "loss"], columns="metric", values="value", aggfunc="mean", sort=False
        )
        .reset_index()
        .rename(columns={"param": "train_size"})
    )
    summary.columns.name = None

    baseline = summary[summary["loss"] == names[0]].set_index("train_size")
    for metric in ("mrr", "r10"):
        reference = summary["train_size"].map(baseline[metric])
        summary[f"{metric}_change_pct"] = 100.0 * (summary[metric] - reference) / reference

    return ExperimentResult(
        name="type4",
        records=records,
        summary=summary,
        settings={
            "spec": spec_data,
            "train_sizes": list(train_sizes),
            "n_samples": n_samples,
            "config": cfg_data,
        },
    )


def run_type2_batch_ratio(n_pairs: int, repetition_grid: ty.Sequence[int]) -> ExperimentResult:
    """Tabulate the batch-size ratio of user 1's two edges against the repetitions.

    :param n_pairs: Number of users and of items.
    :type n_pairs: int
    :param repetition_grid: Repetition counts.
    :type repetition_grid: ty.Sequence[int]
    :return: One ratio per repetition count.
    :rtype: ExperimentResult
    """
    records = [
        _record(
            "type2-ratio",
            "",
            int(repetitions),
            0,
            "batch_size_ratio",
            type2_batch_size_ratio(n_pairs, int(repetitions)),
        )
        for repetitions in repetition_grid
    ]
    frame = pd.DataFrame.from_records(records, columns=TIDY_COLUMNS)
    summary = frame[["param", "value"]].rename(
        columns={"param": "repetitions", "value": "batch_size_ratio"}
    )
    summary.insert(1, "n_edges", [(n_pairs + 1) * int(r) for r in summary["repetitions"]])

    return ExperimentResult(
        name="type2-ratio",
        records=frame,
        summary=summary.reset_index(drop=True),
        settings={"n_pairs": n_pairs, "repetition_grid": list(repetition_grid)},
    )
