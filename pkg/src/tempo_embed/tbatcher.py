# -*- coding: utf-8 -*-

"""Partitioning of interaction logs into t-batches.

A t-batch holds interactions with pairwise distinct users and pairwise distinct
items. Each interaction goes to batch ``max(U[u] + 1, I[j] + 1)`` where ``U[u]``
and ``I[j]`` are the last batches its user and item were placed in (-1 before
their first appearance), so every node sees its interactions in time order.
"""

import logging
import typing as ty
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ScaleGuardError
from .graphdata import InteractionLog

__all__ = [
    "BRUTE_FORCE_LIMIT",
    "BatchPlan",
    "BatchSizeDistribution",
    "batch_size_distribution",
    "brute_force_batches",
    "build_batches",
    "edge_batch_sizes",
    "mean_edge_batch_size",
]

BRUTE_FORCE_LIMIT = 10_000


@dataclass(frozen=True)
class BatchPlan:
    """Ordered partition of a log's interaction positions into t-batches."""

    batches: ty.Tuple[ty.Tuple[int, ...], ...]
    source_length: int

    def __len__(self) -> int:
        """Return the number of batches.

        :return: The number of batches.
        :rtype: int
        """
        return len(self.batches)

    def __iter__(self) -> ty.Iterator[ty.Tuple[int, ...]]:
        """Return an iterator over the batches in processing order.

        :return: An iterator over the batches.
        :rtype: ty.Iterator[ty.Tuple[int, ...]]
        """
        return iter(self.batches)

    @property
    def sizes(self) -> ty.List[int]:
        """Return the size of every batch.

        :return: The batch sizes in order.
        :rtype: ty.List[int]
        """
        return [len(batch) for batch in self.batches]

    def batch_of(self) -> np.ndarray:
        """Return, for every interaction position, the index of its batch.

        :return: Batch index per interaction.
        :rtype: np.ndarray
        """
        assignment = np.full(self.source_length, -1, dtype=np.int64)
        for batch_index, batch in enumerate(self.batches):
            assignment[list(batch)] = batch_index
        return assignment


def _plan_from_assignment(assignment: ty.List[int], source_length: int) -> BatchPlan:
    """Group interaction positions by their assigned batch.

    :param assignment: Batch index per interaction position.
    :type assignment: ty.List[int]
    :param source_length: Number of interactions.
    :type source_length: int
    :return: The plan.
    :rtype: BatchPlan
    """
    num_batches = max(assignment) + 1 if assignment else 0
    grouped: ty.List[ty.List[int]] = [[] for _ in range(num_batches)]
    for position, batch_index in enumerate(assignment):
        grouped[batch_index].append(position)

    return BatchPlan(
        batches=tuple(tuple(batch) for batch in grouped),
        source_length=source_length,
    )


def build_batches(log: InteractionLog) -> BatchPlan:
    """Assign every interaction of a time-ordered log to its t-batch.

    :param log: The log.
    :type log: InteractionLog
    :return: The batch plan.
    :rtype: BatchPlan
    """
    logger = logging.getLogger(__name__)
    logger.debug(f"Building t-batches for {log.identifier}...")

    last_user_batch = np.full(log.num_users, -1, dtype=np.int64)
    last_item_batch = np.full(log.num_items, -1, dtype=np.int64)
    assignment: ty.List[int] = []

    for user, item in zip(log.users.tolist(), log.items.tolist()):
        batch_index = int(max(last_user_batch[user] + 1, last_item_batch[item] + 1))
        last_user_batch[user] = batch_index
        last_item_batch[item] = batch_index
        assignment.append(batch_index)

    plan = _plan_from_assignment(assignment, len(log))

    logger.debug(f"T-batches built: {len(plan)} batches for {len(log)} interactions.")
    return plan


def brute_force_batches(log: InteractionLog) -> BatchPlan:
    """Compute the t-batch assignment by rescanning all earlier assignments.

    Oracle for :func:`build_batches`; quadratic in the log length.

    :param log: The log.
    :type log: InteractionLog
    :return: The batch plan.
    :rtype: BatchPlan
    :raises ScaleGuardError: If the log is longer than :data:`BRUTE_FORCE_LIMIT`.
    """
    logger = logging.getLogger(__name__)

    if len(log) > BRUTE_FORCE_LIMIT:
        msg = f"Brute-force batching supports at most {BRUTE_FORCE_LIMIT} interactions."
        logger.error(msg)
        raise ScaleGuardError(msg)

    users = log.users
    items = log.items
    assignment = np.zeros(len(log), dtype=np.int64)

    for position in range(len(log)):
        # Every earlier interaction sharing a node pushes this one past its batch.
        shares_node = (users[:position] == users[position]) | (items[:position] == items[position])
        conflicting = assignment[:position][shares_node]
        assignment[position] = conflicting.max() + 1 if len(conflicting) else 0

    return _plan_from_assignment(assignment.tolist(), len(log))


@dataclass(frozen=True)
class BatchSizeDistribution:
    """Histogram and moments of the batch sizes of a plan."""

    histogram: ty.Dict[int, int]
    mean: float
    variance: float
    max: int
    num_batches: int

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        """Return the summary emitted as JSON.

        :return: Summary mapping.
        :rtype: ty.Dict[str, ty.Any]
        """
        return {
            "num_batches": self.num_batches,
            "mean": self.mean,
            "variance": self.variance,
            "max": self.max,
            "histogram": {str(size): count for size, count in self.histogram.items()},
        }


def batch_size_distribution(plan: BatchPlan) -> BatchSizeDistribution:
    """Tally the batch sizes of a plan.

    :param plan: The plan.
    :type plan: BatchPlan
    :return: The size histogram with mean, population variance and maximum.
    :rtype: BatchSizeDistribution
    """
    sizes = np.asarray(plan.sizes, dtype=np.float64)
    histogram = dict(sorted(Counter(plan.sizes).items()))

    if len(sizes) == 0:
        return BatchSizeDistribution(histogram={}, mean=0.0, variance=0.0, max=0, num_batches=0)

    return BatchSizeDistribution(
        histogram=histogram,
        mean=float(sizes.mean()),
        variance=float(sizes.var()),
        max=int(sizes.max()),
        num_batches=len(sizes),
    )


def edge_batch_sizes(
    log: InteractionLog, plan: BatchPlan
) -> ty.Dict[ty.Tuple[int, int], ty.List[int]]:
    """Collect the sizes of the batches each (user, item) edge was placed in.

    :param log: The log the plan was built from.
    :type log: InteractionLog
    :param plan: The plan.
    :type plan: BatchPlan
    :return: Edge to batch sizes, one entry per interaction on that edge.
    :rtype: ty.Dict[ty.Tuple[int, int], ty.List[int]]
    """
    sizes: ty.Dict[ty.Tuple[int, int], ty.List[int]] = {}
    for batch in plan:
        for position in batch:
            edge = (int(log.users[position]), int(log.items[position]))
            sizes.setdefault(edge, []).append(len(batch))
    return sizes


def mean_edge_batch_size(log: InteractionLog, plan: BatchPlan, edge: ty.Tuple[int, int]) -> float:
    """Return the mean size of the batches holding a given edge.

    :param log: The log the plan was built from.
    :type log: InteractionLog
    :param plan: The plan.
    :type plan: BatchPlan
    :param edge: The (user, item) pair.
    :type edge: ty.Tuple[int, int]
    :return: The mean batch size, or 0.0 if the edge never occurs.
    :rtype: float
    """
    sizes = edge_batch_sizes(log, plan).get(edge, [])
    return float(np.mean(sizes)) if sizes else 0.0
