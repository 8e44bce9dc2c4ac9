# -*- coding: utf-8 -*-

"""Timestamped user-item interaction logs.

Logs are read from and written to the published JODIE-style layout, one
interaction per row::

    user_id,item_id,timestamp,state_label,feat_1,...,feat_w

Real datasets and synthetic generators share the :class:`InteractionLog`
representation.
"""

import csv
import logging
import math
import os
import typing as ty
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import entropy

from .errors import (
    ArgumentError,
    EmptyLogError,
    ParseError,
    SchemaError,
    UndefinedEntropyError,
)

__all__ = [
    "DATA_DIR_ENV",
    "KNOWN_DATASETS",
    "DatasetStats",
    "Interaction",
    "InteractionLog",
    "PublishedCounts",
    "chronological_split",
    "load_csv",
    "load_known_dataset",
    "mean_time_delta",
    "save_csv",
    "summary_stats",
    "time_deltas",
    "top_item_ratio",
    "user_history_entropy",
]

DATA_DIR_ENV = "TEMPO_EMBED_DATA_DIR"

NUM_FIXED_COLUMNS = 4


@dataclass(frozen=True)
class Interaction:
    """One timestamped user-to-item event."""

    user: int
    item: int
    timestamp: float
    features: ty.Tuple[float, ...] = ()
    state_label: int = 0  # Carried from the file format, unused by the model.


def _read_only(array: np.ndarray) -> np.ndarray:
    """Return the array with writing disabled.

    :param array: The array to freeze.
    :type array: np.ndarray
    :return: The same array, read-only.
    :rtype: np.ndarray
    """
    array.setflags(write=False)
    return array


class InteractionLog:
    """Immutable, time-ordered sequence of interactions over fixed id spaces."""

    def __init__(
        self,
        users: ty.Sequence[int],
        items: ty.Sequence[int],
        timestamps: ty.Sequence[float],
        features: ty.Optional[np.ndarray] = None,
        state_labels: ty.Optional[ty.Sequence[int]] = None,
        num_users: ty.Optional[int] = None,
        num_items: ty.Optional[int] = None,
        user_ids: ty.Optional[ty.Sequence[str]] = None,
        item_ids: ty.Optional[ty.Sequence[str]] = None,
        identifier: str = "log",
    ) -> None:
        """Initialize the interaction log.

        :param users: User index of every interaction.
        :type users: ty.Sequence[int]
        :param items: Item index of every interaction.
        :type items: ty.Sequence[int]
        :param timestamps: Timestamp of every interaction, nondecreasing.
        :type timestamps: ty.Sequence[float]
        :param features: Feature matrix of shape (interactions, feature_dim).
        :type features: ty.Optional[np.ndarray]
        :param state_labels: State label of every interaction, defaults to zeros.
        :type state_labels: ty.Optional[ty.Sequence[int]]
        :param num_users: Size of the user id space, defaults to max index + 1.
        :type num_users: ty.Optional[int]
        :param num_items: Size of the item id space, defaults to max index + 1.
        :type num_items: ty.Optional[int]
        :param user_ids: Original label of every user index, defaults to the index.
        :type user_ids: ty.Optional[ty.Sequence[str]]
        :param item_ids: Original label of every item index, defaults to the index.
        :type item_ids: ty.Optional[ty.Sequence[str]]
        :param identifier: Name of the log, used in log messages.
        :type identifier: str
        :raises SchemaError: If the columns disagree in length or shape.
        :raises ArgumentError: If an index, count or timestamp is invalid.
        """
        logger = logging.getLogger(__name__)

        users_arr = np.asarray(users, dtype=np.int64).reshape(-1)
        items_arr = np.asarray(items, dtype=np.int64).reshape(-1)
        times_arr = np.asarray(timestamps, dtype=np.float64).reshape(-1)
        n = len(users_arr)

        if len(items_arr) != n or len(times_arr) != n:
            msg = "users, items and timestamps must have the same length."
            logger.error(msg)
            raise SchemaError(msg)

        if features is None:
            features_arr = np.zeros((n, 0), dtype=np.float64)
        else:
            features_arr = np.asarray(features, dtype=np.float64)
            if features_arr.ndim != 2 or features_arr.shape[0] != n:
                msg = f"features must have shape ({n}, feature_dim), got {features_arr.shape}."
                logger.error(msg)
                raise SchemaError(msg)

        if state_labels is None:
            labels_arr = np.zeros(n, dtype=np.int64)
        else:
            labels_arr = np.asarray(state_labels, dtype=np.int64).reshape(-1)
            if len(labels_arr) != n:
                msg = "state_labels must have one entry per interaction."
                logger.error(msg)
                raise SchemaError(msg)

        if num_users is None:
            num_users = int(users_arr.max()) + 1 if n else 0
        if num_items is None:
            num_items = int(items_arr.max()) + 1 if n else 0

        if n and (users_arr.min() < 0 or users_arr.max() >= num_users):
            msg = f"User indices must lie in [0, {num_users})."
            logger.error(msg)
            raise ArgumentError(msg)

        if n and (items_arr.min() < 0 or items_arr.max() >= num_items):
            msg = f"Item indices must lie in [0, {num_items})."
            logger.error(msg)
            raise ArgumentError(msg)

        if not np.all(np.isfinite(times_arr)) or (n and times_arr.min() < 0):
            msg = "Timestamps must be finite and non-negative."
            logger.error(msg)
            raise ArgumentError(msg)

        if np.any(np.diff(times_arr) < 0):
            msg = "Timestamps must be nondecreasing in sequence order."
            logger.error(msg)
            raise ArgumentError(msg)

        if user_ids is None:
            user_ids = [str(index) for index in range(num_users)]
        if item_ids is None:
            item_ids = [str(index) for index in range(num_items)]

        if len(user_ids) != num_users or len(item_ids) != num_items:
            msg = "Id labels must cover the full user and item id spaces."
            logger.error(msg)
            raise SchemaError(msg)

        self._users = _read_only(users_arr)
        self._items = _read_only(items_arr)
        self._timestamps = _read_only(times_arr)
        self._features = _read_only(features_arr)
        self._state_labels = _read_only(labels_arr)
        self._num_users = int(num_users)
        self._num_items = int(num_items)
        self._user_ids = tuple(str(label) for label in user_ids)
        self._item_ids = tuple(str(label) for label in item_ids)
        self._identifier = identifier

    def __len__(self) -> int:
        """Return the number of interactions.

        :return: The number of interactions.
        :rtype: int
        """
        return len(self._users)

    def __getitem__(self, index: int) -> Interaction:
        """Return the interaction at the specified position.

        :param index: The position in time order.
        :type index: int
        :return: The interaction.
        :rtype: Interaction
        """
        return Interaction(
            user=int(self._users[index]),
            item=int(self._items[index]),
            timestamp=float(self._timestamps[index]),
            features=tuple(float(value) for value in self._features[index]),
            state_label=int(self._state_labels[index]),
        )

    def __iter__(self) -> ty.Iterator[Interaction]:
        """Return an iterator over the interactions in time order.

        :return: An iterator over the interactions.
        :rtype: ty.Iterator[Interaction]
        """
        return (self[index] for index in range(len(self)))

    def __eq__(self, other: ty.Any) -> bool:
        """Compare two logs by content, ignoring the identifier.

        :param other: The other log.
        :type other: ty.Any
        :return: True if both logs hold identical interactions and id spaces.
        :rtype: bool
        """
        if not isinstance(other, InteractionLog):
            return NotImplemented

        return (
            self._num_users == other._num_users
            and self._num_items == other._num_items
            and self._user_ids == other._user_ids
            and self._item_ids == other._item_ids
            and np.array_equal(self._users, other._users)
            and np.array_equal(self._items, other._items)
            and np.array_equal(self._timestamps, other._timestamps)
            and np.array_equal(self._features, other._features)
            and np.array_equal(self._state_labels, other._state_labels)
        )

    def __repr__(self) -> str:
        """Return a short description of the log.

        :return: The description.
        :rtype: str
        """
        return (
            f"InteractionLog({self._identifier!r}, interactions={len(self)}, "
            f"users={self._num_users}, items={self._num_items}, features={self.feature_dim})"
        )

    @property
    def identifier(self) -> str:
        """Return the name of the log.

        :return: The name of the log.
        :rtype: str
        """
        return self._identifier

    @property
    def num_users(self) -> int:
        """Return the size of the user id space.

        :return: The number of users.
        :rtype: int
        """
        return self._num_users

    @property
    def num_items(self) -> int:
        """Return the size of the item id space.

        :return: The number of items.
        :rtype: int
        """
        return self._num_items

    @property
    def feature_dim(self) -> int:
        """Return the uniform feature dimension.

        :return: The feature dimension.
        :rtype: int
        """
        return int(self._features.shape[1])

    @property
    def users(self) -> np.ndarray:
        """Return the read-only user index column."""
        return self._users

    @property
    def items(self) -> np.ndarray:
        """Return the read-only item index column."""
        return self._items

    @property
    def timestamps(self) -> np.ndarray:
        """Return the read-only timestamp column."""
        return self._timestamps

    @property
    def features(self) -> np.ndarray:
        """Return the read-only feature matrix."""
        return self._features

    @property
    def state_labels(self) -> np.ndarray:
        """Return the read-only state label column."""
        return self._state_labels

    @property
    def user_ids(self) -> ty.Tuple[str, ...]:
        """Return the original label of every user index."""
        return self._user_ids

    @property
    def item_ids(self) -> ty.Tuple[str, ...]:
        """Return the original label of every item index."""
        return self._item_ids

    @property
    def interactions(self) -> ty.List[Interaction]:
        """Return all interactions as records.

        :return: The interactions in time order.
        :rtype: ty.List[Interaction]
        """
        return list(self)

    def slice(self, start: int, stop: int, identifier: ty.Optional[str] = None) -> "InteractionLog":
        """Return a contiguous part of the log over the same id spaces.

        :param start: First position, inclusive.
        :type start: int
        :param stop: Last position, exclusive.
        :type stop: int
        :param identifier: Name of the new log.
        :type identifier: ty.Optional[str]
        :return: The sub-log.
        :rtype: InteractionLog
        """
        return InteractionLog(
            users=self._users[start:stop],
            items=self._items[start:stop],
            timestamps=self._timestamps[start:stop],
            features=self._features[start:stop],
            state_labels=self._state_labels[start:stop],
            num_users=self._num_users,
            num_items=self._num_items,
            user_ids=self._user_ids,
            item_ids=self._item_ids,
            identifier=identifier or self._identifier,
        )

    def user_history(self, user: int) -> np.ndarray:
        """Return the items of a user's interactions in time order.

        :param user: The user index.
        :type user: int
        :return: The item indices.
        :rtype: np.ndarray
        """
        return self._items[self._users == user]

    def active_users(self) -> np.ndarray:
        """Return the sorted indices of users with at least one interaction.

        :return: The user indices.
        :rtype: np.ndarray
        """
        return np.unique(self._users)


def _parse_float(value: str, column: str, line_number: int) -> float:
    """Parse one numeric cell.

    :param value: The raw cell.
    :type value: str
    :param column: The column name, for the error message.
    :type column: str
    :param line_number: The line number, for the error message.
    :type line_number: int
    :return: The parsed value.
    :rtype: float
    :raises ParseError: If the cell is not a finite number.
    """
    logger = logging.getLogger(__name__)

    try:
        parsed = float(value)
    except ValueError:
        parsed = math.nan

    if not math.isfinite(parsed):
        msg = f"{column} {value!r} is not a finite number"
        logger.error(f"line {line_number}: {msg}")
        raise ParseError(msg, line_number=line_number)

    return parsed


def load_csv(
    path: ty.Union[str, os.PathLike], has_header: bool = True, identifier: ty.Optional[str] = None
) -> InteractionLog:
    """Load an interaction log from a CSV file.

    Ids are remapped to dense 0-based indices in order of first appearance in the
    time-sorted log, timestamps are shifted so the earliest is 0, and rows are
    stably sorted by timestamp so ties keep their file order.

    :param path: Path to the CSV file.
    :type path: ty.Union[str, os.PathLike]
    :param has_header: Whether the first line is a header row.
    :type has_header: bool
    :param identifier: Name of the log, defaults to the file name.
    :type identifier: ty.Optional[str]
    :return: The interaction log.
    :rtype: InteractionLog
    :raises ParseError: If a row is malformed.
    :raises SchemaError: If rows disagree on their number of features.
    """
    logger = logging.getLogger(__name__)
    logger.debug(f"Loading interactions from {path}...")

    raw_users: ty.List[str] = []
    raw_items: ty.List[str] = []
    raw_times: ty.List[float] = []
    raw_labels: ty.List[int] = []
    raw_features: ty.List[ty.List[float]] = []
    feature_dim: ty.Optional[int] = None

    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        for line_number, row in enumerate(reader, start=1):
            if has_header and line_number == 1:
                continue

            # Skip blank lines.
            if not row or all(not cell.strip() for cell in row):
                continue

            if len(row) < NUM_FIXED_COLUMNS:
                msg = f"expected at least {NUM_FIXED_COLUMNS} columns, found {len(row)}"
                logger.error(f"line {line_number}: {msg}")
                raise ParseError(msg, line_number=line_number)

            timestamp = _parse_float(row[2].strip(), "timestamp", line_number)
            label = _parse_float(row[3].strip(), "state_label", line_number)
            if label != int(label):
                msg = f"state_label {row[3].strip()!r} is not an integer"
                logger.error(f"line {line_number}: {msg}")
                raise ParseError(msg, line_number=line_number)
            feats = [_parse_float(cell.strip(), "feature", line_number) for cell in row[4:]]

            if feature_dim is None:
                feature_dim = len(feats)
            elif len(feats) != feature_dim:
                msg = (
                    f"line {line_number}: found {len(feats)} features, "
                    f"earlier rows have {feature_dim}."
                )
                logger.error(msg)
                raise SchemaError(msg)

            raw_users.append(row[0].strip())
            raw_items.append(row[1].strip())
            raw_times.append(timestamp)
            raw_labels.append(int(label))
            raw_features.append(feats)

    n = len(raw_users)
    dim = feature_dim or 0
    times = np.asarray(raw_times, dtype=np.float64)
    order = np.argsort(times, kind="stable")

    user_index: ty.Dict[str, int] = {}
    item_index: ty.Dict[str, int] = {}
    users = np.empty(n, dtype=np.int64)
    items = np.empty(n, dtype=np.int64)

    for position, row_index in enumerate(order):
        users[position] = user_index.setdefault(raw_users[row_index], len(user_index))
        items[position] = item_index.setdefault(raw_items[row_index], len(item_index))

    sorted_times = times[order]
    if n:
        sorted_times = sorted_times - sorted_times[0]

    features = np.asarray(raw_features, dtype=np.float64).reshape(n, dim)[order]
    labels = np.asarray(raw_labels, dtype=np.int64)[order] if n else np.zeros(0, dtype=np.int64)

    log = InteractionLog(
        users=users,
        items=items,
        timestamps=sorted_times,
        features=features,
        state_labels=labels,
        num_users=len(user_index),
        num_items=len(item_index),
        user_ids=list(user_index),
        item_ids=list(item_index),
        identifier=identifier or os.path.basename(os.fspath(path)),
    )

    logger.debug(f"Loaded {log!r}.")
    return log


def save_csv(log: InteractionLog, path: ty.Union[str, os.PathLike]) -> None:
    """Write a log in the format read by :func:`load_csv`.

    Timestamps and features are written with ``repr`` so reading the file back
    yields an identical log.

    :param log: The log to write.
    :type log: InteractionLog
    :param path: Destination path.
    :type path: ty.Union[str, os.PathLike]
    """
    header = ["user_id", "item_id", "timestamp", "state_label"]
    header += [f"feat_{index + 1}" for index in range(log.feature_dim)]

    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for position in range(len(log)):
            writer.writerow(
                [
                    log.user_ids[log.users[position]],
                    log.item_ids[log.items[position]],
                    repr(float(log.timestamps[position])),
                    int(log.state_labels[position]),
                ]
                + [repr(float(value)) for value in log.features[position]]
            )


def chronological_split(
    log: InteractionLog, train_fraction: float
) -> ty.Tuple[InteractionLog, InteractionLog]:
    """Split a log into a training prefix and a test suffix.

    :param log: The log to split.
    :type log: InteractionLog
    :param train_fraction: Fraction of interactions in the training prefix.
    :type train_fraction: float
    :return: The training and the test log, both over the full id spaces.
    :rtype: ty.Tuple[InteractionLog, InteractionLog]
    :raises ArgumentError: If the fraction is not strictly between 0 and 1.
    """
    logger = logging.getLogger(__name__)

    if not 0.0 < train_fraction < 1.0:
        msg = f"train_fraction must lie in (0, 1), got {train_fraction}."
        logger.error(msg)
        raise ArgumentError(msg)

    # Rounding keeps exact ratios such as 16/17 from spilling over the ceiling.
    n_train = math.ceil(round(train_fraction * len(log), 9))

    train = log.slice(0, n_train, identifier=f"{log.identifier}:train")
    test = log.slice(n_train, len(log), identifier=f"{log.identifier}:test")
    return train, test


def _user_item_counts(log: InteractionLog, user: int) -> np.ndarray:
    """Count how often a user interacted with each item in its history.

    :param log: The log.
    :type log: InteractionLog
    :param user: The user index.
    :type user: int
    :return: The positive counts, one per distinct item.
    :rtype: np.ndarray
    :raises UndefinedEntropyError: If the user has no interactions.
    """
    logger = logging.getLogger(__name__)

    history = log.user_history(user)
    if len(history) == 0:
        msg = f"User {user} has no interactions in {log.identifier}."
        logger.error(msg)
        raise UndefinedEntropyError(msg)

    _, counts = np.unique(history, return_counts=True)
    return counts


def user_history_entropy(log: InteractionLog, user: int, base: ty.Optional[float] = None) -> float:
    """Return the Shannon entropy of a user's item distribution.

    :param log: The log.
    :type log: InteractionLog
    :param user: The user index.
    :type user: int
    :param base: Logarithm base, natural log when omitted.
    :type base: ty.Optional[float]
    :return: The entropy, in nats unless another base is given.
    :rtype: float
    """
    return float(entropy(_user_item_counts(log, user), base=base))


def top_item_ratio(log: InteractionLog, user: int) -> float:
    """Return the share of a user's interactions that go to its most frequent item.

    :param log: The log.
    :type log: InteractionLog
    :param user: The user index.
    :type user: int
    :return: The ratio in (0, 1].
    :rtype: float
    """
    counts = _user_item_counts(log, user)
    return float(counts.max() / counts.sum())


@dataclass
class DatasetStats:
    """Per-user diversity statistics of a log, averaged over active users."""

    num_users: int
    num_items: int
    num_interactions: int
    interactions_per_user: float
    unique_items_per_user: float
    avg_user_entropy: float
    avg_user_entropy_bits: float
    avg_top_item_ratio: float
    per_user: pd.DataFrame = field(repr=False)

    def to_dict(self) -> ty.Dict[str, ty.Union[int, float]]:
        """Return the flat metric mapping emitted as JSON.

        :return: Metric name to value.
        :rtype: ty.Dict[str, ty.Union[int, float]]
        """
        return {
            "num_users": self.num_users,
            "num_items": self.num_items,
            "num_interactions": self.num_interactions,
            "interactions_per_user": self.interactions_per_user,
            "unique_items_per_user": self.unique_items_per_user,
            "avg_user_entropy": self.avg_user_entropy,
            "avg_user_entropy_bits": self.avg_user_entropy_bits,
            "avg_top_item_ratio": self.avg_top_item_ratio,
        }


def summary_stats(log: InteractionLog) -> DatasetStats:
    """Compute the diversity statistics of a log.

    :param log: The log.
    :type log: InteractionLog
    :return: The statistics; users absent from the log are left out of averages.
    :rtype: DatasetStats
    :raises EmptyLogError: If the log has no interactions.
    """
    logger = logging.getLogger(__name__)

    if len(log) == 0:
        msg = f"Cannot summarize empty log {log.identifier}."
        logger.error(msg)
        raise EmptyLogError(msg)

    pairs = pd.DataFrame({"user": log.users, "item": log.items})
    counts = pairs.value_counts(sort=False).sort_index()
    grouped = counts.groupby(level="user")

    per_user = pd.DataFrame(
        {
            "interactions": grouped.sum(),
            "unique_items": grouped.size(),
            "entropy": grouped.apply(lambda c: float(entropy(c.to_numpy()))),
            "entropy_bits": grouped.apply(lambda c: float(entropy(c.to_numpy(), base=2))),
            "top_item_ratio": grouped.max() / grouped.sum(),
        }
    )
    per_user.index.name = "user"

    return DatasetStats(
        num_users=log.num_users,
        num_items=log.num_items,
        num_interactions=len(log),
        interactions_per_user=float(per_user["interactions"].mean()),
        unique_items_per_user=float(per_user["unique_items"].mean()),
        avg_user_entropy=float(per_user["entropy"].mean()),
        avg_user_entropy_bits=float(per_user["entropy_bits"].mean()),
        avg_top_item_ratio=float(per_user["top_item_ratio"].mean()),
        per_user=per_user,
    )


def time_deltas(log: InteractionLog) -> ty.Tuple[np.ndarray, np.ndarray]:
    """Return the elapsed time since each endpoint's previous interaction.

    :param log: The log.
    :type log: InteractionLog
    :return: User-side and item-side deltas; first appearances get 0.
    :rtype: ty.Tuple[np.ndarray, np.ndarray]
    """
    user_deltas = np.zeros(len(log), dtype=np.float64)
    item_deltas = np.zeros(len(log), dtype=np.float64)
    last_user_time: ty.Dict[int, float] = {}
    last_item_time: ty.Dict[int, float] = {}

    for position, (user, item, timestamp) in enumerate(
        zip(log.users.tolist(), log.items.tolist(), log.timestamps.tolist())
    ):
        user_deltas[position] = timestamp - last_user_time.get(user, timestamp)
        item_deltas[position] = timestamp - last_item_time.get(item, timestamp)
        last_user_time[user] = timestamp
        last_item_time[item] = timestamp

    return user_deltas, item_deltas


def mean_time_delta(log: InteractionLog) -> float:
    """Return the normalizer for time deltas: the mean delta over both sides.

    :param log: The log, usually the training log.
    :type log: InteractionLog
    :return: The mean delta, or 1.0 when it is 0 or the log is empty.
    :rtype: float
    """
    user_deltas, item_deltas = time_deltas(log)
    if len(log) == 0:
        return 1.0

    mean = float(np.concatenate([user_deltas, item_deltas]).mean())
    return mean if mean > 0.0 else 1.0


@dataclass(frozen=True)
class PublishedCounts:
    """Published size of a public dataset."""

    file_name: str
    num_users: int
    num_items: int
    num_interactions: int


KNOWN_DATASETS: ty.Dict[str, PublishedCounts] = {
    "myket": PublishedCounts("myket.csv", 10000, 7988, 694121),
    "lastfm": PublishedCounts("lastfm.csv", 980, 1000, 1293103),
    "reddit": PublishedCounts("reddit.csv", 10000, 984, 672447),
    "wikipedia": PublishedCounts("wikipedia.csv", 8227, 1000, 157474),
}


def load_known_dataset(name: str, data_dir: ty.Optional[str] = None) -> InteractionLog:
    """Load one of the public datasets from a local directory.

    The files have to be downloaded by hand; nothing is fetched.

    :param name: Dataset name, one of :data:`KNOWN_DATASETS`.
    :type name: str
    :param data_dir: Directory holding the file, defaults to ``$TEMPO_EMBED_DATA_DIR``.
    :type data_dir: ty.Optional[str]
    :return: The log.
    :rtype: InteractionLog
    :raises ArgumentError: If the name is unknown or no directory is configured.
    :raises FileNotFoundError: If the file is missing.
    """
    logger = logging.getLogger(__name__)

    if name not in KNOWN_DATASETS:
        msg = f"Unknown dataset {name!r}, expected one of {sorted(KNOWN_DATASETS)}."
        logger.error(msg)
        raise ArgumentError(msg)

    data_dir = data_dir or os.environ.get(DATA_DIR_ENV)
    if not data_dir:
        msg = f"No data directory given and ${DATA_DIR_ENV} is not set."
        logger.error(msg)
        raise ArgumentError(msg)

    path = os.path.join(data_dir, KNOWN_DATASETS[name].file_name)
    return load_csv(path, has_header=True, identifier=name)
