# -*- coding: utf-8 -*-

"""Coupled user/item embedding model with time projection.

Two single-layer tanh cells update the dynamic embeddings of the endpoints of
every interaction. A projection layer stretches a user embedding by
``1 + w_p * delta`` to anticipate its drift, and a linear prediction layer maps
the projected user, the user's one-hot id, and the user's previous item (dynamic
and one-hot) to an estimate of the next item's ``[dynamic || one-hot]``
embedding. Items are ranked by squared distance to that estimate.
"""

import json
import logging
import os
import typing as ty
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, CheckpointError, ModelConfigError
from .graphdata import Interaction
from .numgrad import (
    Parameter,
    ParameterSet,
    Tensor,
    add,
    concat,
    constant,
    elementwise_mul,
    matvec,
    stack_rows,
    tanh,
)
from .version import get_version

__all__ = [
    "CHECKPOINT_SCHEMA_VERSION",
    "NO_ITEM",
    "BatchForward",
    "Checkpoint",
    "EmbeddingStore",
    "LiveEmbeddings",
    "ModelParams",
    "commit_batch",
    "forward_batch",
    "item_distances",
    "load_checkpoint",
    "predict_item_embedding",
    "project_user",
    "rank_items",
    "save_checkpoint",
    "true_item_rank",
    "update_item_embedding",
    "update_user_embedding",
]

CHECKPOINT_SCHEMA_VERSION = 1

NO_ITEM = -1  # Marks a user without a previous item.


class ModelParams:
    """Trainable weights of the two cells, the projection and the prediction layer."""

    def __init__(
        self,
        num_users: int,
        num_items: int,
        feature_dim: int,
        dim: int = 64,
        time_scale: float = 1.0,
        rng: ty.Optional[np.random.Generator] = None,
    ) -> None:
        """Initialize the parameters.

        Weights are drawn uniformly from ``+-sqrt(6 / (fan_in + fan_out))``, biases
        start at zero.

        :param num_users: Size of the user id space.
        :type num_users: int
        :param num_items: Size of the item id space.
        :type num_items: int
        :param feature_dim: Length of interaction feature vectors.
        :type feature_dim: int
        :param dim: Dynamic embedding dimension.
        :type dim: int
        :param time_scale: Mean time delta of the training log; deltas are divided by it.
        :type time_scale: float
        :param rng: Random generator for the initialization.
        :type rng: ty.Optional[np.random.Generator]
        :raises ModelConfigError: If a size is invalid.
        """
        logger = logging.getLogger(__name__)

        if dim < 1 or num_users < 1 or num_items < 1 or feature_dim < 0:
            msg = (
                f"Invalid model sizes: dim={dim}, users={num_users}, "
                f"items={num_items}, features={feature_dim}."
            )
            logger.error(msg)
            raise ModelConfigError(msg)

        if not time_scale > 0:
            msg = f"time_scale must be positive, got {time_scale}."
            logger.error(msg)
            raise ModelConfigError(msg)

        self.num_users = num_users
        self.num_items = num_items
        self.feature_dim = feature_dim
        self.dim = dim
        self.time_scale = float(time_scale)

        rng = rng if rng is not None else np.random.default_rng(0)
        out = dim + num_items

        shapes: ty.List[ty.Tuple[str, ty.Tuple[int, ...]]] = []
        for side in ("user", "item"):
            shapes += [
                (f"{side}.W_own", (dim, dim)),
                (f"{side}.W_other", (dim, dim)),
                (f"{side}.W_feat", (dim, feature_dim)),
                (f"{side}.W_time", (dim, 1)),
                (f"{side}.bias", (dim,)),
            ]
        shapes += [
            ("project.w", (dim, 1)),
            ("predict.B_user", (out, dim)),
            ("predict.B_user_static", (out, num_users)),
            ("predict.B_item", (out, dim)),
            ("predict.B_item_static", (out, num_items)),
            ("predict.bias", (out,)),
        ]

        self.parameters = ParameterSet()
        for name, shape in shapes:
            if len(shape) == 1:
                value = np.zeros(shape)
            else:
                bound = np.sqrt(6.0 / (shape[0] + shape[1]))
                value = rng.uniform(-bound, bound, size=shape)
            self.parameters.add(Parameter(value, name=name))

    def __getitem__(self, name: str) -> Parameter:
        """Return the parameter with the given name."""
        return self.parameters[name]

    @property
    def output_dim(self) -> int:
        """Return the width of predicted item embeddings, ``dim + num_items``."""
        return self.dim + self.num_items

    def normalize_delta(self, delta: ty.Union[float, np.ndarray]) -> np.ndarray:
        """Divide raw time deltas by the training mean delta.

        :param delta: Seconds since the node's previous interaction.
        :type delta: ty.Union[float, np.ndarray]
        :return: Column of normalized deltas, shape (n, 1).
        :rtype: np.ndarray
        """
        return np.asarray(delta, dtype=np.float64).reshape(-1, 1) / self.time_scale

    def zero_(self) -> None:
        """Set every parameter to zero."""
        for parameter in self.parameters:
            parameter.assign(np.zeros_like(parameter.value))

    def describe(self) -> ty.Dict[str, ty.Any]:
        """Return the sizes that define the parameter shapes.

        :return: Size name to value.
        :rtype: ty.Dict[str, ty.Any]
        """
        return {
            "num_users": self.num_users,
            "num_items": self.num_items,
            "feature_dim": self.feature_dim,
            "dim": self.dim,
            "time_scale": self.time_scale,
        }


class EmbeddingStore:
    """Mutable dynamic embeddings and per-node bookkeeping.

    Static embeddings are one-hot ids and are produced on demand.
    """

    def __init__(self, num_users: int, num_items: int, dim: int) -> None:
        """Initialize all dynamic embeddings at the zero vector.

        :param num_users: Size of the user id space.
        :type num_users: int
        :param num_items: Size of the item id space.
        :type num_items: int
        :param dim: Dynamic embedding dimension.
        :type dim: int
        """
        self.num_users = num_users
        self.num_items = num_items
        self.dim = dim
        self.dynamic_user = np.zeros((num_users, dim))
        self.dynamic_item = np.zeros((num_items, dim))
        self.last_item_of_user = np.full(num_users, NO_ITEM, dtype=np.int64)
        self.user_time = np.full(num_users, np.nan)
        self.item_time = np.full(num_items, np.nan)

    @classmethod
    def for_params(cls, params: ModelParams) -> "EmbeddingStore":
        """Create an initial store matching the parameter sizes.

        :param params: The parameters.
        :type params: ModelParams
        :return: The store.
        :rtype: EmbeddingStore
        """
        return cls(params.num_users, params.num_items, params.dim)

    def copy(self) -> "EmbeddingStore":
        """Return an independent copy.

        :return: The copy.
        :rtype: EmbeddingStore
        """
        other = EmbeddingStore(self.num_users, self.num_items, self.dim)
        other.dynamic_user = self.dynamic_user.copy()
        other.dynamic_item = self.dynamic_item.copy()
        other.last_item_of_user = self.last_item_of_user.copy()
        other.user_time = self.user_time.copy()
        other.item_time = self.item_time.copy()
        return other

    def static_user(self, users: ty.Sequence[int]) -> np.ndarray:
        """Return one-hot rows for the given users.

        :param users: User indices.
        :type users: ty.Sequence[int]
        :return: Matrix of shape (len(users), num_users).
        :rtype: np.ndarray
        """
        rows = np.zeros((len(users), self.num_users))
        rows[np.arange(len(users)), np.asarray(users, dtype=np.int64)] = 1.0
        return rows

    def static_item(self, items: ty.Sequence[int]) -> np.ndarray:
        """Return one-hot rows for the given items; :data:`NO_ITEM` gives a zero row.

        :param items: Item indices.
        :type items: ty.Sequence[int]
        :return: Matrix of shape (len(items), num_items).
        :rtype: np.ndarray
        """
        items_arr = np.asarray(items, dtype=np.int64)
        rows = np.zeros((len(items_arr), self.num_items))
        known = items_arr != NO_ITEM
        rows[np.arange(len(items_arr))[known], items_arr[known]] = 1.0
        return rows

    def user_delta(self, user: int, timestamp: float) -> float:
        """Return the time since a user's last update, 0 before its first one."""
        last = self.user_time[user]
        return 0.0 if np.isnan(last) else float(timestamp - last)

    def item_delta(self, item: int, timestamp: float) -> float:
        """Return the time since an item's last update, 0 before its first one."""
        last = self.item_time[item]
        return 0.0 if np.isnan(last) else float(timestamp - last)

    def deltas(
        self, users: np.ndarray, items: np.ndarray, timestamps: np.ndarray
    ) -> ty.Tuple[np.ndarray, np.ndarray]:
        """Vectorized :meth:`user_delta` and :meth:`item_delta`.

        :param users: User indices.
        :type users: np.ndarray
        :param items: Item indices.
        :type items: np.ndarray
        :param timestamps: Interaction times.
        :type timestamps: np.ndarray
        :return: User-side and item-side deltas.
        :rtype: ty.Tuple[np.ndarray, np.ndarray]
        """
        user_last = self.user_time[users]
        item_last = self.item_time[items]
        user_deltas = np.where(np.isnan(user_last), 0.0, timestamps - np.nan_to_num(user_last))
        item_deltas = np.where(np.isnan(item_last), 0.0, timestamps - np.nan_to_num(item_last))
        return user_deltas, item_deltas

    def touch(self, users: np.ndarray, items: np.ndarray, timestamps: np.ndarray) -> None:
        """Advance the update times of the given nodes.

        :param users: User indices.
        :type users: np.ndarray
        :param items: Item indices.
        :type items: np.ndarray
        :param timestamps: New update times.
        :type timestamps: np.ndarray
        :raises ArgumentError: If a node's update time would decrease.
        """
        logger = logging.getLogger(__name__)

        if np.any(self.user_time[users] > timestamps) or np.any(self.item_time[items] > timestamps):
            msg = "Update times of a node cannot decrease."
            logger.error(msg)
            raise ArgumentError(msg)

        self.user_time[users] = timestamps
        self.item_time[items] = timestamps

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        """Return a JSON-ready representation.

        :return: The representation.
        :rtype: ty.Dict[str, ty.Any]
        """
        return {
            "num_users": self.num_users,
            "num_items": self.num_items,
            "dim": self.dim,
            "dynamic_user": self.dynamic_user.tolist(),
            "dynamic_item": self.dynamic_item.tolist(),
            "last_item_of_user": self.last_item_of_user.tolist(),
            "user_time": [None if np.isnan(t) else float(t) for t in self.user_time],
            "item_time": [None if np.isnan(t) else float(t) for t in self.item_time],
        }

    @classmethod
    def from_dict(cls, data: ty.Mapping[str, ty.Any]) -> "EmbeddingStore":
        """Rebuild a store from :meth:`to_dict` output.

        :param data: The representation.
        :type data: ty.Mapping[str, ty.Any]
        :return: The store.
        :rtype: EmbeddingStore
        """
        store = cls(int(data["num_users"]), int(data["num_items"]), int(data["dim"]))
        store.dynamic_user = np.asarray(data["dynamic_user"], dtype=np.float64).reshape(
            store.num_users, store.dim
        )
        store.dynamic_item = np.asarray(data["dynamic_item"], dtype=np.float64).reshape(
            store.num_items, store.dim
        )
        store.last_item_of_user = np.asarray(data["last_item_of_user"], dtype=np.int64)
        store.user_time = np.asarray(
            [np.nan if t is None else t for t in data["user_time"]], dtype=np.float64
        )
        store.item_time = np.asarray(
            [np.nan if t is None else t for t in data["item_time"]], dtype=np.float64
        )
        return store


class LiveEmbeddings:
    """Traced embeddings committed since the last optimizer step.

    Between optimizer steps a node's newest embedding is read from the traced
    output that produced it, so the loss of later batches backpropagates into
    earlier updates. After a step the cache is cleared and reads fall back to
    the detached values in the store.
    """

    def __init__(self) -> None:
        """Initialize an empty cache."""
        self.users: ty.Dict[int, ty.Tuple[Tensor, int]] = {}
        self.items: ty.Dict[int, ty.Tuple[Tensor, int]] = {}

    def clear(self) -> None:
        """Forget every cached tensor."""
        self.users.clear()
        self.items.clear()


def _gather(
    indices: ty.Sequence[int],
    detached: np.ndarray,
    live: ty.Optional[ty.Dict[int, ty.Tuple[Tensor, int]]],
) -> Tensor:
    """Read embedding rows, preferring traced rows from the live cache.

    :param indices: Node indices; :data:`NO_ITEM` reads a zero row.
    :type indices: ty.Sequence[int]
    :param detached: Detached embedding matrix from the store.
    :type detached: np.ndarray
    :param live: Cache of traced rows.
    :type live: ty.Optional[ty.Dict[int, ty.Tuple[Tensor, int]]]
    :return: Matrix of shape (len(indices), dim).
    :rtype: Tensor
    """
    zero = np.zeros(detached.shape[1])
    if not live or not any(int(index) in live for index in indices):
        rows = [detached[index] if index != NO_ITEM else zero for index in indices]
        return constant(np.stack(rows) if rows else np.zeros((0, detached.shape[1])))

    picked: ty.List[ty.Tuple[Tensor, ty.Optional[int]]] = []
    for index in indices:
        index = int(index)
        if index in live:
            picked.append(live[index])
        else:
            picked.append((constant(detached[index] if index != NO_ITEM else zero), None))
    return stack_rows(picked)


def _cell(
    params: ModelParams,
    side: str,
    own: Tensor,
    other: Tensor,
    features: Tensor,
    delta: Tensor,
) -> Tensor:
    """Apply one recurrent update cell to a batch.

    :param params: The parameters.
    :type params: ModelParams
    :param side: ``"user"`` or ``"item"``.
    :type side: str
    :param own: Previous embeddings of the updated nodes, (n, dim).
    :type own: Tensor
    :param other: Previous embeddings of their counterparts, (n, dim).
    :type other: Tensor
    :param features: Interaction features, (n, feature_dim).
    :type features: Tensor
    :param delta: Normalized time deltas, (n, 1).
    :type delta: Tensor
    :return: New embeddings, (n, dim).
    :rtype: Tensor
    """
    total = add(matvec(params[f"{side}.W_own"], own), matvec(params[f"{side}.W_other"], other))
    total = add(total, matvec(params[f"{side}.W_feat"], features))
    total = add(total, matvec(params[f"{side}.W_time"], delta))
    return tanh(add(total, params[f"{side}.bias"]))


def _project(params: ModelParams, user: Tensor, delta: Tensor) -> Tensor:
    """Stretch user embeddings by ``1 + w_p * delta``; batched form of :func:`project_user`."""
    stretch = add(constant(np.ones(user.shape)), matvec(params["project.w"], delta))
    return elementwise_mul(stretch, user)


def _predict(
    params: ModelParams,
    projected: Tensor,
    user_static: Tensor,
    item_dynamic: Tensor,
    item_static: Tensor,
) -> Tensor:
    """Apply the prediction layer to a batch; see :func:`predict_item_embedding`."""
    total = add(
        matvec(params["predict.B_user"], projected),
        matvec(params["predict.B_user_static"], user_static),
    )
    total = add(total, matvec(params["predict.B_item"], item_dynamic))
    total = add(total, matvec(params["predict.B_item_static"], item_static))
    return add(total, params["predict.bias"])


def _check_fit(store: EmbeddingStore, params: ModelParams) -> None:
    """Verify that a store and parameters share sizes.

    :param store: The store.
    :type store: EmbeddingStore
    :param params: The parameters.
    :type params: ModelParams
    :raises ModelConfigError: If the sizes differ.
    """
    logger = logging.getLogger(__name__)

    if (store.num_users, store.num_items, store.dim) != (
        params.num_users,
        params.num_items,
        params.dim,
    ):
        msg = (
            f"Store sizes ({store.num_users}, {store.num_items}, {store.dim}) do not match "
            f"parameter sizes ({params.num_users}, {params.num_items}, {params.dim})."
        )
        logger.error(msg)
        raise ModelConfigError(msg)


def _features_row(params: ModelParams, interaction: Interaction) -> Tensor:
    """Return an interaction's features as a (feature_dim,) constant.

    :raises ModelConfigError: If the feature length does not match the model.
    """
    logger = logging.getLogger(__name__)

    if len(interaction.features) != params.feature_dim:
        msg = f"Expected {params.feature_dim} features, got {len(interaction.features)}."
        logger.error(msg)
        raise ModelConfigError(msg)

    return constant(np.asarray(interaction.features, dtype=np.float64))


def update_user_embedding(
    store: EmbeddingStore, params: ModelParams, interaction: Interaction, delta_u: float
) -> Tensor:
    """Compute a user's embedding after an interaction, without committing it.

    :param store: Embeddings before the interaction.
    :type store: EmbeddingStore
    :param params: The parameters.
    :type params: ModelParams
    :param interaction: The interaction.
    :type interaction: Interaction
    :param delta_u: Seconds since the user's last update.
    :type delta_u: float
    :return: The new user embedding, shape (dim,).
    :rtype: Tensor
    """
    _check_fit(store, params)
    return _cell(
        params,
        "user",
        constant(store.dynamic_user[interaction.user]),
        constant(store.dynamic_item[interaction.item]),
        _features_row(params, interaction),
        constant(params.normalize_delta(delta_u)[0]),
    )


def update_item_embedding(
    store: EmbeddingStore, params: ModelParams, interaction: Interaction, delta_i: float
) -> Tensor:
    """Compute an item's embedding after an interaction, without committing it.

    :param store: Embeddings before the interaction.
    :type store: EmbeddingStore
    :param params: The parameters.
    :type params: ModelParams
    :param interaction: The interaction.
    :type interaction: Interaction
    :param delta_i: Seconds since the item's last update.
    :type delta_i: float
    :return: The new item embedding, shape (dim,).
    :rtype: Tensor
    """
    _check_fit(store, params)
    return _cell(
        params,
        "item",
        constant(store.dynamic_item[interaction.item]),
        constant(store.dynamic_user[interaction.user]),
        _features_row(params, interaction),
        constant(params.normalize_delta(delta_i)[0]),
    )


def project_user(params: ModelParams, u_t: Tensor, delta: float) -> Tensor:
    """Project a user embedding ``delta`` seconds ahead.

    :param params: The parameters; only ``project.w`` is used.
    :type params: ModelParams
    :param u_t: The user embedding, shape (dim,).
    :type u_t: Tensor
    :param delta: Elapsed seconds.
    :type delta: float
    :return: ``(1 + w_p * delta / time_scale) * u_t``, shape (dim,).
    :rtype: Tensor
    :raises ArgumentError: If ``delta`` is negative.
    """
    logger = logging.getLogger(__name__)

    if delta < 0:
        msg = f"Projection delta must be non-negative, got {delta}."
        logger.error(msg)
        raise ArgumentError(msg)

    stretch = add(
        constant(np.ones(params.dim)),
        matvec(params["project.w"], constant(np.array([delta / params.time_scale]))),
    )
    return elementwise_mul(stretch, u_t)


def predict_item_embedding(
    store: EmbeddingStore, params: ModelParams, user: int, delta: float
) -> Tensor:
    """Predict the ``[dynamic || one-hot]`` embedding of a user's next item.

    A user without a previous item uses a zero dynamic and a zero one-hot vector.

    :param store: Current embeddings.
    :type store: EmbeddingStore
    :param params: The parameters.
    :type params: ModelParams
    :param user: The user index.
    :type user: int
    :param delta: Seconds since the user's last update.
    :type delta: float
    :return: Vector of length ``dim + num_items``.
    :rtype: Tensor
    """
    _check_fit(store, params)
    previous = int(store.last_item_of_user[user])
    previous_dynamic = store.dynamic_item[previous] if previous != NO_ITEM else np.zeros(store.dim)

    projected = project_user(params, constant(store.dynamic_user[user]), delta)
    return _predict(
        params,
        projected,
        constant(store.static_user([user])[0]),
        constant(previous_dynamic),
        constant(store.static_item([previous])[0]),
    )


def item_distances(store: EmbeddingStore, predicted: np.ndarray) -> np.ndarray:
    """Return squared distances from a prediction to every item's full embedding.

    The one-hot part is handled in closed form: ``|s - e_i|^2 = |s|^2 - 2 s_i + 1``.

    :param store: Current embeddings.
    :type store: EmbeddingStore
    :param predicted: Vector of length ``dim + num_items``.
    :type predicted: np.ndarray
    :return: Distances, one per item.
    :rtype: np.ndarray
    :raises ModelConfigError: If the prediction has the wrong length.
    """
    logger = logging.getLogger(__name__)

    predicted = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if len(predicted) != store.dim + store.num_items:
        expected = store.dim + store.num_items
        msg = f"Expected a prediction of length {expected}, got {len(predicted)}."
        logger.error(msg)
        raise ModelConfigError(msg)

    dynamic, static = predicted[: store.dim], predicted[store.dim :]
    dynamic_part = np.sum((store.dynamic_item - dynamic) ** 2, axis=1)
    static_part = np.dot(static, static) - 2.0 * static + 1.0
    return dynamic_part + static_part


def rank_items(store: EmbeddingStore, predicted: np.ndarray) -> np.ndarray:
    """Order all items from nearest to farthest; ties go to the lower index.

    :param store: Current embeddings.
    :type store: EmbeddingStore
    :param predicted: Vector of length ``dim + num_items``.
    :type predicted: np.ndarray
    :return: Permutation of item indices.
    :rtype: np.ndarray
    """
    return np.argsort(item_distances(store, predicted), kind="stable")


def true_item_rank(store: EmbeddingStore, predicted: np.ndarray, item: int) -> int:
    """Return the 1-based position of an item in :func:`rank_items` order.

    :param store: Current embeddings.
    :type store: EmbeddingStore
    :param predicted: Vector of length ``dim + num_items``.
    :type predicted: np.ndarray
    :param item: The item index.
    :type item: int
    :return: The rank.
    :rtype: int
    """
    distances = item_distances(store, predicted)
    target = distances[item]
    return int(np.sum(distances < target) + np.sum(distances[:item] == target) + 1)


@dataclass
class BatchForward:
    """Traced quantities of one t-batch, read from pre-batch embeddings."""

    predicted: Tensor
    target: Tensor
    user_before: Tensor
    user_after: Tensor
    item_before: Tensor
    item_after: Tensor


def forward_batch(
    store: EmbeddingStore,
    params: ModelParams,
    users: np.ndarray,
    items: np.ndarray,
    features: np.ndarray,
    user_deltas: np.ndarray,
    item_deltas: np.ndarray,
    live: ty.Optional[LiveEmbeddings] = None,
) -> BatchForward:
    """Run prediction and both update cells on a conflict-free batch.

    Every interaction reads the embeddings as they were before the batch.

    :param store: Detached embeddings before the batch.
    :type store: EmbeddingStore
    :param params: The parameters.
    :type params: ModelParams
    :param users: User per interaction; pairwise distinct.
    :type users: np.ndarray
    :param items: Item per interaction; pairwise distinct.
    :type items: np.ndarray
    :param features: Feature rows, (n, feature_dim).
    :type features: np.ndarray
    :param user_deltas: Raw seconds since each user's last update.
    :type user_deltas: np.ndarray
    :param item_deltas: Raw seconds since each item's last update.
    :type item_deltas: np.ndarray
    :param live: Traced embeddings committed since the last optimizer step.
    :type live: ty.Optional[LiveEmbeddings]
    :return: The traced batch quantities.
    :rtype: BatchForward
    """
    _check_fit(store, params)
    previous_items = store.last_item_of_user[users]

    user_before = _gather(users, store.dynamic_user, live.users if live else None)
    item_before = _gather(items, store.dynamic_item, live.items if live else None)
    previous_dynamic = _gather(previous_items, store.dynamic_item, live.items if live else None)

    user_delta = constant(params.normalize_delta(user_deltas))
    item_delta = constant(params.normalize_delta(item_deltas))
    feature_rows = constant(np.asarray(features, dtype=np.float64).reshape(len(users), -1))

    predicted = _predict(
        params,
        _project(params, user_before, user_delta),
        constant(store.static_user(users)),
        previous_dynamic,
        constant(store.static_item(previous_items)),
    )
    target = concat([item_before, constant(store.static_item(items))])

    user_after = _cell(params, "user", user_before, item_before, feature_rows, user_delta)
    item_after = _cell(params, "item", item_before, user_before, feature_rows, item_delta)

    return BatchForward(
        predicted=predicted,
        target=target,
        user_before=user_before,
        user_after=user_after,
        item_before=item_before,
        item_after=item_after,
    )


def commit_batch(
    store: EmbeddingStore,
    forward: BatchForward,
    users: np.ndarray,
    items: np.ndarray,
    timestamps: np.ndarray,
    live: ty.Optional[LiveEmbeddings] = None,
) -> None:
    """Write the post-batch embeddings of a batch's endpoints into the store.

    :param store: The store to mutate.
    :type store: EmbeddingStore
    :param forward: The batch's traced quantities.
    :type forward: BatchForward
    :param users: User per interaction.
    :type users: np.ndarray
    :param items: Item per interaction.
    :type items: np.ndarray
    :param timestamps: Timestamp per interaction.
    :type timestamps: np.ndarray
    :param live: Cache to receive the traced rows, if gradients should reach them.
    :type live: ty.Optional[LiveEmbeddings]
    """
    store.touch(users, items, timestamps)
    store.dynamic_user[users] = forward.user_after.value
    store.dynamic_item[items] = forward.item_after.value
    store.last_item_of_user[users] = items

    if live is not None and forward.user_after.requires_grad:
        for row, user in enumerate(users.tolist()):
            live.users[user] = (forward.user_after, row)
        for row, item in enumerate(items.tolist()):
            live.items[item] = (forward.item_after, row)


@dataclass
class Checkpoint:
    """Trained parameters with the embedding state at the end of training."""

    params: ModelParams
    store: EmbeddingStore
    config: ty.Dict[str, ty.Any] = field(default_factory=dict)


def save_checkpoint(checkpoint: Checkpoint, path: ty.Union[str, os.PathLike]) -> None:
    """Write a checkpoint as JSON.

    :param checkpoint: The checkpoint.
    :type checkpoint: Checkpoint
    :param path: Destination path.
    :type path: ty.Union[str, os.PathLike]
    """
    document = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "package_version": get_version(),
        "config": checkpoint.config,
        "model": checkpoint.params.describe(),
        "parameters": {
            name: value.tolist() for name, value in checkpoint.params.parameters.state().items()
        },
        "store": checkpoint.store.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle)


def load_checkpoint(path: ty.Union[str, os.PathLike]) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`.

    :param path: Source path.
    :type path: ty.Union[str, os.PathLike]
    :return: The checkpoint.
    :rtype: Checkpoint
    :raises CheckpointError: If the file has an unknown schema version or is incomplete.
    """
    logger = logging.getLogger(__name__)

    with open(path, "r", encoding="utf-8") as handle:
        document = json.load(handle)

    version = document.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        msg = f"Unsupported checkpoint schema version {version!r}."
        logger.error(msg)
        raise CheckpointError(msg)

    try:
        sizes = document["model"]
        params = ModelParams(
            num_users=int(sizes["num_users"]),
            num_items=int(sizes["num_items"]),
            feature_dim=int(sizes["feature_dim"]),
            dim=int(sizes["dim"]),
            time_scale=float(sizes["time_scale"]),
        )
        params.parameters.load_state(
            {
                name: np.asarray(value, dtype=np.float64).reshape(params[name].shape)
                for name, value in document["parameters"].items()
            }
        )
        store = EmbeddingStore.from_dict(document["store"])
    except (KeyError, TypeError, ValueError) as exc:
        msg = f"Checkpoint {path} is incomplete: {exc}"
        logger.error(msg)
        raise CheckpointError(msg) from exc

    _check_fit(store, params)
    return Checkpoint(params=params, store=store, config=dict(document.get("config", {})))
