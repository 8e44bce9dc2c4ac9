# -*- coding: utf-8 -*-

"""Synthetic interaction networks.

Four generators with known structure:

* type 1: two users and two items; user 3 picks item 4 with probability ``p``,
  otherwise item 2, right after user 1 interacts with item 2;
* type 2: a deterministic repeated sequence where one user alternates between
  two items that sit in batches of different sizes;
* type 3: users walk a fixed branching tree of 11 items from root to leaf;
* type 4: users surf a preferential-attachment recommendation graph and jump
  to a random item with probability ``p_jump``.

Also holds the closed-form optimum for type 1 under each loss.
"""

import logging
import typing as ty
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from .errors import ArgumentError
from .graphdata import InteractionLog
from .losses import LossKind
from .seeding import derive_rng, derive_seed
from .tbatcher import build_batches, mean_edge_batch_size

__all__ = [
    "TYPE1_ITEM_2",
    "TYPE1_ITEM_4",
    "TYPE1_USER_1",
    "TYPE1_USER_3",
    "TYPE2_FIRST_EDGE",
    "TYPE2_SECOND_EDGE",
    "TYPE3_TREE",
    "RecommendationGraph",
    "SynthSpec",
    "Type1Spec",
    "Type2Spec",
    "Type3Spec",
    "Type4Spec",
    "build_recommendation_graph",
    "gen_type1",
    "gen_type2",
    "gen_type3",
    "gen_type4",
    "generate",
    "optimal_accuracy",
    "optimal_choice",
    "parse_synth_spec",
    "type1_weighted_objective",
    "type2_batch_size_ratio",
    "type3_children",
    "type4_graph",
]

TYPE1_USER_1, TYPE1_USER_3 = 0, 1
TYPE1_ITEM_2, TYPE1_ITEM_4 = 0, 1

# User 1's two edges; the first shares batches with the other pairs.
TYPE2_FIRST_EDGE = (0, 0)
TYPE2_SECOND_EDGE = (0, 1)

# Level sizes 1, 2, 4, 4; every leaf has two parents.
TYPE3_TREE: ty.Dict[int, ty.Tuple[int, ...]] = {
    0: (1, 2),
    1: (3, 4),
    2: (5, 6),
    3: (7, 8),
    4: (9, 10),
    5: (7, 9),
    6: (8, 10),
    7: (),
    8: (),
    9: (),
    10: (),
}
TYPE3_PATH_LENGTH = 4


class Type1Spec(BaseModel):
    """Parameters of a type-1 network."""

    model_config = ConfigDict(frozen=True)

    variant: ty.Literal["type1"] = "type1"
    k: int = Field(4000, ge=2)
    p: float = Field(0.5, ge=0.0, le=1.0)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_even(self) -> "Type1Spec":
        """Require an even number of edges."""
        if self.k % 2:
            raise ValueError(f"k must be even, got {self.k}.")
        return self


class Type2Spec(BaseModel):
    """Parameters of a type-2 network."""

    model_config = ConfigDict(frozen=True)

    variant: ty.Literal["type2"] = "type2"
    n_pairs: int = Field(5, ge=2)
    repetitions: int = Field(200, ge=1)
    seed: int = Field(0, ge=0)


class Type3Spec(BaseModel):
    """Parameters of a type-3 network."""

    model_config = ConfigDict(frozen=True)

    variant: ty.Literal["type3"] = "type3"
    n_users: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0)


class Type4Spec(BaseModel):
    """Parameters of a type-4 network."""

    model_config = ConfigDict(frozen=True)

    variant: ty.Literal["type4"] = "type4"
    n_users: int = Field(100, ge=1)
    n_items: int = Field(100, ge=2)
    k_out: int = Field(10, ge=1)
    p_jump: float = Field(0.25, ge=0.0, le=1.0)
    arrival_rate: float = Field(1.0, gt=0.0)
    n_interactions: int = Field(8500, ge=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_out_degree(self) -> "Type4Spec":
        """Require more items than out-neighbors per item."""
        if self.n_items <= self.k_out:
            raise ValueError(f"n_items ({self.n_items}) must exceed k_out ({self.k_out}).")
        return self


SynthSpec = ty.Annotated[
    ty.Union[Type1Spec, Type2Spec, Type3Spec, Type4Spec], Field(discriminator="variant")
]


AnySpec = ty.Union[Type1Spec, Type2Spec, Type3Spec, Type4Spec]


def parse_synth_spec(data: ty.Mapping[str, ty.Any]) -> AnySpec:
    """Validate a spec mapping carrying a ``variant`` tag.

    :param data: The mapping, e.g. ``{"variant": "type1", "k": 1000, "p": 0.6}``.
    :type data: ty.Mapping[str, ty.Any]
    :return: The spec.
    :rtype: AnySpec
    :raises pydantic.ValidationError: If the mapping is invalid.
    """
    return TypeAdapter(SynthSpec).validate_python(dict(data))


def _argument_error(msg: str) -> ArgumentError:
    """Log and build an argument error."""
    logger = logging.getLogger(__name__)
    logger.error(msg)
    return ArgumentError(msg)


def gen_type1(k: int, p: float, seed: int = 0) -> InteractionLog:
    """Generate a type-1 network.

    Each of the ``k / 2`` rounds emits (user 1, item 2) and then (user 3, item 4)
    with probability ``p`` or (user 3, item 2) otherwise.

    :param k: Number of interactions; even.
    :type k: int
    :param p: Probability of the (3, 4) edge.
    :type p: float
    :param seed: Root seed.
    :type seed: int
    :return: The log, with timestamps ``0 .. k - 1``.
    :rtype: InteractionLog
    :raises ArgumentError: If ``k`` is odd or not positive, or ``p`` is outside [0, 1].
    """
    if k < 2 or k % 2:
        raise _argument_error(f"k must be a positive even number, got {k}.")
    if not 0.0 <= p <= 1.0:
        raise _argument_error(f"p must lie in [0, 1], got {p}.")

    rng = derive_rng(seed, "synthgen.type1")
    rounds = k // 2
    picks_item_4 = rng.random(rounds) < p

    users = np.tile([TYPE1_USER_1, TYPE1_USER_3], rounds)
    items = np.zeros(k, dtype=np.int64)
    items[1::2] = np.where(picks_item_4, TYPE1_ITEM_4, TYPE1_ITEM_2)

    return InteractionLog(
        users=users,
        items=items,
        timestamps=np.arange(k, dtype=np.float64),
        num_users=2,
        num_items=2,
        user_ids=["1", "3"],
        item_ids=["2", "4"],
        identifier=f"type1(k={k}, p={p}, seed={seed})",
    )


def gen_type2(n_pairs: int, repetitions: int, seed: int = 0) -> InteractionLog:
    """Generate a type-2 network.

    The base sequence is (user 1, item 1), (user 1, item 2) followed by
    (user u, item u) for ``u = 2 .. n_pairs``, repeated ``repetitions`` times.
    The process is deterministic; ``seed`` is accepted for uniformity.

    :param n_pairs: Number of users and of items.
    :type n_pairs: int
    :param repetitions: Number of copies of the base sequence.
    :type repetitions: int
    :param seed: Unused.
    :type seed: int
    :return: The log, with consecutive integer timestamps.
    :rtype: InteractionLog
    :raises ArgumentError: If ``n_pairs < 2`` or ``repetitions < 1``.
    """
    if n_pairs < 2:
        raise _argument_error(f"n_pairs must be at least 2, got {n_pairs}.")
    if repetitions < 1:
        raise _argument_error(f"repetitions must be at least 1, got {repetitions}.")

    base_users = [0, 0] + list(range(1, n_pairs))
    base_items = [0, 1] + list(range(1, n_pairs))
    users = np.tile(base_users, repetitions)
    items = np.tile(base_items, repetitions)

    return InteractionLog(
        users=users,
        items=items,
        timestamps=np.arange(len(users), dtype=np.float64),
        num_users=n_pairs,
        num_items=n_pairs,
        user_ids=[f"u{index + 1}" for index in range(n_pairs)],
        item_ids=[f"i{index + 1}" for index in range(n_pairs)],
        identifier=f"type2(n_pairs={n_pairs}, repetitions={repetitions})",
    )


def type2_batch_size_ratio(n_pairs: int, repetitions: int) -> float:
    """Return how much larger the batches of user 1's first edge are than its second's.

    :param n_pairs: Number of users and of items.
    :type n_pairs: int
    :param repetitions: Number of copies of the base sequence.
    :type repetitions: int
    :return: Mean batch size of the first edge over that of the second edge.
    :rtype: float
    """
    log = gen_type2(n_pairs, repetitions)
    plan = build_batches(log)
    first = mean_edge_batch_size(log, plan, TYPE2_FIRST_EDGE)
    second = mean_edge_batch_size(log, plan, TYPE2_SECOND_EDGE)
    return first / second


def type3_children(item: int) -> ty.Tuple[int, ...]:
    """Return the items a type-3 walk can move to from ``item``.

    :param item: Tree node.
    :type item: int
    :return: The children; empty for leaves.
    :rtype: ty.Tuple[int, ...]
    :raises ArgumentError: If the item is not in the tree.
    """
    if item not in TYPE3_TREE:
        raise _argument_error(f"Item {item} is not part of the type-3 tree.")
    return TYPE3_TREE[item]


def gen_type3(n_users: int, seed: int = 0) -> InteractionLog:
    """Generate a type-3 network.

    Every user walks from the root to a leaf, choosing uniformly among children.
    Walks advance round-robin: in step ``s`` users emit their ``s``-th item in a
    random order, at timestamps ``s * n_users + position``.

    :param n_users: Number of users.
    :type n_users: int
    :param seed: Root seed.
    :type seed: int
    :return: The log, with ``4 * n_users`` interactions.
    :rtype: InteractionLog
    :raises ArgumentError: If ``n_users < 1``.
    """
    if n_users < 1:
        raise _argument_error(f"n_users must be at least 1, got {n_users}.")

    rng = derive_rng(seed, "synthgen.type3")
    branch = rng.integers(0, 2, size=(n_users, TYPE3_PATH_LENGTH - 1))

    paths = np.zeros((n_users, TYPE3_PATH_LENGTH), dtype=np.int64)
    for step in range(1, TYPE3_PATH_LENGTH):
        for user in range(n_users):
            paths[user, step] = TYPE3_TREE[int(paths[user, step - 1])][branch[user, step - 1]]

    users: ty.List[int] = []
    items: ty.List[int] = []
    for step in range(TYPE3_PATH_LENGTH):
        for user in rng.permutation(n_users).tolist():
            users.append(user)
            items.append(int(paths[user, step]))

    return InteractionLog(
        users=users,
        items=items,
        timestamps=np.arange(len(users), dtype=np.float64),
        num_users=n_users,
        num_items=len(TYPE3_TREE),
        user_ids=[f"u{index}" for index in range(n_users)],
        item_ids=[str(node + 1) for node in range(len(TYPE3_TREE))],
        identifier=f"type3(n_users={n_users}, seed={seed})",
    )


@dataclass
class RecommendationGraph:
    """Directed item graph in which every item has exactly ``k_out`` out-neighbors."""

    graph: nx.DiGraph
    k_out: int
    _successors: ty.Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_items(self) -> int:
        """Return the number of items."""
        return self.graph.number_of_nodes()

    def successors(self, item: int) -> ty.List[int]:
        """Return the out-neighbors of an item in ascending order.

        :param item: The item.
        :type item: int
        :return: The out-neighbors.
        :rtype: ty.List[int]
        """
        return sorted(self.graph.successors(item))

    def successor_matrix(self) -> np.ndarray:
        """Return the sorted out-neighbors of every item as an (n_items, k_out) array.

        :return: The matrix.
        :rtype: np.ndarray
        """
        if self._successors is None:
            self._successors = np.array(
                [self.successors(item) for item in range(self.n_items)], dtype=np.int64
            ).reshape(self.n_items, self.k_out)
        return self._successors

    def in_degrees(self) -> np.ndarray:
        """Return the in-degree of every item.

        :return: In-degrees indexed by item.
        :rtype: np.ndarray
        """
        return np.array([self.graph.in_degree(item) for item in range(self.n_items)])


def build_recommendation_graph(n_items: int, k_out: int, seed: int = 0) -> RecommendationGraph:
    """Grow a k-out graph by preferential attachment.

    The first ``k_out + 1`` items form a complete directed graph. Every later
    item picks ``k_out`` distinct earlier items with probability proportional
    to their in-degree plus one.

    :param n_items: Number of items.
    :type n_items: int
    :param k_out: Out-degree of every item.
    :type k_out: int
    :param seed: Root seed.
    :type seed: int
    :return: The graph.
    :rtype: RecommendationGraph
    :raises ArgumentError: If ``k_out < 1`` or ``n_items <= k_out``.
    """
    logger = logging.getLogger(__name__)

    if k_out < 1 or n_items <= k_out:
        raise _argument_error(f"Need 1 <= k_out < n_items, got k_out={k_out}, n_items={n_items}.")

    logger.debug(f"Building recommendation graph with {n_items} items and k_out={k_out}...")

    rng = derive_rng(seed, "synthgen.graph")
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n_items))

    seed_items = k_out + 1
    graph.add_edges_from(
        (source, target)
        for source in range(seed_items)
        for target in range(seed_items)
        if source != target
    )

    in_degree = np.zeros(n_items, dtype=np.float64)
    in_degree[:seed_items] = k_out

    for item in range(seed_items, n_items):
        weights = in_degree[:item] + 1.0
        targets = rng.choice(item, size=k_out, replace=False, p=weights / weights.sum())
        graph.add_edges_from((item, int(target)) for target in targets)
        in_degree[targets] += 1.0

    return RecommendationGraph(graph=graph, k_out=k_out)


def type4_graph(spec: Type4Spec) -> RecommendationGraph:
    """Return the recommendation graph a type-4 spec generates its walks on.

    :param spec: The spec.
    :type spec: Type4Spec
    :return: The graph.
    :rtype: RecommendationGraph
    """
    return build_recommendation_graph(
        spec.n_items, spec.k_out, seed=derive_seed(spec.seed, "synthgen.type4.graph")
    )


def gen_type4(spec: Type4Spec) -> InteractionLog:
    """Generate a type-4 network.

    Each interaction picks a user uniformly. With probability ``p_jump``, or on
    the user's first interaction, the item is uniform; otherwise it is a uniform
    out-neighbor of the user's previous item. Inter-arrival times are
    exponential with rate ``arrival_rate``.

    :param spec: The spec.
    :type spec: Type4Spec
    :return: The log.
    :rtype: InteractionLog
    """
    graph = type4_graph(spec)
    successors = graph.successor_matrix()
    rng = derive_rng(spec.seed, "synthgen.type4")
    n = spec.n_interactions

    users = rng.integers(0, spec.n_users, size=n)
    jumps = rng.random(n) < spec.p_jump
    uniform_items = rng.integers(0, spec.n_items, size=n)
    neighbor_slots = rng.integers(0, spec.k_out, size=n)
    gaps = rng.exponential(1.0 / spec.arrival_rate, size=n)

    last_item = np.full(spec.n_users, -1, dtype=np.int64)
    items = np.zeros(n, dtype=np.int64)
    for position in range(n):
        user = users[position]
        previous = last_item[user]
        if previous < 0 or jumps[position]:
            items[position] = uniform_items[position]
        else:
            items[position] = successors[previous, neighbor_slots[position]]
        last_item[user] = items[position]

    return InteractionLog(
        users=users,
        items=items,
        timestamps=np.cumsum(gaps),
        num_users=spec.n_users,
        num_items=spec.n_items,
        identifier=f"type4(seed={spec.seed})",
    )


def generate(spec: AnySpec) -> InteractionLog:
    """Generate the network a spec describes.

    :param spec: Any synthetic spec.
    :type spec: AnySpec
    :return: The log.
    :rtype: InteractionLog
    """
    if isinstance(spec, Type1Spec):
        return gen_type1(spec.k, spec.p, spec.seed)
    if isinstance(spec, Type2Spec):
        return gen_type2(spec.n_pairs, spec.repetitions, spec.seed)
    if isinstance(spec, Type3Spec):
        return gen_type3(spec.n_users, spec.seed)
    return gen_type4(spec)


def _check_probability(p: float) -> None:
    """Raise an argument error unless ``p`` lies in [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise _argument_error(f"p must lie in [0, 1], got {p}.")


def type1_weighted_objective(p: float, kind: LossKind) -> ty.Dict[int, float]:
    """Return the per-round weight each of user 3's items carries in the loss.

    Under ``tbatch`` the (3, 4) edges share a batch with a (1, 2) edge and count
    half; otherwise every edge counts fully.

    :param p: Probability of the (3, 4) edge.
    :type p: float
    :param kind: The loss.
    :type kind: LossKind
    :return: Item index to weight.
    :rtype: ty.Dict[int, float]
    """
    _check_probability(p)
    item_4_weight = 0.5 if kind is LossKind.TBATCH else 1.0
    return {TYPE1_ITEM_2: 1.0 - p, TYPE1_ITEM_4: item_4_weight * p}


def optimal_choice(p: float, kind: LossKind) -> int:
    """Return the item a loss minimizer predicts for user 3.

    :param p: Probability of the (3, 4) edge.
    :type p: float
    :param kind: The loss.
    :type kind: LossKind
    :return: :data:`TYPE1_ITEM_2` or :data:`TYPE1_ITEM_4`.
    :rtype: int
    :raises ArgumentError: If ``p`` is outside [0, 1].
    """
    _check_probability(p)
    if kind is LossKind.TBATCH:
        return TYPE1_ITEM_4 if p >= 2.0 / 3.0 else TYPE1_ITEM_2
    return TYPE1_ITEM_4 if p > 0.5 else TYPE1_ITEM_2


def optimal_accuracy(p: float, kind: LossKind) -> float:
    """Return the top-1 accuracy on user 3's edges implied by :func:`optimal_choice`.

    :param p: Probability of the (3, 4) edge.
    :type p: float
    :param kind: The loss.
    :type kind: LossKind
    :return: ``p`` if item 4 is chosen, else ``1 - p``.
    :rtype: float
    """
    return p if optimal_choice(p, kind) == TYPE1_ITEM_4 else 1.0 - p
