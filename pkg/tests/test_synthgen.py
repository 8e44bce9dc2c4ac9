# -*- coding: utf-8 -*-

"""Contains unit tests for the tempo_embed.synthgen module."""

import unittest

import numpy as np
from pydantic import ValidationError

from tempo_embed.errors import ArgumentError
from tempo_embed.losses import LossKind
from tempo_embed.synthgen import (
    TYPE1_ITEM_2,
    TYPE1_ITEM_4,
    TYPE1_USER_3,
    TYPE2_FIRST_EDGE,
    TYPE2_SECOND_EDGE,
    TYPE3_TREE,
    Type1Spec,
    Type3Spec,
    Type4Spec,
    build_recommendation_graph,
    gen_type1,
    gen_type2,
    gen_type3,
    gen_type4,
    generate,
    optimal_accuracy,
    optimal_choice,
    parse_synth_spec,
    type1_weighted_objective,
    type2_batch_size_ratio,
    type3_children,
    type4_graph,
)
from tempo_embed.tbatcher import build_batches, edge_batch_sizes, mean_edge_batch_size


class TestType1(unittest.TestCase):
    """Test the two-user network."""

    def test_layout(self):
        """Test users alternate and timestamps count up."""
        log = gen_type1(k=10, p=0.5, seed=1)
        self.assertEqual(len(log), 10)
        self.assertEqual(log.users.tolist(), [0, 1] * 5)
        self.assertEqual(log.items[0::2].tolist(), [TYPE1_ITEM_2] * 5)
        self.assertEqual(log.timestamps.tolist(), list(range(10)))
        self.assertEqual(log.user_ids, ("1", "3"))
        self.assertEqual(log.item_ids, ("2", "4"))

    def test_extreme_probabilities(self):
        """Test p = 0 and p = 1 fix user 3's item."""
        self.assertTrue(np.all(gen_type1(100, 0.0).user_history(TYPE1_USER_3) == TYPE1_ITEM_2))
        self.assertTrue(np.all(gen_type1(100, 1.0).user_history(TYPE1_USER_3) == TYPE1_ITEM_4))

    def test_concentration(self):
        """Test the number of (3, 4) edges stays within three standard deviations."""
        log = gen_type1(k=10_000, p=0.5, seed=0)
        count = int(np.sum(log.user_history(TYPE1_USER_3) == TYPE1_ITEM_4))
        self.assertLess(abs(count - 2500), 3 * np.sqrt(5000 * 0.25))

    def test_batch_structure(self):
        """Test (3, 4) edges share a batch with a (1, 2) edge and (3, 2) edges are alone."""
        for seed in range(5):
            log = gen_type1(k=200, p=0.6, seed=seed)
            sizes = edge_batch_sizes(log, build_batches(log))
            self.assertEqual(set(sizes[(TYPE1_USER_3, TYPE1_ITEM_4)]), {2})
            self.assertEqual(set(sizes[(TYPE1_USER_3, TYPE1_ITEM_2)]), {1})

    def test_deterministic(self):
        """Test the same seed gives the same network and another seed another one."""
        self.assertEqual(gen_type1(100, 0.5, seed=3), gen_type1(100, 0.5, seed=3))
        self.assertNotEqual(gen_type1(100, 0.5, seed=3), gen_type1(100, 0.5, seed=4))

    def test_invalid(self):
        """Test odd sizes and out-of-range probabilities are rejected."""
        with self.assertRaises(ArgumentError):
            gen_type1(k=5, p=0.5)
        with self.assertRaises(ArgumentError):
            gen_type1(k=4, p=1.5)


class TestType1Optimum(unittest.TestCase):
    """Test the closed-form optimum of the type-1 network."""

    def test_choice_at_0_6(self):
        """Test TBatch favors item 2 where the sum losses favor item 4."""
        self.assertEqual(optimal_choice(0.6, LossKind.TBATCH), TYPE1_ITEM_2)
        self.assertEqual(optimal_choice(0.6, LossKind.ITEM_SUM), TYPE1_ITEM_4)
        self.assertEqual(optimal_choice(0.6, LossKind.FULL_SUM), TYPE1_ITEM_4)

    def test_choice_at_0_3(self):
        """Test every loss picks item 2 when it is the majority."""
        for kind in (LossKind.TBATCH, LossKind.ITEM_SUM, LossKind.FULL_SUM):
            self.assertEqual(optimal_choice(0.3, kind), TYPE1_ITEM_2)

    def test_disagreement_interval(self):
        """Test the losses disagree only for p in (1/2, 2/3)."""
        for p in np.linspace(0.0, 1.0, 101):
            disagree = optimal_choice(p, LossKind.TBATCH) != optimal_choice(p, LossKind.ITEM_SUM)
            self.assertEqual(disagree, 0.5 < p < 2.0 / 3.0, msg=f"p={p}")

    def test_accuracy(self):
        """Test the accuracy implied by each choice."""
        self.assertAlmostEqual(optimal_accuracy(0.6, LossKind.TBATCH), 0.4)
        self.assertAlmostEqual(optimal_accuracy(0.6, LossKind.ITEM_SUM), 0.6)
        self.assertAlmostEqual(optimal_accuracy(0.8, LossKind.TBATCH), 0.8)

    def test_weighted_objective(self):
        """Test the (3, 4) edges weigh half under TBatch."""
        self.assertEqual(
            type1_weighted_objective(0.5, LossKind.TBATCH), {TYPE1_ITEM_2: 0.5, TYPE1_ITEM_4: 0.25}
        )
        self.assertEqual(
            type1_weighted_objective(0.5, LossKind.ITEM_SUM), {TYPE1_ITEM_2: 0.5, TYPE1_ITEM_4: 0.5}
        )

    def test_invalid_probability(self):
        """Test probabilities outside [0, 1] are rejected."""
        with self.assertRaises(ArgumentError):
            optimal_choice(-0.1, LossKind.TBATCH)


class TestType2(unittest.TestCase):
    """Test the repeated-sequence network."""

    def test_base_sequence(self):
        """Test one repetition of five pairs."""
        log = gen_type2(n_pairs=5, repetitions=1)
        self.assertEqual(len(log), 6)
        self.assertEqual(log.num_users + log.num_items, 10)
        self.assertEqual(log.users.tolist(), [0, 0, 1, 2, 3, 4])
        self.assertEqual(log.items.tolist(), [0, 1, 1, 2, 3, 4])

    def test_repetitions(self):
        """Test repetitions concatenate the base sequence."""
        once = gen_type2(5, 1)
        twice = gen_type2(5, 2)
        self.assertEqual(len(twice), 12)
        self.assertEqual(twice.users.tolist(), once.users.tolist() * 2)
        np.testing.assert_array_equal(twice.timestamps, np.arange(12.0))

    def test_edge_batch_sizes(self):
        """Test the first edge sits in larger batches than the second."""
        log = gen_type2(5, 1)
        plan = build_batches(log)
        self.assertEqual(mean_edge_batch_size(log, plan, TYPE2_FIRST_EDGE), 4.0)
        self.assertEqual(mean_edge_batch_size(log, plan, TYPE2_SECOND_EDGE), 1.0)
        self.assertEqual(type2_batch_size_ratio(5, 1), 4.0)
        self.assertAlmostEqual(type2_batch_size_ratio(5, 2), 3.0 / 2.5)

    def test_invalid(self):
        """Test fewer than two pairs are rejected."""
        with self.assertRaises(ArgumentError):
            gen_type2(n_pairs=1, repetitions=3)
        with self.assertRaises(ArgumentError):
            gen_type2(n_pairs=3, repetitions=0)


class TestType3(unittest.TestCase):
    """Test the tree-walk network."""

    @classmethod
    def setUpClass(cls) -> None:
        """Generate a network of 1000 users."""
        cls.log = gen_type3(n_users=1000, seed=2)

    def test_paths(self):
        """Test every user walks four levels from the root along tree edges."""
        self.assertEqual(len(self.log), 4000)
        self.assertEqual(self.log.num_items, 11)
        for user in range(0, 1000, 37):
            path = self.log.user_history(user).tolist()
            self.assertEqual(len(path), 4)
            self.assertEqual(path[0], 0)
            for parent, child in zip(path, path[1:]):
                self.assertIn(child, type3_children(parent))
            self.assertEqual(type3_children(path[-1]), ())

    def test_round_robin(self):
        """Test every user emits one item per step."""
        for step in range(4):
            users = self.log.users[step * 1000 : (step + 1) * 1000]
            self.assertEqual(sorted(users.tolist()), list(range(1000)))

    def test_uniform_split(self):
        """Test the first branch is chosen about half of the time."""
        first_steps = self.log.items[1000:2000]
        count = int(np.sum(first_steps == TYPE3_TREE[0][0]))
        self.assertLess(abs(count - 500), 100)

    def test_unknown_item(self):
        """Test items outside the tree are rejected."""
        with self.assertRaises(ArgumentError):
            type3_children(11)


class TestRecommendationGraph(unittest.TestCase):
    """Test the preferential-attachment item graph."""

    def test_out_degree(self):
        """Test every item has k_out distinct out-neighbors and no self-loop."""
        graph = build_recommendation_graph(200, 5, seed=1)
        self.assertEqual(graph.n_items, 200)
        for item in range(200):
            neighbors = graph.successors(item)
            self.assertEqual(len(neighbors), 5)
            self.assertNotIn(item, neighbors)
        self.assertEqual(graph.successor_matrix().shape, (200, 5))

    def test_skewed_in_degree(self):
        """Test a few items collect many more edges than the typical item."""
        in_degrees = build_recommendation_graph(1000, 10, seed=0).in_degrees()
        self.assertEqual(int(in_degrees.sum()), 10_000)
        self.assertGreater(in_degrees.max(), 3 * np.median(in_degrees))

    def test_invalid(self):
        """Test the out-degree must be below the number of items."""
        with self.assertRaises(ArgumentError):
            build_recommendation_graph(5, 5)


class TestType4(unittest.TestCase):
    """Test the graph-surfing network."""

    def test_walks_follow_edges(self):
        """Test a single user without jumps only moves along graph edges."""
        spec = Type4Spec(n_users=1, n_items=30, k_out=3, p_jump=0.0, n_interactions=300, seed=4)
        log = gen_type4(spec)
        graph = type4_graph(spec).graph
        items = log.items.tolist()
        for previous, current in zip(items, items[1:]):
            self.assertTrue(graph.has_edge(previous, current))

    def test_timestamps(self):
        """Test the arrival times increase."""
        log = gen_type4(Type4Spec(n_interactions=500, seed=1))
        self.assertEqual(len(log), 500)
        self.assertTrue(np.all(np.diff(log.timestamps) > 0))
        self.assertEqual((log.num_users, log.num_items), (100, 100))

    def test_deterministic(self):
        """Test the same spec gives the same network."""
        spec = Type4Spec(n_interactions=200, seed=9)
        self.assertEqual(gen_type4(spec), gen_type4(spec))

    def test_invalid(self):
        """Test the spec needs more items than out-neighbors."""
        with self.assertRaises(ValidationError):
            Type4Spec(n_items=5, k_out=5)


class TestSpecs(unittest.TestCase):
    """Test spec parsing and dispatch."""

    def test_parse(self):
        """Test a tagged mapping resolves to its spec class."""
        spec = parse_synth_spec({"variant": "type1", "k": 1000, "p": 0.6})
        self.assertIsInstance(spec, Type1Spec)
        self.assertEqual((spec.k, spec.p), (1000, 0.6))
        self.assertIsInstance(parse_synth_spec({"variant": "type3"}), Type3Spec)

    def test_parse_invalid(self):
        """Test unknown variants and invalid values are rejected."""
        with self.assertRaises(ValidationError):
            parse_synth_spec({"variant": "type9"})
        with self.assertRaises(ValidationError):
            parse_synth_spec({"variant": "type1", "k": 7})

    def test_generate(self):
        """Test dispatch matches the direct generators."""
        self.assertEqual(generate(Type1Spec(k=20, p=0.3, seed=2)), gen_type1(20, 0.3, seed=2))
        self.assertEqual(generate(Type3Spec(n_users=10, seed=1)), gen_type3(10, seed=1))
