# -*- coding: utf-8 -*-

"""Contains unit tests for the tempo_embed.model module."""

import json
import os
import tempfile
import unittest

import numpy as np

from tempo_embed.errors import ArgumentError, CheckpointError, ModelConfigError
from tempo_embed.graphdata import Interaction
from tempo_embed.model import (
    NO_ITEM,
    Checkpoint,
    EmbeddingStore,
    LiveEmbeddings,
    ModelParams,
    commit_batch,
    forward_batch,
    item_distances,
    load_checkpoint,
    predict_item_embedding,
    project_user,
    rank_items,
    save_checkpoint,
    true_item_rank,
    update_item_embedding,
    update_user_embedding,
)
from tempo_embed.numgrad import constant


def small_model(dim: int = 3, feature_dim: int = 2, seed: int = 0):
    """Return parameters and a store over 3 users and 4 items."""
    params = ModelParams(3, 4, feature_dim, dim=dim, rng=np.random.default_rng(seed))
    return params, EmbeddingStore.for_params(params)


class TestModelParams(unittest.TestCase):
    """Test parameter construction."""

    def test_shapes(self):
        """Test the prediction layer outputs dim + num_items values."""
        params, _ = small_model()
        self.assertEqual(params.output_dim, 7)
        self.assertEqual(params["predict.B_user_static"].shape, (7, 3))
        self.assertEqual(params["user.W_feat"].shape, (3, 2))
        self.assertEqual(params["project.w"].shape, (3, 1))
        self.assertEqual(params["item.bias"].value.tolist(), [0.0, 0.0, 0.0])

    def test_seeded(self):
        """Test the initialization depends only on the generator."""
        first, _ = small_model(seed=4)
        second, _ = small_model(seed=4)
        for name, value in first.parameters.state().items():
            np.testing.assert_array_equal(value, second[name].value)

    def test_invalid_sizes(self):
        """Test invalid sizes are rejected."""
        with self.assertRaises(ModelConfigError):
            ModelParams(0, 4, 0)
        with self.assertRaises(ModelConfigError):
            ModelParams(3, 4, 0, time_scale=0.0)


class TestUpdateCells(unittest.TestCase):
    """Test the recurrent update cells."""

    def test_zero_weights(self):
        """Test zero weights and biases give zero embeddings."""
        params, store = small_model()
        params.zero_()
        interaction = Interaction(user=1, item=2, timestamp=5.0, features=(1.0, -1.0))
        user = update_user_embedding(store, params, interaction, 5.0)
        item = update_item_embedding(store, params, interaction, 5.0)
        self.assertEqual(user.value.tolist(), [0.0] * 3)
        self.assertEqual(item.value.tolist(), [0.0] * 3)

    def test_bounded(self):
        """Test the new embeddings lie in (-1, 1)."""
        params, store = small_model()
        store.dynamic_user[:] = 10.0
        interaction = Interaction(user=0, item=0, timestamp=1.0, features=(3.0, 3.0))
        value = update_user_embedding(store, params, interaction, 1.0).value
        self.assertEqual(value.shape, (3,))
        self.assertTrue(np.all(np.abs(value) <= 1.0))

    def test_feature_mismatch(self):
        """Test a feature vector of the wrong length is rejected."""
        params, store = small_model()
        with self.assertRaises(ModelConfigError):
            update_user_embedding(store, params, Interaction(0, 0, 0.0, (1.0,)), 0.0)

    def test_store_mismatch(self):
        """Test a store of other sizes is rejected."""
        params, _ = small_model()
        with self.assertRaises(ModelConfigError):
            update_item_embedding(
                EmbeddingStore(3, 5, 3), params, Interaction(0, 0, 0.0, (1.0, 1.0)), 0.0
            )


class TestProjection(unittest.TestCase):
    """Test the time projection."""

    def test_zero_delta(self):
        """Test a zero delta returns the embedding unchanged."""
        params, _ = small_model()
        u = constant([0.5, -0.2, 0.1])
        self.assertEqual(project_user(params, u, 0.0).value.tolist(), [0.5, -0.2, 0.1])

    def test_zero_embedding(self):
        """Test a zero embedding stays zero."""
        params, _ = small_model()
        self.assertEqual(project_user(params, constant(np.zeros(3)), 7.0).value.tolist(), [0.0] * 3)

    def test_zero_weight(self):
        """Test a zero projection weight returns the embedding unchanged."""
        params, _ = small_model()
        params["project.w"].assign(np.zeros((3, 1)))
        u = constant([0.5, -0.2, 0.1])
        self.assertEqual(project_user(params, u, 9.0).value.tolist(), [0.5, -0.2, 0.1])

    def test_stretch(self):
        """Test the embedding is scaled by one plus the weighted delta."""
        params, _ = small_model()
        params["project.w"].assign(np.array([[1.0], [0.0], [-1.0]]))
        projected = project_user(params, constant([1.0, 1.0, 1.0]), 0.5)
        self.assertEqual(projected.value.tolist(), [1.5, 1.0, 0.5])

    def test_negative_delta(self):
        """Test a negative delta is rejected."""
        params, _ = small_model()
        with self.assertRaises(ArgumentError):
            project_user(params, constant(np.ones(3)), -1.0)


class TestPrediction(unittest.TestCase):
    """Test next-item prediction and ranking."""

    def test_zero_weights(self):
        """Test zero weights predict the zero vector."""
        params, store = small_model()
        params.zero_()
        predicted = predict_item_embedding(store, params, 0, 3.0)
        self.assertEqual(predicted.value.tolist(), [0.0] * 7)

    def test_cold_start_ignores_item_static(self):
        """Test a user without a previous item does not read any item's one-hot weights."""
        params, store = small_model()
        self.assertEqual(store.last_item_of_user[0], NO_ITEM)
        before = predict_item_embedding(store, params, 0, 0.0).value
        params["predict.B_item_static"].assign(np.ones((7, 4)))
        after = predict_item_embedding(store, params, 0, 0.0).value
        np.testing.assert_array_equal(before, after)

    def test_nearest_first(self):
        """Test items are ranked by distance to the prediction."""
        store = EmbeddingStore(1, 2, 2)
        store.dynamic_item[:] = [[5.0, 5.0], [0.0, 1.0]]
        predicted = np.array([0.0, 0.9, 0.0, 0.0])
        self.assertEqual(rank_items(store, predicted).tolist(), [1, 0])
        self.assertEqual(true_item_rank(store, predicted, 1), 1)
        self.assertEqual(true_item_rank(store, predicted, 0), 2)

    def test_exact_match_first(self):
        """Test an item whose full embedding equals the prediction ranks first."""
        store = EmbeddingStore(1, 5, 2)
        store.dynamic_item[:] = np.arange(10, dtype=float).reshape(5, 2)
        predicted = np.concatenate([store.dynamic_item[3], np.eye(5)[3]])
        self.assertEqual(rank_items(store, predicted)[0], 3)
        self.assertEqual(item_distances(store, predicted)[3], 0.0)

    def test_ties_to_lower_index(self):
        """Test equal distances are ordered by item index."""
        store = EmbeddingStore(1, 3, 1)
        predicted = np.zeros(4)
        self.assertEqual(rank_items(store, predicted).tolist(), [0, 1, 2])
        self.assertEqual(true_item_rank(store, predicted, 2), 3)

    def test_closed_form_distance(self):
        """Test the one-hot shortcut against the explicit distance."""
        rng = np.random.default_rng(8)
        store = EmbeddingStore(2, 6, 3)
        store.dynamic_item[:] = rng.normal(size=(6, 3))
        predicted = rng.normal(size=9)
        full = np.hstack([store.dynamic_item, np.eye(6)])
        expected = np.sum((full - predicted) ** 2, axis=1)
        np.testing.assert_allclose(item_distances(store, predicted), expected)

    def test_wrong_length(self):
        """Test a prediction of the wrong length is rejected."""
        with self.assertRaises(ModelConfigError):
            item_distances(EmbeddingStore(1, 2, 2), np.zeros(3))


class TestBatchForward(unittest.TestCase):
    """Test batched forward passes and commits."""

    def test_matches_single_interactions(self):
        """Test the batched cells agree with the per-interaction functions."""
        params, store = small_model()
        store.dynamic_user[:] = np.random.default_rng(1).normal(size=(3, 3)) * 0.3
        users, items = np.array([0, 2]), np.array([3, 1])
        features = np.array([[0.1, 0.2], [0.3, -0.4]])
        deltas = np.array([1.0, 2.0])

        forward = forward_batch(store, params, users, items, features, deltas, deltas)
        for row in range(2):
            interaction = Interaction(int(users[row]), int(items[row]), 0.0, tuple(features[row]))
            np.testing.assert_allclose(
                forward.user_after.value[row],
                update_user_embedding(store, params, interaction, deltas[row]).value,
            )
            np.testing.assert_allclose(
                forward.item_after.value[row],
                update_item_embedding(store, params, interaction, deltas[row]).value,
            )
            np.testing.assert_allclose(
                forward.predicted.value[row],
                predict_item_embedding(store, params, int(users[row]), deltas[row]).value,
            )
        self.assertEqual(forward.target.shape, (2, 7))

    def test_commit(self):
        """Test a commit writes the endpoints' embeddings, previous items and times only."""
        params, store = small_model()
        rng = np.random.default_rng(1)
        store.dynamic_user[:] = rng.normal(size=store.dynamic_user.shape)
        store.dynamic_item[:] = rng.normal(size=store.dynamic_item.shape)
        before = store.copy()
        users, items, times = np.array([1]), np.array([2]), np.array([4.0])
        live = LiveEmbeddings()
        forward = forward_batch(
            store, params, users, items, np.zeros((1, 2)), np.zeros(1), np.zeros(1)
        )
        commit_batch(store, forward, users, items, times, live=live)
        np.testing.assert_array_equal(store.dynamic_user[1], forward.user_after.value[0])
        np.testing.assert_array_equal(store.dynamic_item[2], forward.item_after.value[0])
        self.assertFalse(np.array_equal(store.dynamic_user[1], before.dynamic_user[1]))
        self.assertFalse(np.array_equal(store.dynamic_item[2], before.dynamic_item[2]))

        other_users = [user for user in range(store.num_users) if user != 1]
        other_items = [item for item in range(store.num_items) if item != 2]
        np.testing.assert_array_equal(
            store.dynamic_user[other_users], before.dynamic_user[other_users]
        )
        np.testing.assert_array_equal(
            store.dynamic_item[other_items], before.dynamic_item[other_items]
        )
        np.testing.assert_array_equal(
            store.last_item_of_user[other_users], before.last_item_of_user[other_users]
        )

        self.assertEqual(store.last_item_of_user[1], 2)
        self.assertEqual(store.user_delta(1, 6.0), 2.0)
        self.assertEqual(store.item_delta(0, 6.0), 0.0)
        self.assertIn(1, live.users)
        with self.assertRaises(ArgumentError):
            store.touch(users, items, np.array([3.0]))


class TestCheckpoint(unittest.TestCase):
    """Test checkpoint files."""

    def test_save_and_load(self):
        """Test a checkpoint reads back identically."""
        params, store = small_model()
        store.dynamic_item[2] = [0.1, 0.2, 0.3]
        store.touch(np.array([0]), np.array([2]), np.array([1.5]))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "model.json")
            save_checkpoint(Checkpoint(params, store, {"dim": 3}), path)
            loaded = load_checkpoint(path)

        self.assertEqual(loaded.config, {"dim": 3})
        for name, value in params.parameters.state().items():
            np.testing.assert_array_equal(loaded.params[name].value, value)
        np.testing.assert_array_equal(loaded.store.dynamic_item, store.dynamic_item)
        self.assertEqual(loaded.store.user_delta(0, 2.0), 0.5)
        self.assertTrue(np.isnan(loaded.store.user_time[1]))

    def test_unknown_version(self):
        """Test a checkpoint of another schema version is rejected."""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "model.json")
            with open(path, "w", encoding="utf-8") as handle:
                json.dump({"schema_version": 99}, handle)
            with self.assertRaises(CheckpointError):
                load_checkpoint(path)
