# -*- coding: utf-8 -*-

"""Contains unit tests for the tempo_embed.trainer module."""

import json
import os
import tempfile
import unittest

import numpy as np
from pydantic import ValidationError

from tempo_embed.errors import EmptyLogError
from tempo_embed.graphdata import InteractionLog, chronological_split, mean_time_delta
from tempo_embed.losses import TRAINING_LOSSES, LossKind
from tempo_embed.model import (
    EmbeddingStore,
    ModelParams,
    commit_batch,
    forward_batch,
    load_checkpoint,
)
from tempo_embed.seeding import derive_rng
from tempo_embed.synthgen import gen_type1
from tempo_embed.tbatcher import build_batches
from tempo_embed.trainer import TrainConfig, model_gradient_check, save_report, train


def small_config(**overrides) -> TrainConfig:
    """Return a config small enough for unit tests."""
    settings = dict(epochs=2, dim=4, learning_rate=1e-2, seed=3)
    settings.update(overrides)
    return TrainConfig(**settings)


class TestTrainConfig(unittest.TestCase):
    """Test the run config."""

    def test_defaults(self):
        """Test the documented defaults."""
        cfg = TrainConfig()
        self.assertIs(cfg.loss_kind, LossKind.TBATCH)
        self.assertEqual((cfg.epochs, cfg.dim, cfg.span_size), (10, 64, 1))
        self.assertEqual(cfg.clip_norm, 5.0)
        self.assertEqual(cfg.to_dict()["loss_kind"], "tbatch")

    def test_loss_spelling(self):
        """Test loss names are parsed."""
        self.assertIs(TrainConfig(loss_kind="full_sum").loss_kind, LossKind.FULL_SUM)

    def test_invalid(self):
        """Test out-of-range values and the reference-only loss are rejected."""
        for field, value in (
            ("epochs", 0),
            ("span_size", 0),
            ("learning_rate", -1.0),
            ("loss_kind", "unbatched-reference"),
            ("loss_kind", LossKind.UNBATCHED_REFERENCE),
        ):
            with self.assertRaises(ValidationError):
                TrainConfig(**{field: value})


class TestTrain(unittest.TestCase):
    """Test the training loop."""

    @classmethod
    def setUpClass(cls) -> None:
        """Generate a small type-1 network."""
        cls.log = gen_type1(k=40, p=0.6, seed=5)

    def test_deterministic(self):
        """Test identical seeds give identical loss sequences."""
        first = train(self.log, small_config())
        second = train(self.log, small_config())
        self.assertEqual(first.losses, second.losses)
        self.assertEqual(len(first.epochs), 2)
        self.assertTrue(all(np.isfinite(first.losses)))

    def test_seed_changes_run(self):
        """Test another seed gives another run."""
        self.assertNotEqual(
            train(self.log, small_config()).losses, train(self.log, small_config(seed=4)).losses
        )

    def test_frozen_parameters(self):
        """Test a zero learning rate leaves the forward-only embeddings and the loss unchanged."""
        cfg = small_config(learning_rate=0.0, weight_decay=0.0, epochs=3)
        report = train(self.log, cfg)
        self.assertEqual(report.losses[0], report.losses[1])
        self.assertEqual(report.losses[1], report.losses[2])

        params = ModelParams(
            num_users=self.log.num_users,
            num_items=self.log.num_items,
            feature_dim=self.log.feature_dim,
            dim=cfg.dim,
            time_scale=mean_time_delta(self.log),
            rng=derive_rng(cfg.seed, "model.init"),
        )
        store = EmbeddingStore.for_params(params)
        for batch in build_batches(self.log).batches:
            positions = np.asarray(batch, dtype=np.int64)
            users, items = self.log.users[positions], self.log.items[positions]
            timestamps = self.log.timestamps[positions]
            user_deltas, item_deltas = store.deltas(users, items, timestamps)
            forward = forward_batch(
                store,
                params,
                users,
                items,
                self.log.features[positions],
                user_deltas,
                item_deltas,
            )
            commit_batch(store, forward, users, items, timestamps)

        trained = report.checkpoint.store
        np.testing.assert_allclose(trained.dynamic_user, store.dynamic_user, rtol=0, atol=1e-12)
        np.testing.assert_allclose(trained.dynamic_item, store.dynamic_item, rtol=0, atol=1e-12)
        self.assertFalse(np.allclose(store.dynamic_user, 0.0))

    def test_batches_in_plan_order(self):
        """Test every epoch visits the batches in plan order."""
        plan = build_batches(self.log)
        visited = []
        train(
            self.log,
            small_config(span_size=3),
            batch_callback=lambda i, b: visited.append((i, b)),
        )
        expected = list(enumerate(plan.batches))
        self.assertEqual(visited, expected + expected)

    def test_every_loss(self):
        """Test every training loss runs and its breakdown adds up."""
        for kind in TRAINING_LOSSES:
            with self.subTest(kind=kind):
                record = train(self.log, small_config(loss_kind=kind, epochs=1)).epochs[0]
                breakdown = record.breakdown
                self.assertAlmostEqual(
                    breakdown.total,
                    breakdown.prediction_term + breakdown.user_reg_term + breakdown.item_reg_term,
                )

    def test_validation_metrics(self):
        """Test validation metrics are recorded per epoch."""
        train_log, test_log = chronological_split(self.log, 0.75)
        report = train(
            train_log, small_config(), validation=test_log, targets={"user3": (1, None)}
        )
        for record in report.epochs:
            self.assertIsNotNone(record.metrics)
            self.assertGreater(record.metrics.mrr, 0.0)
            self.assertIn("user3", record.metrics.accuracy_by_target)
            self.assertIn("mrr", record.to_dict())

    def test_report_and_checkpoint(self):
        """Test the report and checkpoint files."""
        with tempfile.TemporaryDirectory() as tmp:
            checkpoint_path = os.path.join(tmp, "model.json")
            report_path = os.path.join(tmp, "report.json")
            report = train(self.log, small_config(), checkpoint_path=checkpoint_path)
            save_report(report, report_path, extra={"note": "unit"})

            with open(report_path, "r", encoding="utf-8") as handle:
                document = json.load(handle)
            checkpoint = load_checkpoint(checkpoint_path)

        self.assertEqual(len(document["epochs"]), 2)
        self.assertEqual(set(document["epochs"][0]), {"epoch", "loss", "pred_term", "ureg", "ireg"})
        self.assertIn("wall_seconds", document)
        self.assertEqual(document["config"]["dim"], 4)
        self.assertEqual(document["note"], "unit")
        self.assertEqual(document["batch_stats"]["num_batches"], len(build_batches(self.log)))
        np.testing.assert_array_equal(
            checkpoint.store.dynamic_user, report.checkpoint.store.dynamic_user
        )

    def test_empty_log(self):
        """Test an empty log cannot be trained on."""
        empty = InteractionLog([], [], [], num_users=1, num_items=1)
        with self.assertRaises(EmptyLogError):
            train(empty, small_config())


class TestModelGradientCheck(unittest.TestCase):
    """Test analytic gradients of the full model."""

    def test_every_loss(self):
        """Test the full model with every training loss at d = 4."""
        for kind in TRAINING_LOSSES:
            for seed in (0, 1):
                with self.subTest(kind=kind, seed=seed):
                    self.assertLess(model_gradient_check(seed=seed, dim=4, loss_kind=kind), 1e-4)
