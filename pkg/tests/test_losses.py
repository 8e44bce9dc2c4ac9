# -*- coding: utf-8 -*-

"""Contains unit tests for the tempo_embed.losses module."""

import unittest

import numpy as np

from tempo_embed.errors import ArgumentError, ModelConfigError
from tempo_embed.losses import (
    TRAINING_LOSSES,
    LossBreakdown,
    LossConfig,
    LossKind,
    batch_loss,
    traced_batch_loss,
)
from tempo_embed.numgrad import Parameter, ParameterSet, constant, finite_difference_check

TBATCH = LossKind.TBATCH
ITEM_SUM = LossKind.ITEM_SUM
FULL_SUM = LossKind.FULL_SUM


def config(dim: int, lam: float = 0.0, num_users: int = 1, num_items: int = 1) -> LossConfig:
    """Return a loss config."""
    return LossConfig(
        lambda_u=lam, lambda_i=lam, dim=dim, num_users=num_users, num_items=num_items
    )


class TestLossKind(unittest.TestCase):
    """Test loss name parsing."""

    def test_spellings(self):
        """Test dash and underscore spellings resolve to the same loss."""
        self.assertIs(LossKind.from_name("item-sum"), ITEM_SUM)
        self.assertIs(LossKind.from_name("ITEM_SUM"), ITEM_SUM)
        self.assertIs(LossKind.from_name(FULL_SUM), FULL_SUM)
        self.assertEqual(TRAINING_LOSSES, (TBATCH, ITEM_SUM, FULL_SUM))

    def test_unknown(self):
        """Test an unknown name is rejected."""
        with self.assertRaises(ArgumentError):
            LossKind.from_name("mean")


class TestWorkedExamples(unittest.TestCase):
    """Test hand-computed loss values."""

    def test_single_prediction(self):
        """Test one prediction with squared error 0.25 at d = 1."""
        predictions = [([0.5], [0.0])]
        for kind in TRAINING_LOSSES:
            self.assertEqual(batch_loss(kind, config(1), predictions).total, 0.25)

    def test_two_predictions_d1(self):
        """Test two predictions with squared error 0.25 each at d = 1."""
        predictions = [([0.5], [0.0]), ([0.0], [-0.5])]
        self.assertEqual(batch_loss(TBATCH, config(1), predictions).total, 0.25)
        self.assertEqual(batch_loss(ITEM_SUM, config(1), predictions).total, 0.5)
        self.assertEqual(batch_loss(FULL_SUM, config(1), predictions).total, 0.5)

    def test_two_predictions_d2(self):
        """Test two predictions with squared error 0.25 each at d = 2."""
        predictions = [([0.5, 0.0], [0.0, 0.0]), ([0.0, 0.5], [0.0, 0.0])]
        # 0.5 / (|S_b| * d) with |S_b| = d = 2.
        self.assertEqual(batch_loss(TBATCH, config(2), predictions).total, 0.125)
        self.assertEqual(batch_loss(ITEM_SUM, config(2), predictions).total, 0.25)
        self.assertEqual(batch_loss(FULL_SUM, config(2), predictions).total, 0.5)

    def test_regularization(self):
        """Test the drift terms are normalized by node counts and the dimension."""
        cfg = config(2, lam=1.0, num_users=2, num_items=4)
        breakdown = batch_loss(
            ITEM_SUM,
            cfg,
            [([0.0, 0.0], [0.0, 0.0])],
            user_deltas=[([1.0, 1.0], [0.0, 0.0])],
            item_deltas=[([2.0, 0.0], [0.0, 0.0])],
        )
        self.assertEqual(breakdown.prediction_term, 0.0)
        self.assertEqual(breakdown.user_reg_term, 2.0 / 4.0)
        self.assertEqual(breakdown.item_reg_term, 4.0 / 8.0)
        self.assertEqual(breakdown.total, 1.0)
        self.assertEqual(
            breakdown.to_dict(), {"loss": 1.0, "pred_term": 0.0, "ureg": 0.5, "ireg": 0.5}
        )

    def test_reference_has_no_normalizers(self):
        """Test the reference loss sums every term as is."""
        breakdown = batch_loss(
            LossKind.UNBATCHED_REFERENCE,
            config(2, lam=0.5, num_users=3, num_items=3),
            [([1.0, 0.0], [0.0, 0.0]), ([0.0, 1.0], [0.0, 0.0])],
            user_deltas=[([1.0, 1.0], [0.0, 0.0])],
        )
        self.assertEqual(breakdown.prediction_term, 2.0)
        self.assertEqual(breakdown.user_reg_term, 1.0)
        self.assertEqual(breakdown.item_reg_term, 0.0)

    def test_full_width_predictions(self):
        """Test predictions may carry the one-hot part."""
        predictions = [([0.0, 1.0, 0.0], [0.0, 0.0, 1.0])]
        self.assertEqual(batch_loss(FULL_SUM, config(1, num_items=2), predictions).total, 2.0)


class TestLossIdentities(unittest.TestCase):
    """Test relations between the losses on random inputs."""

    def test_size_one_batches(self):
        """Test single-interaction batches make TBatch and ItemSum coincide."""
        rng = np.random.default_rng(17)
        for _ in range(1000):
            dim = int(rng.integers(1, 9))
            predictions = [(rng.normal(size=dim), rng.normal(size=dim))]
            tbatch = batch_loss(TBATCH, config(dim), predictions).total
            item_sum = batch_loss(ITEM_SUM, config(dim), predictions).total
            full_sum = batch_loss(FULL_SUM, config(dim), predictions).total
            self.assertAlmostEqual(tbatch, item_sum, delta=1e-12 * max(1.0, item_sum))
            self.assertAlmostEqual(full_sum, dim * item_sum, delta=1e-12 * max(1.0, full_sum))

    def test_duplicated_batch(self):
        """Test duplicating every member keeps TBatch and doubles the sum losses."""
        rng = np.random.default_rng(23)
        for _ in range(1000):
            dim = int(rng.integers(1, 9))
            size = int(rng.integers(1, 6))
            predictions = [(rng.normal(size=dim), rng.normal(size=dim)) for _ in range(size)]
            doubled = predictions + predictions
            for kind, factor in ((TBATCH, 1.0), (ITEM_SUM, 2.0), (FULL_SUM, 2.0)):
                once = batch_loss(kind, config(dim), predictions).prediction_term
                twice = batch_loss(kind, config(dim), doubled).prediction_term
                self.assertAlmostEqual(twice, factor * once, delta=1e-12 * max(1.0, twice))


class TestLossErrors(unittest.TestCase):
    """Test rejected inputs."""

    def test_empty_batch(self):
        """Test a batch needs a prediction."""
        with self.assertRaises(ArgumentError):
            batch_loss(TBATCH, config(1), [])

    def test_width_mismatch(self):
        """Test predictions must have the configured width."""
        with self.assertRaises(ModelConfigError):
            batch_loss(TBATCH, config(2), [([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 0.0])])

    def test_ragged(self):
        """Test vectors of different lengths are rejected."""
        with self.assertRaises(ModelConfigError):
            batch_loss(TBATCH, config(2), [([1.0, 2.0], [0.0, 0.0]), ([1.0], [0.0])])

    def test_negative_lambda(self):
        """Test regularization strengths cannot be negative."""
        with self.assertRaises(ValueError):
            LossConfig(lambda_u=-1.0, dim=1, num_users=1, num_items=1)


class TestTracedLoss(unittest.TestCase):
    """Test the differentiable loss."""

    def test_gradients(self):
        """Test gradients of every loss against finite differences."""
        rng = np.random.default_rng(31)
        predicted = Parameter(rng.normal(size=(3, 2)), name="predicted")
        user_after = Parameter(rng.normal(size=(3, 2)), name="user_after")
        item_after = Parameter(rng.normal(size=(2, 2)), name="item_after")
        params = ParameterSet([predicted, user_after, item_after])
        target = constant(rng.normal(size=(3, 2)))
        user_before = constant(rng.normal(size=(3, 2)))
        item_before = constant(rng.normal(size=(2, 2)))
        cfg = config(2, lam=0.7, num_users=5, num_items=4)

        for kind in LossKind:
            with self.subTest(kind=kind):
                error = finite_difference_check(
                    lambda p, kind=kind: traced_batch_loss(
                        kind,
                        cfg,
                        p["predicted"],
                        target,
                        p["user_after"],
                        user_before,
                        p["item_after"],
                        item_before,
                    )[0],
                    params,
                )
                self.assertLess(error, 1e-7)

    def test_breakdown_sum(self):
        """Test breakdowns add term by term."""
        total = LossBreakdown(1.0, 2.0, 3.0) + LossBreakdown.zero()
        self.assertEqual(total.total, 6.0)
