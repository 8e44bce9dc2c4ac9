# -*- coding: utf-8 -*-

"""Contains unit tests for the tempo_embed.numgrad module."""

import unittest

import numpy as np

from tempo_embed.errors import ArgumentError, DimensionError, NumericError, TraceError
from tempo_embed.numgrad import (
    Adam,
    Parameter,
    ParameterSet,
    Tensor,
    add,
    backward,
    clip_grad_norm,
    concat,
    constant,
    elementwise_mul,
    finite_difference_check,
    matvec,
    scale,
    sigmoid,
    squared_l2_distance,
    stack_rows,
    tanh,
    trace,
)


class TestPrimitives(unittest.TestCase):
    """Test the forward values of the primitives."""

    def test_squared_distance(self):
        """Test squared distances of vectors."""
        self.assertEqual(squared_l2_distance(constant([1, 2]), constant([1, 2])).item(), 0.0)
        self.assertEqual(squared_l2_distance(constant([0, 0]), constant([3, 4])).item(), 25.0)

    def test_tanh_at_origin(self):
        """Test tanh maps zeros to zeros."""
        self.assertEqual(tanh(constant(np.zeros(3))).value.tolist(), [0.0, 0.0, 0.0])

    def test_sigmoid_at_origin(self):
        """Test sigmoid maps zero to one half."""
        self.assertEqual(sigmoid(constant([0.0])).value.tolist(), [0.5])

    def test_matvec_batch(self):
        """Test a matrix applied to a vector and to every row of a matrix."""
        weight = constant([[1.0, 2.0], [0.0, 1.0]])
        self.assertEqual(matvec(weight, constant([1.0, 1.0])).value.tolist(), [3.0, 1.0])
        rows = matvec(weight, constant([[1.0, 0.0], [0.0, 1.0]]))
        self.assertEqual(rows.value.tolist(), [[1.0, 0.0], [2.0, 1.0]])

    def test_add_broadcasts_rows(self):
        """Test a vector is added to every row."""
        out = add(constant([[1.0, 2.0], [3.0, 4.0]]), constant([10.0, 20.0]))
        self.assertEqual(out.value.tolist(), [[11.0, 22.0], [13.0, 24.0]])

    def test_concat_and_stack(self):
        """Test concatenation along the last axis and row stacking."""
        self.assertEqual(concat([constant([1.0]), constant([2.0, 3.0])]).value.tolist(), [1, 2, 3])
        matrix = constant([[1.0, 2.0], [3.0, 4.0]])
        stacked = stack_rows([(matrix, 1), (constant([5.0, 6.0]), None)])
        self.assertEqual(stacked.value.tolist(), [[3.0, 4.0], [5.0, 6.0]])

    def test_shape_mismatch(self):
        """Test incompatible shapes raise a dimension error."""
        with self.assertRaises(DimensionError):
            squared_l2_distance(constant([1.0]), constant([1.0, 2.0]))
        with self.assertRaises(DimensionError):
            elementwise_mul(constant([1.0]), constant([1.0, 2.0]))
        with self.assertRaises(DimensionError):
            matvec(constant([[1.0, 2.0]]), constant([1.0]))

    def test_three_axes(self):
        """Test tensors are limited to two axes."""
        with self.assertRaises(DimensionError):
            Tensor(np.zeros((1, 1, 1)))

    def test_non_finite(self):
        """Test non-finite values raise a numeric error."""
        with self.assertRaises(NumericError):
            Tensor([np.inf])
        with self.assertRaises(NumericError):
            scale(constant([1e308]), 1e10)


class TestBackward(unittest.TestCase):
    """Test reverse-mode gradients."""

    def test_square(self):
        """Test the gradient of w squared at w = 3."""
        w = Parameter([3.0], name="w")
        params = ParameterSet([w])
        backward(squared_l2_distance(w, constant([0.0])), params)
        self.assertEqual(w.grad.tolist(), [6.0])

    def test_independent_parameter(self):
        """Test a parameter the loss does not use gets a zero gradient."""
        w = Parameter([3.0], name="w")
        v = Parameter([1.0], name="v")
        params = ParameterSet([w, v])
        backward(squared_l2_distance(w, constant([0.0])), params)
        self.assertEqual(v.grad.tolist(), [0.0])

    def test_accumulates(self):
        """Test repeated backward passes add up until zeroed."""
        w = Parameter([1.0], name="w")
        params = ParameterSet([w])
        for _ in range(2):
            backward(squared_l2_distance(w, constant([0.0])), params)
        self.assertEqual(w.grad.tolist(), [4.0])
        params.zero_grad()
        self.assertEqual(w.grad.tolist(), [0.0])

    def test_shared_subexpression(self):
        """Test a tensor used twice receives both contributions."""
        w = Parameter([2.0], name="w")
        params = ParameterSet([w])
        doubled = add(w, w)
        backward(squared_l2_distance(elementwise_mul(doubled, w), constant([0.0])), params)
        # loss = (2 w^2)^2 = 4 w^4, gradient 16 w^3.
        self.assertAlmostEqual(float(w.grad[0]), 128.0)

    def test_foreign_leaf(self):
        """Test a leaf outside the parameter set is reported."""
        w = Parameter([1.0], name="w")
        stray = Parameter([1.0], name="stray")
        with self.assertRaises(TraceError):
            backward(squared_l2_distance(add(w, stray), constant([0.0])), ParameterSet([w]))

    def test_trace_order(self):
        """Test inputs precede the tensors computed from them."""
        w = Parameter([1.0, 2.0], name="w")
        hidden = tanh(w)
        loss = squared_l2_distance(hidden, constant([0.0, 0.0]))
        record = trace(loss)
        positions = {id(node): index for index, node in enumerate(record.nodes)}
        self.assertLess(positions[id(w)], positions[id(hidden)])
        self.assertLess(positions[id(hidden)], positions[id(loss)])
        record.release()
        self.assertFalse(loss.is_traced)


class TestFiniteDifferenceCheck(unittest.TestCase):
    """Test the gradient checker."""

    def test_quadratic(self):
        """Test the squared norm at (1, 2, 3)."""
        w = Parameter([1.0, 2.0, 3.0], name="w")
        error = finite_difference_check(
            lambda p: squared_l2_distance(p["w"], constant(np.zeros(3))), ParameterSet([w])
        )
        self.assertLess(error, 1e-8)
        self.assertEqual(w.value.tolist(), [1.0, 2.0, 3.0])

    def test_constant(self):
        """Test a constant function has zero error."""
        w = Parameter([1.0], name="w")
        self.assertEqual(finite_difference_check(lambda p: constant(3.0), ParameterSet([w])), 0.0)

    def test_composite(self):
        """Test a small network of every primitive."""
        rng = np.random.default_rng(5)
        weight = Parameter(rng.normal(size=(3, 2)), name="weight")
        bias = Parameter(rng.normal(size=3), name="bias")
        inputs = constant(rng.normal(size=(4, 2)))
        target = constant(rng.normal(size=(4, 6)))

        def loss(params: ParameterSet) -> Tensor:
            hidden = tanh(add(matvec(params["weight"], inputs), params["bias"]))
            gate = sigmoid(hidden)
            joined = concat([elementwise_mul(hidden, gate), scale(hidden, 0.5)])
            rows = stack_rows([(joined, index) for index in range(4)])
            return squared_l2_distance(rows, target)

        self.assertLess(finite_difference_check(loss, ParameterSet([weight, bias])), 1e-6)

    def test_bad_eps(self):
        """Test a non-positive step is rejected."""
        w = Parameter([1.0], name="w")
        with self.assertRaises(ArgumentError):
            finite_difference_check(lambda p: constant(0.0), ParameterSet([w]), eps=0.0)


class TestParameterSet(unittest.TestCase):
    """Test the parameter collection."""

    def test_duplicate_name(self):
        """Test names must be unique."""
        with self.assertRaises(ArgumentError):
            ParameterSet([Parameter([1.0], name="w"), Parameter([2.0], name="w")])

    def test_state_round_trip(self):
        """Test values can be saved and restored."""
        w = Parameter([1.0, 2.0], name="w")
        params = ParameterSet([w])
        state = params.state()
        w.assign(np.array([5.0, 5.0]))
        params.load_state(state)
        self.assertEqual(w.value.tolist(), [1.0, 2.0])

    def test_membership_by_identity(self):
        """Test membership compares objects, not names."""
        params = ParameterSet([Parameter([1.0], name="w")])
        self.assertNotIn(Parameter([1.0], name="w"), params)


class TestOptimizer(unittest.TestCase):
    """Test gradient clipping and Adam."""

    def test_clip(self):
        """Test gradients are rescaled to the bound."""
        w = Parameter([0.0, 0.0], name="w")
        params = ParameterSet([w])
        w.grad = np.array([3.0, 4.0])
        self.assertEqual(clip_grad_norm(params, 1.0), 5.0)
        self.assertAlmostEqual(params.grad_norm(), 1.0, places=5)

    def test_adam_descends(self):
        """Test Adam moves a quadratic towards its minimum."""
        w = Parameter([2.0], name="w")
        params = ParameterSet([w])
        optimizer = Adam(params, learning_rate=0.1)
        for _ in range(100):
            optimizer.zero_grad()
            backward(squared_l2_distance(w, constant([0.0])), params)
            optimizer.step()
        self.assertLess(abs(float(w.value[0])), 0.5)

    def test_zero_learning_rate(self):
        """Test a zero step size leaves the parameters unchanged."""
        w = Parameter([2.0], name="w")
        params = ParameterSet([w])
        optimizer = Adam(params, learning_rate=0.0, weight_decay=0.1)
        backward(squared_l2_distance(w, constant([0.0])), params)
        optimizer.step()
        self.assertEqual(w.value.tolist(), [2.0])

    def test_weight_decay_enters_moments(self):
        """Test weight decay is added to the gradient, so the first step has size lr per entry."""
        w = Parameter([2.0, -4.0], name="w")
        optimizer = Adam(ParameterSet([w]), learning_rate=0.1, weight_decay=0.1)
        optimizer.step()
        np.testing.assert_allclose(w.value, [1.9, -3.9], atol=1e-6)
