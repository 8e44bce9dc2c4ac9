# -*- coding: utf-8 -*-

"""Dense tensors with define-by-run reverse-mode differentiation.

Only the primitives the embedding model needs are provided. Every primitive
checks shapes, computes its forward value in float64 and, when any input needs
a gradient, records the closure that maps the output gradient to input
gradients. :func:`backward` walks that record in reverse topological order.
"""

import logging
import typing as ty
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DimensionError, NumericError, TraceError

__all__ = [
    "Adam",
    "ComputationRecord",
    "Parameter",
    "ParameterSet",
    "Tensor",
    "add",
    "backward",
    "clip_grad_norm",
    "concat",
    "constant",
    "elementwise_mul",
    "finite_difference_check",
    "matvec",
    "scale",
    "sigmoid",
    "squared_l2_distance",
    "stack_rows",
    "tanh",
    "trace",
]

BackwardFn = ty.Callable[[np.ndarray], ty.Sequence[np.ndarray]]


class Tensor:
    """A vector, matrix or scalar of 64-bit floats, optionally traced."""

    def __init__(
        self,
        value: ty.Any,
        requires_grad: bool = False,
        name: ty.Optional[str] = None,
    ) -> None:
        """Initialize the tensor.

        :param value: Scalar, vector or matrix data; copied.
        :type value: ty.Any
        :param requires_grad: Whether gradients flow into this tensor.
        :type requires_grad: bool
        :param name: Optional name used in error messages.
        :type name: ty.Optional[str]
        :raises DimensionError: If the value has more than two axes.
        :raises NumericError: If the value has non-finite entries.
        """
        logger = logging.getLogger(__name__)

        array = np.array(value, dtype=np.float64)

        if array.ndim > 2:
            msg = f"Tensors have at most two axes, got shape {array.shape}."
            logger.error(msg)
            raise DimensionError(msg)

        if not np.all(np.isfinite(array)):
            msg = f"Tensor {name or ''} has non-finite entries.".replace("  ", " ")
            logger.error(msg)
            raise NumericError(msg)

        self._value = array
        self._parents: ty.Tuple["Tensor", ...] = ()
        self._backward: ty.Optional[BackwardFn] = None
        self._op: ty.Optional[str] = None
        self.requires_grad = requires_grad
        self.name = name

    def __repr__(self) -> str:
        """Return a short description of the tensor.

        :return: The description.
        :rtype: str
        """
        label = self._op or ("leaf" if self.requires_grad else "constant")
        return f"Tensor(shape={self.shape}, {label})"

    @property
    def value(self) -> np.ndarray:
        """Return the underlying array.

        :return: The array.
        :rtype: np.ndarray
        """
        return self._value

    @property
    def shape(self) -> ty.Tuple[int, ...]:
        """Return the shape.

        :return: The shape.
        :rtype: ty.Tuple[int, ...]
        """
        return self._value.shape

    @property
    def is_traced(self) -> bool:
        """Return whether the tensor is the output of a recorded primitive.

        :return: True for recorded primitive outputs.
        :rtype: bool
        """
        return self._backward is not None

    @property
    def parents(self) -> ty.Tuple["Tensor", ...]:
        """Return the inputs of the primitive that produced this tensor."""
        return self._parents

    def item(self) -> float:
        """Return the value of a one-element tensor as a float.

        :return: The value.
        :rtype: float
        :raises DimensionError: If the tensor has more than one element.
        """
        logger = logging.getLogger(__name__)

        if self._value.size != 1:
            msg = f"item() needs a one-element tensor, got shape {self.shape}."
            logger.error(msg)
            raise DimensionError(msg)

        return float(self._value.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Return an untraced constant copy.

        :return: The constant.
        :rtype: Tensor
        """
        return Tensor(self._value)

    def release(self) -> None:
        """Drop the recorded inputs and closure so the graph can be freed."""
        self._parents = ()
        self._backward = None


class Parameter(Tensor):
    """A trainable leaf tensor with an accumulated gradient buffer."""

    def __init__(self, value: ty.Any, name: str) -> None:
        """Initialize the parameter.

        :param value: Initial value; copied.
        :type value: ty.Any
        :param name: Name of the parameter.
        :type name: str
        """
        super().__init__(value, requires_grad=True, name=name)
        self.grad = np.zeros_like(self._value)

    def zero_grad(self) -> None:
        """Reset the gradient buffer to zeros."""
        self.grad = np.zeros_like(self._value)

    def assign(self, value: np.ndarray) -> None:
        """Overwrite the value in place, keeping the shape.

        :param value: The new value.
        :type value: np.ndarray
        :raises DimensionError: If the shape changes.
        """
        logger = logging.getLogger(__name__)

        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._value.shape:
            msg = f"Parameter {self.name} has shape {self.shape}, got {value.shape}."
            logger.error(msg)
            raise DimensionError(msg)

        self._value[...] = value


class ParameterSet:
    """Named, ordered collection of trainable parameters."""

    def __init__(self, parameters: ty.Optional[ty.Iterable[Parameter]] = None) -> None:
        """Initialize the parameter set.

        :param parameters: Initial parameters.
        :type parameters: ty.Optional[ty.Iterable[Parameter]]
        """
        self._parameters: ty.Dict[str, Parameter] = {}
        for parameter in parameters or []:
            self.add(parameter)

    def __getitem__(self, name: str) -> Parameter:
        """Return the parameter with the given name."""
        return self._parameters[name]

    def __iter__(self) -> ty.Iterator[Parameter]:
        """Return an iterator over the parameters in insertion order."""
        return iter(self._parameters.values())

    def __len__(self) -> int:
        """Return the number of parameters."""
        return len(self._parameters)

    def __contains__(self, parameter: ty.Any) -> bool:
        """Return whether this exact parameter object belongs to the set."""
        return any(parameter is own for own in self._parameters.values())

    def add(self, parameter: Parameter) -> None:
        """Register a parameter.

        :param parameter: The parameter.
        :type parameter: Parameter
        :raises ArgumentError: If the name is already taken.
        """
        logger = logging.getLogger(__name__)

        if parameter.name in self._parameters:
            msg = f"Duplicate parameter name {parameter.name}."
            logger.error(msg)
            raise ArgumentError(msg)

        self._parameters[str(parameter.name)] = parameter

    def names(self) -> ty.List[str]:
        """Return the parameter names in order."""
        return list(self._parameters)

    def zero_grad(self) -> None:
        """Reset every gradient buffer."""
        for parameter in self:
            parameter.zero_grad()

    def grad_norm(self) -> float:
        """Return the global L2 norm of all gradient buffers.

        :return: The norm.
        :rtype: float
        """
        return float(np.sqrt(sum(float(np.sum(p.grad**2)) for p in self)))

    def state(self) -> ty.Dict[str, np.ndarray]:
        """Return copies of all parameter values.

        :return: Name to value.
        :rtype: ty.Dict[str, np.ndarray]
        """
        return {name: p.value.copy() for name, p in self._parameters.items()}

    def load_state(self, state: ty.Mapping[str, ty.Any]) -> None:
        """Overwrite parameter values from a mapping.

        :param state: Name to value, covering every parameter.
        :type state: ty.Mapping[str, ty.Any]
        :raises ArgumentError: If a parameter is missing from the mapping.
        """
        logger = logging.getLogger(__name__)

        missing = [name for name in self._parameters if name not in state]
        if missing:
            msg = f"Missing values for parameters {missing}."
            logger.error(msg)
            raise ArgumentError(msg)

        for name, parameter in self._parameters.items():
            parameter.assign(np.asarray(state[name], dtype=np.float64))


def constant(value: ty.Any) -> Tensor:
    """Wrap data as an untraced tensor.

    :param value: The data.
    :type value: ty.Any
    :return: The constant tensor.
    :rtype: Tensor
    """
    return value if isinstance(value, Tensor) else Tensor(value)


def _record(
    value: np.ndarray,
    op: str,
    parents: ty.Tuple[Tensor, ...],
    backward_fn: BackwardFn,
) -> Tensor:
    """Create the output tensor of a primitive and record its backward closure.

    :param value: The forward value.
    :type value: np.ndarray
    :param op: Name of the primitive.
    :type op: str
    :param parents: Inputs of the primitive.
    :type parents: ty.Tuple[Tensor, ...]
    :param backward_fn: Maps the output gradient to one gradient per input.
    :type backward_fn: BackwardFn
    :return: The output tensor.
    :rtype: Tensor
    :raises NumericError: If the forward value is not finite.
    """
    logger = logging.getLogger(__name__)

    if not np.all(np.isfinite(value)):
        msg = f"Primitive {op} produced non-finite values."
        logger.error(msg)
        raise NumericError(msg)

    out = Tensor.__new__(Tensor)
    out._value = value
    out.name = None
    out._op = op
    out.requires_grad = any(parent.requires_grad for parent in parents)

    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None

    return out


def _dimension_error(msg: str) -> DimensionError:
    """Log and build a dimension error.

    :param msg: The message.
    :type msg: str
    :return: The error, ready to raise.
    :rtype: DimensionError
    """
    logger = logging.getLogger(__name__)
    logger.error(msg)
    return DimensionError(msg)


def matvec(weight: Tensor, x: Tensor) -> Tensor:
    """Multiply a matrix with a vector, or with every row of a matrix.

    :param weight: Matrix of shape (m, n).
    :type weight: Tensor
    :param x: Vector of shape (n,) or batch of shape (rows, n).
    :type x: Tensor
    :return: Shape (m,) or (rows, m).
    :rtype: Tensor
    :raises DimensionError: If the inner dimensions differ.
    """
    w, v = weight.value, x.value
    if w.ndim != 2 or v.ndim not in (1, 2) or v.shape[-1] != w.shape[1]:
        raise _dimension_error(f"matvec cannot combine {w.shape} with {v.shape}.")

    def backward_fn(grad: np.ndarray) -> ty.Sequence[np.ndarray]:
        if v.ndim == 1:
            return np.outer(grad, v), grad @ w
        return grad.T @ v, grad @ w

    return _record(v @ w.T, "matvec", (weight, x), backward_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Add two tensors of equal shape, or a row vector to every row of a matrix.

    :param a: First operand.
    :type a: Tensor
    :param b: Second operand, same shape as ``a`` or shape (cols,) if ``a`` is (rows, cols).
    :type b: Tensor
    :return: The sum.
    :rtype: Tensor
    :raises DimensionError: If the shapes are incompatible.
    """
    va, vb = a.value, b.value
    row_broadcast = va.ndim == 2 and vb.ndim == 1 and vb.shape[0] == va.shape[1]
    if va.shape != vb.shape and not row_broadcast:
        raise _dimension_error(f"add cannot combine {va.shape} with {vb.shape}.")

    def backward_fn(grad: np.ndarray) -> ty.Sequence[np.ndarray]:
        return grad, grad.sum(axis=0) if row_broadcast else grad

    return _record(va + vb, "add", (a, b), backward_fn)


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    """Multiply two tensors of equal shape entry by entry.

    :param a: First operand.
    :type a: Tensor
    :param b: Second operand.
    :type b: Tensor
    :return: The product.
    :rtype: Tensor
    :raises DimensionError: If the shapes differ.
    """
    va, vb = a.value, b.value
    if va.shape != vb.shape:
        raise _dimension_error(f"elementwise_mul cannot combine {va.shape} with {vb.shape}.")

    def backward_fn(grad: np.ndarray) -> ty.Sequence[np.ndarray]:
        return grad * vb, grad * va

    return _record(va * vb, "elementwise_mul", (a, b), backward_fn)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply a tensor by a constant.

    :param a: The tensor.
    :type a: Tensor
    :param factor: The constant factor.
    :type factor: float
    :return: The scaled tensor.
    :rtype: Tensor
    """
    factor = float(factor)

    def backward_fn(grad: np.ndarray) -> ty.Sequence[np.ndarray]:
        return (grad * factor,)

    return _record(a.value * factor, "scale", (a,), backward_fn)


def concat(tensors: ty.Sequence[Tensor]) -> Tensor:
    """Concatenate tensors along their last axis.

    :param tensors: Vectors, or matrices with the same number of rows.
    :type tensors: ty.Sequence[Tensor]
    :return: The concatenation.
    :rtype: Tensor
    :raises DimensionError: If the leading shapes differ.
    """
    if not tensors:
        raise _dimension_error("concat needs at least one tensor.")

    values = [t.value for t in tensors]
    leading = {v.shape[:-1] for v in values}
    if len(leading) != 1 or any(v.ndim == 0 for v in values):
        raise _dimension_error(f"concat cannot join shapes {[v.shape for v in values]}.")

    widths = [v.shape[-1] for v in values]
    bounds = np.cumsum([0] + widths)

    def backward_fn(grad: np.ndarray) -> ty.Sequence[np.ndarray]:
        return [grad[..., bounds[i] : bounds[i + 1]] for i in range(len(values))]

    return _record(np.concatenate(values, axis=-1), "concat", tuple(tensors), backward_fn)


def tanh(a: Tensor) -> Tensor:
    """Apply the hyperbolic tangent entry by entry.

    :param a: The tensor.
    :type a: Tensor
    :return: The result, entries in (-1, 1).
    :rtype: Tensor
    """
    out = np.tanh(a.value)

    def backward_fn(grad: np.ndarray) -> ty.Sequence[np.ndarray]:
        return (grad * (1.0 - out**2),)

    return _record(out, "tanh", (a,), backward_fn)


def sigmoid(a: Tensor) -> Tensor:
    """Apply the logistic function entry by entry.

    :param a: The tensor.
    :type a: Tensor
    :return: The result, entries in (0, 1).
    :rtype: Tensor
    """
    out = 0.5 * (1.0 + np.tanh(0.5 * a.value))

    def backward_fn(grad: np.ndarray) -> ty.Sequence[np.ndarray]:
        return (grad * out * (1.0 - out),)

    return _record(out, "sigmoid", (a,), backward_fn)


def squared_l2_distance(a: Tensor, b: Tensor) -> Tensor:
    """Return the sum of squared differences of two equally shaped tensors.

    For batches this is the sum of the per-row squared distances.

    :param a: First operand.
    :type a: Tensor
    :param b: Second operand.
    :type b: Tensor
    :return: Scalar tensor.
    :rtype: Tensor
    :raises DimensionError: If the shapes differ.
    """
    va, vb = a.value, b.value
    if va.shape != vb.shape:
        raise _dimension_error(f"squared_l2_distance cannot combine {va.shape} with {vb.shape}.")

    diff = va - vb

    def backward_fn(grad: np.ndarray) -> ty.Sequence[np.ndarray]:
        return 2.0 * grad * diff, -2.0 * grad * diff

    return _record(np.array(np.sum(diff**2)), "squared_l2_distance", (a, b), backward_fn)


def stack_rows(rows: ty.Sequence[ty.Tuple[Tensor, ty.Optional[int]]]) -> Tensor:
    """Assemble a matrix from vectors or from single rows of matrices.

    :param rows: Pairs of (source, row index); a ``None`` index takes a whole vector.
    :type rows: ty.Sequence[ty.Tuple[Tensor, ty.Optional[int]]]
    :return: Matrix of shape (len(rows), width).
    :rtype: Tensor
    :raises DimensionError: If the rows differ in width or the list is empty.
    """
    if not rows:
        raise _dimension_error("stack_rows needs at least one row.")

    picked = [src.value if index is None else src.value[index] for src, index in rows]
    if any(row.ndim != 1 for row in picked) or len({row.shape for row in picked}) != 1:
        raise _dimension_error("stack_rows needs rows of one common width.")

    sources = tuple(src for src, _ in rows)
    indices = [index for _, index in rows]

    def backward_fn(grad: np.ndarray) -> ty.Sequence[np.ndarray]:
        grads = []
        for position, (src, index) in enumerate(zip(sources, indices)):
            if index is None:
                grads.append(grad[position])
            else:
                full = np.zeros_like(src.value)
                full[index] = grad[position]
                grads.append(full)
        return grads

    return _record(np.stack(picked), "stack_rows", sources, backward_fn)


@dataclass
class ComputationRecord:
    """Topologically ordered primitive outputs and leaves reachable from a root."""

    nodes: ty.List[Tensor]

    def __len__(self) -> int:
        """Return the number of recorded nodes."""
        return len(self.nodes)

    def release(self) -> None:
        """Drop every recorded closure so the traced graph can be freed."""
        for node in self.nodes:
            if node.is_traced:
                node.release()


def trace(root: Tensor) -> ComputationRecord:
    """Collect every gradient-carrying tensor the root depends on.

    :param root: The output tensor.
    :type root: Tensor
    :return: The nodes, inputs before the tensors computed from them.
    :rtype: ComputationRecord
    """
    order: ty.List[Tensor] = []
    visited: ty.Set[int] = set()
    stack: ty.List[ty.Tuple[Tensor, bool]] = [(root, False)]

    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    return ComputationRecord(nodes=order)


def backward(loss: Tensor, params: ParameterSet) -> None:
    """Accumulate the gradient of a scalar loss into the parameter buffers.

    Repeated calls without :meth:`ParameterSet.zero_grad` accumulate.

    :param loss: Scalar output of traced primitives.
    :type loss: Tensor
    :param params: The parameters to differentiate with respect to.
    :type params: ParameterSet
    :raises DimensionError: If the loss is not a scalar.
    :raises TraceError: If the graph reaches a gradient-requiring leaf outside ``params``.
    """
    logger = logging.getLogger(__name__)

    if loss.value.size != 1:
        msg = f"backward needs a scalar loss, got shape {loss.shape}."
        logger.error(msg)
        raise DimensionError(msg)

    if not loss.requires_grad:
        return  # Nothing in the loss depends on a parameter.

    record = trace(loss)
    grads: ty.Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}

    for node in reversed(record.nodes):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue

        if not node.is_traced:
            if isinstance(node, Parameter) and node in params:
                node.grad += grad
                continue
            msg = f"Untraced tensor {node!r} ({node.name}) requires a gradient."
            logger.error(msg)
            raise TraceError(msg)

        assert node._backward is not None
        for parent, parent_grad in zip(node.parents, node._backward(grad)):
            if not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + parent_grad
            else:
                grads[id(parent)] = np.array(parent_grad, dtype=np.float64)


def finite_difference_check(
    f: ty.Callable[[ParameterSet], Tensor],
    params: ParameterSet,
    eps: float = 1e-5,
) -> float:
    """Compare analytic gradients against central differences.

    :param f: Builds a scalar loss from the parameters.
    :type f: ty.Callable[[ParameterSet], Tensor]
    :param params: The parameters; values are restored afterwards.
    :type params: ParameterSet
    :param eps: The perturbation size.
    :type eps: float
    :return: Max over coordinates of ``|analytic - numeric| / max(1, |numeric|)``.
    :rtype: float
    :raises ArgumentError: If ``eps`` is not positive.
    :raises NumericError: If ``f`` is not finite at a perturbed point.
    """
    logger = logging.getLogger(__name__)

    if eps <= 0:
        msg = f"eps must be positive, got {eps}."
        logger.error(msg)
        raise ArgumentError(msg)

    def evaluate() -> float:
        value = f(params).item()
        if not np.isfinite(value):
            msg = "Function under check returned a non-finite value."
            logger.error(msg)
            raise NumericError(msg)
        return value

    params.zero_grad()
    backward(f(params), params)
    analytic = {p.name: p.grad.copy() for p in params}

    worst = 0.0
    for parameter in params:
        flat = parameter.value.reshape(-1)
        expected = analytic[parameter.name].reshape(-1)
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + eps
            upper = evaluate()
            flat[index] = original - eps
            lower = evaluate()
            flat[index] = original
            numeric = (upper - lower) / (2.0 * eps)
            error = abs(expected[index] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, error)

    params.zero_grad()
    return worst


def clip_grad_norm(params: ParameterSet, max_norm: float) -> float:
    """Rescale all gradients so their global norm is at most ``max_norm``.

    :param params: The parameters.
    :type params: ParameterSet
    :param max_norm: The norm bound.
    :type max_norm: float
    :return: The norm before clipping.
    :rtype: float
    """
    total = params.grad_norm()
    if total > max_norm:
        factor = max_norm / (total + 1e-6)
        for parameter in params:
            parameter.grad *= factor
    return total


class Adam:
    """Adaptive moment estimation with L2 weight decay folded into the gradient."""

    def __init__(
        self,
        params: ParameterSet,
        learning_rate: float = 1e-3,
        betas: ty.Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ) -> None:
        """Initialize the optimizer.

        :param params: The parameters to update.
        :type params: ParameterSet
        :param learning_rate: The step size.
        :type learning_rate: float
        :param betas: Decay rates of the first and second moment estimates.
        :type betas: ty.Tuple[float, float]
        :param eps: Term added to the denominator.
        :type eps: float
        :param weight_decay: L2 penalty coefficient.
        :type weight_decay: float
        """
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.steps = 0
        self._first = {p.name: np.zeros_like(p.value) for p in params}
        self._second = {p.name: np.zeros_like(p.value) for p in params}

    def step(self) -> None:
        """Update every parameter from its gradient buffer."""
        self.steps += 1
        correction1 = 1.0 - self.beta1**self.steps
        correction2 = 1.0 - self.beta2**self.steps

        for parameter in self.params:
            grad = parameter.grad + self.weight_decay * parameter.value
            first = self._first[parameter.name]
            second = self._second[parameter.name]
            first *= self.beta1
            first += (1.0 - self.beta1) * grad
            second *= self.beta2
            second += (1.0 - self.beta2) * grad**2
            denom = np.sqrt(second / correction2) + self.eps
            parameter.assign(parameter.value - self.learning_rate * (first / correction1) / denom)

    def zero_grad(self) -> None:
        """Reset the gradient buffers of all parameters."""
        self.params.zero_grad()
