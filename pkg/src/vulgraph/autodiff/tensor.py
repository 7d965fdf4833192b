"""Minimal reverse-mode automatic differentiation over fp64 numpy arrays.

Each op records its parents and a closure that routes the output gradient
back to them; Tensor.backward() replays those closures in reverse topological
order, visiting every node exactly once. Broadcasting is permitted over the
leading dimension only (a (1, ...) or lower-rank operand against a (B, ...)
one, plus true scalars); anything else raises ShapeMismatch. Tensors are
treated as immutable once created.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


def _leading_broadcast_ok(sa: tuple, sb: tuple) -> bool:
    if sa == sb or sa == () or sb == ():
        return True
    small, big = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    pad = (1,) * (len(big) - len(small)) + small
    if pad[1:] != big[1:]:
        return False
    return pad[0] == big[0] or pad[0] == 1 or big[0] == 1


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    # --- plumbing ---------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    @staticmethod
    def _make(data: np.ndarray, parents: tuple["Tensor", ...], backward_fn) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward_fn = backward_fn
        return out

    def backward(self, params=None) -> None:
        """Backpropagate from this scalar. With a ParamStore given, every
        registered parameter ends up with a gradient (zero if unused)."""
        if self.data.size != 1:
            raise ShapeMismatch("backward requires a scalar loss")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is not None:
                node._backward_fn()
        if params is not None:
            for tensor in params.tensors():
                if tensor.grad is None:
                    tensor.grad = np.zeros_like(tensor.data)

    # --- elementwise arithmetic --------------------------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(other)

    def _check_broadcast(self, other: "Tensor", op: str) -> None:
        if not _leading_broadcast_ok(self.data.shape, other.data.shape):
            raise ShapeMismatch(
                f"{op}: shapes {self.data.shape} and {other.data.shape} "
                "differ beyond the leading dimension"
            )

    def __add__(self, other):
        other = self._coerce(other)
        self._check_broadcast(other, "add")
        out_data = self.data + other.data
        a, b = self, other

        def backward():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(out.grad, b.data.shape))

        out = Tensor._make(out_data, (a, b), backward)
        return out

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        self._check_broadcast(other, "sub")
        out_data = self.data - other.data
        a, b = self, other

        def backward():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-out.grad, b.data.shape))

        out = Tensor._make(out_data, (a, b), backward)
        return out

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        self._check_broadcast(other, "mul")
        out_data = self.data * other.data
        a, b = self, other

        def backward():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(out.grad * a.data, b.data.shape))

        out = Tensor._make(out_data, (a, b), backward)
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        self._check_broadcast(other, "div")
        out_data = self.data / other.data
        a, b = self, other

        def backward():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad / b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(
                    _unbroadcast(-out.grad * a.data / (b.data * b.data), b.data.shape)
                )

        out = Tensor._make(out_data, (a, b), backward)
        return out

    def __neg__(self):
        a = self

        def backward():
            if a.requires_grad:
                a._accumulate(-out.grad)

        out = Tensor._make(-self.data, (a,), backward)
        return out

    def maximum(self, other: "Tensor") -> "Tensor":
        """Elementwise max; on ties the gradient goes to self."""
        other = self._coerce(other)
        if self.data.shape != other.data.shape:
            raise ShapeMismatch("maximum requires equal shapes")
        a, b = self, other
        take_a = a.data >= b.data

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad * take_a)
            if b.requires_grad:
                b._accumulate(out.grad * ~take_a)

        out = Tensor._make(np.maximum(a.data, b.data), (a, b), backward)
        return out

    def pow_scalar(self, exponent: float) -> "Tensor":
        a = self
        out_data = np.power(a.data, exponent)

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad * exponent * np.power(a.data, exponent - 1.0))

        out = Tensor._make(out_data, (a,), backward)
        return out

    # --- nonlinearities ----------------------------------------------------

    def sigmoid(self) -> "Tensor":
        a = self
        out_data = np.where(
            a.data >= 0, 1.0 / (1.0 + np.exp(-a.data)),
            np.exp(a.data) / (1.0 + np.exp(a.data)),
        )

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad * out.data * (1.0 - out.data))

        out = Tensor._make(out_data, (a,), backward)
        return out

    def tanh(self) -> "Tensor":
        a = self
        out_data = np.tanh(a.data)

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad * (1.0 - out.data * out.data))

        out = Tensor._make(out_data, (a,), backward)
        return out

    def relu(self) -> "Tensor":
        a = self
        keep = a.data > 0

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad * keep)

        out = Tensor._make(a.data * keep, (a,), backward)
        return out

    def exp(self) -> "Tensor":
        a = self
        out_data = np.exp(a.data)

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad * out.data)

        out = Tensor._make(out_data, (a,), backward)
        return out

    def log(self) -> "Tensor":
        a = self

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad / a.data)

        out = Tensor._make(np.log(a.data), (a,), backward)
        return out

    def softmax(self, axis: int = -1) -> "Tensor":
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def backward():
            if a.requires_grad:
                y = out.data
                g = out.grad
                a._accumulate(y * (g - (g * y).sum(axis=axis, keepdims=True)))

        out = Tensor._make(out_data, (a,), backward)
        return out

    # --- shape ops ----------------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        other = self._coerce(other)
        a, b = self, other
        if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
            raise ShapeMismatch(
                f"matmul: incompatible shapes {a.data.shape} and {b.data.shape}"
            )

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ out.grad)

        out = Tensor._make(a.data @ b.data, (a, b), backward)
        return out

    __matmul__ = matmul

    def transpose(self) -> "Tensor":
        a = self
        if a.data.ndim != 2:
            raise ShapeMismatch("transpose expects a matrix")

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad.T)

        out = Tensor._make(a.data.T.copy(), (a,), backward)
        return out

    def reshape(self, *shape) -> "Tensor":
        a = self
        old = a.data.shape

        def backward():
            if a.requires_grad:
                a._accumulate(out.grad.reshape(old))

        out = Tensor._make(a.data.reshape(*shape), (a,), backward)
        return out

    def __getitem__(self, key) -> "Tensor":
        a = self

        def backward():
            if a.requires_grad:
                if a.grad is None:
                    a.grad = np.zeros_like(a.data)
                a.grad[key] += out.grad

        out = Tensor._make(a.data[key].copy(), (a,), backward)
        return out

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self

        def backward():
            if a.requires_grad:
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                a._accumulate(np.broadcast_to(g, a.data.shape).copy())

        out = Tensor._make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self
        count = a.data.size if axis is None else a.data.shape[axis]

        def backward():
            if a.requires_grad:
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                a._accumulate(np.broadcast_to(g, a.data.shape) / count)

        out = Tensor._make(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)
        return out

    def amax_rows(self) -> "Tensor":
        """Column-wise max over axis 0; ties send the gradient to the first
        maximal row, which keeps pooling deterministic."""
        a = self
        if a.data.ndim != 2:
            raise ShapeMismatch("amax_rows expects a matrix")
        idx = np.argmax(a.data, axis=0)
        cols = np.arange(a.data.shape[1])

        def backward():
            if a.requires_grad:
                if a.grad is None:
                    a.grad = np.zeros_like(a.data)
                np.add.at(a.grad, (idx, cols), out.grad)

        out = Tensor._make(a.data[idx, cols].copy(), (a,), backward)
        return out


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeMismatch("concat of nothing")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward():
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * data.ndim
                sl[axis] = slice(start, stop)
                t._accumulate(out.grad[tuple(sl)])

    out = Tensor._make(data, tuple(tensors), backward)
    return out


def rows(table: Tensor, indices: np.ndarray) -> Tensor:
    """Embedding-style row gather; gradients accumulate per row with
    np.add.at so repeated indices are handled correctly."""
    idx = np.asarray(indices, dtype=np.int64)

    def backward():
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, out.grad)

    out = Tensor._make(table.data[idx].copy(), (table,), backward)
    return out


def constant(data) -> Tensor:
    return Tensor(data)
