"""Tensor container and the backward tape."""

from __future__ import annotations

import numpy as np

from ..errors import NumericalError, ShapeError, ValidationError

_GRAD_ENABLED = True
_DEBUG_CHECKS = False


def set_debug_checks(enabled: bool) -> None:
    """When enabled, every op output is checked for NaN/Inf."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


class no_grad:
    """Context manager suppressing tape recording (for eval passes)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, exc_type, exc, tb):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    """Dense float32/float64 value, optionally tracked on the backward tape."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_consumed")

    def __init__(self, data: np.ndarray, requires_grad: bool = False):
        if data.dtype not in (np.float32, np.float64):
            raise ValidationError(f"tensor dtype must be float32 or float64, got {data.dtype}")
        self.data = data
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._backward = None
        self._consumed = False

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Populate grads of every requires_grad tensor reachable from this scalar.

        The tape is freed afterwards; calling backward twice on the same
        forward pass is an error.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        if self._consumed:
            raise ValidationError("backward() called twice on the same graph")

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
                if id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()
            node._backward = None
            node._parents = ()
        self._consumed = True

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    """Create a leaf tensor; dtype defaults to float64 for python/int inputs."""
    arr = np.asarray(data)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    elif arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    return Tensor(np.array(arr, copy=True), requires_grad=requires_grad)


def require_same_dtype(op: str, *tensors: Tensor) -> None:
    dtypes = {t.dtype for t in tensors}
    if len(dtypes) > 1:
        raise ShapeError(f"{op}: mixed dtypes {sorted(d.name for d in dtypes)}; graphs are uniform-precision")


def make_op_output(data: np.ndarray, parents: tuple) -> tuple[Tensor, bool]:
    """Create an op output; returns (tensor, tracked).

    ``tracked`` is True when grads are enabled and some parent requires them;
    the caller then assigns a backward closure to ``tensor._backward``.
    This is the extension point for custom differentiable ops.
    """
    if _DEBUG_CHECKS and not np.all(np.isfinite(data)):
        raise NumericalError("op produced NaN/Inf (debug checks enabled)")
    tracked = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=tracked)
    if tracked:
        out._parents = tuple(parents)
    return out, tracked


def accumulate_grad(t: Tensor, g: np.ndarray) -> None:
    """Accumulate a gradient contribution into a tensor on the tape."""
    if not t.requires_grad:
        return
    if g.dtype != t.data.dtype:
        g = g.astype(t.data.dtype)
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.array(g)
    else:
        t.grad = t.grad + g
