"""Named tensor collection with a train/eval mode flag."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .tensor import Tensor


class ParameterSet:
    """Ordered, uniquely named tensors: trainable weights and state buffers.

    Trainability is carried by each tensor's requires_grad flag (batch-norm
    running statistics are stored as non-trainable buffers). The mode flag
    selects batch-norm behavior in the models that consume the set.
    """

    def __init__(self, dtype=np.float32):
        self._items: dict[str, Tensor] = {}
        self.dtype = np.dtype(dtype)
        self.mode = "train"

    def add(self, name: str, values: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self._items:
            raise ValidationError(f"parameter {name!r} already exists")
        t = Tensor(np.array(values, dtype=self.dtype, copy=True), requires_grad=trainable)
        self._items[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._items[name]
        except KeyError:
            raise ValidationError(f"unknown parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._items

    def __len__(self) -> int:
        return len(self._items)

    def names(self) -> list[str]:
        return list(self._items)

    def items(self):
        return self._items.items()

    def trainable_items(self):
        return [(n, t) for n, t in self._items.items() if t.requires_grad]

    def train(self) -> "ParameterSet":
        self.mode = "train"
        return self

    def eval(self) -> "ParameterSet":
        self.mode = "eval"
        return self

    def set_trainable(self, prefix: str, trainable: bool) -> None:
        """Flip requires_grad for every parameter whose name starts with prefix."""
        for name, t in self._items.items():
            if name.startswith(prefix):
                t.requires_grad = trainable

    def zero_grads(self) -> None:
        for t in self._items.values():
            t.grad = None

    def copy(self) -> "ParameterSet":
        dup = ParameterSet(dtype=self.dtype)
        dup.mode = self.mode
        for name, t in self._items.items():
            dup.add(name, t.data, trainable=t.requires_grad)
        return dup

    def subset(self, prefix: str) -> "ParameterSet":
        dup = ParameterSet(dtype=self.dtype)
        dup.mode = self.mode
        for name, t in self._items.items():
            if name.startswith(prefix):
                dup.add(name, t.data, trainable=t.requires_grad)
        return dup

    def merge(self, other: "ParameterSet") -> None:
        for name, t in other.items():
            self.add(name, t.data, trainable=t.requires_grad)
