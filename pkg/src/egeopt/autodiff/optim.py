"""SGD and Adam over a ParameterSet."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .params import ParameterSet


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: str = "adam"
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8


class Sgd:
    def __init__(self, lr: float):
        self.lr = float(lr)

    def step(self, params: ParameterSet) -> None:
        """In-place update; grads must be populated and are cleared afterwards."""
        items = params.trainable_items()
        for name, t in items:
            if t.grad is None:
                raise ValidationError(f"optimizer step before backward: no grad for {name!r}")
        for _, t in items:
            t.data -= t.data.dtype.type(self.lr) * t.grad
            t.grad = None


class Adam:
    def __init__(self, lr: float = 1e-3, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._t = 0

    def step(self, params: ParameterSet) -> None:
        """Bias-corrected Adam update; grads must be populated, cleared afterwards."""
        items = params.trainable_items()
        for name, t in items:
            if t.grad is None:
                raise ValidationError(f"optimizer step before backward: no grad for {name!r}")
        self._t += 1
        b1t = 1.0 - self.beta1 ** self._t
        b2t = 1.0 - self.beta2 ** self._t
        for name, t in items:
            g = t.grad
            m = self._m.get(name)
            if m is None:
                m = np.zeros_like(t.data)
                self._m[name] = m
                self._v[name] = np.zeros_like(t.data)
            v = self._v[name]
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            m_hat = m / b1t
            v_hat = v / b2t
            t.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(t.data.dtype)
            t.grad = None


def make_optimizer(config: OptimizerConfig):
    if config.algorithm == "sgd":
        return Sgd(lr=config.lr)
    if config.algorithm == "adam":
        return Adam(lr=config.lr, betas=config.betas, eps=config.eps)
    raise ValidationError(f"unknown optimizer algorithm {config.algorithm!r}")
