"""Central finite-difference gradient checking for every op.

Each op is checked in float64 on small random tensors: the forward output is
projected onto a fixed random vector to obtain a scalar loss, the analytic
gradient of every input is compared against (f(x+h) - f(x-h)) / 2h.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ops
from .tensor import Tensor, tensor

FD_STEP = 1e-6
OP_TOLERANCE = 1e-4


def numeric_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central finite differences of a scalar function at x."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + step
        f_plus = f(x)
        xf[i] = orig - step
        f_minus = f(x)
        xf[i] = orig
        flat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-7) -> float:
    """Max over coordinates of |a - n| / max(|a|, |n|), ignoring joint near-zeros."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.shape != n.shape:
        raise ValueError(f"gradient shape mismatch: {analytic.shape} vs {numeric.shape}")
    denom = np.maximum(np.abs(a), np.abs(n))
    mask = denom > floor
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(a - n)[mask] / denom[mask]))


@dataclass(frozen=True)
class OpCheck:
    name: str
    max_error: float
    passed: bool


def check_function(build, input_arrays: list[np.ndarray], seed: int = 0) -> float:
    """Max relative gradient error of a tensor function over all its inputs.

    ``build`` maps a list of Tensors to an output Tensor; the loss is the
    projection of that output onto a fixed random vector.
    """
    rng = np.random.default_rng(seed)
    inputs = [tensor(a, requires_grad=True, dtype=np.float64) for a in input_arrays]
    probe_shape = build(inputs).shape
    proj = rng.standard_normal(probe_shape) if probe_shape else np.asarray(1.0)

    def loss_of(tensors: list[Tensor]) -> Tensor:
        out = build(tensors)
        return ops.total(ops.mul(out, tensor(proj, dtype=np.float64))) if out.shape else out

    loss = loss_of(inputs)
    loss.backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in inputs]

    worst = 0.0
    for idx, arr in enumerate(input_arrays):
        work = [a.copy() for a in input_arrays]

        def f(_x, _idx=idx, _work=work):
            tensors = [tensor(w, dtype=np.float64) for w in _work]
            return loss_of(tensors).item()

        numeric = numeric_gradient(lambda _x: f(_x), work[idx])
        worst = max(worst, max_relative_error(analytic[idx], numeric))
    return worst


def run_op_suite(seed: int = 0) -> list[OpCheck]:
    """Gradcheck every differentiable op on random tensors of <= 32 elements."""
    rng = np.random.default_rng(seed)

    def rand(*shape):
        return rng.uniform(-1.0, 1.0, shape)

    # fixed buffers: drawing them inside a builder would make the function
    # under test different on every finite-difference evaluation
    bn_eval_mean = rng.uniform(-0.2, 0.2, 2)
    bn_eval_var = rng.uniform(0.5, 1.5, 2)
    coord_plane = rng.uniform(-1.0, 1.0, (3, 4))

    checks: list[tuple[str, Callable, list[np.ndarray]]] = [
        ("add", lambda ts: ops.add(ts[0], ts[1]), [rand(3, 4), rand(3, 4)]),
        ("sub", lambda ts: ops.sub(ts[0], ts[1]), [rand(3, 4), rand(3, 4)]),
        ("mul", lambda ts: ops.mul(ts[0], ts[1]), [rand(3, 4), rand(3, 4)]),
        ("scale", lambda ts: ops.scale(ts[0], 2.7), [rand(3, 4)]),
        ("add_scalar", lambda ts: ops.add_scalar(ts[0], -0.3), [rand(3, 4)]),
        ("mean", lambda ts: ops.mean(ts[0]), [rand(4, 5)]),
        ("mean_axis", lambda ts: ops.mean(ts[0], axis=1), [rand(4, 5)]),
        ("total", lambda ts: ops.total(ts[0]), [rand(4, 5)]),
        ("reshape", lambda ts: ops.reshape(ts[0], (2, 6)), [rand(3, 4)]),
        ("transpose", lambda ts: ops.transpose(ts[0], (1, 0, 2)), [rand(2, 3, 4)]),
        ("crop2d", lambda ts: ops.crop2d(ts[0], 2, 3), [rand(1, 2, 3, 4)]),
        (
            "append_const_channel",
            lambda ts: ops.append_const_channel(ts[0], coord_plane),
            [rand(2, 2, 3, 4)],
        ),
        ("tanh", lambda ts: ops.tanh(ts[0]), [rand(3, 4)]),
        ("relu", lambda ts: ops.relu(ts[0]), [rand(3, 4) + 0.05]),
        ("sigmoid", lambda ts: ops.sigmoid(ts[0]), [rand(3, 4)]),
        ("log1p", lambda ts: ops.log1p(ts[0]), [np.abs(rand(3, 4)) + 0.1]),
        ("softmax", lambda ts: ops.softmax(ts[0], axis=1), [rand(3, 5)]),
        ("mse", lambda ts: ops.mse(ts[0], ts[1]), [rand(3, 4), rand(3, 4)]),
        ("l1", lambda ts: ops.l1(ts[0], ts[1]), [rand(3, 4), rand(3, 4) + 2.0]),
        ("matmul", lambda ts: ops.matmul(ts[0], ts[1]), [rand(3, 4), rand(4, 2)]),
        ("linear", lambda ts: ops.linear(ts[0], ts[1], ts[2]), [rand(3, 4), rand(4, 2), rand(2)]),
        (
            "conv2d",
            lambda ts: ops.conv2d(ts[0], ts[1], ts[2], stride=2, padding=1),
            [rand(2, 2, 4, 4), rand(2, 2, 3, 3), rand(2)],
        ),
        (
            "conv2d_stride1",
            lambda ts: ops.conv2d(ts[0], ts[1], ts[2], stride=1, padding=1),
            [rand(1, 2, 3, 4), rand(2, 2, 3, 3), rand(2)],
        ),
        (
            "conv_transpose2d",
            lambda ts: ops.conv_transpose2d(ts[0], ts[1], ts[2], stride=2, padding=1, output_padding=1),
            [rand(1, 2, 3, 3), rand(2, 2, 3, 3), rand(2)],
        ),
        (
            "batch_norm_train",
            lambda ts: ops.batch_norm(
                ts[0], ts[1], ts[2],
                tensor(np.zeros(2), dtype=np.float64), tensor(np.ones(2), dtype=np.float64),
                training=True,
            ),
            [rand(3, 2, 2, 2), rand(2) + 1.0, rand(2)],
        ),
        (
            "batch_norm_eval",
            lambda ts: ops.batch_norm(
                ts[0], ts[1], ts[2],
                tensor(bn_eval_mean, dtype=np.float64),
                tensor(bn_eval_var, dtype=np.float64),
                training=False,
            ),
            [rand(3, 2, 2, 2), rand(2) + 1.0, rand(2)],
        ),
        (
            "freq_pool",
            lambda ts: ops.freq_pool(ts[0], ts[1]),
            [rand(2, 2, 2, 3), rand(2, 3)],
        ),
        (
            "self_attention_pool",
            lambda ts: ops.self_attention_pool(ts[0], ts[1]),
            [rand(4, 3), rand(3)],
        ),
        (
            "self_attention_pool_batched",
            lambda ts: ops.self_attention_pool(ts[0], ts[1]),
            [rand(2, 4, 3), rand(3)],
        ),
    ]

    results = []
    for name, build, arrays in checks:
        err = check_function(build, arrays, seed=seed + 1)
        results.append(OpCheck(name=name, max_error=err, passed=err < OP_TOLERANCE))
    return results
