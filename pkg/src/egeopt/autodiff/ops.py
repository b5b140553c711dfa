"""Differentiable operations.

Shapes are checked with explicit expected/actual messages. Broadcasting is
deliberately limited to the bias-add inside linear/conv layers.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, ValidationError
from .tensor import Tensor, accumulate_grad, make_op_output, require_same_dtype

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: expected matching shapes, got {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# elementwise and reductions
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    require_same_dtype("add", a, b)
    out, tracked = make_op_output(a.data + b.data, (a, b))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad)
            accumulate_grad(b, out.grad)
        out._backward = _bw
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    require_same_dtype("sub", a, b)
    out, tracked = make_op_output(a.data - b.data, (a, b))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad)
            accumulate_grad(b, -out.grad)
        out._backward = _bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    require_same_dtype("mul", a, b)
    out, tracked = make_op_output(a.data * b.data, (a, b))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad * b.data)
            accumulate_grad(b, out.grad * a.data)
        out._backward = _bw
    return out


def scale(a: Tensor, s: float) -> Tensor:
    """Multiply by a python scalar."""
    s = float(s)
    out, tracked = make_op_output(a.data * a.data.dtype.type(s), (a,))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad * s)
        out._backward = _bw
    return out


def add_scalar(a: Tensor, c: float) -> Tensor:
    out, tracked = make_op_output(a.data + a.data.dtype.type(c), (a,))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad)
        out._backward = _bw
    return out


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        out, tracked = make_op_output(a.data.mean(keepdims=False).reshape(()), (a,))
        if tracked:
            def _bw():
                accumulate_grad(a, np.full_like(a.data, out.grad / a.size))
            out._backward = _bw
        return out
    out, tracked = make_op_output(a.data.mean(axis=axis), (a,))
    if tracked:
        n = a.shape[axis]
        def _bw():
            accumulate_grad(a, np.repeat(np.expand_dims(out.grad / n, axis), n, axis=axis))
        out._backward = _bw
    return out


def total(a: Tensor) -> Tensor:
    """Sum of all elements (scalar)."""
    out, tracked = make_op_output(a.data.sum().reshape(()), (a,))
    if tracked:
        def _bw():
            accumulate_grad(a, np.full_like(a.data, out.grad))
        out._backward = _bw
    return out


def reshape(a: Tensor, shape: tuple) -> Tensor:
    out, tracked = make_op_output(a.data.reshape(shape), (a,))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad.reshape(a.shape))
        out._backward = _bw
    return out


def transpose(a: Tensor, axes: tuple) -> Tensor:
    out, tracked = make_op_output(np.ascontiguousarray(a.data.transpose(axes)), (a,))
    if tracked:
        inverse = tuple(np.argsort(axes))
        def _bw():
            accumulate_grad(a, out.grad.transpose(inverse))
        out._backward = _bw
    return out


def crop2d(a: Tensor, height: int, width: int) -> Tensor:
    """Keep the top-left (height, width) corner of the last two axes."""
    if a.data.ndim != 4:
        raise ShapeError(f"crop2d: expected 4-D input, got shape {a.shape}")
    if height > a.shape[2] or width > a.shape[3]:
        raise ShapeError(f"crop2d: crop ({height}, {width}) exceeds input {a.shape[2:]} ")
    out, tracked = make_op_output(np.ascontiguousarray(a.data[:, :, :height, :width]), (a,))
    if tracked:
        def _bw():
            g = np.zeros_like(a.data)
            g[:, :, :height, :width] = out.grad
            accumulate_grad(a, g)
        out._backward = _bw
    return out


def append_const_channel(a: Tensor, plane: np.ndarray) -> Tensor:
    """Append one constant (H, W) plane as an extra channel of (B, C, H, W)."""
    if a.data.ndim != 4:
        raise ShapeError(f"append_const_channel: expected 4-D input, got shape {a.shape}")
    if plane.shape != a.shape[2:]:
        raise ShapeError(
            f"append_const_channel: plane {plane.shape} does not match spatial dims {a.shape[2:]}"
        )
    n, c = a.shape[0], a.shape[1]
    extra = np.broadcast_to(plane.astype(a.dtype), (n, 1) + plane.shape)
    out, tracked = make_op_output(np.concatenate([a.data, extra], axis=1), (a,))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad[:, :c])
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------

def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out, tracked = make_op_output(y, (a,))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad * (1.0 - y * y))
        out._backward = _bw
    return out


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.data, 0.0)
    out, tracked = make_op_output(y, (a,))
    if tracked:
        mask = (a.data > 0.0).astype(a.dtype)
        def _bw():
            accumulate_grad(a, out.grad * mask)
        out._backward = _bw
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    out, tracked = make_op_output(y, (a,))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad * y * (1.0 - y))
        out._backward = _bw
    return out


def log1p(a: Tensor) -> Tensor:
    out, tracked = make_op_output(np.log1p(a.data), (a,))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad / (1.0 + a.data))
        out._backward = _bw
    return out


def softmax(a: Tensor, axis: int) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out, tracked = make_op_output(y, (a,))
    if tracked:
        def _bw():
            g = out.grad
            dot = (g * y).sum(axis=axis, keepdims=True)
            accumulate_grad(a, y * (g - dot))
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean over all elements of the squared difference."""
    _same_shape("mse", a, b)
    require_same_dtype("mse", a, b)
    diff = a.data - b.data
    out, tracked = make_op_output(np.mean(diff * diff).reshape(()), (a, b))
    if tracked:
        def _bw():
            g = out.grad * 2.0 * diff / diff.size
            accumulate_grad(a, g)
            accumulate_grad(b, -g)
        out._backward = _bw
    return out


def l1(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference."""
    _same_shape("l1", a, b)
    require_same_dtype("l1", a, b)
    diff = a.data - b.data
    out, tracked = make_op_output(np.mean(np.abs(diff)).reshape(()), (a, b))
    if tracked:
        sgn = np.sign(diff)
        def _bw():
            g = out.grad * sgn / diff.size
            accumulate_grad(a, g)
            accumulate_grad(b, -g)
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: expected 2-D inputs, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    require_same_dtype("matmul", a, b)
    out, tracked = make_op_output(a.data @ b.data, (a, b))
    if tracked:
        def _bw():
            accumulate_grad(a, out.grad @ b.data.T)
            accumulate_grad(b, a.data.T @ out.grad)
        out._backward = _bw
    return out


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x @ w + bias; x is (N, In), w is (In, Out), bias (Out,)."""
    if x.data.ndim != 2 or w.data.ndim != 2:
        raise ShapeError(f"linear: expected 2-D input/weight, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: expected input dim {w.shape[0]}, got {x.shape[1]}")
    require_same_dtype("linear", x, w)
    y = x.data @ w.data
    parents = [x, w]
    if b is not None:
        if b.shape != (w.shape[1],):
            raise ShapeError(f"linear: expected bias shape ({w.shape[1]},), got {b.shape}")
        require_same_dtype("linear", x, b)
        y = y + b.data
        parents.append(b)
    out, tracked = make_op_output(y, tuple(parents))
    if tracked:
        def _bw():
            accumulate_grad(x, out.grad @ w.data.T)
            accumulate_grad(w, x.data.T @ out.grad)
            if b is not None:
                accumulate_grad(b, out.grad.sum(axis=0))
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# convolutions (im2col based)
# ---------------------------------------------------------------------------

def _conv_out_size(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """(N, C, H, W) -> (N, C*kh*kw, OH*OW)."""
    n, c, h, w = x.shape
    oh = _conv_out_size(h, kh, stride, pad)
    ow = _conv_out_size(w, kw, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    sn, sc, sh, sw = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, kh, kw, oh, ow),
        strides=(sn, sc, sh, sw, sh * stride, sw * stride),
    )
    return windows.reshape(n, c * kh * kw, oh * ow)


def _col2im(cols: np.ndarray, x_shape: tuple, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add columns back onto the input grid."""
    n, c, h, w = x_shape
    oh = _conv_out_size(h, kh, stride, pad)
    ow = _conv_out_size(w, kw, stride, pad)
    cols6 = cols.reshape(n, c, kh, kw, oh, ow)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += cols6[:, :, i, j]
    return xp[:, :, pad : pad + h, pad : pad + w]


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, *, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution; x is (N, Cin, H, W), w is (Cout, Cin, kh, kw)."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-D input/weight, got {x.shape} and {w.shape}")
    n, cin, h, wd = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ShapeError(f"conv2d: expected {cin_w} input channels, got {cin}")
    require_same_dtype("conv2d", x, w)
    oh = _conv_out_size(h, kh, stride, padding)
    ow = _conv_out_size(wd, kw, stride, padding)
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d: input {x.shape} too small for kernel {kh}x{kw} stride {stride}")

    cols = _im2col(x.data, kh, kw, stride, padding)
    w2 = w.data.reshape(cout, cin * kh * kw)
    y = np.matmul(w2, cols).reshape(n, cout, oh, ow)
    parents = [x, w]
    if b is not None:
        if b.shape != (cout,):
            raise ShapeError(f"conv2d: expected bias shape ({cout},), got {b.shape}")
        require_same_dtype("conv2d", x, b)
        y = y + b.data[None, :, None, None]
        parents.append(b)
    out, tracked = make_op_output(y, tuple(parents))
    if tracked:
        def _bw():
            g = out.grad.reshape(n, cout, oh * ow)
            accumulate_grad(w, np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape))
            grad_cols = np.matmul(w2.T, g)
            accumulate_grad(x, _col2im(grad_cols, x.shape, kh, kw, stride, padding))
            if b is not None:
                accumulate_grad(b, out.grad.sum(axis=(0, 2, 3)))
        out._backward = _bw
    return out


def conv_transpose2d(
    x: Tensor,
    w: Tensor,
    b: Tensor | None = None,
    *,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Transposed 2-D convolution; x is (N, Cin, H, W), w is (Cin, Cout, kh, kw)."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv_transpose2d: expected 4-D input/weight, got {x.shape} and {w.shape}")
    if output_padding >= stride:
        raise ValidationError(f"conv_transpose2d: output_padding {output_padding} must be < stride {stride}")
    n, cin, h, wd = x.shape
    cin_w, cout, kh, kw = w.shape
    if cin != cin_w:
        raise ShapeError(f"conv_transpose2d: expected {cin_w} input channels, got {cin}")
    require_same_dtype("conv_transpose2d", x, w)
    oh = (h - 1) * stride - 2 * padding + kh + output_padding
    ow = (wd - 1) * stride - 2 * padding + kw + output_padding
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv_transpose2d: output collapses for input {x.shape}")

    w2 = w.data.reshape(cin, cout * kh * kw)
    cols = np.matmul(w2.T, x.data.reshape(n, cin, h * wd))
    canvas_h = (h - 1) * stride + kh + output_padding
    canvas_w = (wd - 1) * stride + kw + output_padding
    canvas = np.zeros((n, cout, canvas_h, canvas_w), dtype=x.dtype)
    cols6 = cols.reshape(n, cout, kh, kw, h, wd)
    for i in range(kh):
        for j in range(kw):
            canvas[:, :, i : i + stride * h : stride, j : j + stride * wd : stride] += cols6[:, :, i, j]
    y = canvas[:, :, padding : padding + oh, padding : padding + ow]
    parents = [x, w]
    if b is not None:
        if b.shape != (cout,):
            raise ShapeError(f"conv_transpose2d: expected bias shape ({cout},), got {b.shape}")
        require_same_dtype("conv_transpose2d", x, b)
        y = y + b.data[None, :, None, None]
        parents.append(b)
    out, tracked = make_op_output(np.ascontiguousarray(y), tuple(parents))
    if tracked:
        def _bw():
            gcanvas = np.zeros((n, cout, canvas_h, canvas_w), dtype=x.dtype)
            gcanvas[:, :, padding : padding + oh, padding : padding + ow] = out.grad
            gcols6 = np.empty((n, cout, kh, kw, h, wd), dtype=x.dtype)
            for i in range(kh):
                for j in range(kw):
                    gcols6[:, :, i, j] = gcanvas[:, :, i : i + stride * h : stride, j : j + stride * wd : stride]
            gcols = gcols6.reshape(n, cout * kh * kw, h * wd)
            accumulate_grad(x, np.matmul(w2, gcols).reshape(x.shape))
            xflat = x.data.reshape(n, cin, h * wd)
            accumulate_grad(w, np.matmul(xflat, gcols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape))
            if b is not None:
                accumulate_grad(b, out.grad.sum(axis=(0, 2, 3)))
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# batch normalization
# ---------------------------------------------------------------------------

def _bn_axes(x: Tensor) -> tuple:
    if x.data.ndim == 2:
        return (0,)
    if x.data.ndim == 4:
        return (0, 2, 3)
    raise ShapeError(f"batch_norm: expected 2-D or 4-D input, got shape {x.shape}")


def _bn_reshape(v: np.ndarray, ndim: int) -> np.ndarray:
    return v[None, :, None, None] if ndim == 4 else v[None, :]


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    *,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tensor:
    """Channel-wise batch normalization.

    Train mode normalizes by batch statistics (biased variance) and updates
    the running buffers in place; eval mode is a pure function of the running
    statistics. Train mode requires batch size >= 2.
    """
    axes = _bn_axes(x)
    c = x.shape[1]
    for name, t in (("gamma", gamma), ("beta", beta)):
        if t.shape != (c,):
            raise ShapeError(f"batch_norm: expected {name} shape ({c},), got {t.shape}")
    require_same_dtype("batch_norm", x, gamma, beta)

    if training:
        if x.shape[0] < 2:
            raise ValidationError(f"batch_norm: train mode needs batch >= 2, got {x.shape[0]}")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean.data[...] = (1.0 - momentum) * running_mean.data + momentum * mu
        running_var.data[...] = (1.0 - momentum) * running_var.data + momentum * var
    else:
        mu = running_mean.data
        var = running_var.data

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - _bn_reshape(mu, x.data.ndim)) * _bn_reshape(inv_std, x.data.ndim)
    y = _bn_reshape(gamma.data, x.data.ndim) * xhat + _bn_reshape(beta.data, x.data.ndim)
    out, tracked = make_op_output(y, (x, gamma, beta))
    if tracked:
        def _bw():
            g = out.grad
            accumulate_grad(gamma, (g * xhat).sum(axis=axes))
            accumulate_grad(beta, g.sum(axis=axes))
            gs = _bn_reshape(gamma.data * inv_std, x.data.ndim)
            if training:
                g_mean = g.mean(axis=axes)
                gx_mean = (g * xhat).mean(axis=axes)
                accumulate_grad(
                    x,
                    gs * (
                        g
                        - _bn_reshape(g_mean, x.data.ndim)
                        - xhat * _bn_reshape(gx_mean, x.data.ndim)
                    ),
                )
            else:
                accumulate_grad(x, gs * g)
        out._backward = _bw
    return out


def freq_pool(z: Tensor, w: Tensor) -> Tensor:
    """Learned frequency pooling: (B, C, T, F) -> (B, C, T).

    Each channel carries its own softmax weighting over frequency cells;
    a zero weight matrix reproduces plain mean pooling.
    """
    if z.data.ndim != 4:
        raise ShapeError(f"freq_pool: expected (B, C, T, F) input, got {z.shape}")
    c, f = z.shape[1], z.shape[3]
    if w.shape != (c, f):
        raise ShapeError(f"freq_pool: expected weight shape ({c}, {f}), got {w.shape}")
    require_same_dtype("freq_pool", z, w)
    shifted = w.data - w.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    sm = e / e.sum(axis=1, keepdims=True)
    out, tracked = make_op_output(np.einsum("bctf,cf->bct", z.data, sm), (z, w))
    if tracked:
        def _bw():
            g = out.grad
            accumulate_grad(z, np.einsum("bct,cf->bctf", g, sm).astype(z.dtype))
            g_sm = np.einsum("bct,bctf->cf", g, z.data)
            dot = (g_sm * sm).sum(axis=1, keepdims=True)
            accumulate_grad(w, (sm * (g_sm - dot)).astype(w.dtype))
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# attention pooling
# ---------------------------------------------------------------------------

def self_attention_pool(frames: Tensor, w_attn: Tensor) -> Tensor:
    """Pool a (T, H) or (B, T, H) sequence to (H,) / (B, H).

    Scores are a softmax over time of frames @ w_attn; the output is the
    score-weighted sum of frames. A zero weight vector yields uniform scores,
    i.e. the frame mean.
    """
    squeeze = frames.data.ndim == 2
    f = frames.data[None] if squeeze else frames.data
    if f.ndim != 3:
        raise ShapeError(f"self_attention_pool: expected (T, H) or (B, T, H), got {frames.shape}")
    bsz, t, hdim = f.shape
    if w_attn.shape != (hdim,):
        raise ShapeError(f"self_attention_pool: expected weight shape ({hdim},), got {w_attn.shape}")
    require_same_dtype("self_attention_pool", frames, w_attn)

    logits = f @ w_attn.data                       # (B, T)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    scores = e / e.sum(axis=1, keepdims=True)      # (B, T)
    pooled = np.einsum("bt,bth->bh", scores, f)
    out, tracked = make_op_output(pooled[0] if squeeze else pooled, (frames, w_attn))
    if tracked:
        def _bw():
            g = out.grad[None] if squeeze else out.grad          # (B, H)
            grad_scores = np.einsum("bh,bth->bt", g, f)          # dL/ds
            dot = (grad_scores * scores).sum(axis=1, keepdims=True)
            grad_logits = scores * (grad_scores - dot)           # (B, T)
            grad_frames = scores[:, :, None] * g[:, None, :] + grad_logits[:, :, None] * w_attn.data[None, None, :]
            grad_w = np.einsum("bt,bth->h", grad_logits, f)
            accumulate_grad(frames, grad_frames[0] if squeeze else grad_frames)
            accumulate_grad(w_attn, grad_w)
        out._backward = _bw
    return out
