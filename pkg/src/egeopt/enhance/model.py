"""Mask-predicting enhancer: two relu convs plus a projection to mask logits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError, ValidationError
from ..dsp.stft import Spectrogram, StftConfig, istft, stft
from ..dsp.waveform import Waveform
from ..autodiff import ops
from ..autodiff.params import ParameterSet
from ..autodiff.tensor import Tensor, no_grad, tensor
from .stft_bridge import batch_stft


@dataclass(frozen=True)
class EnhancerConfig:
    """Two 3x3 stride-1 conv layers (relu) over log-magnitude input, then a
    1-channel projection producing per-bin mask logits; the mask is a sigmoid,
    so every value lies in (0, 1) and enhanced magnitude never exceeds noisy."""

    channels: tuple[int, ...] = (16, 16)
    kernel: int = 3
    stride: int = 1
    padding: int = 1

    def to_dict(self) -> dict:
        return {
            "channels": list(self.channels),
            "kernel": self.kernel,
            "stride": self.stride,
            "padding": self.padding,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnhancerConfig":
        return cls(
            channels=tuple(d["channels"]),
            kernel=int(d["kernel"]),
            stride=int(d["stride"]),
            padding=int(d["padding"]),
        )


def init_enhancer_params(cfg: EnhancerConfig, seed: int, dtype=np.float32) -> ParameterSet:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 0x656E]))
    params = ParameterSet(dtype=dtype)
    k = cfg.kernel
    in_ch = 1
    for i, out_ch in enumerate(cfg.channels, start=1):
        fan_in = in_ch * k * k
        params.add(f"m.conv{i}.w", rng.standard_normal((out_ch, in_ch, k, k)) * np.sqrt(2.0 / fan_in))
        params.add(f"m.conv{i}.b", np.zeros(out_ch))
        in_ch = out_ch
    fan_in = in_ch * k * k
    params.add("m.out.w", rng.standard_normal((1, in_ch, k, k)) * np.sqrt(2.0 / fan_in))
    params.add("m.out.b", np.zeros(1))
    return params


def mask_logits_forward(params: ParameterSet, feats: Tensor, cfg: EnhancerConfig) -> Tensor:
    """(B, 1, T, F) log-magnitude features -> (B, 1, T, F) mask logits."""
    if feats.data.ndim != 4 or feats.shape[1] != 1:
        raise ShapeError(f"enhancer expects (B, 1, T, F) input, got {feats.shape}")
    h = feats
    for i in range(1, len(cfg.channels) + 1):
        h = ops.relu(
            ops.conv2d(h, params[f"m.conv{i}.w"], params[f"m.conv{i}.b"], stride=cfg.stride, padding=cfg.padding)
        )
    return ops.conv2d(h, params["m.out.w"], params["m.out.b"], stride=cfg.stride, padding=cfg.padding)


def predict_mask(params: ParameterSet, mags: Tensor, cfg: EnhancerConfig) -> Tensor:
    """(B, T, F) magnitudes -> (B, T, F) sigmoid mask, differentiable."""
    bsz, t, f = mags.shape
    feats = ops.reshape(ops.log1p(mags), (bsz, 1, t, f))
    logits = mask_logits_forward(params, feats, cfg)
    return ops.reshape(ops.sigmoid(logits), (bsz, t, f))


@dataclass(frozen=True, eq=False)
class EnhanceResult:
    enhanced: Waveform
    spectrogram: Spectrogram   # complex enhanced spectrogram (noisy phase)
    mask: np.ndarray           # (T, F) in (0, 1)


def enhance(x: Waveform, params: ParameterSet, cfg: EnhancerConfig, stft_cfg: StftConfig) -> EnhanceResult:
    """Enhance one waveform in eval mode (no gradients, deterministic)."""
    if x.sample_rate != stft_cfg.sample_rate:
        raise ValidationError(
            f"waveform rate {x.sample_rate} does not match pipeline rate {stft_cfg.sample_rate}"
        )
    spec_frames = batch_stft(x.samples[None], stft_cfg)[0]
    mag = np.abs(spec_frames)
    with no_grad():
        mask = predict_mask(params, tensor(mag[None], dtype=params.dtype), cfg).data[0].astype(np.float64)
    enhanced_frames = (mask * mag) * np.exp(1j * np.angle(spec_frames))
    spec = Spectrogram(
        frames=enhanced_frames,
        fft_size=stft_cfg.fft_size,
        hop=stft_cfg.hop,
        sample_rate=stft_cfg.sample_rate,
        num_samples=x.num_samples,
        window_kind=stft_cfg.window_kind,
    )
    return EnhanceResult(enhanced=istft(spec), spectrogram=spec, mask=mask)
