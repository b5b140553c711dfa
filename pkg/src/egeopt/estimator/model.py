"""Estimator network: conv encoder, attention pooling, linear head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, ValidationError
from ..dsp.stft import Spectrogram, StftConfig
from ..features.extract import FunctionalVector
from ..autodiff import ops
from ..autodiff.params import ParameterSet
from ..autodiff.tensor import Tensor, no_grad, tensor
from .scaler import TargetScaler

MIN_FRAMES = 16


@dataclass(frozen=True)
class EstimatorConfig:
    """Architecture: 4 stride-2 3x3 convs (tanh + batch norm after the first
    three), mean pooling over frequency, self-attention pooling over time,
    then a two-layer head onto the functional dimension."""

    conv_channels: tuple[int, ...] = (16, 32, 32, 64)
    kernel: int = 3
    stride: int = 2
    padding: int = 1
    head_hidden: int = 64
    out_dim: int = 50
    crop_frames: int = 64
    input_bins: int = 257
    # constant frequency-position input plane: convolution is translation
    # invariant, but functionals like f0 and centroid live at absolute
    # frequencies, so the encoder gets the coordinate as a second channel
    freq_coord: bool = True
    # frequency reduction before time pooling: per-channel learned softmax
    # weights over frequency cells ("learned") or a plain mean ("mean")
    freq_pool: str = "learned"

    @property
    def attention_dim(self) -> int:
        return self.conv_channels[-1]

    @property
    def in_channels(self) -> int:
        return 2 if self.freq_coord else 1

    @property
    def freq_cells(self) -> int:
        """Frequency size of the encoder output for input_bins input."""
        f = self.input_bins
        for _ in self.conv_channels:
            f = (f + 2 * self.padding - self.kernel) // self.stride + 1
        return f

    def to_dict(self) -> dict:
        return {
            "conv_channels": list(self.conv_channels),
            "kernel": self.kernel,
            "stride": self.stride,
            "padding": self.padding,
            "head_hidden": self.head_hidden,
            "out_dim": self.out_dim,
            "crop_frames": self.crop_frames,
            "input_bins": self.input_bins,
            "freq_coord": self.freq_coord,
            "freq_pool": self.freq_pool,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        return cls(
            conv_channels=tuple(d["conv_channels"]),
            kernel=int(d["kernel"]),
            stride=int(d["stride"]),
            padding=int(d["padding"]),
            head_hidden=int(d["head_hidden"]),
            out_dim=int(d["out_dim"]),
            crop_frames=int(d["crop_frames"]),
            input_bins=int(d["input_bins"]),
            freq_coord=bool(d["freq_coord"]),
            freq_pool=str(d["freq_pool"]),
        )


@dataclass(frozen=True)
class InputNorm:
    """Global mean/std of log(1 + magnitude) over the training corpus."""

    mean: float
    std: float

    def apply(self, log_mag: np.ndarray) -> np.ndarray:
        return (log_mag - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d: dict) -> "InputNorm":
        return cls(mean=float(d["mean"]), std=float(d["std"]))


def spectrogram_features(mag: np.ndarray, norm: InputNorm) -> np.ndarray:
    """log(1 + magnitude), globally standardized."""
    return norm.apply(np.log1p(np.asarray(mag, dtype=np.float64)))


def fit_input_norm(mags: list[np.ndarray]) -> InputNorm:
    logs = [np.log1p(np.asarray(m, dtype=np.float64)) for m in mags]
    flat = np.concatenate([m.reshape(-1) for m in logs])
    return InputNorm(mean=float(flat.mean()), std=float(max(flat.std(), 1e-6)))


def _he_normal(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def init_estimator_params(cfg: EstimatorConfig, seed: int, dtype=np.float32) -> ParameterSet:
    """Seeded initialization of encoder, attention, and head parameters."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 0x6573]))
    params = ParameterSet(dtype=dtype)
    in_ch = cfg.in_channels
    k = cfg.kernel
    for i, out_ch in enumerate(cfg.conv_channels, start=1):
        params.add(f"enc.conv{i}.w", _he_normal(rng, (out_ch, in_ch, k, k), in_ch * k * k))
        params.add(f"enc.conv{i}.b", np.zeros(out_ch))
        if i < len(cfg.conv_channels):
            params.add(f"enc.bn{i}.gamma", np.ones(out_ch))
            params.add(f"enc.bn{i}.beta", np.zeros(out_ch))
            params.add(f"enc.bn{i}.running_mean", np.zeros(out_ch), trainable=False)
            params.add(f"enc.bn{i}.running_var", np.ones(out_ch), trainable=False)
        in_ch = out_ch

    h = cfg.attention_dim
    if cfg.freq_pool == "learned":
        # zeros = uniform softmax = mean pooling at initialization
        params.add("fpool.w", np.zeros((h, cfg.freq_cells)))
    elif cfg.freq_pool != "mean":
        raise ValidationError(f"unknown freq_pool mode {cfg.freq_pool!r}")
    params.add("attn.w", rng.standard_normal(h) * (1.0 / np.sqrt(h)))
    params.add("head.fc1.w", _he_normal(rng, (h, cfg.head_hidden), h))
    params.add("head.fc1.b", np.zeros(cfg.head_hidden))
    params.add("head.fc2.w", _he_normal(rng, (cfg.head_hidden, cfg.out_dim), cfg.head_hidden))
    params.add("head.fc2.b", np.zeros(cfg.out_dim))
    return params


def encoder_forward(params: ParameterSet, x: Tensor, cfg: EstimatorConfig, *, bn_train: bool) -> Tensor:
    """Conv stack on (B, 1, T, F); tanh + batch norm after layers 1..n-1."""
    h = x
    if cfg.freq_coord:
        t_dim, f_dim = x.shape[2], x.shape[3]
        plane = np.broadcast_to(np.linspace(-1.0, 1.0, f_dim)[None, :], (t_dim, f_dim))
        h = ops.append_const_channel(h, np.ascontiguousarray(plane))
    n_layers = len(cfg.conv_channels)
    for i in range(1, n_layers + 1):
        h = ops.conv2d(
            h, params[f"enc.conv{i}.w"], params[f"enc.conv{i}.b"],
            stride=cfg.stride, padding=cfg.padding,
        )
        if i < n_layers:
            h = ops.tanh(h)
            h = ops.batch_norm(
                h,
                params[f"enc.bn{i}.gamma"],
                params[f"enc.bn{i}.beta"],
                params[f"enc.bn{i}.running_mean"],
                params[f"enc.bn{i}.running_var"],
                training=bn_train,
            )
    return h


def estimator_forward(
    params: ParameterSet,
    x: Tensor,
    cfg: EstimatorConfig,
    *,
    bn_train: bool,
) -> Tensor:
    """Full forward pass: (B, 1, T, F) features -> (B, D) standardized estimates."""
    if x.data.ndim != 4 or x.shape[1] != 1:
        raise ShapeError(f"estimator expects (B, 1, T, F) input, got {x.shape}")
    if x.shape[2] < MIN_FRAMES:
        raise ValidationError(
            f"estimator needs at least {MIN_FRAMES} frames for {len(cfg.conv_channels)} stride-2 layers, got {x.shape[2]}"
        )
    if x.shape[3] != cfg.input_bins:
        raise ShapeError(f"estimator expects {cfg.input_bins} frequency bins, got {x.shape[3]}")
    h = encoder_forward(params, x, cfg, bn_train=bn_train)       # (B, C, T', F')
    if cfg.freq_pool == "learned":
        h = ops.freq_pool(h, params["fpool.w"])                   # (B, C, T')
    else:
        h = ops.mean(h, axis=3)
    h = ops.transpose(h, (0, 2, 1))                               # (B, T', C)
    pooled = ops.self_attention_pool(h, params["attn.w"])         # (B, C)
    hid = ops.tanh(ops.linear(pooled, params["head.fc1.w"], params["head.fc1.b"]))
    return ops.linear(hid, params["head.fc2.w"], params["head.fc2.b"])


@dataclass(eq=False)
class Estimator:
    """Bundle of everything needed to run or fine-tune against the estimator."""

    params: ParameterSet
    config: EstimatorConfig
    input_norm: InputNorm
    scaler: TargetScaler
    stft_config: StftConfig
    registry_id: str
    checkpoint_sha256: str | None = field(default=None)

    def forward_features(self, feats: Tensor, *, bn_train: bool = False) -> Tensor:
        return estimator_forward(self.params, feats, self.config, bn_train=bn_train)

    def estimate(self, spec: Spectrogram) -> FunctionalVector:
        """Standardized functional estimate of one spectrogram (eval mode)."""
        if spec.config() != self.stft_config:
            raise ValidationError(
                f"spectrogram config {spec.config()} does not match estimator's {self.stft_config}"
            )
        feats = spectrogram_features(spec.magnitude(), self.input_norm)
        x = tensor(feats[None, None], dtype=self.params.dtype)
        with no_grad():
            out = self.forward_features(x, bn_train=False)
        return FunctionalVector(values=out.data[0].astype(np.float64), registry_id=self.registry_id)

    def header_extra(self) -> dict:
        return {
            "estimator_config": self.config.to_dict(),
            "input_norm": self.input_norm.to_dict(),
            "scaler": self.scaler.to_dict(),
            "stft_config": self.stft_config.to_dict(),
            "registry_id": self.registry_id,
        }

    @classmethod
    def from_checkpoint_parts(cls, params: ParameterSet, header: dict, sha256: str | None = None) -> "Estimator":
        return cls(
            params=params,
            config=EstimatorConfig.from_dict(header["estimator_config"]),
            input_norm=InputNorm.from_dict(header["input_norm"]),
            scaler=TargetScaler.from_dict(header["scaler"]),
            stft_config=StftConfig.from_dict(header["stft_config"]),
            registry_id=str(header["registry_id"]),
            checkpoint_sha256=sha256,
        )
