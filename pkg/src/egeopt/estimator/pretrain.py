"""Reconstruction pre-training of the encoder.

The encoder is paired with a transposed-conv decoder, trained to reconstruct
normalized log-magnitude spectrograms under MSE, and the decoder is then
discarded. Deterministic for a fixed seed/config/data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, ValidationError
from ..autodiff import ops
from ..autodiff.optim import Adam
from ..autodiff.params import ParameterSet
from ..autodiff.tensor import tensor
from .model import EstimatorConfig, InputNorm, encoder_forward, fit_input_norm, spectrogram_features, _he_normal

MIN_PRETRAIN_SPECS = 32


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 6
    lr: float = 1e-3
    batch: int = 16
    seed: int = 0


def _init_decoder(cfg: EstimatorConfig, rng: np.random.Generator, params: ParameterSet) -> None:
    chans = list(cfg.conv_channels[::-1]) + [1]   # e.g. 64 -> 32 -> 32 -> 16 -> 1
    k = cfg.kernel
    for i in range(len(chans) - 1):
        cin, cout = chans[i], chans[i + 1]
        params.add(f"dec.tconv{i + 1}.w", _he_normal(rng, (cin, cout, k, k), cin * k * k))
        params.add(f"dec.tconv{i + 1}.b", np.zeros(cout))


def _decoder_forward(params: ParameterSet, z, cfg: EstimatorConfig, out_t: int, out_f: int):
    h = z
    n = len(cfg.conv_channels)
    for i in range(1, n + 1):
        h = ops.conv_transpose2d(
            h, params[f"dec.tconv{i}.w"], params[f"dec.tconv{i}.b"],
            stride=cfg.stride, padding=cfg.padding, output_padding=cfg.stride - 1,
        )
        if i < n:
            h = ops.tanh(h)
    if h.shape[2] < out_t or h.shape[3] < out_f:
        raise ValidationError(f"decoder output {h.shape} smaller than target ({out_t}, {out_f})")
    return ops.crop2d(h, out_t, out_f)


def pretrain_encoder(
    clean_mags: list[np.ndarray],
    cfg: EstimatorConfig,
    pre: PretrainConfig,
    dtype=np.float32,
) -> tuple[ParameterSet, InputNorm, list[dict]]:
    """Train encoder+decoder on reconstruction; return encoder weights only.

    Returns (encoder ParameterSet, fitted InputNorm, per-epoch metrics).
    Raises NumericalError if the loss diverges to NaN.
    """
    if len(clean_mags) < MIN_PRETRAIN_SPECS:
        raise ValidationError(
            f"pre-training needs >= {MIN_PRETRAIN_SPECS} clean spectrograms, got {len(clean_mags)}"
        )
    shapes = {m.shape for m in clean_mags}
    if len(shapes) != 1:
        raise ValidationError(f"pre-training spectrogram crops must share one shape, got {sorted(shapes)}")
    t_dim, f_dim = clean_mags[0].shape

    norm = fit_input_norm(clean_mags)
    feats = np.stack([spectrogram_features(m, norm) for m in clean_mags]).astype(dtype)
    feats = feats[:, None, :, :]   # (N, 1, T, F)

    from .model import init_estimator_params

    params = init_estimator_params(cfg, seed=pre.seed, dtype=dtype).subset("enc.")
    rng = np.random.default_rng(np.random.SeedSequence([int(pre.seed) & 0xFFFFFFFF, 0x6465]))
    _init_decoder(cfg, rng, params)

    opt = Adam(lr=pre.lr)
    order_rng = np.random.default_rng(np.random.SeedSequence([int(pre.seed) & 0xFFFFFFFF, 0x6F72]))
    n = feats.shape[0]
    history: list[dict] = []

    def epoch_step(epoch: int) -> float:
        order = order_rng.permutation(n)
        losses = []
        for start in range(0, n - pre.batch + 1, pre.batch):
            idx = order[start : start + pre.batch]
            x = tensor(feats[idx], dtype=dtype)
            z = encoder_forward(params, x, cfg, bn_train=True)
            recon = _decoder_forward(params, z, cfg, t_dim, f_dim)
            loss = ops.mse(recon, x)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericalError(f"pre-training diverged (loss {value}) at epoch {epoch}")
            loss.backward()
            opt.step(params)
            losses.append(value)
        return float(np.mean(losses))

    def eval_recon() -> float:
        from ..autodiff.tensor import no_grad

        total_sq = 0.0
        count = 0
        with no_grad():
            for start in range(0, n, pre.batch):
                x = tensor(feats[start : start + pre.batch], dtype=dtype)
                z = encoder_forward(params, x, cfg, bn_train=False)
                recon = _decoder_forward(params, z, cfg, t_dim, f_dim)
                total_sq += float(np.sum((recon.data - x.data) ** 2))
                count += x.size
        return total_sq / count

    history.append({"epoch": -1, "train_mse": None, "recon_mse": eval_recon()})
    for epoch in range(pre.epochs):
        train_mse = epoch_step(epoch)
        history.append({"epoch": epoch, "train_mse": train_mse, "recon_mse": eval_recon()})

    encoder = params.subset("enc.")
    return encoder, norm, history
