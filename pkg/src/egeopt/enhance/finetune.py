"""Enhancer training loop: baseline (lambda = 0) and functional-matching fine-tune.

The same inner loop serves both; with lambda = 0 the estimator path is never
entered, so baseline training and a lambda = 0 fine-tune perform identical
arithmetic and produce bit-identical checkpoints under the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, ValidationError
from ..dsp.stft import StftConfig
from ..autodiff import ops
from ..autodiff.optim import Adam
from ..autodiff.params import ParameterSet
from ..autodiff.tensor import tensor
from ..estimator.model import Estimator
from .losses import LossBreakdown, egemaps_loss, original_loss
from .model import EnhancerConfig, predict_mask
from .stft_bridge import batch_stft, istft_magnitude


@dataclass(frozen=True)
class FineTuneConfig:
    lam: float = 1.0
    fix_estimator: bool = True
    epochs: int = 4
    lr: float = 1e-3
    batch: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")


@dataclass(frozen=True, eq=False)
class TrainCrop:
    """One aligned (noisy, clean) waveform crop plus its standardized target."""

    utterance_id: str
    noisy: np.ndarray
    clean: np.ndarray
    target_std: np.ndarray | None = None


def train_enhancer(
    params: ParameterSet,
    crops: list[TrainCrop],
    cfg: EnhancerConfig,
    stft_cfg: StftConfig,
    tune: FineTuneConfig,
    estimator: Estimator | None = None,
) -> tuple[ParameterSet, LossBreakdown]:
    """Optimize the enhancer in place; returns (params, loss history).

    With ``tune.lam > 0`` an estimator is required and the matching loss is
    added; with ``fix_estimator`` its weights receive no updates and its
    batch norm runs in eval mode. NaN loss aborts with a NumericalError
    whose ``last_good`` attribute carries the previous epoch's parameters.
    """
    if tune.lam > 0.0:
        if estimator is None:
            raise ValidationError("fine-tuning with lambda > 0 requires a trained estimator")
        if estimator.stft_config != stft_cfg:
            raise ValidationError(
                f"estimator STFT config {estimator.stft_config} does not match enhancer's {stft_cfg}"
            )
        for crop in crops:
            if crop.target_std is None:
                raise ValidationError(f"crop {crop.utterance_id!r} lacks a standardized clean target")
    if len(crops) < tune.batch:
        raise ValidationError(f"{len(crops)} crops but batch size {tune.batch}")
    lengths = {c.noisy.size for c in crops} | {c.clean.size for c in crops}
    if len(lengths) != 1:
        raise ValidationError(f"crops must share one length, got {sorted(lengths)}")
    num_samples = lengths.pop()
    dtype = params.dtype

    phi_optimizer = None
    if tune.lam > 0.0 and estimator is not None:
        if tune.fix_estimator:
            estimator.params.set_trainable("", False)
            estimator.params.eval()
        else:
            estimator.params.set_trainable("", True)
            for name in estimator.params.names():
                if "running_" in name:
                    estimator.params[name].requires_grad = False
            estimator.params.train()
            phi_optimizer = Adam(lr=tune.lr)

    noisy = np.stack([c.noisy for c in crops]).astype(np.float64)
    clean = np.stack([c.clean for c in crops]).astype(np.float64)
    targets = (
        np.stack([c.target_std for c in crops]).astype(dtype)
        if tune.lam > 0.0
        else None
    )

    opt = Adam(lr=tune.lr)
    order_rng = np.random.default_rng(np.random.SeedSequence([int(tune.seed) & 0xFFFFFFFF, 0x6674]))
    breakdown = LossBreakdown(lam=tune.lam)
    step = 0
    last_good = params.copy()

    for epoch in range(tune.epochs):
        order = order_rng.permutation(len(crops))
        for start in range(0, len(crops) - tune.batch + 1, tune.batch):
            sel = order[start : start + tune.batch]
            spec_noisy = batch_stft(noisy[sel], stft_cfg)
            mag_x = np.abs(spec_noisy)
            unit_phase = np.where(mag_x > 0.0, spec_noisy / np.maximum(mag_x, 1e-300), 1.0 + 0.0j)
            mag_clean = np.abs(batch_stft(clean[sel], stft_cfg))

            mag_x_t = tensor(mag_x, dtype=dtype)
            mask = predict_mask(params, mag_x_t, cfg)
            mag_enh = ops.mul(mask, mag_x_t)
            y_hat = istft_magnitude(mag_enh, unit_phase, stft_cfg, num_samples)

            l_orig = original_loss(
                y_hat,
                tensor(clean[sel], dtype=dtype),
                mag_enh,
                tensor(mag_clean, dtype=dtype),
            )
            if tune.lam > 0.0:
                bsz, t, f = mag_enh.shape
                feats = ops.scale(
                    ops.add_scalar(ops.log1p(mag_enh), -estimator.input_norm.mean),
                    1.0 / estimator.input_norm.std,
                )
                est_out = estimator.forward_features(
                    ops.reshape(feats, (bsz, 1, t, f)),
                    bn_train=not tune.fix_estimator,
                )
                l_ege = egemaps_loss(est_out, tensor(targets[sel], dtype=dtype))
                loss = ops.add(l_orig, ops.scale(l_ege, tune.lam))
                ege_value = l_ege.item()
            else:
                loss = l_orig
                ege_value = 0.0

            orig_value = l_orig.item()
            if not (np.isfinite(orig_value) and np.isfinite(ege_value)):
                raise _diverged(epoch, step, last_good)
            breakdown.record(step, orig_value, ege_value)
            loss.backward()
            opt.step(params)
            if phi_optimizer is not None:
                phi_optimizer.step(estimator.params)
            step += 1
        last_good = params.copy()

    return params, breakdown


def _diverged(epoch: int, step: int, last_good: ParameterSet) -> NumericalError:
    err = NumericalError(f"enhancer training diverged (NaN loss) at epoch {epoch}, step {step}")
    err.last_good = last_good
    return err


def finetune(
    baseline_params: ParameterSet,
    crops: list[TrainCrop],
    cfg: EnhancerConfig,
    stft_cfg: StftConfig,
    tune: FineTuneConfig,
    estimator: Estimator | None = None,
) -> tuple[ParameterSet, LossBreakdown]:
    """Fine-tune from a baseline checkpoint; delegates to the shared loop."""
    params = baseline_params.copy()
    return train_enhancer(params, crops, cfg, stft_cfg, tune, estimator=estimator)
