"""Supervised regression of functional vectors from spectrogram crops."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, ValidationError
from ..autodiff import ops
from ..autodiff.optim import Adam
from ..autodiff.params import ParameterSet
from ..autodiff.tensor import no_grad, tensor
from .model import EstimatorConfig, InputNorm, estimator_forward, fit_input_norm, init_estimator_params
from .scaler import TargetScaler


@dataclass(frozen=True)
class TrainEstimatorConfig:
    epochs: int = 42
    lr: float = 2e-3
    batch: int = 16
    freeze_encoder: bool = True
    val_fraction: float = 0.1
    seed: int = 0
    # amplitude augmentation: scale each training crop by a log-uniform gain
    # in [1/augment_scale, augment_scale]; the oracle's exact scale behavior
    # makes the adjusted target free (only linearly-scaling dims change).
    # 1.0 disables it (default: the corpus already spans a wide gain range)
    augment_scale: float = 1.0
    # learning rate halves at 2/3 and quarters at 6/7 of the epoch budget
    lr_schedule: bool = True
    # Polyak averaging of weights across steps; the averaged model is what
    # gets returned (after a batch-norm statistics refresh pass)
    ema_decay: float = 0.995


def train_estimator(
    pairs: list[tuple[np.ndarray, np.ndarray]],
    cfg: EstimatorConfig,
    train_cfg: TrainEstimatorConfig,
    encoder: ParameterSet | None = None,
    input_norm: InputNorm | None = None,
    registry_id: str = "",
    amp_scaling_dims: list[int] | None = None,
    dtype=np.float32,
) -> tuple[ParameterSet, TargetScaler, InputNorm, list[dict]]:
    """Train the estimator on (magnitude crop, functional target) pairs.

    The dataset is split train/val by a seeded shuffle; the target scaler is
    fit on the training targets. When ``encoder`` (from pre-training) is
    given its weights are loaded first; ``freeze_encoder`` stops them (and
    their batch-norm statistics) from changing. ``amp_scaling_dims`` lists
    the target dimensions that scale linearly with waveform amplitude (the
    rms functionals); they are required when augmentation is enabled.
    Metrics report standardized and oracle-scale validation MSE per epoch.
    """
    if len(pairs) < 10:
        raise ValidationError(f"estimator training needs >= 10 pairs, got {len(pairs)}")
    d = pairs[0][1].size
    if d != cfg.out_dim:
        raise ValidationError(f"registry mismatch: targets have {d} functionals, config expects {cfg.out_dim}")
    shapes = {p[0].shape for p in pairs}
    if len(shapes) != 1:
        raise ValidationError(f"magnitude crops must share one shape, got {sorted(shapes)}")
    augment = train_cfg.augment_scale > 1.0
    if augment and amp_scaling_dims is None:
        raise ValidationError("augmentation needs amp_scaling_dims (the linearly-scaling functionals)")

    split_rng = np.random.default_rng(np.random.SeedSequence([int(train_cfg.seed) & 0xFFFFFFFF, 0x7370]))
    order = split_rng.permutation(len(pairs))
    n_val = max(1, int(round(train_cfg.val_fraction * len(pairs))))
    val_idx = order[:n_val]
    train_idx = order[n_val:]
    if train_idx.size < train_cfg.batch:
        raise ValidationError("training split smaller than one batch")

    mags = np.stack([p[0] for p in pairs]).astype(np.float32)
    targets = np.stack([p[1] for p in pairs])
    scaler = TargetScaler.fit(targets[train_idx], registry_id=registry_id)
    z_targets = np.stack([scaler.standardize(t) for t in targets]).astype(dtype)

    if input_norm is None:
        input_norm = fit_input_norm([pairs[i][0] for i in train_idx])

    def features_of(m: np.ndarray) -> np.ndarray:
        return ((np.log1p(m) - input_norm.mean) / input_norm.std).astype(dtype)[:, None]

    params = init_estimator_params(cfg, seed=train_cfg.seed, dtype=dtype)
    if encoder is not None:
        for name, t in encoder.items():
            if name not in params:
                raise ValidationError(f"pre-trained encoder has unexpected parameter {name!r}")
            if params[name].data.shape != t.data.shape:
                raise ValidationError(
                    f"encoder shape mismatch for {name!r}: {t.data.shape} vs {params[name].data.shape}"
                )
            params[name].data[...] = t.data.astype(dtype)
    if train_cfg.freeze_encoder:
        params.set_trainable("enc.", False)
    bn_train_enc = not train_cfg.freeze_encoder

    opt = Adam(lr=train_cfg.lr)
    metrics: list[dict] = []
    val_feats = features_of(mags[val_idx])
    scale_dims = np.asarray(amp_scaling_dims, dtype=np.intp) if augment else None
    use_ema = 0.0 < train_cfg.ema_decay < 1.0
    # averaged copies of the trainable weights only: frozen weights and
    # batch-norm buffers stay live (keeps frozen-encoder runs bitwise stable).
    # float64 accumulators: a constant weight sequence averages back to the
    # exact same float32 value
    ema = (
        {name: t.data.astype(np.float64) for name, t in params.trainable_items()}
        if use_ema
        else None
    )

    eval_batch = max(64, train_cfg.batch)

    def eval_mse() -> tuple[float, float]:
        params.eval()
        total_sq = 0.0
        total_sq_oracle = 0.0
        count = 0
        with no_grad():
            for start in range(0, val_idx.size, eval_batch):
                sel = slice(start, start + eval_batch)
                rows = val_idx[sel]
                out = estimator_forward(params, tensor(val_feats[sel]), cfg, bn_train=False)
                err = out.data - z_targets[rows]
                total_sq += float(np.sum(err * err))
                oracle_err = scaler.unstandardize(out.data.astype(np.float64)) - targets[rows]
                total_sq_oracle += float(np.sum(oracle_err * oracle_err))
                count += rows.size * d
        params.train()
        return total_sq / count, total_sq_oracle / count

    val_mse_init, val_oracle_init = eval_mse()
    metrics.append(
        {"epoch": -1, "train_mse": None, "val_mse": val_mse_init, "val_mse_oracle": val_oracle_init}
    )

    drop_half = int(train_cfg.epochs * 2 / 3)
    drop_quarter = int(train_cfg.epochs * 6 / 7)
    for epoch in range(train_cfg.epochs):
        if train_cfg.lr_schedule:
            if epoch == drop_half:
                opt.lr = train_cfg.lr / 2
            if epoch == drop_quarter:
                opt.lr = train_cfg.lr / 4
        order_rng = np.random.default_rng(
            np.random.SeedSequence([int(train_cfg.seed) & 0xFFFFFFFF, 0x6F72, epoch])
        )
        order_ep = order_rng.permutation(train_idx.size)
        aug_rng = np.random.default_rng(
            np.random.SeedSequence([int(train_cfg.seed) & 0xFFFFFFFF, 0x6175, epoch])
        )
        losses = []
        for start in range(0, train_idx.size - train_cfg.batch + 1, train_cfg.batch):
            sel = train_idx[order_ep[start : start + train_cfg.batch]]
            if augment:
                log_hi = np.log(train_cfg.augment_scale)
                gains = np.exp(aug_rng.uniform(-log_hi, log_hi, size=sel.size)).astype(np.float32)
                batch_mags = mags[sel] * gains[:, None, None]
                raw = targets[sel].copy()
                raw[:, scale_dims] *= gains[:, None]
                batch_z = np.stack([scaler.standardize(t) for t in raw]).astype(dtype)
            else:
                batch_mags = mags[sel]
                batch_z = z_targets[sel]
            x = tensor(features_of(batch_mags), dtype=dtype)
            out = estimator_forward(params, x, cfg, bn_train=bn_train_enc)
            loss = ops.mse(out, tensor(batch_z, dtype=dtype))
            value = loss.item()
            if not np.isfinite(value):
                raise NumericalError(f"estimator training diverged (loss {value}) at epoch {epoch}")
            loss.backward()
            opt.step(params)
            if use_ema:
                for name, t in params.trainable_items():
                    ema[name] *= train_cfg.ema_decay
                    ema[name] += (1.0 - train_cfg.ema_decay) * t.data
            losses.append(value)
        val_mse, val_oracle = eval_mse()
        metrics.append(
            {
                "epoch": epoch,
                "train_mse": float(np.mean(losses)) if losses else None,
                "val_mse": val_mse,
                "val_mse_oracle": val_oracle,
            }
        )

    if use_ema:
        for name, _ in params.trainable_items():
            params[name].data[...] = ema[name].astype(dtype)
        if bn_train_enc:
            # refresh the batch-norm running statistics for the averaged weights
            with no_grad():
                refresh = train_idx[: 50 * train_cfg.batch]
                for start in range(0, refresh.size - train_cfg.batch + 1, train_cfg.batch):
                    sel = refresh[start : start + train_cfg.batch]
                    x = tensor(features_of(mags[sel]), dtype=dtype)
                    estimator_forward(params, x, cfg, bn_train=True)
        val_mse, val_oracle = eval_mse()
        metrics.append(
            {
                "epoch": train_cfg.epochs,
                "train_mse": None,
                "val_mse": val_mse,
                "val_mse_oracle": val_oracle,
                "averaged": True,
            }
        )

    params.eval()
    return params, scaler, input_norm, metrics
