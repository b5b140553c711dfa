"""Training losses for the enhancer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, ValidationError
from ..autodiff import ops
from ..autodiff.tensor import Tensor


def original_loss(y_hat: Tensor, y_ref: Tensor, mag_enh: Tensor, mag_ref: Tensor) -> Tensor:
    """L1 between waveforms plus L1 between log-magnitude spectrograms."""
    if y_hat.shape != y_ref.shape:
        raise ShapeError(f"waveform length mismatch: {y_hat.shape} vs {y_ref.shape}")
    if mag_enh.shape != mag_ref.shape:
        raise ShapeError(f"spectrogram shape mismatch: {mag_enh.shape} vs {mag_ref.shape}")
    wave_term = ops.l1(y_hat, y_ref)
    spec_term = ops.l1(ops.log1p(mag_enh), ops.log1p(mag_ref))
    return ops.add(wave_term, spec_term)


def egemaps_loss(estimates: Tensor, targets: Tensor) -> Tensor:
    """Mean over the batch of squared L2 distances between functional vectors.

    Per item the full squared norm is taken (no division by the functional
    dimension); the batch mean divides by B only.
    """
    if estimates.data.ndim != 2:
        raise ShapeError(f"egemaps_loss expects (B, D) estimates, got {estimates.shape}")
    if estimates.shape != targets.shape:
        raise ShapeError(f"estimate/target shapes differ: {estimates.shape} vs {targets.shape}")
    diff = ops.sub(estimates, targets)
    return ops.scale(ops.total(ops.mul(diff, diff)), 1.0 / estimates.shape[0])


@dataclass
class LossBreakdown:
    """Per-step loss components; total = original + lambda * egemaps."""

    lam: float
    history: list[dict] = field(default_factory=list)

    def record(self, step: int, original: float, egemaps: float) -> dict:
        total = original + self.lam * egemaps
        entry = {"step": step, "original": original, "egemaps": egemaps, "total": total}
        if abs(total - (original + self.lam * egemaps)) > 1e-9:
            raise ValidationError("loss bookkeeping violated total = original + lambda * egemaps")
        self.history.append(entry)
        return entry

    @property
    def last(self) -> dict:
        return self.history[-1]

    def totals(self) -> np.ndarray:
        return np.array([h["total"] for h in self.history])
