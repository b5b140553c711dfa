"""Per-functional standardization of regression targets.

The raw functionals mix units (Hz, dB, ratios); training on standardized
targets keeps the squared-error loss balanced across dimensions. The scaler
is fit on clean training targets only and persisted with checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

STD_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class TargetScaler:
    mean: np.ndarray
    std: np.ndarray
    registry_id: str

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64, copy=True)
        std = np.array(self.std, dtype=np.float64, copy=True)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValidationError(f"scaler mean/std shapes mismatch: {mean.shape} vs {std.shape}")
        if np.any(std < STD_FLOOR):
            raise ValidationError("scaler std below floor; fit with TargetScaler.fit")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @classmethod
    def fit(cls, targets: np.ndarray, registry_id: str) -> "TargetScaler":
        """Fit mean/std (population convention, floored) over rows of targets."""
        targets = np.asarray(targets, dtype=np.float64)
        if targets.ndim != 2 or targets.shape[0] < 2:
            raise ValidationError(f"scaler needs a (n>=2, D) target matrix, got {targets.shape}")
        return cls(
            mean=targets.mean(axis=0),
            std=np.maximum(targets.std(axis=0), STD_FLOOR),
            registry_id=registry_id,
        )

    @property
    def size(self) -> int:
        return int(self.mean.size)

    def standardize(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def unstandardize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "registry_id": self.registry_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TargetScaler":
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            registry_id=str(d["registry_id"]),
        )
