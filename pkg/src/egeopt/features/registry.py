"""Feature registry: which descriptors exist, in what order, with which statistics.

The registry id travels with every functional vector so that vectors from
different registries can never be mixed silently. The default registry has
10 descriptors x 5 statistics = 50 functionals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ValidationError

STATISTICS = ("mean", "std", "p20", "p50", "p80")

DEFAULT_REGISTRY_ID = "egeopt-reduced-50-v1"

# name -> aggregated over voiced frames only
_DEFAULT_LLDS = (
    ("f0", True),
    ("jitter", True),
    ("shimmer", True),
    ("hnr", True),
    ("voicing", False),
    ("flux", False),
    ("slope_0_500", False),
    ("slope_500_1500", False),
    ("centroid", False),
    ("rms", False),
)


@dataclass(frozen=True)
class FeatureRegistry:
    registry_id: str
    lld_names: tuple[str, ...]
    statistic_names: tuple[str, ...]
    voiced_only: tuple[bool, ...]

    def __post_init__(self):
        if len(set(self.lld_names)) != len(self.lld_names):
            raise ValidationError("registry LLD names must be unique")
        if len(set(self.statistic_names)) != len(self.statistic_names):
            raise ValidationError("registry statistic names must be unique")
        if len(self.voiced_only) != len(self.lld_names):
            raise ValidationError("voiced_only mask length must match LLD names")

    @property
    def size(self) -> int:
        """Dimension D of the functional vector."""
        return len(self.lld_names) * len(self.statistic_names)

    def functional_names(self) -> list[str]:
        """Flat names in vector order, e.g. 'f0.mean', 'jitter.p50'."""
        return [f"{lld}.{stat}" for lld in self.lld_names for stat in self.statistic_names]

    def to_dict(self) -> dict:
        return {
            "registry_id": self.registry_id,
            "lld_names": list(self.lld_names),
            "statistic_names": list(self.statistic_names),
            "voiced_only": list(self.voiced_only),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureRegistry":
        return cls(
            registry_id=str(d["registry_id"]),
            lld_names=tuple(d["lld_names"]),
            statistic_names=tuple(d["statistic_names"]),
            voiced_only=tuple(bool(v) for v in d["voiced_only"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureRegistry":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_registry() -> FeatureRegistry:
    return FeatureRegistry(
        registry_id=DEFAULT_REGISTRY_ID,
        lld_names=tuple(name for name, _ in _DEFAULT_LLDS),
        statistic_names=STATISTICS,
        voiced_only=tuple(flag for _, flag in _DEFAULT_LLDS),
    )


def statistic(values: np.ndarray, name: str) -> float:
    """One aggregate statistic over an LLD track.

    std is the population convention (divide by n); percentiles interpolate
    linearly between order statistics at rank (n-1)*q.
    """
    if name == "mean":
        return float(np.mean(values))
    if name == "std":
        return float(np.std(values))
    if name.startswith("p"):
        return float(np.percentile(values, float(name[1:]), method="linear"))
    raise ValidationError(f"unknown statistic {name!r}")
