"""Per-utterance standardized functional differences against clean speech.

Every functional is standardized by the mean/std of the clean corpus, so a
difference of 1.0 means "one clean-corpus standard deviation away from the
clean value". The ideal enhanced distribution is a spike at zero: nonzero
mean or growing variance both mean worse agreement with clean speech.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

CONDITIONS = ("noisy", "enhanced_baseline", "enhanced_finetuned")

STD_FLOOR = 1e-6
IMPROVEMENT_FLOOR = 1e-9

DEFAULT_BINS = 61
DEFAULT_RANGE = 3.0


@dataclass(frozen=True, eq=False)
class StandardizationStats:
    """Clean-corpus mean/std per functional; provenance is checked downstream."""

    mean: np.ndarray
    std: np.ndarray
    registry_id: str
    source_condition: str = "clean"


def compute_stats(
    clean_values: dict[str, np.ndarray],
    registry_id: str,
    source_condition: str = "clean",
) -> StandardizationStats:
    """Fit standardization stats; only the clean condition is a valid source."""
    if source_condition != "clean":
        raise ValidationError(
            f"standardization stats must come from clean functionals, not {source_condition!r}"
        )
    if len(clean_values) < 2:
        raise ValidationError(f"need >= 2 clean utterances to fit stats, got {len(clean_values)}")
    matrix = np.stack(list(clean_values.values()))
    return StandardizationStats(
        mean=matrix.mean(axis=0),
        std=np.maximum(matrix.std(axis=0), STD_FLOOR),
        registry_id=registry_id,
        source_condition="clean",
    )


@dataclass(frozen=True, eq=False)
class DiffRecord:
    utterance_id: str
    condition: str
    d: np.ndarray

    def to_dict(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "condition": self.condition,
            "d": [float(v) for v in self.d],
        }


def compute_diffs(
    clean: dict[str, np.ndarray],
    cond: dict[str, np.ndarray],
    stats: StandardizationStats,
    condition: str,
) -> list[DiffRecord]:
    """One standardized difference vector per paired utterance.

    d_i = z(cond_i) - z(clean_i) with z the clean-corpus standardization,
    i.e. (cond_i - clean_i) / clean_std_i.
    """
    if stats.source_condition != "clean":
        raise ValidationError(
            f"stats were fit on {stats.source_condition!r}; diffs require clean-corpus stats"
        )
    unpaired = sorted(set(clean) ^ set(cond))
    if unpaired:
        raise ValidationError(f"unpaired utterances between clean and {condition}: {unpaired[:5]}")
    records = []
    for utt_id in sorted(clean):
        c = np.asarray(clean[utt_id], dtype=np.float64)
        v = np.asarray(cond[utt_id], dtype=np.float64)
        if c.shape != stats.mean.shape or v.shape != stats.mean.shape:
            raise ValidationError(
                f"registry mismatch for {utt_id!r}: vectors {c.shape}/{v.shape} vs stats {stats.mean.shape}"
            )
        d = (v - c) / stats.std
        if not np.all(np.isfinite(d)):
            raise ValidationError(f"non-finite difference for utterance {utt_id!r}")
        records.append(DiffRecord(utterance_id=utt_id, condition=condition, d=d))
    return records


def mean_abs_diff(records: list[DiffRecord]) -> np.ndarray:
    """Per-functional mean absolute standardized difference."""
    if not records:
        raise ValidationError("no difference records")
    return np.mean(np.abs(np.stack([r.d for r in records])), axis=0)


def percent_improvement(
    baseline: list[DiffRecord], finetuned: list[DiffRecord]
) -> np.ndarray:
    """Per-functional reduction of mean |d| relative to the baseline, in percent.

    100 means the difference from clean has been fully removed; negative
    values signal regression. Functionals whose baseline mean |d| is below
    1e-9 are reported as NaN (not applicable) instead of dividing by zero.
    """
    ids_base = sorted(r.utterance_id for r in baseline)
    ids_ft = sorted(r.utterance_id for r in finetuned)
    if ids_base != ids_ft:
        raise ValidationError("percent_improvement requires the same utterance set for both conditions")
    base = mean_abs_diff(baseline)
    ft = mean_abs_diff(finetuned)
    out = np.full(base.shape, np.nan)
    ok = base >= IMPROVEMENT_FLOOR
    out[ok] = 100.0 * (base[ok] - ft[ok]) / base[ok]
    return out


@dataclass(frozen=True)
class HistogramSpec:
    functional: str
    index: int
    bins: int = DEFAULT_BINS
    range_limit: float = DEFAULT_RANGE

    def edges(self) -> np.ndarray:
        return np.linspace(-self.range_limit, self.range_limit, self.bins + 1)


@dataclass(frozen=True, eq=False)
class DistributionSummary:
    functional: str
    condition: str
    edges: np.ndarray
    probabilities: np.ndarray
    mean: float
    std: float
    out_of_range: int


def summarize_distribution(records: list[DiffRecord], spec: HistogramSpec) -> DistributionSummary:
    """Binned probabilities plus moments of one functional's differences.

    Values outside the histogram range are clamped into the edge bins and
    counted in ``out_of_range``.
    """
    if len(records) < 2:
        raise ValidationError(f"distribution summary needs >= 2 records, got {len(records)}")
    conditions = {r.condition for r in records}
    if len(conditions) != 1:
        raise ValidationError(f"summarize one condition at a time, got {sorted(conditions)}")
    values = np.array([r.d[spec.index] for r in records])
    edges = spec.edges()
    out_of_range = int(np.sum((values < edges[0]) | (values > edges[-1])))
    clamped = np.clip(values, edges[0], edges[-1])
    counts, _ = np.histogram(clamped, bins=edges)
    probs = counts / counts.sum()
    return DistributionSummary(
        functional=spec.functional,
        condition=conditions.pop(),
        edges=edges,
        probabilities=probs,
        mean=float(values.mean()),
        std=float(values.std()),
        out_of_range=out_of_range,
    )
