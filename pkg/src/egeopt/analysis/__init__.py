"""Standardized-difference analysis and percent-improvement reporting."""

from .diffs import (
    StandardizationStats,
    DiffRecord,
    HistogramSpec,
    DistributionSummary,
    compute_stats,
    compute_diffs,
    percent_improvement,
    summarize_distribution,
    CONDITIONS,
)

__all__ = [
    "StandardizationStats",
    "DiffRecord",
    "HistogramSpec",
    "DistributionSummary",
    "compute_stats",
    "compute_diffs",
    "percent_improvement",
    "summarize_distribution",
    "CONDITIONS",
]
