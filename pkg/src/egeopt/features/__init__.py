"""Acoustic-parameter oracle: per-frame low-level descriptors over 30 ms
windows at 10 ms stride, aggregated into an utterance-level functional vector.
"""

from .registry import FeatureRegistry, default_registry, STATISTICS
from .pitch import (
    PeriodDetection,
    detect_periods,
    jitter_local,
    shimmer_local,
    hnr_db,
    normalized_autocorr,
)
from .spectral import SpectralFeatures, spectral_lld, frame_magnitude_spectrum
from .extract import (
    LldFrame,
    LldMatrix,
    FunctionalVector,
    compute_llds,
    extract_functionals,
    WINDOW_S,
    STRIDE_S,
)

__all__ = [
    "FeatureRegistry",
    "default_registry",
    "STATISTICS",
    "PeriodDetection",
    "detect_periods",
    "jitter_local",
    "shimmer_local",
    "hnr_db",
    "normalized_autocorr",
    "SpectralFeatures",
    "spectral_lld",
    "frame_magnitude_spectrum",
    "LldFrame",
    "LldMatrix",
    "FunctionalVector",
    "compute_llds",
    "extract_functionals",
    "WINDOW_S",
    "STRIDE_S",
]
