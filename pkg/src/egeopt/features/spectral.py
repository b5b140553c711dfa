"""Spectral low-level descriptors: flux, band slopes, centroid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..dsp.stft import periodic_hann

LOG_FLOOR = 1e-10

SLOPE_BANDS = ((0.0, 500.0), (500.0, 1500.0))


@dataclass(frozen=True)
class SpectralFeatures:
    flux: float
    slope_0_500: float | None
    slope_500_1500: float | None
    centroid_hz: float | None


def frame_magnitude_spectrum(frame_samples: np.ndarray, fft_size: int) -> np.ndarray:
    """Hann-windowed, zero-padded magnitude spectrum of one analysis frame."""
    x = np.asarray(frame_samples, dtype=np.float64)
    if x.size > fft_size:
        raise ValidationError(f"frame of {x.size} samples exceeds fft_size {fft_size}")
    return np.abs(np.fft.rfft(x * periodic_hann(x.size), fft_size))


def _band_slope(log_mag: np.ndarray, freqs: np.ndarray, lo: float, hi: float) -> float:
    """Least-squares slope of dB magnitude against frequency, in dB/Hz."""
    mask = (freqs >= lo) & (freqs <= hi)
    f = freqs[mask]
    y = log_mag[mask]
    f_c = f - np.mean(f)
    denom = np.sum(f_c * f_c)
    if denom <= 0.0:
        raise ValidationError(f"band {lo}-{hi} Hz has too few bins for a slope")
    return float(np.sum(f_c * (y - np.mean(y))) / denom)


def spectral_lld(
    mag: np.ndarray,
    prev_mag: np.ndarray | None,
    sample_rate: int,
    fft_size: int,
) -> SpectralFeatures:
    """Flux against the previous frame, band slopes, and spectral centroid.

    Flux is the L2 distance between L2-normalized magnitude spectra (0 for
    the first frame). Slopes regress 20*log10(m + 1e-10) on bin frequency in
    Hz over 0-500 and 500-1500 Hz. An all-zero spectrum yields missing
    slopes/centroid while flux is still computed as defined.
    """
    mag = np.asarray(mag, dtype=np.float64)
    freqs = np.arange(mag.size) * (sample_rate / fft_size)
    if mag.size != fft_size // 2 + 1:
        raise ValidationError(
            f"expected {fft_size // 2 + 1} magnitude bins for fft_size {fft_size}, got {mag.size}"
        )

    if prev_mag is None:
        flux = 0.0
    else:
        prev_mag = np.asarray(prev_mag, dtype=np.float64)
        if prev_mag.shape != mag.shape:
            raise ValidationError(
                f"flux needs matching spectra, got {prev_mag.shape} vs {mag.shape}"
            )
        cur = _l2_normalized(mag)
        prv = _l2_normalized(prev_mag)
        flux = float(np.sqrt(np.sum((cur - prv) ** 2)))

    total = float(np.sum(mag))
    if total <= 0.0:
        return SpectralFeatures(flux, None, None, None)

    log_mag = 20.0 * np.log10(mag + LOG_FLOOR)
    slopes = [_band_slope(log_mag, freqs, lo, hi) for lo, hi in SLOPE_BANDS]
    centroid = float(np.sum(freqs * mag) / total)
    return SpectralFeatures(flux, slopes[0], slopes[1], centroid)


def _l2_normalized(mag: np.ndarray) -> np.ndarray:
    norm = float(np.sqrt(np.sum(mag * mag)))
    if norm <= 0.0:
        return np.zeros_like(mag)
    return mag / norm
