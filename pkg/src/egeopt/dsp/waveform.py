"""Mono waveform container, SNR-controlled mixing, and segmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

DEFAULT_SAMPLE_RATE = 16000

SILENCE_RMS = 1e-12


def _frozen_f64(samples) -> np.ndarray:
    arr = np.array(samples, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise ValidationError(f"waveform must be 1-D, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono time-domain signal with nominal amplitude range [-1, 1].

    Samples are stored as a read-only float64 array; instances are safe to
    share across threads.
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_f64(self.samples))
        if int(self.sample_rate) <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def num_samples(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if self.samples.size else 0.0


def rms(samples: np.ndarray) -> float:
    """Root-mean-square amplitude."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(samples * samples)))


@dataclass(frozen=True)
class MixSpec:
    """Target signal-to-noise ratio and the seed used to place the noise crop."""

    snr_db: float
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValidationError(f"snr_db must be finite, got {self.snr_db}")


@dataclass(frozen=True, eq=False)
class MixResult:
    """Mixture plus the metadata needed to reconstruct its clean/noise parts.

    No clipping is applied during mixing, so ``peak_amplitude`` may exceed 1.
    ``noise_scale`` and ``noise_offset`` make the scaled noise part exactly
    recoverable: mixture = clean + noise_scale * noise[offset : offset + L].
    """

    mixture: Waveform
    noise_scale: float
    noise_offset: int
    peak_amplitude: float


def mix_at_snr(clean: Waveform, noise: Waveform, spec: MixSpec) -> MixResult:
    """Add noise to clean speech at an exact signal-to-noise ratio in dB.

    The noise is cropped from a seeded random offset when longer than the
    clean signal, then scaled so that 10*log10(rms(clean)^2 / rms(scaled)^2)
    equals ``spec.snr_db``.
    """
    if clean.sample_rate != noise.sample_rate:
        raise ValidationError(
            f"sample-rate mismatch: clean {clean.sample_rate} Hz vs noise {noise.sample_rate} Hz"
        )
    n = clean.num_samples
    if noise.num_samples < n:
        raise ValidationError(
            f"noise shorter than clean signal ({noise.num_samples} < {n} samples)"
        )

    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed) & 0xFFFFFFFF, 0x6D69]))
    max_offset = noise.num_samples - n
    offset = int(rng.integers(0, max_offset + 1)) if max_offset > 0 else 0
    noise_crop = noise.samples[offset : offset + n]

    clean_rms = rms(clean.samples)
    noise_rms = rms(noise_crop)
    if clean_rms < SILENCE_RMS:
        raise ValidationError("silent signal: clean waveform has zero RMS")
    if noise_rms < SILENCE_RMS:
        raise ValidationError("silent signal: noise waveform has zero RMS")

    scale = clean_rms / (noise_rms * 10.0 ** (spec.snr_db / 20.0))
    mixed = clean.samples + scale * noise_crop
    return MixResult(
        mixture=Waveform(mixed, clean.sample_rate),
        noise_scale=float(scale),
        noise_offset=offset,
        peak_amplitude=float(np.max(np.abs(mixed))),
    )


def segment(w: Waveform, length_s: float, stride_s: float) -> list[Waveform]:
    """Cut an utterance into fixed-length segments at a fixed stride.

    Returns floor((duration - length) / stride) + 1 segments, each of exactly
    ``length_s`` seconds.
    """
    if stride_s <= 0:
        raise ValidationError(f"stride must be positive, got {stride_s}")
    length_n = int(round(length_s * w.sample_rate))
    stride_n = int(round(stride_s * w.sample_rate))
    if length_n <= 0:
        raise ValidationError(f"segment length must be positive, got {length_s} s")
    if length_n > w.num_samples:
        raise ValidationError(
            f"segment of {length_s} s longer than utterance of {w.duration_s:.3f} s"
        )
    count = (w.num_samples - length_n) // stride_n + 1
    return [
        Waveform(w.samples[i * stride_n : i * stride_n + length_n], w.sample_rate)
        for i in range(count)
    ]
