"""Short-time Fourier transform and its overlap-add inverse.

Analysis uses a periodic Hann window with reflect padding of fft_size/2
samples at each end, so frames are centered and the round trip
istft(stft(w)) recovers w. Synthesis applies the window again and divides
by the summed squared window (floored), which makes reconstruction exact
for any hop up to fft_size/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .waveform import Waveform

DEFAULT_FFT_SIZE = 512
DEFAULT_HOP = 160

WINDOW_SUM_FLOOR = 1e-8


def periodic_hann(n: int) -> np.ndarray:
    """Periodic (DFT-even) Hann window of length n."""
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


@dataclass(frozen=True)
class StftConfig:
    """STFT parameters shared by checkpoints and pipeline stages."""

    fft_size: int = DEFAULT_FFT_SIZE
    hop: int = DEFAULT_HOP
    sample_rate: int = 16000
    window_kind: str = "hann"

    def to_dict(self) -> dict:
        return {
            "fft_size": self.fft_size,
            "hop": self.hop,
            "sample_rate": self.sample_rate,
            "window_kind": self.window_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StftConfig":
        return cls(
            fft_size=int(d["fft_size"]),
            hop=int(d["hop"]),
            sample_rate=int(d["sample_rate"]),
            window_kind=str(d["window_kind"]),
        )


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Complex time-frequency grid of shape (frame_count, bin_count).

    ``num_samples`` records the pre-padding waveform length so the inverse
    transform can trim exactly.
    """

    frames: np.ndarray
    fft_size: int
    hop: int
    sample_rate: int
    num_samples: int
    window_kind: str = "hann"

    def __post_init__(self):
        arr = np.array(self.frames, dtype=np.complex128, copy=True)
        if arr.ndim != 2:
            raise ValidationError(f"spectrogram frames must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)

    @property
    def frame_count(self) -> int:
        return int(self.frames.shape[0])

    @property
    def bin_count(self) -> int:
        return int(self.frames.shape[1])

    def magnitude(self) -> np.ndarray:
        return np.abs(self.frames)

    def config(self) -> StftConfig:
        return StftConfig(self.fft_size, self.hop, self.sample_rate, self.window_kind)


def _check_config(fft_size: int, hop: int) -> None:
    if fft_size <= 0 or (fft_size & (fft_size - 1)) != 0:
        raise ValidationError(f"fft_size must be a power of two, got {fft_size}")
    if hop <= 0:
        raise ValidationError(f"hop must be positive, got {hop}")
    if hop > fft_size:
        raise ValidationError(f"hop {hop} exceeds fft_size {fft_size}")


def frame_count_for(num_samples: int, fft_size: int, hop: int) -> int:
    """Number of frames after reflect padding by fft_size/2 at each end."""
    padded = num_samples + fft_size
    return 1 + (padded - fft_size) // hop


def stft(w: Waveform, fft_size: int = DEFAULT_FFT_SIZE, hop: int = DEFAULT_HOP) -> Spectrogram:
    """Short-time Fourier transform with a periodic Hann window."""
    _check_config(fft_size, hop)
    x = w.samples
    if x.size == 0:
        raise ValidationError("cannot compute STFT of an empty waveform")
    pad = fft_size // 2
    if x.size < 2:
        # np.pad reflect needs at least 2 samples; a 1-sample signal is degenerate anyway
        raise ValidationError("waveform too short for STFT framing")
    xp = np.pad(x, (pad, pad), mode="reflect")
    n_frames = 1 + (xp.size - fft_size) // hop
    window = periodic_hann(fft_size)
    stride = xp.strides[0]
    frames = np.lib.stride_tricks.as_strided(
        xp, shape=(n_frames, fft_size), strides=(hop * stride, stride)
    )
    spec = np.fft.rfft(frames * window, axis=1)
    return Spectrogram(
        frames=spec,
        fft_size=fft_size,
        hop=hop,
        sample_rate=w.sample_rate,
        num_samples=x.size,
    )


def window_sum_sq(fft_size: int, hop: int, n_frames: int) -> np.ndarray:
    """Summed squared analysis window over the overlap-add grid."""
    window_sq = periodic_hann(fft_size) ** 2
    total = fft_size + (n_frames - 1) * hop
    out = np.zeros(total)
    for m in range(n_frames):
        out[m * hop : m * hop + fft_size] += window_sq
    return out


def overlap_add(frames_time: np.ndarray, hop: int) -> np.ndarray:
    """Overlap-add rows of (n_frames, fft_size) at the given hop."""
    n_frames, fft_size = frames_time.shape
    total = fft_size + (n_frames - 1) * hop
    out = np.zeros(total)
    for m in range(n_frames):
        out[m * hop : m * hop + fft_size] += frames_time[m]
    return out


def istft(s: Spectrogram) -> Waveform:
    """Inverse STFT by window-weighted overlap-add with squared-window normalization."""
    _check_config(s.fft_size, s.hop)
    if s.window_kind != "hann":
        raise ValidationError(f"unsupported window kind {s.window_kind!r}")
    if s.hop > s.fft_size // 2:
        raise ValidationError(
            f"overlap-add coverage fails for hann window with hop {s.hop} > fft_size/2 = {s.fft_size // 2}"
        )
    expected_bins = s.fft_size // 2 + 1
    if s.bin_count != expected_bins:
        raise ValidationError(
            f"inconsistent metadata: {s.bin_count} bins but fft_size {s.fft_size} implies {expected_bins}"
        )
    expected_frames = frame_count_for(s.num_samples, s.fft_size, s.hop)
    if s.frame_count != expected_frames:
        raise ValidationError(
            f"inconsistent metadata: {s.frame_count} frames but num_samples {s.num_samples} implies {expected_frames}"
        )

    window = periodic_hann(s.fft_size)
    frames_time = np.fft.irfft(s.frames, n=s.fft_size, axis=1) * window
    acc = overlap_add(frames_time, s.hop)
    norm = np.maximum(window_sum_sq(s.fft_size, s.hop, s.frame_count), WINDOW_SUM_FLOOR)
    out = acc / norm
    pad = s.fft_size // 2
    return Waveform(out[pad : pad + s.num_samples], s.sample_rate)
