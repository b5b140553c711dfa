"""Per-frame descriptor tracks and their utterance-level functionals."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..errors import UnvoicedUtteranceError, ValidationError
from ..dsp.waveform import Waveform
from .pitch import detect_periods, jitter_local, shimmer_local, hnr_db
from .spectral import frame_magnitude_spectrum, spectral_lld
from .registry import FeatureRegistry, statistic

WINDOW_S = 0.030
STRIDE_S = 0.010

MIN_DURATION_S = 0.100
MIN_VOICED_FRAMES = 2

_SPECTRUM_FFT = 512


@dataclass(frozen=True)
class LldFrame:
    """Low-level descriptors of one 30 ms analysis window.

    Voiced-only descriptors are None on unvoiced frames (missing, not zero);
    slopes/centroid are None for an all-zero spectrum.
    """

    f0_hz: float
    voiced: bool
    jitter_local: float | None
    shimmer_local: float | None
    hnr_db: float | None
    spectral_flux: float
    spectral_slope_0_500: float | None
    spectral_slope_500_1500: float | None
    spectral_centroid_hz: float | None
    rms_energy: float


# registry LLD name -> (frame attribute, include unvoiced frames)
_TRACK_FIELDS = {
    "f0": "f0_hz",
    "jitter": "jitter_local",
    "shimmer": "shimmer_local",
    "hnr": "hnr_db",
    "voicing": "voiced",
    "flux": "spectral_flux",
    "slope_0_500": "spectral_slope_0_500",
    "slope_500_1500": "spectral_slope_500_1500",
    "centroid": "spectral_centroid_hz",
    "rms": "rms_energy",
}


@dataclass(frozen=True)
class LldMatrix:
    frames: tuple[LldFrame, ...]
    window_s: float = WINDOW_S
    frame_stride_s: float = STRIDE_S

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def voiced_mask(self) -> np.ndarray:
        return np.array([f.voiced for f in self.frames], dtype=bool)

    def track(self, lld_name: str) -> np.ndarray:
        """Raw per-frame values of one descriptor, NaN where missing."""
        attr = _TRACK_FIELDS.get(lld_name)
        if attr is None:
            raise ValidationError(f"unknown LLD name {lld_name!r}")
        vals = np.empty(self.n_frames)
        for i, frame in enumerate(self.frames):
            v = getattr(frame, attr)
            if v is None:
                vals[i] = np.nan
            elif attr == "voiced":
                vals[i] = 1.0 if v else 0.0
            else:
                vals[i] = float(v)
        return vals


@dataclass(frozen=True, eq=False)
class FunctionalVector:
    """Utterance-level statistics of the LLD tracks, in registry order."""

    values: np.ndarray
    registry_id: str

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 1:
            raise ValidationError(f"functional vector must be 1-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("functional vector contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def size(self) -> int:
        return int(self.values.size)


def compute_llds(w: Waveform) -> LldMatrix:
    """Frame the waveform into 30 ms windows at 10 ms stride and describe each."""
    window_n = int(round(WINDOW_S * w.sample_rate))
    stride_n = int(round(STRIDE_S * w.sample_rate))
    if w.num_samples < window_n:
        raise ValidationError(
            f"waveform of {w.num_samples} samples shorter than the {window_n}-sample analysis window"
        )
    n_frames = 1 + (w.num_samples - window_n) // stride_n

    frames: list[LldFrame] = []
    prev_mag: np.ndarray | None = None
    for i in range(n_frames):
        seg = w.samples[i * stride_n : i * stride_n + window_n]
        det = detect_periods(seg, w.sample_rate)

        mag = frame_magnitude_spectrum(seg, _SPECTRUM_FFT)
        spec = spectral_lld(mag, prev_mag, w.sample_rate, _SPECTRUM_FFT)
        prev_mag = mag

        if det.voiced:
            periods = np.diff(det.boundaries) / w.sample_rate
            jit = jitter_local(periods)
            shim = shimmer_local(det.peak_amplitudes)
            hnr = hnr_db(seg, det.f0_hz, w.sample_rate)
        else:
            jit = shim = hnr = None

        frames.append(
            LldFrame(
                f0_hz=det.f0_hz if det.voiced else 0.0,
                voiced=det.voiced,
                jitter_local=jit,
                shimmer_local=shim,
                hnr_db=hnr,
                spectral_flux=spec.flux,
                spectral_slope_0_500=spec.slope_0_500,
                spectral_slope_500_1500=spec.slope_500_1500,
                spectral_centroid_hz=spec.centroid_hz,
                rms_energy=float(np.sqrt(np.mean(seg * seg))),
            )
        )
    return LldMatrix(frames=tuple(frames))


def extract_functionals(w: Waveform, registry: FeatureRegistry) -> FunctionalVector:
    """The oracle: LLD tracks aggregated into one functional vector.

    Voiced-only descriptors aggregate over voiced frames; other descriptors
    over all frames where they are defined. Utterances shorter than 100 ms
    or with fewer than 2 voiced frames are rejected rather than zero-filled.
    """
    if w.duration_s < MIN_DURATION_S:
        raise ValidationError(
            f"utterance of {w.duration_s * 1000:.0f} ms too short; need >= {MIN_DURATION_S * 1000:.0f} ms"
        )
    llds = compute_llds(w)
    voiced = llds.voiced_mask()
    if int(voiced.sum()) < MIN_VOICED_FRAMES:
        raise UnvoicedUtteranceError(
            f"unvoiced utterance: {int(voiced.sum())} voiced frames, need >= {MIN_VOICED_FRAMES}"
        )

    values = np.empty(registry.size)
    pos = 0
    for lld, voiced_only in zip(registry.lld_names, registry.voiced_only):
        track = llds.track(lld)
        if voiced_only:
            track = track[voiced]
        track = track[np.isfinite(track)]
        if track.size == 0:
            raise UnvoicedUtteranceError(f"descriptor {lld!r} has no valid frames")
        for stat in registry.statistic_names:
            values[pos] = statistic(track, stat)
            pos += 1
    return FunctionalVector(values=values, registry_id=registry.registry_id)
