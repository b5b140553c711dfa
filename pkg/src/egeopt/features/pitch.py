"""Pitch-period detection and the voice-quality descriptors built on it.

Periodicity is measured with a normalized autocorrelation (cross-correlation
of the frame against its own lagged copy, each part energy-normalized), so a
perfectly periodic frame scores ~1 at the period lag regardless of how many
periods fit into the window. Period boundaries are then refined by picking
waveform peaks near multiples of the autocorrelation lag, which is what makes
cycle-level jitter and shimmer measurable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

F0_MIN_HZ = 50.0
F0_MAX_HZ = 500.0
VOICING_THRESHOLD = 0.45
ENERGY_FLOOR = 1e-4
AMPLITUDE_FLOOR = 1e-8

# A shorter-lag peak wins over the global maximum when it reaches this
# fraction of it; guards against octave-down errors on near-perfect periodicity.
_PEAK_TOLERANCE = 0.90


@dataclass(frozen=True)
class PeriodDetection:
    """Voicing decision plus the evidence behind it.

    Boundaries are sample positions of per-cycle waveform peaks, refined to
    sub-sample precision by parabolic interpolation so consecutive period
    lengths are not quantized to whole samples.
    """

    voiced: bool
    f0_hz: float                 # 0.0 when unvoiced
    boundaries: np.ndarray       # float sample positions of per-cycle peaks, empty when unvoiced
    acf_peak: float              # normalized autocorrelation at the chosen lag
    peak_amplitudes: np.ndarray  # fundamental-band amplitude at each cycle peak


def normalized_autocorr(frame: np.ndarray) -> np.ndarray:
    """Normalized autocorrelation r(tau) for tau = 0 .. n-1.

    r(tau) = sum_i x[i] x[i+tau] / sqrt(sum_head x^2 * sum_tail x^2), computed
    on the mean-removed frame. Values are ~1 at the period lag of a perfectly
    periodic frame.
    """
    x = np.asarray(frame, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValidationError("autocorrelation needs at least 2 samples")
    x = x - np.mean(x)
    nfft = 1
    while nfft < 2 * n:
        nfft *= 2
    spec = np.fft.rfft(x, nfft)
    raw = np.fft.irfft(spec * np.conj(spec), nfft)[:n]
    csum = np.cumsum(x * x)
    total = csum[-1]
    taus = np.arange(n)
    head = csum[n - 1 - taus]
    tail = total - np.concatenate(([0.0], csum[: n - 1]))
    denom = np.sqrt(np.maximum(head * tail, 0.0)) + 1e-30
    return raw / denom


def _parabolic_refine(values: np.ndarray, idx: int) -> tuple[float, float]:
    """Parabolic interpolation of a local peak; returns (position, height)."""
    if idx <= 0 or idx >= values.size - 1:
        return float(idx), float(values[idx])
    y0, y1, y2 = values[idx - 1], values[idx], values[idx + 1]
    denom = y0 - 2.0 * y1 + y2
    if abs(denom) < 1e-18:
        return float(idx), float(y1)
    delta = 0.5 * (y0 - y2) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    height = y1 - 0.25 * (y0 - y2) * delta
    return idx + delta, float(height)


def detect_periods(frame_samples: np.ndarray, sample_rate: int) -> PeriodDetection:
    """Detect voicing, fundamental frequency, and per-cycle peak positions.

    A frame is voiced iff its RMS clears the energy floor and the normalized
    autocorrelation peak inside the 50-500 Hz lag range reaches 0.45.
    """
    x = np.asarray(frame_samples, dtype=np.float64)
    n = x.size
    unvoiced = PeriodDetection(False, 0.0, np.empty(0), 0.0, np.empty(0))
    if n < 8:
        return unvoiced
    if np.sqrt(np.mean(x * x)) < ENERGY_FLOOR:
        return unvoiced

    r = normalized_autocorr(x)
    lag_min = max(2, int(np.ceil(sample_rate / F0_MAX_HZ)))
    lag_max = min(n - 2, int(np.floor(sample_rate / F0_MIN_HZ)))
    if lag_max <= lag_min:
        return unvoiced

    seg = r[lag_min : lag_max + 1]
    local_max = np.flatnonzero((seg[1:-1] >= seg[:-2]) & (seg[1:-1] >= seg[2:])) + 1
    if local_max.size == 0:
        return unvoiced
    best = float(np.max(seg[local_max]))
    if best < VOICING_THRESHOLD:
        return unvoiced
    # Smallest lag whose peak is within tolerance of the best peak.
    cutoff = max(VOICING_THRESHOLD, _PEAK_TOLERANCE * best)
    candidates = local_max[seg[local_max] >= cutoff]
    lag0 = int(candidates[0]) + lag_min

    lag_refined, peak = _parabolic_refine(r, lag0)
    lag_refined = float(np.clip(lag_refined, lag_min, lag_max))
    f0 = sample_rate / lag_refined
    peak = float(min(peak, 1.0))

    boundaries, amps = _cycle_marks(x, lag_refined)
    return PeriodDetection(True, float(f0), boundaries, peak, amps)


def _cycle_marks(x: np.ndarray, period: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-cycle marks near multiples of the detected period.

    One cycle around the strongest waveform peak serves as a template; the
    other cycles are located by picking local peaks of the cross-correlation
    against that template (parabolically refined to sub-sample positions).
    The per-cycle amplitude is the projection gain onto the template scaled
    by the template's own peak, i.e. an estimate of the cycle's peak
    amplitude that averages over the whole cycle instead of trusting one
    noisy sample.
    """
    n = x.size
    half = max(2, int(round(0.45 * period)))
    if n < 2 * half + 2:
        return np.empty(0), np.empty(0)

    # Anchor: strongest extremum whose template window fits inside the frame.
    interior = np.abs(x[half : n - half])
    anchor = int(np.argmax(interior)) + half
    template = x[anchor - half : anchor + half + 1]
    energy = float(np.sum(template * template))
    if energy <= 0.0:
        return np.empty(0), np.empty(0)

    # dots[s] = correlation of the template centered at sample s + half.
    dots = np.correlate(x, template, mode="valid")
    lo_center, hi_center = half, n - half - 1
    search = max(2, int(round(0.25 * period)))

    def refine(center_int: int) -> tuple[float, float]:
        pos, height = _parabolic_refine(dots, center_int - half)
        return pos + half, height

    marks: list[float] = []
    gains: list[float] = []
    pos0, h0 = refine(anchor)
    marks.append(pos0)
    gains.append(h0)
    for direction in (1.0, -1.0):
        prev = pos0
        while True:
            center = prev + direction * period
            lo = int(round(center)) - search
            hi = int(round(center)) + search + 1
            if lo < lo_center or hi > hi_center + 1:
                # Cycle too close to the frame edge to mark reliably.
                break
            best = lo + int(np.argmax(dots[lo - half : hi - half]))
            pos, height = refine(best)
            if height <= 0.3 * h0:
                break
            marks.append(pos)
            gains.append(height)
            prev = pos

    order = np.argsort(marks)
    boundaries = np.asarray(marks)[order]

    # Amplitude per cycle: RMS over the cycle body (0.15T..0.85T past the
    # mark, so the window never straddles a neighboring cycle), expressed as
    # a peak amplitude via the anchor cycle's peak/RMS ratio. Marks whose
    # body window does not fit in the frame get no amplitude.
    lo_off = int(round(0.15 * period))
    hi_off = max(lo_off + 2, int(round(0.85 * period)))
    peak_amp = float(np.max(np.abs(template)))

    def body_rms(mark: float) -> float | None:
        lo = int(round(mark)) + lo_off
        hi = int(round(mark)) + hi_off
        if lo < 0 or hi > n:
            return None
        return float(np.sqrt(np.mean(x[lo:hi] ** 2)))

    anchor_rms = body_rms(pos0)
    amps_list: list[float] = []
    if anchor_rms and anchor_rms > 0.0:
        ratio = peak_amp / anchor_rms
        for m in boundaries:
            r = body_rms(m)
            if r is not None:
                amps_list.append(r * ratio)
    return boundaries, np.asarray(amps_list)


def jitter_local(periods_s) -> float | None:
    """Mean absolute difference of consecutive periods over the mean period.

    Returns None (missing) with fewer than 2 periods.
    """
    periods = np.asarray(periods_s, dtype=np.float64)
    if periods.size < 2:
        return None
    mean_period = float(np.mean(periods))
    if mean_period <= 0.0:
        return None
    return float(np.mean(np.abs(np.diff(periods))) / mean_period)


def shimmer_local(peak_amps) -> float | None:
    """Mean absolute difference of consecutive peak amplitudes over the mean.

    Returns None (missing) with fewer than 2 periods or a near-zero mean.
    """
    amps = np.asarray(peak_amps, dtype=np.float64)
    if amps.size < 2:
        return None
    mean_amp = float(np.mean(amps))
    if mean_amp < AMPLITUDE_FLOOR:
        return None
    return float(np.mean(np.abs(np.diff(amps))) / mean_amp)


def hnr_db(frame_samples: np.ndarray, f0_hz: float, sample_rate: int) -> float | None:
    """Harmonics-to-noise ratio 10*log10(r / (1 - r)) at the F0 lag, in dB.

    r is the normalized autocorrelation at the (parabolically refined) F0
    lag. The result is clamped to [-100, +100] dB. Returns None when no
    valid F0 is given.
    """
    if f0_hz is None or f0_hz <= 0.0:
        return None
    x = np.asarray(frame_samples, dtype=np.float64)
    n = x.size
    lag = sample_rate / f0_hz
    lag0 = int(round(lag))
    if lag0 < 1 or lag0 > n - 2:
        return None
    r = normalized_autocorr(x)
    _, peak = _parabolic_refine(r, lag0)
    return hnr_from_ratio(peak)


def hnr_from_ratio(r: float) -> float:
    """Map an autocorrelation peak to dB, clamped to [-100, +100]."""
    if r >= 1.0:
        return 100.0
    if r <= 0.0:
        return -100.0
    return float(np.clip(10.0 * np.log10(r / (1.0 - r)), -100.0, 100.0))
