"""Seeded synthetic utterance generators.

The harmonic voice is built cycle by cycle with a phase accumulator, so the
pitch-period and peak-amplitude perturbations it plants are exactly the
quantities the period detector measures. That makes it usable as a ground
truth for jitter/shimmer tests, not just as filler audio.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ValidationError
from .waveform import Waveform

KINDS = ("harmonic_voice", "tone_sweep", "noise")

# Uniform(-a, a) period perturbations give E|d_{i+1} - d_i| = 2a/3, so a
# perturbation half-width of 1.5 * target plants a local jitter of ~target.
_UNIFORM_DELTA_FACTOR = 1.5


@dataclass(frozen=True)
class VoiceParams:
    """Ground-truth parameters of a synthetic harmonic voice.

    Drift, amplitude modulation, and pauses cycle fast enough that any
    ~0.6 s window sees the voice's full texture: short-crop statistics then
    estimate the same quantities as whole-utterance statistics.
    """

    f0_hz: float = 150.0
    amplitude: float = 0.25
    n_harmonics: int = 8
    rolloff: float = 1.0          # harmonic k has weight k ** -rolloff
    jitter: float = 0.01          # target cycle-to-cycle period variation (ratio)
    shimmer: float = 0.04         # target cycle-to-cycle peak-amplitude variation (ratio)
    noise_db: float = 35.0        # harmonic-to-noise energy ratio of the additive floor
    drift_depth: float = 0.02     # sinusoidal F0 drift (ratio)
    drift_rate_hz: float = 1.8
    am_depth: float = 0.15        # amplitude modulation (ratio)
    am_rate_hz: float = 3.0
    pause_period_s: float = 0.0   # 0 disables pauses; else one pause per period
    pause_s: float = 0.12


def harmonic_voice_params(seed) -> VoiceParams:
    """Seeded draw of voice parameters covering a wide perceptual range.

    Jitter, shimmer, and the additive noise floor co-vary through one
    "roughness" latent per voice (with small independent perturbations),
    mirroring how rough/breathy voices present all three together.
    """
    rng = np.random.default_rng(np.random.SeedSequence([_seed_int(seed), 0x7061]))
    rough = float(rng.uniform(0.0, 1.0))

    def lerp(lo, hi):
        return lo + (hi - lo) * rough

    def wobble(scale=0.06):
        return 1.0 + scale * float(rng.uniform(-1.0, 1.0))

    pausey = rng.uniform() < 0.5
    pause_period = float(rng.uniform(0.5, 0.62))
    # pause duty cycle 24-36% of the period: comfortably clear of the 20%
    # voicing-percentile threshold, so pausey vs continuous is a clean binary
    pause_s = pause_period * float(rng.uniform(0.24, 0.36))
    return VoiceParams(
        f0_hz=float(rng.uniform(160.0, 295.0)),
        amplitude=float(rng.uniform(0.08, 0.45)),
        n_harmonics=int(rng.integers(5, 11)),
        rolloff=float(rng.uniform(0.5, 1.6)),
        jitter=lerp(0.002, 0.024) * wobble(),
        shimmer=lerp(0.01, 0.11) * wobble(),
        noise_db=lerp(42.0, 18.0) * wobble(0.03),
        drift_depth=lerp(0.006, 0.04) * wobble(0.1),
        drift_rate_hz=float(rng.uniform(2.2, 3.5)),
        am_depth=float(rng.uniform(0.05, 0.3)),
        am_rate_hz=float(rng.uniform(2.0, 5.0)),
        pause_period_s=pause_period if pausey else 0.0,
        pause_s=pause_s,
    )


def _seed_int(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed) & 0xFFFFFFFFFFFF
    raise ValidationError(f"seed must be an integer, got {type(seed).__name__}")


def synth_utterance(
    kind: str,
    duration_s: float,
    seed,
    sample_rate: int = 16000,
    params: VoiceParams | None = None,
) -> Waveform:
    """Generate a deterministic test utterance of the given kind.

    ``harmonic_voice`` draws its parameters from the seed unless ``params``
    is supplied; ``tone_sweep`` rises monotonically in frequency; ``noise``
    is seeded, optionally lowpass-colored, zero-mean noise.
    """
    if duration_s <= 0:
        raise ValidationError(f"duration must be positive, got {duration_s}")
    if kind not in KINDS:
        raise ValidationError(f"unknown utterance kind {kind!r}; expected one of {KINDS}")
    n = int(round(duration_s * sample_rate))
    base = _seed_int(seed)

    if kind == "harmonic_voice":
        if params is None:
            params = harmonic_voice_params(base)
        rng = np.random.default_rng(np.random.SeedSequence([base, 0x766F]))
        return Waveform(_harmonic_voice(n, sample_rate, params, rng), sample_rate)

    if kind == "tone_sweep":
        rng = np.random.default_rng(np.random.SeedSequence([base, 0x7377]))
        f_start = rng.uniform(200.0, 500.0)
        f_end = rng.uniform(1500.0, 4000.0)
        freq = np.linspace(f_start, f_end, n)
        phase = 2.0 * np.pi * np.cumsum(freq) / sample_rate
        return Waveform(0.3 * np.sin(phase), sample_rate)

    rng = np.random.default_rng(np.random.SeedSequence([base, 0x6E6F]))
    target_rms = float(10.0 ** rng.uniform(np.log10(0.01), np.log10(0.1)))
    color = float(rng.uniform(0.0, 0.9))
    white = rng.standard_normal(n)
    if color > 0.0:
        out = np.empty(n)
        prev = 0.0
        gain = 1.0 - color
        for i in range(n):
            prev = color * prev + gain * white[i]
            out[i] = prev
    else:
        out = white
    out = out * (target_rms / max(np.sqrt(np.mean(out * out)), 1e-12))
    return Waveform(out, sample_rate)


def _harmonic_voice(n: int, sample_rate: int, p: VoiceParams, rng: np.random.Generator) -> np.ndarray:
    if not (50.0 <= p.f0_hz <= 300.0):
        raise ValidationError(f"voice f0 {p.f0_hz:.1f} Hz outside the supported 50-300 Hz range")

    drift_phi = rng.uniform(0.0, 2.0 * np.pi)
    am_phi = rng.uniform(0.0, 2.0 * np.pi)

    # Per-sample frequency and amplitude, piecewise constant within each cycle.
    # Cycle boundaries are tracked in continuous time so the planted period is
    # exactly sample_rate / f_cycle, free of integer quantization.
    freq = np.empty(n)
    amp = np.empty(n)
    pos_f = 0.0
    jit_half = _UNIFORM_DELTA_FACTOR * p.jitter
    shi_half = _UNIFORM_DELTA_FACTOR * p.shimmer
    while pos_f < n:
        t = pos_f / sample_rate
        f_slow = p.f0_hz * (1.0 + p.drift_depth * np.sin(2.0 * np.pi * p.drift_rate_hz * t + drift_phi))
        f_cycle = f_slow / (1.0 + jit_half * rng.uniform(-1.0, 1.0))
        a_cycle = p.amplitude * (1.0 + p.am_depth * np.sin(2.0 * np.pi * p.am_rate_hz * t + am_phi))
        a_cycle *= 1.0 + shi_half * rng.uniform(-1.0, 1.0)
        end_f = pos_f + sample_rate / f_cycle
        lo = int(np.ceil(pos_f))
        hi = min(int(np.ceil(end_f)), n)
        if hi > lo:
            freq[lo:hi] = f_cycle
            amp[lo:hi] = a_cycle
        pos_f = end_f

    phase = np.cumsum(freq) / sample_rate
    k = np.arange(1, p.n_harmonics + 1, dtype=np.float64)
    weights = k ** (-p.rolloff)
    weights /= weights.sum()
    x = np.zeros(n)
    for order, w in zip(k, weights):
        x += w * np.sin(2.0 * np.pi * order * phase)
    x *= amp

    if p.pause_period_s > 0.0:
        x = _apply_pauses(x, sample_rate, p, rng)

    sig_rms = np.sqrt(np.mean(x * x))
    noise = rng.standard_normal(n)
    noise *= sig_rms * 10.0 ** (-p.noise_db / 20.0) / np.sqrt(np.mean(noise * noise))
    return x + noise


def _apply_pauses(x: np.ndarray, sample_rate: int, p: VoiceParams, rng: np.random.Generator) -> np.ndarray:
    """Periodic near-silent gaps: one pause per pause period, jittered phase."""
    n = x.size
    pause_n = int(p.pause_s * sample_rate)
    period_n = max(int(p.pause_period_s * sample_rate), pause_n + 1)
    ramp_n = max(1, int(0.02 * sample_rate))
    if pause_n + 2 * ramp_n >= period_n or period_n >= n:
        return x
    gate = np.ones(n)
    phase = int(rng.integers(0, period_n))
    start = phase
    while start + pause_n < n:
        lo = max(start, ramp_n)
        gate[lo : lo + pause_n] = 0.0
        gate[lo - ramp_n : lo] = np.linspace(1.0, 0.0, ramp_n)
        hi = min(lo + pause_n + ramp_n, n)
        gate[lo + pause_n : hi] = np.linspace(0.0, 1.0, ramp_n)[: hi - lo - pause_n]
        start += period_n
    return x * gate


def voice_with(params: VoiceParams, **overrides) -> VoiceParams:
    """Convenience for tests that plant specific perturbation levels."""
    return replace(params, **overrides)
