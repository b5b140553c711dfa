"""SNR mixing, segmentation, and synthetic utterance generators."""

import numpy as np
import pytest

from egeopt.dsp import (
    MixSpec,
    Waveform,
    mix_at_snr,
    segment,
    stft,
    synth_utterance,
)
from egeopt.errors import ValidationError


def _tone(freq=220.0, duration=1.0, amp=0.1, sr=16000):
    t = np.arange(int(duration * sr)) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t), sr)


def _measured_snr_db(clean: Waveform, noise: Waveform, result) -> float:
    crop = noise.samples[result.noise_offset : result.noise_offset + clean.num_samples]
    scaled = result.noise_scale * crop
    return 10.0 * np.log10(np.mean(clean.samples**2) / np.mean(scaled**2))


def test_zero_db_means_equal_rms():
    clean = _tone(amp=0.1)
    noise = synth_utterance("noise", 1.5, 3)
    res = mix_at_snr(clean, noise, MixSpec(snr_db=0.0, seed=1))
    crop = noise.samples[res.noise_offset : res.noise_offset + clean.num_samples]
    scaled_rms = np.sqrt(np.mean((res.noise_scale * crop) ** 2))
    clean_rms = np.sqrt(np.mean(clean.samples**2))
    assert abs(scaled_rms - clean_rms) < 1e-12
    assert abs(clean_rms - 0.1 / np.sqrt(2)) < 1e-6


@pytest.mark.parametrize("snr", [-5.0, 0.0, 7.31, 25.0, 40.0])
def test_requested_snr_is_exact(snr):
    clean = _tone()
    noise = synth_utterance("noise", 2.0, 5)
    res = mix_at_snr(clean, noise, MixSpec(snr_db=snr, seed=2))
    assert abs(_measured_snr_db(clean, noise, res) - snr) < 1e-9


def test_extreme_snr_leaves_clean_untouched():
    clean = _tone()
    noise = synth_utterance("noise", 2.0, 5)
    res = mix_at_snr(clean, noise, MixSpec(snr_db=200.0, seed=2))
    assert np.max(np.abs(res.mixture.samples - clean.samples)) < 1e-6


def test_silent_inputs_rejected():
    clean = _tone()
    silent = Waveform(np.zeros(32000))
    with pytest.raises(ValidationError, match="silent"):
        mix_at_snr(silent, synth_utterance("noise", 2.0, 1), MixSpec(0.0))
    with pytest.raises(ValidationError, match="silent"):
        mix_at_snr(clean, silent, MixSpec(0.0))


def test_rate_mismatch_and_short_noise_rejected():
    clean = _tone()
    with pytest.raises(ValidationError, match="sample-rate"):
        mix_at_snr(clean, Waveform(np.ones(32000), 8000), MixSpec(0.0))
    with pytest.raises(ValidationError, match="shorter"):
        mix_at_snr(clean, _tone(duration=0.5), MixSpec(0.0))


def test_no_clipping_but_peak_reported():
    clean = _tone(amp=0.9)
    noise = synth_utterance("noise", 2.0, 9)
    res = mix_at_snr(clean, noise, MixSpec(snr_db=-10.0, seed=1))
    assert res.peak_amplitude == np.max(np.abs(res.mixture.samples))
    assert res.peak_amplitude > 1.0  # -10 dB noise on a 0.9 peak must exceed full scale


def test_segment_counts():
    sr = 16000
    assert len(segment(Waveform(np.ones(30 * sr)), 4.0, 1.0)) == 27
    assert len(segment(Waveform(np.ones(4 * sr)), 4.0, 1.0)) == 1
    assert len(segment(Waveform(np.ones(int(5.5 * sr))), 4.0, 1.0)) == 2


def test_segment_property_formula():
    rng = np.random.default_rng(0)
    sr = 16000
    for _ in range(25):
        dur = rng.uniform(1.0, 12.0)
        length = rng.uniform(0.2, dur)
        stride = rng.uniform(0.05, 2.0)
        w = Waveform(np.ones(int(round(dur * sr))))
        segs = segment(w, length, stride)
        ln = int(round(length * sr))
        st = int(round(stride * sr))
        assert len(segs) == (w.num_samples - ln) // st + 1
        assert all(s.num_samples == ln for s in segs)


def test_segment_errors():
    with pytest.raises(ValidationError):
        segment(Waveform(np.ones(16000)), 2.0, 1.0)
    with pytest.raises(ValidationError):
        segment(Waveform(np.ones(16000)), 0.5, 0.0)


def test_synth_determinism():
    for kind in ("harmonic_voice", "tone_sweep", "noise"):
        a = synth_utterance(kind, 2.0, 7)
        b = synth_utterance(kind, 2.0, 7)
        assert np.array_equal(a.samples, b.samples), kind
    a = synth_utterance("harmonic_voice", 1.0, 7)
    b = synth_utterance("harmonic_voice", 1.0, 8)
    assert not np.array_equal(a.samples, b.samples)


def test_noise_is_zero_mean():
    w = synth_utterance("noise", 1.0, 1)
    assert abs(np.mean(w.samples)) < 0.01


def test_tone_sweep_frequency_rises():
    w = synth_utterance("tone_sweep", 1.0, 4)
    s = stft(w)
    freqs = np.argmax(s.magnitude(), axis=1)
    # STFT-peak tracking oracle: interior frame peaks must be non-decreasing
    # and strictly rise over the sweep.
    interior = freqs[3:-3]
    assert np.all(np.diff(interior) >= 0)
    assert interior[-1] > interior[0]


def test_synth_rejects_bad_args():
    with pytest.raises(ValidationError):
        synth_utterance("harmonic_voice", 0.0, 1)
    with pytest.raises(ValidationError):
        synth_utterance("square_wave", 1.0, 1)
