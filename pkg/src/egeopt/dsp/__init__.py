"""Time-domain and time-frequency primitives.

Waveform/Spectrogram containers, STFT and overlap-add inverse, SNR-controlled
mixing, utterance segmentation, synthetic signal generation, and WAV I/O.
All values are immutable after construction and safe to share across threads.
"""

from .waveform import Waveform, MixSpec, MixResult, mix_at_snr, segment, rms
from .stft import Spectrogram, StftConfig, stft, istft, periodic_hann
from .synth import VoiceParams, synth_utterance, harmonic_voice_params
from .wavio import read_wav, write_wav

__all__ = [
    "Waveform",
    "MixSpec",
    "MixResult",
    "mix_at_snr",
    "segment",
    "rms",
    "Spectrogram",
    "StftConfig",
    "stft",
    "istft",
    "periodic_hann",
    "VoiceParams",
    "synth_utterance",
    "harmonic_voice_params",
    "read_wav",
    "write_wav",
]
