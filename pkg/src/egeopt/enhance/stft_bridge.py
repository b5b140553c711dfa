"""Differentiable inverse STFT from magnitude, with fixed phase.

The overlap-add inverse is linear in the complex spectrogram; with the phase
held fixed it is a real-linear map of the magnitude, so the backward pass is
the exact adjoint: gather waveform gradients back onto frames, window them,
apply the rfft-side scaling, and rotate by the conjugate phase.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, ValidationError
from ..dsp.stft import StftConfig, frame_count_for, periodic_hann, window_sum_sq, WINDOW_SUM_FLOOR
from ..dsp.waveform import Waveform
from ..autodiff.tensor import Tensor, accumulate_grad, make_op_output


def batch_stft(waves: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Complex STFT frames for a (B, L) batch -> (B, T, F)."""
    waves = np.asarray(waves, dtype=np.float64)
    if waves.ndim != 2:
        raise ShapeError(f"batch_stft expects (B, L), got {waves.shape}")
    pad = cfg.fft_size // 2
    xp = np.pad(waves, ((0, 0), (pad, pad)), mode="reflect")
    n_frames = 1 + (xp.shape[1] - cfg.fft_size) // cfg.hop
    window = periodic_hann(cfg.fft_size)
    sb, ss = xp.strides
    frames = np.lib.stride_tricks.as_strided(
        xp,
        shape=(waves.shape[0], n_frames, cfg.fft_size),
        strides=(sb, cfg.hop * ss, ss),
    )
    return np.fft.rfft(frames * window, axis=2)


def istft_magnitude(mag: Tensor, unit_phase: np.ndarray, cfg: StftConfig, num_samples: int) -> Tensor:
    """Differentiable iSTFT of (B, T, F) magnitudes with fixed unit phase -> (B, L)."""
    if mag.data.ndim != 3:
        raise ShapeError(f"istft_magnitude expects (B, T, F) magnitudes, got {mag.shape}")
    bsz, t, f = mag.shape
    if unit_phase.shape != (bsz, t, f):
        raise ShapeError(f"phase shape {unit_phase.shape} does not match magnitude {mag.shape}")
    if f != cfg.fft_size // 2 + 1:
        raise ValidationError(f"{f} bins inconsistent with fft_size {cfg.fft_size}")
    if t != frame_count_for(num_samples, cfg.fft_size, cfg.hop):
        raise ValidationError(
            f"{t} frames inconsistent with num_samples {num_samples} "
            f"(expected {frame_count_for(num_samples, cfg.fft_size, cfg.hop)})"
        )
    if cfg.hop > cfg.fft_size // 2:
        raise ValidationError("overlap-add coverage fails for hop > fft_size/2")

    nfft = cfg.fft_size
    hop = cfg.hop
    pad = nfft // 2
    window = periodic_hann(nfft)
    norm = np.maximum(window_sum_sq(nfft, hop, t), WINDOW_SUM_FLOOR)
    cover = nfft + (t - 1) * hop

    spec = mag.data.astype(np.float64) * unit_phase
    frames_time = np.fft.irfft(spec, n=nfft, axis=2) * window
    acc = np.zeros((bsz, cover))
    for m in range(t):
        acc[:, m * hop : m * hop + nfft] += frames_time[:, m]
    out_data = (acc / norm)[:, pad : pad + num_samples].astype(mag.data.dtype)

    out, tracked = make_op_output(out_data, (mag,))
    if tracked:
        # rfft adjoint scaling: interior bins count twice in the hermitian sum
        coeff = np.full(f, 2.0 / nfft)
        coeff[0] = 1.0 / nfft
        if nfft % 2 == 0:
            coeff[-1] = 1.0 / nfft

        def _bw():
            g = np.zeros((bsz, cover))
            g[:, pad : pad + num_samples] = out.grad.astype(np.float64)
            g /= norm
            g_frames = np.empty((bsz, t, nfft))
            for m in range(t):
                g_frames[:, m] = g[:, m * hop : m * hop + nfft]
            g_frames *= window
            g_spec = np.fft.rfft(g_frames, axis=2) * coeff
            grad_mag = np.real(np.conj(unit_phase) * g_spec)
            accumulate_grad(mag, grad_mag.astype(mag.data.dtype))

        out._backward = _bw
    return out


def waveform_crop_frames(cfg: StftConfig, n_frames: int) -> int:
    """Waveform length in samples that yields exactly n_frames STFT frames."""
    return (n_frames - 1) * cfg.hop
