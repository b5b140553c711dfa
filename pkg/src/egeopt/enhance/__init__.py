"""Mask-based enhancer and the acoustic-parameter matching fine-tune loop.

The enhancer predicts a sigmoid mask over the noisy log-magnitude
spectrogram; enhanced magnitude is mask times noisy magnitude, the noisy
phase is reused, and a differentiable inverse STFT produces the waveform.
Fine-tuning optimizes original loss + lambda * functional-matching loss.
"""

from .model import EnhancerConfig, init_enhancer_params, mask_logits_forward, enhance, EnhanceResult
from .stft_bridge import istft_magnitude, batch_stft
from .losses import original_loss, egemaps_loss, LossBreakdown
from .finetune import FineTuneConfig, TrainCrop, train_enhancer, finetune

__all__ = [
    "EnhancerConfig",
    "init_enhancer_params",
    "mask_logits_forward",
    "enhance",
    "EnhanceResult",
    "istft_magnitude",
    "batch_stft",
    "original_loss",
    "egemaps_loss",
    "LossBreakdown",
    "FineTuneConfig",
    "TrainCrop",
    "train_enhancer",
    "finetune",
]
