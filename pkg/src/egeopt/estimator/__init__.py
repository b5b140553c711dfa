"""Differentiable functional-vector estimator.

A four-layer convolutional encoder over normalized log-magnitude
spectrograms, self-attention pooling over time, and a two-layer linear head
that regresses the standardized functional vector. The encoder can be
pre-trained as a plain autoencoder on clean spectrograms.
"""

from .scaler import TargetScaler
from .model import (
    EstimatorConfig,
    InputNorm,
    Estimator,
    init_estimator_params,
    estimator_forward,
    encoder_forward,
    spectrogram_features,
)
from .pretrain import PretrainConfig, pretrain_encoder
from .train import TrainEstimatorConfig, train_estimator

__all__ = [
    "TargetScaler",
    "EstimatorConfig",
    "InputNorm",
    "Estimator",
    "init_estimator_params",
    "estimator_forward",
    "encoder_forward",
    "spectrogram_features",
    "PretrainConfig",
    "pretrain_encoder",
    "TrainEstimatorConfig",
    "train_estimator",
]
