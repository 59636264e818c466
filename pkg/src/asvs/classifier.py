"""Adversarial singer classifier over the score encoding."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError, ValidationError
from .layers import Conv1d, Linear, Module

CLASSIFIER_CHANNELS = (384, 128, 128)


class SingerClassifier(Module):
    """GRL, two spectral-normalized ReLU convolutions, mean pooling over time, linear, softmax."""

    def __init__(self, n_singers: int, rng: np.random.Generator, kernel: int = 3,
                 channels: tuple[int, int, int] = CLASSIFIER_CHANNELS, dtype=np.float32):
        c_in, c_mid, c_out = channels
        self.n_singers = n_singers
        self.in_channels = c_in
        self.conv1 = Conv1d(c_in, c_mid, kernel, rng, dtype, spectral_norm=True, name="classifier.conv1")
        self.conv2 = Conv1d(c_mid, c_out, kernel, rng, dtype, spectral_norm=True, name="classifier.conv2")
        self.out_linear = Linear(c_out, n_singers, rng, dtype, name="classifier.out_linear")

    def logits(self, score_encoding: Tensor, lambda_grl: float | None = 1.0) -> Tensor:
        """Class logits; ``lambda_grl=None`` bypasses the reversal layer."""
        if score_encoding.ndim != 2 or score_encoding.shape[1] != self.in_channels:
            raise DimensionError(f"classifier expects [len, {self.in_channels}], got {score_encoding.shape}")
        if lambda_grl is not None:
            score_encoding = ad.gradient_reversal(score_encoding, lambda_grl)
        h = ad.transpose(score_encoding)
        h = ad.relu(self.conv2(ad.relu(self.conv1(h))))
        pooled = ad.reshape(ad.mean(h, axis=1), (1, -1))
        return ad.reshape(self.out_linear(pooled), (self.n_singers,))

    def forward(self, score_encoding: Tensor, lambda_grl: float | None = 1.0) -> Tensor:
        return ad.softmax(self.logits(score_encoding, lambda_grl))


def classify(score_encoding: Tensor, classifier: SingerClassifier, lambda_grl: float = 1.0) -> Tensor:
    return classifier(score_encoding, lambda_grl)


def singer_adv_loss(probs_batch: Sequence[Tensor], labels: Sequence[int]) -> Tensor:
    """Cross-entropy of each item's singer probabilities, summed over the batch."""
    if len(probs_batch) != len(labels):
        raise ValidationError(f"{len(probs_batch)} predictions for {len(labels)} labels")
    if not probs_batch:
        raise ValidationError("empty batch")
    terms = []
    for probs, label in zip(probs_batch, labels):
        n = probs.shape[0]
        if not 0 <= int(label) < n:
            raise ValidationError(f"singer label {label} outside [0, {n})")
        terms.append(-ad.log(probs[int(label)]))
    return ad.sum_(ad.stack_scalars(terms))


def singer_adv_loss_from_logits(logits_batch: Sequence[Tensor], labels: Sequence[int]) -> Tensor:
    """Same quantity as :func:`singer_adv_loss`, computed through log-softmax."""
    if len(logits_batch) != len(labels):
        raise ValidationError(f"{len(logits_batch)} predictions for {len(labels)} labels")
    if not logits_batch:
        raise ValidationError("empty batch")
    terms = []
    for logits, label in zip(logits_batch, labels):
        n = logits.shape[0]
        if not 0 <= int(label) < n:
            raise ValidationError(f"singer label {label} outside [0, {n})")
        terms.append(-ad.log_softmax(logits)[int(label)])
    return ad.sum_(ad.stack_scalars(terms))
