"""Multiple random window discriminators.

Two unconditional and two conditional discriminators, one per window size in
``(2, 4)`` frames, each scoring a randomly placed sub-window of the acoustic
features.  Their scalar outputs are summed into a single verdict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .decoder import FEATURE_DIM
from .errors import AlignmentError, ConfigurationError, DimensionError
from .layers import Conv1d, Module

WINDOW_SIZES = (2, 4)
CHANNEL_PLAN = (64, 128, 256, 1)
KERNEL_PLAN = (3, 3, 3, 1)
CONDITION_DIM = 448


@dataclass
class DiscriminatorVerdict:
    per_disc: list[Tensor]
    total: Tensor
    window_offsets: list[int]
    names: tuple[str, ...] = ()

    @property
    def scores(self) -> np.ndarray:
        return np.array([float(s.data) for s in self.per_disc])


def sample_window(total_frames: int, window: int, rng: np.random.Generator) -> int:
    """Uniform start offset in ``[0, total_frames - window]``; 0 when the sequence is too short."""
    if total_frames <= window:
        return 0
    return int(rng.integers(0, total_frames - window + 1))


def take_window(x: Tensor, offset: int, window: int) -> Tensor:
    """Frames ``offset:offset+window`` of ``x``, zero-padded at the end when ``x`` is short."""
    frames = x.shape[0]
    if frames >= window:
        return x[offset:offset + window]
    pad = Tensor(np.zeros((window - frames,) + x.shape[1:], dtype=x.dtype))
    return ad.concat([x, pad], axis=0)


class RandomWindowDiscriminator(Module):
    """Spectral-normalized convolution stack scoring one ``[window, 66]`` slice.

    The conditional variant concatenates the 448-d condition onto the channels
    entering its last layer.
    """

    def __init__(
        self,
        window: int,
        conditional: bool,
        rng: np.random.Generator,
        channels: tuple[int, ...] = CHANNEL_PLAN,
        kernels: tuple[int, ...] = KERNEL_PLAN,
        feature_dim: int = FEATURE_DIM,
        condition_dim: int = CONDITION_DIM,
        dtype=np.float32,
        name: str = "rwd",
    ):
        if len(channels) != len(kernels):
            raise ConfigurationError("channel and kernel plans differ in length")
        self.window = window
        self.conditional = conditional
        self.feature_dim = feature_dim
        self.condition_dim = condition_dim if conditional else 0
        self.layers = []
        c_in = feature_dim
        for i, (c_out, k) in enumerate(zip(channels, kernels)):
            last = i == len(channels) - 1
            extra = self.condition_dim if last else 0
            self.layers.append(
                Conv1d(c_in + extra, c_out, k, rng, dtype, spectral_norm=True, name=f"{name}.layers.{i}")
            )
            c_in = c_out

    def forward(self, features: Tensor, condition: Tensor | None = None) -> Tensor:
        if condition is not None and not self.conditional:
            raise ConfigurationError("unconditional discriminator received a condition")
        if condition is None and self.conditional:
            raise ConfigurationError("conditional discriminator needs a condition")
        if features.ndim != 2 or features.shape[1] != self.feature_dim:
            raise DimensionError(f"discriminator expects [window, {self.feature_dim}], got {features.shape}")
        h = ad.transpose(features)
        for i, conv in enumerate(self.layers):
            if i == len(self.layers) - 1:
                if self.conditional:
                    if condition.shape != (features.shape[0], self.condition_dim):
                        raise DimensionError(f"condition shape {condition.shape} does not match window")
                    h = ad.concat([h, ad.transpose(condition)], axis=0)
                h = conv(h)
            else:
                h = ad.relu(conv(h))
        return ad.mean(h)


def run_discriminator(features: Tensor, condition: Tensor | None, disc: RandomWindowDiscriminator) -> Tensor:
    return disc(features, condition)


class MultiRandomWindowDiscriminators(Module):
    """uRWD and cRWD for each window size, evaluated in the fixed order u2, u4, c2, c4."""

    def __init__(self, rng: np.random.Generator, window_sizes: tuple[int, ...] = WINDOW_SIZES,
                 channels: tuple[int, ...] = CHANNEL_PLAN, kernels: tuple[int, ...] = KERNEL_PLAN,
                 condition_dim: int = CONDITION_DIM, dtype=np.float32):
        self.window_sizes = tuple(window_sizes)
        self.condition_dim = condition_dim
        self.discriminators = []
        self.names = []
        for conditional in (False, True):
            for w in self.window_sizes:
                tag = f"{'c' if conditional else 'u'}RWD{w}"
                self.names.append(tag)
                self.discriminators.append(
                    RandomWindowDiscriminator(w, conditional, rng, channels, kernels,
                                              condition_dim=condition_dim, dtype=dtype, name=f"mrwds.{tag}")
                )

    def forward(self, features: Tensor, condition: Tensor, rng: np.random.Generator) -> DiscriminatorVerdict:
        return mrwds_forward(features, condition, self, rng)


def mrwds_forward(features: Tensor, condition: Tensor, mrwds: MultiRandomWindowDiscriminators,
                  rng: np.random.Generator, offsets: list[int] | None = None) -> DiscriminatorVerdict:
    """Score one sequence; ``offsets`` overrides the random window starts."""
    if condition is not None and condition.shape[0] != features.shape[0]:
        raise AlignmentError(f"{features.shape[0]} feature frames vs {condition.shape[0]} condition frames")
    frames = features.shape[0]
    scores, used = [], []
    for i, disc in enumerate(mrwds.discriminators):
        off = offsets[i] if offsets is not None else sample_window(frames, disc.window, rng)
        used.append(off)
        window = take_window(features, off, disc.window)
        cond = take_window(condition, off, disc.window) if disc.conditional else None
        scores.append(disc(window, cond))
    total = scores[0]
    for s in scores[1:]:
        total = total + s
    return DiscriminatorVerdict(scores, total, used, tuple(mrwds.names))
