"""Feed-forward decoder: stacked single-head self-attention and GLU sub-layers."""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError, DimensionError
from .layers import GluBlock, Linear, Module

DECODER_CHANNELS = 448
N_DECODER_LAYERS = 6
N_MGC, N_BAP = 60, 5
FEATURE_DIM = N_MGC + N_BAP + 1
MGC = slice(0, N_MGC)
BAP = slice(N_MGC, N_MGC + N_BAP)
VUV = N_MGC + N_BAP


class SelfAttention(Module):
    """Unmasked single-head attention with an output projection and residual."""

    def __init__(self, channels: int, rng: np.random.Generator, dropout: float = 0.1, dtype=np.float32, name: str = "attn"):
        self.channels = channels
        self.dropout = dropout
        self.rng = rng
        self.q = Linear(channels, channels, rng, dtype, name=f"{name}.q")
        self.k = Linear(channels, channels, rng, dtype, name=f"{name}.k")
        self.v = Linear(channels, channels, rng, dtype, name=f"{name}.v")
        self.o = Linear(channels, channels, rng, dtype, name=f"{name}.o")
        self.last_weights: np.ndarray | None = None

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.channels:
            raise DimensionError(f"attention over {self.channels} channels got shape {x.shape}")
        scores = ad.matmul(self.q(x), ad.transpose(self.k(x))) * (1.0 / math.sqrt(self.channels))
        weights = ad.softmax(scores, axis=-1)
        self.last_weights = weights.data
        out = self.o(ad.matmul(weights, self.v(x)))
        return ad.dropout(out, self.dropout, self.training, self.rng) + x


class DecoderLayer(Module):
    def __init__(self, channels: int, rng: np.random.Generator, kernel: int = 3, dropout: float = 0.1,
                 attention_first: bool = True, dtype=np.float32, name: str = "layer"):
        self.attention_first = attention_first
        self.attention = SelfAttention(channels, rng, dropout, dtype, name=f"{name}.attention")
        self.glu = GluBlock(channels, rng, kernel, math.sqrt(0.5), dropout, dtype, name=f"{name}.glu")

    def forward(self, x: Tensor) -> Tensor:
        if self.attention_first:
            return self.glu(self.attention(x))
        return self.attention(self.glu(x))


class Decoder(Module):
    """``[T, 448]`` decoder input to ``[T, 66]`` features (MGC 0:60, BAP 60:65, VUV logit 65)."""

    def __init__(
        self,
        rng: np.random.Generator,
        channels: int = DECODER_CHANNELS,
        n_layers: int = N_DECODER_LAYERS,
        out_dim: int = FEATURE_DIM,
        kernel: int = 3,
        dropout: float = 0.1,
        attention_first: bool = True,
        dtype=np.float32,
    ):
        if n_layers < 1:
            raise ConfigurationError("decoder needs at least one layer")
        self.channels = channels
        self.layers = [
            DecoderLayer(channels, rng, kernel, dropout, attention_first, dtype, name=f"decoder.layers.{i}")
            for i in range(n_layers)
        ]
        self.out_linear = Linear(channels, out_dim, rng, dtype, name="decoder.out_linear")

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.channels:
            raise DimensionError(f"decoder expects [T, {self.channels}], got {x.shape}")
        for layer in self.layers:
            x = layer(x)
        return self.out_linear(x)


def decode(decoder_input: Tensor, decoder: Decoder) -> Tensor:
    return decoder(decoder_input)


def split_features(features: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``[T, 66]`` into MGC, BAP and VUV columns."""
    return features[:, MGC], features[:, BAP], features[:, VUV]


def vuv_flags(vuv_logit: np.ndarray) -> np.ndarray:
    # sigmoid(l) > 0.5 exactly when l > 0
    return np.asarray(vuv_logit) > 0
