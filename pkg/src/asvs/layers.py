"""Module container and the small set of layers the networks are built from."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import ConfigurationError, DimensionError
from .spectral import SpectralNormState, spectral_normalize


class Module:
    training: bool = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def _children(self) -> Iterator[tuple[str, object]]:
        for key, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Parameter, Module)):
                        yield f"{key}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in self._children():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            else:
                yield from value.named_parameters(name + ".")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_modules(self, prefix: str = "") -> Iterator[tuple[str, Module]]:
        yield prefix.rstrip("."), self
        for key, value in self._children():
            if isinstance(value, Module):
                yield from value.named_modules(f"{prefix}{key}.")

    def train(self, mode: bool = True) -> Module:
        for _, m in self.named_modules():
            m.training = mode
        return self

    def eval(self) -> Module:
        return self.train(False)

    def astype(self, dtype) -> Module:
        for p in self.parameters():
            p.astype(dtype)
        return self

    def spectral_states(self) -> dict[str, SpectralNormState]:
        return {name: m.sn_state for name, m in self.named_modules() if getattr(m, "sn_state", None) is not None}

    def refresh_spectral_norms(self) -> None:
        """Advance every spectral-norm power iteration by its per-step count."""
        for name, m in self.named_modules():
            if getattr(m, "sn_state", None) is not None:
                m.sn_state.power_iterate(m.weight.data)

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())


def _uniform(rng: np.random.Generator, shape, bound: float, dtype) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear(Module):
    """Position-wise affine map on ``[time, in_features]``."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, dtype=np.float32, name: str = "linear"):
        bound = 1.0 / math.sqrt(in_features)
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(_uniform(rng, (in_features, out_features), bound, dtype), name=f"{name}.weight")
        self.bias = Parameter(np.zeros(out_features, dtype=dtype), name=f"{name}.bias")

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise DimensionError(f"linear expects last dim {self.in_features}, got shape {x.shape}")
        return ad.matmul(x, self.weight) + self.bias


class Conv1d(Module):
    """Same-padded convolution on ``[channels, time]``, optionally spectral-normalized."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        rng: np.random.Generator,
        dtype=np.float32,
        spectral_norm: bool = False,
        name: str = "conv",
    ):
        if kernel % 2 == 0:
            raise ConfigurationError(f"kernel must be odd, got {kernel}")
        bound = 1.0 / math.sqrt(in_channels * kernel)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.weight = Parameter(_uniform(rng, (out_channels, in_channels, kernel), bound, dtype), name=f"{name}.weight")
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype), name=f"{name}.bias")
        self.sn_state = SpectralNormState.for_weight(self.weight.data, rng) if spectral_norm else None

    def effective_weight(self) -> Tensor:
        if self.sn_state is None:
            return self.weight
        return spectral_normalize(self.weight, self.sn_state, update=False)

    def forward(self, x: Tensor) -> Tensor:
        return ad.conv1d(x, self.effective_weight(), self.bias)


class GluBlock(Module):
    """Residual gated-linear-unit convolution on ``[time, channels]``.

    ``y = conv_a(x) * sigmoid(conv_b(x)) * residual_scale + x``; dropout is
    applied to the convolution input while training.
    """

    def __init__(
        self,
        channels: int,
        rng: np.random.Generator,
        kernel: int = 3,
        residual_scale: float = math.sqrt(0.5),
        dropout: float = 0.1,
        dtype=np.float32,
        name: str = "glu",
    ):
        self.channels = channels
        self.residual_scale = residual_scale
        self.dropout = dropout
        self.rng = rng
        self.conv_a = Conv1d(channels, channels, kernel, rng, dtype, name=f"{name}.conv_a")
        self.conv_b = Conv1d(channels, channels, kernel, rng, dtype, name=f"{name}.conv_b")

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.channels:
            raise DimensionError(f"GLU block of {self.channels} channels got shape {x.shape}")
        h = ad.transpose(ad.dropout(x, self.dropout, self.training, self.rng))
        gated = self.conv_a(h) * ad.sigmoid(self.conv_b(h))
        return ad.transpose(gated) * self.residual_scale + x
