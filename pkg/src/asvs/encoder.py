"""Score encoder: two position-wise linear layers, a GLU block, a linear back up."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor
from .errors import DimensionError
from .layers import GluBlock, Linear, Module

ENCODER_SIZES = (384, 256, 64, 384)


class Encoder(Module):
    """Maps embedded score input ``[len, 384]`` to the score encoding ``[len, 384]``."""

    def __init__(
        self,
        rng: np.random.Generator,
        sizes: tuple[int, int, int, int] = ENCODER_SIZES,
        n_glu_blocks: int = 1,
        kernel: int = 3,
        dropout: float = 0.1,
        residual_scale: float = math.sqrt(0.5),
        dtype=np.float32,
    ):
        d_in, d_hidden, d_glu, d_out = sizes
        self.sizes = tuple(sizes)
        self.linear1 = Linear(d_in, d_hidden, rng, dtype, name="encoder.linear1")
        self.linear2 = Linear(d_hidden, d_glu, rng, dtype, name="encoder.linear2")
        self.glu = [
            GluBlock(d_glu, rng, kernel, residual_scale, dropout, dtype, name=f"encoder.glu{i}")
            for i in range(n_glu_blocks)
        ]
        self.linear3 = Linear(d_glu, d_out, rng, dtype, name="encoder.linear3")

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise DimensionError(f"encoder expects [len, {self.sizes[0]}], got {x.shape}")
        h = self.linear2(self.linear1(x))
        for block in self.glu:
            h = block(h)
        return self.linear3(h)


def encode(x_embedded: Tensor, encoder: Encoder) -> Tensor:
    return encoder(x_embedded)
