"""Adam updates and gradient clipping over :class:`Parameter` lists."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .autodiff import Parameter
from .errors import InvariantViolation

DEFAULT_LR = 1e-4
DEFAULT_BETAS = (0.9, 0.98)


def adam_step(
    params: Iterable[Parameter],
    lr: float = DEFAULT_LR,
    beta1: float = DEFAULT_BETAS[0],
    beta2: float = DEFAULT_BETAS[1],
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update; clears each gradient afterwards."""
    params = list(params)
    missing = [p.name for p in params if p.grad is None]
    if missing:
        raise InvariantViolation(f"adam_step: no gradient for {missing[:5]}")
    for p in params:
        g = p.grad.astype(p.data.dtype, copy=False)
        p.step += 1
        # in place: these buffers are the bulk of the per-step memory traffic
        p.m *= beta1
        p.m += (1.0 - beta1) * g
        p.v *= beta2
        p.v += (1.0 - beta2) * np.square(g)
        denom = np.sqrt(p.v / (1.0 - beta2 ** p.step))
        denom += eps
        update = p.m / denom
        update *= lr / (1.0 - beta1 ** p.step)
        p.data = p.data - update
        p.grad = None


def global_grad_norm(params: Iterable[Parameter]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(p.grad, dtype=np.float64))) for p in params if p.grad is not None)))


def clip_grad_norm(params: Iterable[Parameter], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    params = list(params)
    norm = global_grad_norm(params)
    if norm > max_norm > 0:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


def zero_grad(params: Iterable[Parameter]) -> None:
    for p in params:
        p.grad = None
