"""Generation, singer-adversarial and GAN losses and their weighted total."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .decoder import BAP, MGC, VUV
from .errors import ConfigurationError, DimensionError, ValidationError


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy, ``softplus(l) - y*l`` per element."""
    return ad.mean(ad.softplus(logits) - logits * np.asarray(targets, dtype=logits.dtype))


def generation_loss(pred: Tensor, target: np.ndarray) -> tuple[Tensor, dict[str, Tensor]]:
    """L1 on MGC + L1 on BAP + cross-entropy on the VUV logit.

    Returns the total and the three components keyed ``L1_mgc``, ``L1_bap``,
    ``CE_vuv``.  Each term is a mean over frames (and dimensions).
    """
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction {pred.shape} vs target {target.shape}")
    vuv = target[:, VUV]
    if not np.all((vuv == 0) | (vuv == 1)):
        raise ValidationError("target VUV column must be 0 or 1")
    target = target.astype(pred.dtype, copy=False)
    l1_mgc = ad.mean(ad.abs_(pred[:, MGC] - target[:, MGC]))
    l1_bap = ad.mean(ad.abs_(pred[:, BAP] - target[:, BAP]))
    ce_vuv = bce_with_logits(pred[:, VUV], vuv)
    total = l1_mgc + l1_bap + ce_vuv
    return total, {"L1_mgc": l1_mgc, "L1_bap": l1_bap, "CE_vuv": ce_vuv}


def gan_losses(d_real, d_fake, non_saturating: bool = False) -> tuple[Tensor, Tensor]:
    """Discriminator and generator adversarial losses from logits.

    ``L_adv_D = -log sigmoid(d_real) - log(1 - sigmoid(d_fake))`` and
    ``L_adv_G = log(1 - sigmoid(d_fake))``; the non-saturating option swaps the
    generator term for ``-log sigmoid(d_fake)``.
    """
    d_real = ad._lift(d_real)
    d_fake = ad._lift(d_fake)
    loss_d = ad.softplus(-d_real) + ad.softplus(d_fake)
    loss_g = ad.softplus(-d_fake) if non_saturating else -ad.softplus(d_fake)
    return loss_d, loss_g


def total_generator_loss(components: Mapping[str, Tensor | None], weights: Sequence[float]) -> Tensor:
    """``w_G * L_G + w_S * L_adv_singer + w_D * L_adv_G``; missing components count as zero."""
    if len(weights) != 3:
        raise ConfigurationError(f"expected three loss weights, got {weights}")
    if any(w < 0 for w in weights):
        raise ConfigurationError(f"loss weights must be nonnegative, got {list(weights)}")
    total = None
    for key, w in zip(("L_G", "L_adv_singer", "L_adv_G"), weights):
        term = components.get(key)
        if term is None:
            continue
        scaled = ad._lift(term) * float(w)
        total = scaled if total is None else total + scaled
    return total if total is not None else Tensor(0.0)
