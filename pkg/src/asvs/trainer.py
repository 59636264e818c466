"""Alternating discriminator/generator training and synthesis."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .classifier import singer_adv_loss_from_logits
from .config import TrainConfig
from .corpus import Utterance
from .errors import ValidationError
from .evaluation import LOSS_COLUMNS
from .features import FeatureFrameSequence
from .frontend import ScoreSequence
from .losses import gan_losses, generation_loss, total_generator_loss
from .model import GeneratorOutput, SingingModel, synthesize_features
from .mrwds import DiscriminatorVerdict, MultiRandomWindowDiscriminators, mrwds_forward
from .optim import adam_step, clip_grad_norm, zero_grad

log = logging.getLogger(__name__)


@dataclass
class TrainState:
    model: SingingModel
    mrwds: MultiRandomWindowDiscriminators | None
    rng: np.random.Generator
    model_rng: np.random.Generator | None = None  # shared by every dropout layer
    step: int = 0
    history: list[dict] = field(default_factory=list)
    d_accuracy: list[float] = field(default_factory=list)

    def generator_parameters(self):
        return self.model.generator_parameters()

    def discriminator_parameters(self):
        return [] if self.mrwds is None else self.mrwds.parameters()


def init_state(cfg: TrainConfig, dtype=np.float32) -> TrainState:
    system = cfg.system
    model_seed, data_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    model_rng = np.random.default_rng(model_seed)
    model = SingingModel(
        cfg.n_singers,
        model_rng,
        multi_singer=system.multi_singer,
        use_classifier=system.use_classifier,
        dropout=cfg.dropout,
        encoder_glu_blocks=cfg.encoder_glu_blocks,
        attention_first=cfg.attention_first,
        dtype=dtype,
    )
    mrwds = MultiRandomWindowDiscriminators(model_rng, cfg.window_sizes, dtype=dtype) if system.use_mrwds else None
    return TrainState(model, mrwds, np.random.default_rng(data_seed), model_rng)


def training_set(utterances: Sequence[Utterance], cfg: TrainConfig) -> list[Utterance]:
    """Training utterances for the configured system; the baseline sees only the target singer."""
    utts = [u for u in utterances if u.split == "train"]
    if not cfg.system.multi_singer:
        utts = [u for u in utts if u.singer_id == cfg.target_singer]
    if not utts:
        raise ValidationError("no training utterances for this configuration")
    return utts


def sample_batch(utterances: Sequence[Utterance], batch_size: int, rng: np.random.Generator) -> list[Utterance]:
    idx = rng.choice(len(utterances), size=min(batch_size, len(utterances)), replace=False)
    return [utterances[i] for i in np.sort(idx)]


def _discriminator_loss(real: DiscriminatorVerdict, fake: DiscriminatorVerdict, cfg: TrainConfig) -> Tensor:
    if cfg.per_discriminator_logistic:
        return _sum([gan_losses(r, f)[0] for r, f in zip(real.per_disc, fake.per_disc)])
    return gan_losses(real.total, fake.total)[0]


def _generator_adv_loss(fake: DiscriminatorVerdict, cfg: TrainConfig) -> Tensor:
    if cfg.per_discriminator_logistic:
        return _sum([gan_losses(0.0, f, cfg.non_saturating)[1] for f in fake.per_disc])
    return gan_losses(0.0, fake.total, cfg.non_saturating)[1]


def _sum(terms: list[Tensor]) -> Tensor:
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


def _mean(terms: list[Tensor]) -> Tensor:
    return ad.mean(ad.stack_scalars(terms))


def discriminator_step(batch: Sequence[Utterance], state: TrainState, cfg: TrainConfig) -> tuple[float, float]:
    """Update the discriminators on real features and detached generated ones.

    Returns ``(L_adv_D, real-vs-fake accuracy)``.
    """
    disc = state.mrwds
    disc.train()
    disc.refresh_spectral_norms()
    dtype = disc.parameters()[0].dtype
    with ad.no_grad():
        outs = [state.model(u.score) for u in batch]
    losses, correct = [], 0
    for u, out in zip(batch, outs):
        cond = out.condition()
        real = mrwds_forward(Tensor(u.features.features.astype(dtype)), cond, disc, state.rng)
        fake = mrwds_forward(out.features.detach(), cond, disc, state.rng)
        losses.append(_discriminator_loss(real, fake, cfg))
        correct += int(real.total.data > 0) + int(fake.total.data < 0)
    loss = _mean(losses)
    loss.backward()
    params = disc.parameters()
    if cfg.grad_clip > 0:
        clip_grad_norm(params, cfg.grad_clip)
    adam_step(params, cfg.learning_rate(state.step), *cfg.betas)
    return float(loss.data), correct / (2 * len(batch))


def generator_losses(batch: Sequence[Utterance], state: TrainState, cfg: TrainConfig,
                     outs: list[GeneratorOutput] | None = None) -> tuple[Tensor, dict[str, Tensor]]:
    """Weighted total generator loss and its parts for one batch."""
    system = cfg.system
    w_g, w_s, w_d = system.weights
    model = state.model
    if outs is None:
        outs = [model(u.score) for u in batch]
    pred = ad.concat([o.features for o in outs], axis=0)
    target = np.vstack([u.features.features for u in batch])
    loss_g, parts = generation_loss(pred, target)
    components: dict[str, Tensor] = {"L_G": loss_g, **parts}
    if system.use_classifier and w_s > 0:
        logits = [model.classifier_logits(o.encoding, cfg.lambda_grl) for o in outs]
        components["L_adv_singer"] = singer_adv_loss_from_logits(logits, [u.singer_id for u in batch])
    if system.use_mrwds and w_d > 0:
        state.mrwds.eval()
        terms = [_generator_adv_loss(mrwds_forward(o.features, o.condition(), state.mrwds, state.rng), cfg)
                 for o in outs]
        components["L_adv_G"] = _mean(terms)
    components["L_total"] = total_generator_loss(components, system.weights)
    return components["L_total"], components


def generator_step(batch: Sequence[Utterance], state: TrainState, cfg: TrainConfig) -> dict[str, float]:
    model = state.model
    model.train()
    system = cfg.system
    classifier_active = system.use_classifier and system.weights[1] > 0
    if classifier_active:
        model.classifier.refresh_spectral_norms()
    if cfg.freeze_generator:
        with ad.no_grad():
            _, comps = generator_losses(batch, state, cfg)
    else:
        total, comps = generator_losses(batch, state, cfg)
        if total.requires_grad:
            total.backward()
            params = model.generator_parameters(include_classifier=classifier_active)
            if cfg.grad_clip > 0:
                clip_grad_norm(params, cfg.grad_clip)
            adam_step(params, cfg.learning_rate(state.step), *cfg.betas)
    if state.mrwds is not None:
        zero_grad(state.mrwds.parameters())
    return {k: float(v.data) for k, v in comps.items()}


def train_step(batch: Sequence[Utterance], state: TrainState, cfg: TrainConfig) -> TrainState:
    if not batch:
        raise ValidationError("empty batch")
    row = {c: 0.0 for c in LOSS_COLUMNS}
    row["step"] = state.step
    if cfg.system.use_mrwds:
        row["L_adv_D"], acc = discriminator_step(batch, state, cfg)
        state.d_accuracy.append(acc)
    row.update(generator_step(batch, state, cfg))
    state.history.append(row)
    state.step += 1
    return state


def train(
    cfg: TrainConfig,
    utterances: Sequence[Utterance],
    state: TrainState | None = None,
    steps: int | None = None,
    callback: Callable[[TrainState], bool | None] | None = None,
) -> TrainState:
    """Run ``steps`` training steps; ``callback`` returning True stops early."""
    state = state or init_state(cfg)
    pool = training_set(utterances, cfg)
    for _ in range(cfg.steps if steps is None else steps):
        train_step(sample_batch(pool, cfg.batch_size, state.rng), state, cfg)
        row = state.history[-1]
        if cfg.log_every and row["step"] % cfg.log_every == 0:
            log.info("step %d  L_G %.4f  L_total %.4f  L_adv_D %.4f", row["step"], row["L_G"], row["L_total"],
                     row["L_adv_D"])
        if callback is not None and callback(state):
            break
    return state


def synthesize(seq: ScoreSequence, state: TrainState, cfg: TrainConfig | None = None) -> FeatureFrameSequence:
    """Eval-mode features for a score; frame count equals the sum of its durations."""
    return FeatureFrameSequence(synthesize_features(state.model, seq))
