import hashlib

import numpy as np
import pytest

from asvs import autodiff as ad
from asvs.checkpoint import load_checkpoint, save_checkpoint
from asvs.config import TrainConfig
from asvs.errors import ConfigurationError, ValidationError
from asvs.evaluation import write_loss_csv
from asvs.trainer import (discriminator_step, generator_losses, generator_step, init_state, synthesize, train,
                          train_step)


def checksum(params):
    h = hashlib.sha256()
    for p in params:
        h.update(p.data.tobytes())
    return h.hexdigest()


def cfg_for(system, **kw):
    return TrainConfig(system_id=system, batch_size=2, steps=2, seed=3, log_every=0, **kw)


@pytest.fixture
def batch(tiny_corpus):
    return [tiny_corpus.utterances[0], tiny_corpus.utterances[5]]


class TestAlternation:
    def test_discriminator_step_leaves_generator_alone(self, batch):
        cfg = cfg_for(5)
        state = init_state(cfg)
        gen, disc = state.generator_parameters(), state.discriminator_parameters()
        before_g, before_d = checksum(gen), checksum(disc)
        discriminator_step(batch, state, cfg)
        assert checksum(gen) == before_g
        assert checksum(disc) != before_d
        # detached fakes: nothing reached the generator
        assert all(p.grad is None or not np.any(p.grad) for p in gen)

    def test_generator_step_leaves_discriminator_alone(self, batch):
        cfg = cfg_for(5)
        state = init_state(cfg)
        gen, disc = state.generator_parameters(), state.discriminator_parameters()
        before_g, before_d = checksum(gen), checksum(disc)
        generator_step(batch, state, cfg)
        assert checksum(disc) == before_d
        assert checksum(gen) != before_g
        assert all(p.grad is None for p in disc)

    def test_system1_has_no_discriminator(self, batch):
        cfg = cfg_for(1)
        state = init_state(cfg)
        train_step(batch[:1], state, cfg)
        assert state.mrwds is None and state.discriminator_parameters() == []
        assert state.history[0]["L_adv_D"] == 0.0

    def test_zero_weights_change_nothing(self, batch):
        cfg = cfg_for(2, weights=(0.0, 0.0, 0.0))
        state = init_state(cfg)
        before = checksum(state.generator_parameters())
        generator_step(batch, state, cfg)
        assert checksum(state.generator_parameters()) == before

    def test_empty_batch(self):
        cfg = cfg_for(1)
        with pytest.raises(ValidationError):
            train_step([], init_state(cfg), cfg)


def test_system2_with_one_singer_matches_system1(tiny_corpus):
    utts = [u for u in tiny_corpus.utterances if u.singer_id == 0]
    s1, s2 = cfg_for(1, n_singers=1), cfg_for(2, n_singers=1)
    st1, st2 = init_state(s1, dtype=np.float64), init_state(s2, dtype=np.float64)
    for st in (st1, st2):
        st.model.eval()
    l1 = {k: v.item() for k, v in generator_losses(utts, st1, s1)[1].items()}
    l2 = {k: v.item() for k, v in generator_losses(utts, st2, s2)[1].items()}
    assert l1 == l2


def test_singer_weight_is_linear_in_encoder_gradient(batch):
    grads = []
    for w in (0.75, 1.5):
        cfg = cfg_for(3, weights=(0.0, w, 0.0))
        state = init_state(cfg, dtype=np.float64)
        state.model.eval()
        state.model.classifier.refresh_spectral_norms()
        total, _ = generator_losses(batch, state, cfg)
        total.backward()
        grads.append(np.concatenate([p.grad.ravel() for p in state.model.encoder.parameters()]))
    assert np.any(grads[0])
    np.testing.assert_allclose(grads[1], 2 * grads[0], rtol=1e-12, atol=0)


def test_identical_seed_gives_identical_loss_csv(tiny_corpus, tmp_path):
    cfg = cfg_for(5)
    paths = []
    for run in range(2):
        state = train(cfg, tiny_corpus.utterances)
        paths.append(write_loss_csv(state.history, tmp_path / f"run{run}.csv"))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_checkpoint_round_trip_resumes_identically(tiny_corpus, tmp_path):
    cfg = cfg_for(5)
    state = train(cfg, tiny_corpus.utterances)
    save_checkpoint(state, cfg, tmp_path / "ck.npz")
    restored, cfg2 = load_checkpoint(tmp_path / "ck.npz")
    assert cfg2 == cfg and restored.step == state.step
    for a, b in zip(state.generator_parameters(), restored.generator_parameters()):
        assert a.data.tobytes() == b.data.tobytes() and a.step == b.step
    train(cfg, tiny_corpus.utterances, state, steps=1)
    train(cfg2, tiny_corpus.utterances, restored, steps=1)
    assert state.history[-1] == restored.history[-1]


def test_synthesize_frames_and_determinism(tiny_corpus):
    cfg = cfg_for(2)
    state = init_state(cfg)
    score = tiny_corpus.utterances[3].score
    a, b = synthesize(score, state), synthesize(score, state)
    assert len(a) == sum(score.durations)
    assert a.features.tobytes() == b.features.tobytes()
    assert set(np.unique(a.vuv)) <= {0.0, 1.0}


def test_training_set_for_baseline(tiny_corpus):
    from asvs.trainer import training_set

    assert {u.singer_id for u in training_set(tiny_corpus.utterances, cfg_for(1))} == {0}
    assert len({u.singer_id for u in training_set(tiny_corpus.utterances, cfg_for(2))}) == 7


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigurationError):
            TrainConfig.from_dict({"learning_rate": 1.0})

    def test_round_trip(self, tmp_path):
        cfg = TrainConfig(system_id=4, weights=(10, 0, 1), steps=7)
        cfg.save(tmp_path / "c.json")
        assert TrainConfig.load(tmp_path / "c.json") == cfg

    def test_bad_system(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(system_id=6)

    def test_constant_learning_rate_by_default(self):
        cfg = TrainConfig(lr=3e-4, steps=10)
        assert {cfg.learning_rate(s) for s in range(10)} == {3e-4}
