import math

import numpy as np
import pytest

from asvs import autodiff as ad
from asvs.autodiff import Tensor
from asvs.config import SYSTEMS
from asvs.errors import ConfigurationError, ValidationError
from asvs.losses import gan_losses, generation_loss, total_generator_loss


def target(frames=6, seed=0):
    r = np.random.default_rng(seed)
    t = r.standard_normal((frames, 66))
    t[:, 65] = r.integers(0, 2, frames)
    return t


def perfect_prediction(t):
    p = t.copy()
    p[:, 65] = np.where(t[:, 65] > 0, 20.0, -20.0)
    return p


class TestGenerationLoss:
    def test_perfect_prediction(self):
        t = target()
        total, _ = generation_loss(Tensor(perfect_prediction(t)), t)
        assert total.item() < 1e-6

    def test_constant_mgc_offset(self):
        t = target()
        p = perfect_prediction(t)
        p[:, :60] += 1.0
        _, parts = generation_loss(Tensor(p), t)
        assert parts["L1_mgc"].item() == pytest.approx(1.0, abs=1e-12)

    def test_components_sum_to_total(self):
        t = target()
        total, parts = generation_loss(Tensor(np.random.default_rng(1).standard_normal(t.shape)), t)
        assert total.item() == parts["L1_mgc"].item() + parts["L1_bap"].item() + parts["CE_vuv"].item()

    def test_non_binary_vuv(self):
        t = target()
        t[0, 65] = 0.5
        with pytest.raises(ValidationError):
            generation_loss(Tensor(t), t)


class TestGanLosses:
    def test_zero_logits(self):
        d, g = gan_losses(0.0, 0.0)
        assert abs(d.item() - 2 * math.log(2)) <= 1e-9
        assert abs(g.item() - math.log(0.5)) <= 1e-9

    def test_perfect_discriminator_limit(self):
        d, _ = gan_losses(60.0, -60.0)
        assert d.item() < 1e-20

    @pytest.mark.parametrize("value", [-30.0, -3.0, 0.0, 2.0, 30.0])
    def test_generator_pushes_score_up(self, value):
        f = Tensor(value, requires_grad=True)
        gan_losses(0.0, f)[1].backward()
        h = 1e-5
        fd = (gan_losses(0.0, value + h)[1].item() - gan_losses(0.0, value - h)[1].item()) / (2 * h)
        assert f.grad < 0 and fd < 0

    def test_non_saturating_variant(self):
        _, g = gan_losses(0.0, -3.0, non_saturating=True)
        assert g.item() == pytest.approx(math.log1p(math.exp(3.0)))

    def test_stable_for_large_logits(self):
        d, g = gan_losses(-1e4, 1e4)
        assert np.isfinite(d.item()) and np.isfinite(g.item())


class TestTotalLoss:
    @pytest.mark.parametrize("system,weights", [(1, (1, 0, 0)), (2, (1, 0, 0)), (3, (1, 1, 0)),
                                                (4, (10, 0, 1)), (5, (10, 2, 1))])
    def test_table_weights(self, system, weights):
        assert SYSTEMS[system].weights == weights

    def test_system1_equals_generation_loss(self):
        comps = {"L_G": Tensor(1.2345), "L_adv_singer": Tensor(9.0), "L_adv_G": Tensor(-3.0)}
        assert total_generator_loss(comps, SYSTEMS[1].weights).item() == 1.2345

    def test_system5_unit_components(self):
        comps = {k: Tensor(1.0) for k in ("L_G", "L_adv_singer", "L_adv_G")}
        assert total_generator_loss(comps, SYSTEMS[5].weights).item() == 13.0

    def test_all_zero(self):
        comps = {k: Tensor(0.0) for k in ("L_G", "L_adv_singer", "L_adv_G")}
        assert total_generator_loss(comps, (10, 2, 1)).item() == 0.0

    def test_negative_weight(self):
        with pytest.raises(ConfigurationError):
            total_generator_loss({"L_G": Tensor(1.0)}, (1, -1, 0))

    def test_gradient_is_weighted(self):
        parts = [Tensor(1.0, requires_grad=True) for _ in range(3)]
        ad.sum_(total_generator_loss(dict(zip(("L_G", "L_adv_singer", "L_adv_G"), parts)), (10, 2, 1))).backward()
        assert [p.grad.item() for p in parts] == [10.0, 2.0, 1.0]
