import math

import numpy as np
import pytest

from asvs import autodiff as ad
from asvs.autodiff import Tensor
from asvs.classifier import SingerClassifier, singer_adv_loss, singer_adv_loss_from_logits
from asvs.errors import DimensionError, ValidationError


@pytest.fixture
def clf():
    c = SingerClassifier(7, np.random.default_rng(0), dtype=np.float64)
    c.refresh_spectral_norms()
    return c


def encoding(seed=1, length=5):
    return Tensor(np.random.default_rng(seed).standard_normal((length, 384)), requires_grad=True)


def test_shapes(clf):
    assert clf.conv1.weight.shape == (128, 384, 3)
    assert clf.conv2.weight.shape == (128, 128, 3)
    assert clf.out_linear.weight.shape == (128, 7)


def test_probabilities(clf):
    p = clf(encoding()).data
    assert abs(p.sum() - 1.0) <= 1e-6
    assert np.all((p > 0) & (p < 1))


@pytest.mark.parametrize("lam", [0.0, 1.0, 5.0])
def test_forward_independent_of_lambda(clf, lam):
    x = encoding()
    assert clf(x, lam).data.tobytes() == clf(x, 1.0).data.tobytes()


def test_gradient_sign_flips_with_reversal(clf):
    x = encoding()
    ad.sum_(clf.logits(x, 1.0) * np.arange(7.0)).backward()
    reversed_grad = x.grad.copy()
    x.grad = None
    ad.sum_(clf.logits(x, None) * np.arange(7.0)).backward()
    np.testing.assert_array_equal(reversed_grad, -x.grad)


def test_dim_mismatch(clf):
    with pytest.raises(DimensionError):
        clf(Tensor(np.ones((4, 100))))


class TestSingerLoss:
    def test_one_hot_prediction(self):
        p = np.full(7, 1e-12)
        p[3] = 1.0
        assert singer_adv_loss([Tensor(p)], [3]).item() < 1e-9

    def test_uniform_is_log7(self):
        assert abs(singer_adv_loss([Tensor(np.full(7, 1 / 7))], [0]).item() - math.log(7)) <= 1e-12

    def test_batch_is_summed(self):
        a = Tensor(np.array([0.5, 0.25, 0.25]))
        b = Tensor(np.array([0.1, 0.1, 0.8]))
        total = singer_adv_loss([a, b], [0, 2]).item()
        assert total == pytest.approx(-math.log(0.5) - math.log(0.8), abs=1e-12)

    def test_logit_form_agrees(self):
        logits = [Tensor(np.random.default_rng(s).standard_normal(7)) for s in range(3)]
        probs = [ad.softmax(z) for z in logits]
        a = singer_adv_loss_from_logits(logits, [0, 4, 6]).item()
        b = singer_adv_loss(probs, [0, 4, 6]).item()
        assert a == pytest.approx(b, abs=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(ValidationError):
            singer_adv_loss([Tensor(np.full(7, 1 / 7))], [7])
