import math

import numpy as np
import pytest

from asvs import autodiff as ad
from asvs.autodiff import Tensor
from asvs.decoder import Decoder, SelfAttention, split_features, vuv_flags
from asvs.encoder import Encoder
from asvs.errors import AlignmentError, DimensionError, ValidationError
from asvs.frontend import EmbeddingTables, ScoreSequence, encode_score_input, positional_encodings
from asvs.gradcheck import check_gradients
from asvs.layers import GluBlock
from asvs.length_regulator import FrameAlignment, assemble_decoder_input, expand

F64 = np.float64


def rng(seed=0):
    return np.random.default_rng(seed)


class TestGluBlock:
    def block(self):
        return GluBlock(4, rng(), dropout=0.0, dtype=F64).eval()

    def test_open_gate_limit(self):
        b = self.block()
        b.conv_b.bias.data[:] = 1e4
        x = Tensor(rng(1).standard_normal((8, 4)))
        conv_a = ad.transpose(b.conv_a(ad.transpose(x))).data
        np.testing.assert_allclose(b(x).data, conv_a * math.sqrt(0.5) + x.data, atol=1e-12)

    def test_closed_gate_is_residual(self):
        b = self.block()
        b.conv_b.bias.data[:] = -1e4
        x = Tensor(rng(1).standard_normal((8, 4)))
        np.testing.assert_allclose(b(x).data, x.data, atol=1e-12)

    def test_gradient_check(self):
        b = self.block()
        x = Tensor(rng(2).standard_normal((8, 4)), requires_grad=True)
        proj = rng(3).standard_normal((8, 4))
        res = check_gradients("glu", lambda: ad.sum_(b(x) * proj), [x] + b.parameters(), rng(4))
        assert res.rel_error <= 1e-4

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            self.block()(Tensor(np.ones((3, 5))))


class TestEncoder:
    def test_shape(self):
        enc = Encoder(rng(), dropout=0.0).eval()
        assert enc(Tensor(np.ones((17, 384), dtype=np.float32))).shape == (17, 384)

    def test_layer_sizes(self):
        enc = Encoder(rng())
        shapes = [enc.linear1.weight.shape, enc.linear2.weight.shape, enc.linear3.weight.shape]
        assert shapes == [(384, 256), (256, 64), (64, 384)]

    def test_zero_input_zero_biases(self):
        enc = Encoder(rng(), dropout=0.0, dtype=F64).eval()
        for name, p in enc.named_parameters():
            if name.endswith("bias"):
                p.data[:] = 0
        np.testing.assert_array_equal(enc(Tensor(np.zeros((5, 384)))).data, 0.0)

    def test_wrong_input_dim(self):
        with pytest.raises(DimensionError):
            Encoder(rng())(Tensor(np.ones((3, 100), dtype=np.float32)))

    def test_gradient_only_to_used_phonemes(self):
        tables = EmbeddingTables(2, rng(1), dtype=F64)
        enc = Encoder(rng(2), dropout=0.0, dtype=F64).eval()
        seq = ScoreSequence([4, 9, 4], [10, 10, 10], [1, 1, 1])
        ad.sum_(enc(encode_score_input(seq, tables))).backward()
        rows = np.flatnonzero(np.abs(tables.phoneme_table.grad).sum(axis=1))
        np.testing.assert_array_equal(rows, [4, 9])


class TestLengthRegulator:
    def test_unit_durations_identity(self):
        x = Tensor(rng().standard_normal((4, 384)))
        np.testing.assert_array_equal(expand(x, [1, 1, 1, 1]).data, x.data)

    def test_hand_expansion(self):
        x = Tensor([[1.0, 1.0], [2.0, 2.0]])
        np.testing.assert_array_equal(expand(x, [2, 3]).data[:, 0], [1, 1, 2, 2, 2])

    def test_backward_sums_copies(self):
        x = Tensor(rng().standard_normal((2, 3)), requires_grad=True)
        g = rng(1).standard_normal((5, 3))
        expand(x, [2, 3]).backward(g)
        np.testing.assert_allclose(x.grad, [g[:2].sum(0), g[2:].sum(0)])
        res = check_gradients("expand", lambda: ad.sum_(expand(x, [2, 3]) * g), [x], rng(2))
        assert res.rel_error <= 1e-4

    def test_length_mismatch(self):
        with pytest.raises(AlignmentError):
            expand(Tensor(np.ones((3, 2))), [1, 2])

    def test_zero_duration(self):
        with pytest.raises(ValidationError):
            FrameAlignment((1, 0))

    def test_decoder_input_shape_and_zero_singer(self):
        expanded = Tensor(rng().standard_normal((6, 384)))
        out = assemble_decoder_input(expanded, Tensor(np.zeros(64)))
        assert out.shape == (6, 448)
        np.testing.assert_array_equal(out.data[:, 384:], positional_encodings(6, 448)[:, 384:])

    def test_two_singers_differ_only_in_singer_block(self):
        expanded = Tensor(rng().standard_normal((5, 384)))
        a = assemble_decoder_input(expanded, Tensor(rng(1).standard_normal(64))).data
        b = assemble_decoder_input(expanded, Tensor(rng(2).standard_normal(64))).data
        np.testing.assert_array_equal(a[:, :384], b[:, :384])
        assert np.all(a[:, 384:] != b[:, 384:])

    def test_singer_dim_mismatch(self):
        with pytest.raises(DimensionError):
            assemble_decoder_input(Tensor(np.ones((2, 384))), Tensor(np.ones(32)))


class TestAttention:
    def test_single_frame(self):
        attn = SelfAttention(8, rng(), dropout=0.0, dtype=F64).eval()
        x = Tensor(rng(1).standard_normal((1, 8)))
        out = attn(x).data
        np.testing.assert_array_equal(attn.last_weights, [[1.0]])
        np.testing.assert_allclose(out, attn.o(attn.v(x)).data + x.data, atol=1e-12)

    def test_rows_sum_to_one(self):
        attn = SelfAttention(8, rng(), dropout=0.0).eval()
        attn(Tensor(rng(1).standard_normal((6, 8)).astype(np.float32)))
        np.testing.assert_allclose(attn.last_weights.sum(axis=1), 1.0, atol=1e-6)

    def test_gradient_check(self):
        attn = SelfAttention(8, rng(), dropout=0.0, dtype=F64).eval()
        x = Tensor(rng(1).standard_normal((3, 8)), requires_grad=True)
        proj = rng(2).standard_normal((3, 8))
        res = check_gradients("attention", lambda: ad.sum_(attn(x) * proj), [x] + attn.parameters(), rng(3))
        assert res.rel_error <= 1e-4


class TestDecoder:
    def test_shape_and_frames(self):
        dec = Decoder(rng()).eval()
        for t in (1, 7, 30):
            assert dec(Tensor(np.zeros((t, 448), dtype=np.float32))).shape == (t, 66)

    def test_six_layers_of_448(self):
        dec = Decoder(rng())
        assert len(dec.layers) == 6
        assert dec.layers[0].attention.q.weight.shape == (448, 448)
        assert dec.out_linear.weight.shape == (448, 66)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionError):
            Decoder(rng())(Tensor(np.zeros((3, 384), dtype=np.float32)))

    def test_split_and_flags(self):
        f = np.arange(2 * 66, dtype=float).reshape(2, 66) - 70
        mgc, bap, vuv = split_features(f)
        assert mgc.shape == (2, 60) and bap.shape == (2, 5) and vuv.shape == (2,)
        np.testing.assert_array_equal(vuv_flags(vuv), [False, True])


def test_small_stack_gradients_against_finite_differences():
    dec = Decoder(rng(), channels=8, n_layers=2, out_dim=5, dropout=0.0, dtype=F64).eval()
    x = Tensor(rng(1).standard_normal((4, 8)), requires_grad=True)
    proj = rng(2).standard_normal((4, 5))
    res = check_gradients("decoder", lambda: ad.sum_(dec(x) * proj), [x] + dec.parameters(), rng(3))
    assert res.rel_error <= 1e-4
