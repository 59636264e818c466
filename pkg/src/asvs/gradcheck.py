"""Central finite-difference checks of every primitive and composite block.

All checks run in float64 with step 1e-5.  Large parameter tensors are
checked on a random subset of coordinates; everything else is checked in
full.  The relative error is ``|analytic - numeric| / max(|analytic|, |numeric|)``
in the Euclidean norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .classifier import SingerClassifier
from .decoder import Decoder, SelfAttention
from .encoder import Encoder
from .layers import GluBlock, Linear, Module
from .losses import gan_losses, generation_loss
from .mrwds import RandomWindowDiscriminator

STEP = 1e-5
TOLERANCE = 1e-4
MAX_FULL = 400
SAMPLED = 40


@dataclass
class GradcheckResult:
    name: str
    rel_error: float
    n_coords: int
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return bool(self.rel_error <= self.tolerance)


def _rel(a: np.ndarray, n: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def numerical_gradient(fn: Callable[[], Tensor], t: Tensor, coords, step: float = STEP) -> np.ndarray:
    out = np.empty(len(coords))
    flat = t.data.reshape(-1)
    if not np.shares_memory(flat, t.data):
        raise ValueError("gradient check needs contiguous tensor storage")
    with ad.no_grad():
        for j, i in enumerate(coords):
            orig = flat[i]
            flat[i] = orig + step
            plus = float(fn().data)
            flat[i] = orig - step
            minus = float(fn().data)
            flat[i] = orig
            out[j] = (plus - minus) / (2 * step)
    return out


def check_gradients(name: str, fn: Callable[[], Tensor], inputs: list[Tensor], rng: np.random.Generator,
                    grad_scale: float = 1.0, tolerance: float = TOLERANCE) -> GradcheckResult:
    """Compare backprop against finite differences for every tensor in ``inputs``.

    ``grad_scale`` multiplies the numerical gradient before comparison, which
    lets the reversal layer be checked against its defining ``-lambda`` factor.
    """
    for t in inputs:
        t.grad = None
    fn().backward()
    analytic, numeric = [], []
    total = 0
    for t in inputs:
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        size = t.data.size
        coords = np.arange(size) if size <= MAX_FULL else rng.choice(size, SAMPLED, replace=False)
        analytic.append(g.reshape(-1)[coords])
        numeric.append(grad_scale * numerical_gradient(fn, t, coords))
        total += len(coords)
    for t in inputs:
        t.grad = None
    return GradcheckResult(name, _rel(np.concatenate(analytic), np.concatenate(numeric)), total, tolerance)


def _t(rng, *shape, low=None) -> Tensor:
    data = rng.standard_normal(shape)
    if low is not None:
        data = low + np.abs(data)
    return Tensor(data, requires_grad=True)


def _away_from_zero(rng, *shape) -> Tensor:
    data = rng.standard_normal(shape)
    data = np.sign(data) * (0.1 + np.abs(data))
    return Tensor(data, requires_grad=True)


def _projected(out: Tensor, rng: np.random.Generator) -> Callable[[Tensor], Tensor]:
    weights = rng.standard_normal(out.shape)
    return lambda y: ad.sum_(y * weights)


def _module_check(name: str, module: Module, x: Tensor, forward, rng, extra=()) -> GradcheckResult:
    module.astype(np.float64).eval()
    proj = _projected(forward(x), rng)
    fn = lambda: proj(forward(x))  # noqa: E731
    return check_gradients(name, fn, [x, *extra, *module.parameters()], rng)


def primitive_checks(rng: np.random.Generator) -> list[GradcheckResult]:
    results = []

    def run(name, fn, inputs, **kw):
        results.append(check_gradients(name, fn, inputs, rng, **kw))

    a, b = _t(rng, 3, 4), _t(rng, 4, 2)
    run("matmul", lambda: ad.sum_(ad.matmul(a, b)), [a, b])
    x, y, row = _t(rng, 5, 6), _t(rng, 5, 6), _t(rng, 1, 6)
    proj = rng.standard_normal((5, 6))
    run("add", lambda: ad.sum_((x + row) * proj), [x, row])
    run("mul", lambda: ad.sum_(x * y * proj), [x, y])
    run("neg_sub", lambda: ad.sum_((x - y) * proj), [x, y])
    run("sigmoid", lambda: ad.sum_(ad.sigmoid(x) * proj), [x])
    xr = _away_from_zero(rng, 5, 6)
    run("relu", lambda: ad.sum_(ad.relu(xr) * proj), [xr])
    run("abs", lambda: ad.sum_(ad.abs_(xr) * proj), [xr])
    run("softplus", lambda: ad.sum_(ad.softplus(x * 5.0) * proj), [x])
    run("softmax", lambda: ad.sum_(ad.softmax(x, axis=-1) * proj), [x])
    run("log_softmax", lambda: ad.sum_(ad.log_softmax(x, axis=-1) * proj), [x])
    xp = _t(rng, 5, 6, low=0.2)
    run("log", lambda: ad.sum_(ad.log(xp) * proj), [xp])
    run("mean", lambda: ad.sum_(ad.mean(x * proj, axis=0) * np.arange(1.0, 7.0)), [x])
    col = rng.standard_normal((5, 1))
    run("sum", lambda: ad.sum_(ad.sum_(x * proj, axis=1, keepdims=True) * col), [x])
    run("transpose", lambda: ad.sum_(ad.transpose(x) * proj.T), [x])
    run("reshape", lambda: ad.sum_(ad.reshape(x, (6, 5)) * proj.reshape(6, 5)), [x])
    wide = rng.standard_normal((5, 12))
    run("concat", lambda: ad.sum_(ad.concat([x, y], axis=1) * wide), [x, y])
    run("slice", lambda: ad.sum_(x[1:4, ::2] * proj[1:4, ::2]), [x])
    table = _t(rng, 8, 6)
    ids = np.array([1, 3, 3, 7, 0])
    run("embedding_lookup", lambda: ad.sum_(ad.embedding_lookup(table, ids) * proj), [table])
    run("dropout", lambda: ad.sum_(ad.dropout(x, 0.1, True, np.random.default_rng(5)) * proj), [x])
    xc, w, bias = _t(rng, 2, 6), _t(rng, 2, 2, 3), _t(rng, 2)
    pc = rng.standard_normal((2, 6))
    run("conv1d", lambda: ad.sum_(ad.conv1d(xc, w, bias) * pc), [xc, w, bias])
    for lam in (0.0, 0.5, 1.0, 2.0):
        run(f"gradient_reversal[{lam}]", lambda lam=lam: ad.sum_(ad.gradient_reversal(x, lam) * proj), [x],
            grad_scale=-lam)
    return results


def composite_checks(rng: np.random.Generator) -> list[GradcheckResult]:
    results = []
    glu = GluBlock(8, rng, dtype=np.float64, name="glu")
    results.append(_module_check("glu_block", glu, _t(rng, 4, 8), glu, rng))

    attn = SelfAttention(16, rng, dtype=np.float64)
    results.append(_module_check("self_attention", attn, _t(rng, 3, 16), attn, rng))

    lin = Linear(6, 5, rng, dtype=np.float64)
    results.append(_module_check("linear", lin, _t(rng, 4, 6), lin, rng))

    enc = Encoder(rng, sizes=(16, 12, 8, 16), dtype=np.float64)
    results.append(_module_check("encoder", enc, _t(rng, 5, 16), enc, rng))

    dec = Decoder(rng, channels=16, n_layers=2, out_dim=8, dtype=np.float64)
    results.append(_module_check("decoder", dec, _t(rng, 4, 16), dec, rng))

    clf = SingerClassifier(7, rng, channels=(16, 8, 8), dtype=np.float64)
    clf.astype(np.float64).eval()
    enc_out = _t(rng, 5, 16)
    results.append(check_gradients(
        "singer_classifier",
        lambda: -ad.log(clf(enc_out, 0.0)[3]),
        [*clf.parameters()],
        rng,
    ))
    results.append(check_gradients(
        "singer_classifier_grl_input",
        lambda: -ad.log(clf(enc_out, 1.0)[3]),
        [enc_out],
        rng,
        grad_scale=-1.0,
    ))

    for conditional in (False, True):
        rwd = RandomWindowDiscriminator(4, conditional, rng, channels=(8, 8, 8, 1), feature_dim=16,
                                        condition_dim=8, dtype=np.float64)
        feats = _t(rng, 4, 16)
        cond = _t(rng, 4, 8) if conditional else None
        rwd.astype(np.float64).eval()
        fn = lambda rwd=rwd, feats=feats, cond=cond: rwd(feats, cond)  # noqa: E731
        inputs = [feats] + ([cond] if cond is not None else []) + rwd.parameters()
        tag = "cRWD" if conditional else "uRWD"
        results.append(check_gradients(f"{tag}_window4", fn, inputs, rng))

    pred = _t(rng, 6, 66)
    target = rng.standard_normal((6, 66))
    target[:, -1] = rng.integers(0, 2, 6)
    # keep the L1 terms away from their kinks
    pred.data[:, :-1] = target[:, :-1] + np.sign(pred.data[:, :-1]) * (0.05 + np.abs(pred.data[:, :-1]))
    results.append(check_gradients("generation_loss", lambda: generation_loss(pred, target)[0], [pred], rng))
    dr, df = _t(rng, 1), _t(rng, 1)
    results.append(check_gradients("gan_loss_D", lambda: ad.sum_(gan_losses(dr, df)[0]), [dr, df], rng))
    results.append(check_gradients("gan_loss_G", lambda: ad.sum_(gan_losses(dr, df)[1]), [df], rng))
    return results


def random_shape_checks(rng: np.random.Generator, rounds: int = 2) -> list[GradcheckResult]:
    """Blocks and shape-sensitive primitives at random sizes up to 8 frames by 16 channels."""
    results = []
    for _ in range(rounds):
        t, c = int(rng.integers(1, 9)), 2 * int(rng.integers(1, 9))
        tag = f"[{t}x{c}]"
        x, y = _t(rng, t, c), _t(rng, t, c)
        proj = rng.standard_normal((t, c))
        for name, op in (("softmax", lambda v: ad.softmax(v, axis=-1)), ("sigmoid", ad.sigmoid),
                         ("mul", lambda v: v * y), ("matmul", lambda v: ad.matmul(v, ad.transpose(y)))):
            out_proj = rng.standard_normal(op(x).shape)
            results.append(check_gradients(f"{name}{tag}", lambda op=op, w=out_proj: ad.sum_(op(x) * w), [x], rng))
        xc, w = _t(rng, c, t), _t(rng, 3, c, 3)
        pc = rng.standard_normal((3, t))
        results.append(check_gradients(f"conv1d{tag}", lambda: ad.sum_(ad.conv1d(xc, w) * pc), [xc, w], rng))
        glu = GluBlock(c, rng, dtype=np.float64)
        results.append(_module_check(f"glu_block{tag}", glu, x, glu, rng))
        attn = SelfAttention(c, rng, dtype=np.float64)
        results.append(_module_check(f"self_attention{tag}", attn, _t(rng, t, c), attn, rng))
        enc = Encoder(rng, sizes=(c, 12, 8, c), dtype=np.float64)
        results.append(_module_check(f"encoder{tag}", enc, _t(rng, t, c), enc, rng))
        dec = Decoder(rng, channels=c, n_layers=2, out_dim=5, dtype=np.float64)
        results.append(_module_check(f"decoder{tag}", dec, _t(rng, t, c), dec, rng))
        clf = SingerClassifier(3, rng, channels=(c, 8, 8), dtype=np.float64).eval()
        enc_out = _t(rng, t, c)
        results.append(check_gradients(f"singer_classifier{tag}", lambda: -ad.log(clf(enc_out, 1.0)[1]),
                                       [*clf.parameters()], rng))
        for conditional in (False, True):
            window = int(rng.choice([2, 4]))
            rwd = RandomWindowDiscriminator(window, conditional, rng, channels=(8, 8, 8, 1), feature_dim=c,
                                            condition_dim=6, dtype=np.float64).eval()
            feats = _t(rng, window, c)
            cond = _t(rng, window, 6) if conditional else None
            fn = lambda rwd=rwd, feats=feats, cond=cond: rwd(feats, cond)  # noqa: E731
            inputs = [feats] + ([cond] if cond is not None else []) + rwd.parameters()
            results.append(check_gradients(f"{'c' if conditional else 'u'}RWD{window}{tag}", fn, inputs, rng))
    return results


def run_suite(seed: int = 0) -> list[GradcheckResult]:
    rng = np.random.default_rng(seed)
    return primitive_checks(rng) + composite_checks(rng) + random_shape_checks(rng)


def format_table(results: list[GradcheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'rel_error':>10}  {'coords':>6}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.rel_error:10.2e}  {r.n_coords:6d}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
