"""Generator assembly: frontend, encoder, length regulator, decoder, optional classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .classifier import SingerClassifier
from .decoder import Decoder
from .encoder import Encoder
from .frontend import EmbeddingTables, ScoreSequence, encode_score_input, lookup_singer
from .layers import Module
from .length_regulator import assemble_decoder_input, expand


@dataclass
class GeneratorOutput:
    encoding: Tensor       # phoneme-level score encoding, [len, 384]
    expanded: Tensor       # frame-level encoding, [T, 384]
    singer_emb: Tensor     # [64]
    decoder_input: Tensor  # [T, 448]
    features: Tensor       # [T, 66]

    def condition(self) -> Tensor:
        """Detached ``[T, 448]`` discriminator condition: expanded encoding and singer embedding."""
        frames = self.expanded.shape[0]
        tiled = np.broadcast_to(self.singer_emb.data, (frames, self.singer_emb.shape[0]))
        return Tensor(np.concatenate([self.expanded.data, tiled], axis=1))


class SingingModel(Module):
    """Everything on the generator side of the alternating updates.

    With ``multi_singer`` off the singer table has a single row and every score
    is rendered with it, so the baseline is the one-singer case of the same
    graph.
    """

    def __init__(
        self,
        n_singers: int,
        rng: np.random.Generator,
        multi_singer: bool = True,
        use_classifier: bool = False,
        dropout: float = 0.1,
        encoder_glu_blocks: int = 1,
        attention_first: bool = True,
        dtype=np.float32,
    ):
        self.multi_singer = multi_singer
        self.n_singers = n_singers if multi_singer else 1
        self.tables = EmbeddingTables(self.n_singers, rng, dtype)
        self.encoder = Encoder(rng, n_glu_blocks=encoder_glu_blocks, dropout=dropout, dtype=dtype)
        self.decoder = Decoder(rng, dropout=dropout, attention_first=attention_first, dtype=dtype)
        self.classifier = SingerClassifier(n_singers, rng, dtype=dtype) if use_classifier else None

    def singer_index(self, seq: ScoreSequence) -> int:
        return seq.singer_id if self.multi_singer else 0

    def generator_parameters(self, include_classifier: bool = True) -> list:
        params = self.tables.parameters() + self.encoder.parameters() + self.decoder.parameters()
        if include_classifier and self.classifier is not None:
            params += self.classifier.parameters()
        return params

    def encode(self, seq: ScoreSequence) -> Tensor:
        return self.encoder(encode_score_input(seq, self.tables))

    def forward(self, seq: ScoreSequence) -> GeneratorOutput:
        enc = self.encode(seq)
        expanded = expand(enc, seq.durations)
        singer = lookup_singer(self.singer_index(seq), self.tables)
        dec_in = assemble_decoder_input(expanded, singer)
        return GeneratorOutput(enc, expanded, singer, dec_in, self.decoder(dec_in))

    def classifier_logits(self, encoding: Tensor, lambda_grl: float) -> Tensor:
        return self.classifier.logits(encoding, lambda_grl)


def synthesize_features(model: SingingModel, seq: ScoreSequence) -> np.ndarray:
    """Eval-mode forward; VUV column thresholded to 0/1."""
    was_training = model.training
    model.eval()
    try:
        with ad.no_grad():
            out = model(seq).features.data.astype(np.float64)
    finally:
        model.train(was_training)
    out[:, -1] = (out[:, -1] > 0).astype(np.float64)
    return out
