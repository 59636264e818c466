"""Phoneme-to-frame expansion by ground-truth durations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import AlignmentError, DimensionError, ValidationError
from .frontend import SCORE_DIM, SINGER_DIM, positional_encodings


@dataclass(frozen=True)
class FrameAlignment:
    durations: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "durations", tuple(int(d) for d in self.durations))
        if any(d < 1 for d in self.durations):
            raise ValidationError(f"every duration must be >= 1, got {self.durations}")

    @property
    def total_frames(self) -> int:
        return sum(self.durations)

    def frame_to_phoneme(self) -> np.ndarray:
        """Phoneme index of every frame."""
        return np.repeat(np.arange(len(self.durations)), self.durations)


def expand(encoding: Tensor, align: FrameAlignment | list[int]) -> Tensor:
    if not isinstance(align, FrameAlignment):
        align = FrameAlignment(tuple(align))
    if encoding.shape[0] != len(align.durations):
        raise AlignmentError(f"{encoding.shape[0]} encoding rows but {len(align.durations)} durations")
    # embedding_lookup gives the scatter-add backward a repeat needs
    return ad.embedding_lookup(encoding, align.frame_to_phoneme())


def assemble_decoder_input(expanded: Tensor, singer_emb: Tensor) -> Tensor:
    """Per frame: ``concat(expanded[t], singer_emb) + PE(t, 448)``."""
    if expanded.ndim != 2 or expanded.shape[1] != SCORE_DIM:
        raise DimensionError(f"expanded encoding must be [T, {SCORE_DIM}], got {expanded.shape}")
    if singer_emb.shape != (SINGER_DIM,):
        raise DimensionError(f"singer embedding must be [{SINGER_DIM}], got {singer_emb.shape}")
    frames = expanded.shape[0]
    tiled = ad.embedding_lookup(ad.reshape(singer_emb, (1, SINGER_DIM)), np.zeros(frames, dtype=np.int64))
    combined = ad.concat([expanded, tiled], axis=1)
    return combined + positional_encodings(frames, SCORE_DIM + SINGER_DIM, combined.dtype)
