"""Musical-score inputs: sequences, embedding tables, positional encoding, score files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import ConfigurationError, ValidationError, VocabularyError
from .layers import Module

N_PHONEMES = 71
N_PITCHES = 84
SCORE_DIM = 384
SINGER_DIM = 64
FRAME_PERIOD_S = 0.015
MAX_FRAMES = 667  # 10 s at 15 ms
MIDI_BASE = 24  # pitch id 0 is MIDI note 24 (C1); id 83 is MIDI 107 (B7)
EMBED_INIT = 0.05


def midi_to_pitch_id(midi: int) -> int:
    pid = int(midi) - MIDI_BASE
    if not 0 <= pid < N_PITCHES:
        raise VocabularyError(f"MIDI note {midi} outside the {N_PITCHES}-note vocabulary")
    return pid


def pitch_id_to_midi(pitch_id: int) -> int:
    return int(pitch_id) + MIDI_BASE


def pitch_vocabulary() -> np.ndarray:
    """MIDI note number for every pitch id, in id order."""
    return np.arange(N_PITCHES) + MIDI_BASE


@dataclass
class ScoreSequence:
    phonemes: list[int]
    pitches: list[int]
    durations: list[int]
    singer_id: int = 0
    max_frames: int = field(default=MAX_FRAMES, repr=False)

    def __post_init__(self):
        self.phonemes = [int(p) for p in self.phonemes]
        self.pitches = [int(p) for p in self.pitches]
        self.durations = [int(d) for d in self.durations]
        self.singer_id = int(self.singer_id)
        if not (len(self.phonemes) == len(self.pitches) == len(self.durations)):
            raise ValidationError(
                f"phonemes/pitches/durations lengths differ: "
                f"{len(self.phonemes)}/{len(self.pitches)}/{len(self.durations)}"
            )
        if not self.phonemes:
            raise ValidationError("empty score")
        if min(self.durations) < 1:
            raise ValidationError(f"durations must be >= 1 frame, got {min(self.durations)}")
        if self.total_frames > self.max_frames:
            raise ValidationError(f"score spans {self.total_frames} frames, limit is {self.max_frames}")

    def __len__(self) -> int:
        return len(self.phonemes)

    @property
    def total_frames(self) -> int:
        return sum(self.durations)

    def with_singer(self, singer_id: int) -> ScoreSequence:
        return ScoreSequence(self.phonemes, self.pitches, self.durations, singer_id, self.max_frames)

    # -- text and JSON forms --------------------------------------------
    def to_text(self) -> str:
        lines = [f"singer {self.singer_id}"]
        lines += [f"{p} {q} {d}" for p, q, d in zip(self.phonemes, self.pitches, self.durations)]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "singer": self.singer_id,
            "phonemes": self.phonemes,
            "pitches": self.pitches,
            "durations": self.durations,
        }

    @classmethod
    def from_text(cls, text: str) -> ScoreSequence:
        stripped = text.lstrip()
        if stripped.startswith("{"):
            obj = json.loads(stripped)
            return cls(obj["phonemes"], obj["pitches"], obj["durations"], obj.get("singer", 0))
        singer = None
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "singer":
                singer = int(parts[1])
                continue
            if len(parts) != 3:
                raise ValidationError(f"line {lineno}: expected 'phoneme_id pitch_id duration_frames', got {line!r}")
            rows.append([int(v) for v in parts])
        if singer is None:
            raise ValidationError("score file lacks a 'singer <id>' header")
        if not rows:
            raise ValidationError("score file has no phoneme lines")
        ph, pi, du = zip(*rows)
        return cls(list(ph), list(pi), list(du), singer)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(json.dumps(self.to_dict()))
        else:
            path.write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> ScoreSequence:
        return cls.from_text(Path(path).read_text())


def positional_encodings(length: int, dim: int, dtype=np.float64) -> np.ndarray:
    """Sinusoidal encodings for positions ``0..length-1`` as a ``[length, dim]`` array."""
    if dim % 2:
        raise ConfigurationError(f"positional encoding dim must be even, got {dim}")
    pos = np.arange(length, dtype=np.float64)[:, None]
    rate = 10000.0 ** (np.arange(0, dim, 2, dtype=np.float64) / dim)
    pe = np.empty((length, dim))
    pe[:, 0::2] = np.sin(pos / rate)
    pe[:, 1::2] = np.cos(pos / rate)
    return pe.astype(dtype)


def positional_encoding(position: int, dim: int) -> np.ndarray:
    if position < 0:
        raise ValueError(f"position must be nonnegative, got {position}")
    if dim % 2:
        raise ConfigurationError(f"positional encoding dim must be even, got {dim}")
    rate = 10000.0 ** (np.arange(0, dim, 2, dtype=np.float64) / dim)
    pe = np.empty(dim)
    pe[0::2] = np.sin(position / rate)
    pe[1::2] = np.cos(position / rate)
    return pe


class EmbeddingTables(Module):
    def __init__(self, n_singers: int, rng: np.random.Generator, dtype=np.float32):
        if n_singers < 1:
            raise ConfigurationError("need at least one singer")
        self.n_singers = n_singers

        def table(rows, cols, name):
            return Parameter(rng.uniform(-EMBED_INIT, EMBED_INIT, (rows, cols)).astype(dtype), name=name)

        self.phoneme_table = table(N_PHONEMES, SCORE_DIM, "phoneme_table")
        self.pitch_table = table(N_PITCHES, SCORE_DIM, "pitch_table")
        self.singer_table = table(n_singers, SINGER_DIM, "singer_table")


def _check_ids(ids, size: int, what: str) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    bad = ids[(ids < 0) | (ids >= size)]
    if bad.size:
        raise VocabularyError(f"{what} id {int(bad[0])} outside vocabulary of {size}")
    return ids


def encode_score_input(seq: ScoreSequence, tables: EmbeddingTables) -> Tensor:
    """Phoneme embedding + pitch embedding + positional encoding, ``[len, 384]``."""
    ph = _check_ids(seq.phonemes, tables.phoneme_table.shape[0], "phoneme")
    pi = _check_ids(seq.pitches, tables.pitch_table.shape[0], "pitch")
    pe = positional_encodings(len(seq), tables.phoneme_table.shape[1], tables.phoneme_table.dtype)
    return ad.embedding_lookup(tables.phoneme_table, ph) + ad.embedding_lookup(tables.pitch_table, pi) + pe


def lookup_singer(singer_id: int, tables: EmbeddingTables) -> Tensor:
    ids = _check_ids([singer_id], tables.n_singers, "singer")
    return ad.embedding_lookup(tables.singer_table, ids[0])
