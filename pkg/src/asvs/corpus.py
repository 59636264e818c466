"""Deterministic synthetic multi-singer corpus.

Features come from per-singer oracle functions of (phoneme, pitch, position
within the phoneme).  Each singer's score distribution can be skewed toward
its own phoneme subset and pitch register, which reproduces the kind of
score unbalance that lets singer identity leak into a score encoder.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .decoder import FEATURE_DIM, N_BAP, N_MGC
from .errors import ConfigurationError, ValidationError
from .features import FeatureFrameSequence
from .frontend import MAX_FRAMES, N_PHONEMES, N_PITCHES, ScoreSequence

log = logging.getLogger(__name__)

RECORDING_SONGS = (200, 200, 200, 210, 205, 200, 153)
RECORDING_SINGERS = ("F1", "F2", "F3", "F4", "M1", "M2", "M3")
MANIFEST_VERSION = 1


def recording_counts(scale: float = 0.1, n_singers: int = 7) -> list[int]:
    """Song counts per singer proportional to the seven-singer recording table."""
    base = [RECORDING_SONGS[i % len(RECORDING_SONGS)] for i in range(n_singers)]
    return [max(1, int(round(c * scale))) for c in base]


def is_voiced(phoneme_id: int | np.ndarray):
    return np.asarray(phoneme_id) % 4 != 0


@dataclass
class CorpusSpec:
    n_singers: int = 7
    songs_per_singer: list[int] = field(default_factory=lambda: recording_counts(0.1))
    seq_len: tuple[int, int] = (4, 10)
    duration_range: tuple[int, int] = (1, 20)
    max_frames: int = MAX_FRAMES
    unbalance: float = 0.0
    eval_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.songs_per_singer = [int(c) for c in self.songs_per_singer]
        self.seq_len = tuple(int(v) for v in self.seq_len)
        self.duration_range = tuple(int(v) for v in self.duration_range)
        if len(self.songs_per_singer) != self.n_singers:
            raise ConfigurationError(f"{len(self.songs_per_singer)} song counts for {self.n_singers} singers")
        if not 0.0 <= self.unbalance <= 1.0:
            raise ConfigurationError(f"unbalance must lie in [0, 1], got {self.unbalance}")
        lo, hi = self.duration_range
        if not 1 <= lo <= hi:
            raise ConfigurationError(f"bad duration range {self.duration_range}")
        if not 1 <= self.seq_len[0] <= self.seq_len[1]:
            raise ConfigurationError(f"bad sequence length range {self.seq_len}")

    def to_dict(self) -> dict:
        return asdict(self)


def _smooth_basis(rng: np.random.Generator, rows: int, dims: int, harmonics: int, amplitude: float) -> np.ndarray:
    """Random mixtures of low-order cosines along the feature axis."""
    d = (np.arange(dims) + 0.5) / dims
    out = np.zeros((rows, dims))
    for j in range(1, harmonics + 1):
        a = rng.normal(0.0, amplitude / j, size=(rows, 1))
        phase = rng.uniform(0, 2 * np.pi, size=(rows, 1))
        out += a * np.cos(np.pi * j * d[None, :] + phase)
    return out


class OracleSingerFunction:
    """Maps ``(singer, phoneme, pitch, phase)`` to a 66-d feature frame."""

    def __init__(self, n_singers: int, seed: int):
        rng = np.random.default_rng(seed)
        self.n_singers = n_singers
        self.phoneme_env = _smooth_basis(rng, N_PHONEMES, N_MGC, 4, 0.6)
        self.phoneme_motion = _smooth_basis(rng, N_PHONEMES, N_MGC, 3, 0.2)
        self.singer_env = _smooth_basis(rng, n_singers, N_MGC, 3, 1.2)
        self.singer_pitch = _smooth_basis(rng, n_singers, N_MGC, 2, 0.3)
        self.pitch_shared = _smooth_basis(rng, 1, N_MGC, 2, 0.2)[0]
        self.phoneme_bap = rng.normal(-1.0, 0.2, size=(N_PHONEMES, N_BAP))
        self.singer_bap = rng.normal(0.0, 0.3, size=(n_singers, N_BAP))

    def frames(self, singer: int, phoneme: int, pitch: int, duration: int) -> np.ndarray:
        phase = (np.arange(duration) + 0.5) / duration
        q = (pitch - N_PITCHES / 2) / (N_PITCHES / 2)
        mgc = (
            self.phoneme_env[phoneme]
            + self.singer_env[singer]
            + q * self.singer_pitch[singer]
            + q * q * self.pitch_shared
        )[None, :] + np.cos(np.pi * phase)[:, None] * self.phoneme_motion[phoneme][None, :]
        voiced = bool(is_voiced(phoneme))
        bap = self.phoneme_bap[phoneme] + self.singer_bap[singer] if voiced else np.zeros(N_BAP)
        out = np.empty((duration, FEATURE_DIM))
        out[:, :N_MGC] = mgc
        out[:, N_MGC:N_MGC + N_BAP] = bap
        out[:, -1] = 1.0 if voiced else 0.0
        return out

    def render(self, score: ScoreSequence) -> FeatureFrameSequence:
        parts = [
            self.frames(score.singer_id, p, q, d)
            for p, q, d in zip(score.phonemes, score.pitches, score.durations)
        ]
        return FeatureFrameSequence(np.vstack(parts))


@dataclass
class Utterance:
    name: str
    score: ScoreSequence
    features: FeatureFrameSequence
    split: str = "train"

    @property
    def singer_id(self) -> int:
        return self.score.singer_id


@dataclass
class Corpus:
    spec: CorpusSpec
    utterances: list[Utterance]

    def __len__(self) -> int:
        return len(self.utterances)

    def split(self, name: str) -> list[Utterance]:
        return [u for u in self.utterances if u.split == name]

    def by_singer(self, singer: int) -> list[Utterance]:
        return [u for u in self.utterances if u.singer_id == singer]

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        (directory / "scores").mkdir(parents=True, exist_ok=True)
        (directory / "features").mkdir(parents=True, exist_ok=True)
        entries = []
        for u in self.utterances:
            score_rel = f"scores/{u.name}.score"
            feat_rel = f"features/{u.name}.feat"
            u.score.save(directory / score_rel)
            u.features.save(directory / feat_rel)
            entries.append({"name": u.name, "singer": u.singer_id, "score": score_rel,
                            "features": feat_rel, "split": u.split})
        manifest = {"version": MANIFEST_VERSION, "spec": self.spec.to_dict(), "utterances": entries}
        path = directory / "manifest.json"
        path.write_text(json.dumps(manifest, indent=1))
        return path

    @classmethod
    def load(cls, directory: str | Path) -> Corpus:
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        if manifest.get("version") != MANIFEST_VERSION:
            raise ValidationError(f"unsupported manifest version {manifest.get('version')}")
        utts = []
        for e in manifest["utterances"]:
            score = ScoreSequence.load(directory / e["score"])
            if score.singer_id != e["singer"]:
                raise ValidationError(f"{e['name']}: manifest singer {e['singer']} vs score singer {score.singer_id}")
            feats = FeatureFrameSequence.load(directory / e["features"])
            if len(feats) != score.total_frames:
                raise ValidationError(f"{e['name']}: {len(feats)} feature frames vs {score.total_frames} score frames")
            utts.append(Utterance(e["name"], score, feats, e.get("split", "train")))
        return cls(CorpusSpec(**manifest["spec"]), utts)


def phoneme_groups(n_singers: int, seed: int) -> list[np.ndarray]:
    """Disjoint phoneme subsets, one per singer."""
    perm = np.random.default_rng(seed).permutation(N_PHONEMES)
    return [np.sort(g) for g in np.array_split(perm, n_singers)]


def pitch_centers(n_singers: int) -> np.ndarray:
    """Register centre (pitch id) per singer: the first four higher, the rest lower."""
    return np.array([43 if i < 4 else 31 for i in range(n_singers)]) + np.arange(n_singers) % 4 * 2


def _draw_score(rng: np.random.Generator, spec: CorpusSpec, singer: int,
                groups: list[np.ndarray], centers: np.ndarray) -> ScoreSequence:
    n = int(rng.integers(spec.seq_len[0], spec.seq_len[1] + 1))
    own = rng.random(n) < spec.unbalance
    phonemes = np.where(own, rng.choice(groups[singer], size=n), rng.integers(0, N_PHONEMES, size=n))
    shared_pitch = rng.integers(20, 64, size=n)
    own_pitch = np.clip(np.round(rng.normal(centers[singer], 3.0, size=n)), 0, N_PITCHES - 1).astype(int)
    pitches = np.where(own, own_pitch, shared_pitch)
    durations = rng.integers(spec.duration_range[0], spec.duration_range[1] + 1, size=n)
    keep = int(np.searchsorted(np.cumsum(durations), spec.max_frames, side="right"))
    if keep < n:
        log.info("truncating score from %d to %d phonemes to fit %d frames", n, keep, spec.max_frames)
    keep = max(keep, 1)
    return ScoreSequence(phonemes[:keep].tolist(), pitches[:keep].tolist(), durations[:keep].tolist(),
                         singer, max_frames=spec.max_frames)


def generate_corpus(spec: CorpusSpec) -> Corpus:
    seeds = np.random.SeedSequence(spec.seed).spawn(3)
    oracle = OracleSingerFunction(spec.n_singers, int(seeds[0].generate_state(1)[0]))
    groups = phoneme_groups(spec.n_singers, int(seeds[1].generate_state(1)[0]))
    centers = pitch_centers(spec.n_singers)
    rng = np.random.default_rng(seeds[2])
    utts = []
    for singer, count in enumerate(spec.songs_per_singer):
        n_eval = int(round(count * spec.eval_fraction)) if count > 1 else 0
        for k in range(count):
            score = _draw_score(rng, spec, singer, groups, centers)
            split = "eval" if k >= count - n_eval else "train"
            utts.append(Utterance(f"s{singer}_{k:04d}", score, oracle.render(score), split))
    return Corpus(spec, utts)


def make_oracle(spec: CorpusSpec) -> OracleSingerFunction:
    seeds = np.random.SeedSequence(spec.seed).spawn(3)
    return OracleSingerFunction(spec.n_singers, int(seeds[0].generate_state(1)[0]))


def bag_of_phonemes(score: ScoreSequence) -> np.ndarray:
    return np.bincount(score.phonemes, minlength=N_PHONEMES) / len(score)
