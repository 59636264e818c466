"""Frame-level acoustic feature sequences and their text file format."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decoder import BAP, FEATURE_DIM, MGC, VUV
from .errors import DimensionError, ValidationError

_HEADER = re.compile(r"frames:\s*(\d+)\s*,\s*dims:\s*(\d+)")


@dataclass
class FeatureFrameSequence:
    """``[frames, 66]`` array: MGC in columns 0-59, BAP 60-64, VUV flag 65."""

    features: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[1] != FEATURE_DIM:
            raise DimensionError(f"features must be [frames, {FEATURE_DIM}], got {self.features.shape}")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def mgc(self) -> np.ndarray:
        return self.features[:, MGC]

    @property
    def bap(self) -> np.ndarray:
        return self.features[:, BAP]

    @property
    def vuv(self) -> np.ndarray:
        return self.features[:, VUV]

    def to_text(self) -> str:
        frames, dims = self.features.shape
        lines = [f"frames: {frames}, dims: {dims}"]
        lines += [" ".join(f"{v:.12g}" for v in row) for row in self.features]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> FeatureFrameSequence:
        lines = text.strip("\n").splitlines()
        if not lines or not lines[0].startswith("frames:"):
            raise ValidationError("feature file must start with 'frames: T, dims: D'")
        match = _HEADER.match(lines[0])
        if match is None:
            raise ValidationError(f"malformed feature header {lines[0]!r}")
        frames, dims = int(match.group(1)), int(match.group(2))
        rows = [np.array(line.split(), dtype=np.float64) for line in lines[1:] if line.strip()]
        data = np.vstack(rows) if rows else np.zeros((0, dims))
        if data.shape != (frames, dims):
            raise ValidationError(f"header says {frames}x{dims}, body is {data.shape}")
        return cls(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> FeatureFrameSequence:
        return cls.from_text(Path(path).read_text())
