"""System presets (module switches and loss weights) and the training config schema."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError


@dataclass(frozen=True)
class SystemConfig:
    system_id: int
    multi_singer: bool
    use_classifier: bool
    use_mrwds: bool
    weights: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != 3:
            raise ConfigurationError(f"expected weights [lambda_G, lambda_S, lambda_D], got {self.weights}")
        if any(w < 0 for w in self.weights):
            raise ConfigurationError(f"loss weights must be nonnegative, got {self.weights}")

    @property
    def description(self) -> str:
        on = [str(i) for i, flag in enumerate((self.multi_singer, self.use_classifier, self.use_mrwds), 1) if flag]
        return "+(module" + ",".join(on) + ")" if on else "baseline"


SYSTEMS: dict[int, SystemConfig] = {
    1: SystemConfig(1, multi_singer=False, use_classifier=False, use_mrwds=False, weights=(1, 0, 0)),
    2: SystemConfig(2, multi_singer=True, use_classifier=False, use_mrwds=False, weights=(1, 0, 0)),
    3: SystemConfig(3, multi_singer=True, use_classifier=True, use_mrwds=False, weights=(1, 1, 0)),
    4: SystemConfig(4, multi_singer=True, use_classifier=False, use_mrwds=True, weights=(10, 0, 1)),
    5: SystemConfig(5, multi_singer=True, use_classifier=True, use_mrwds=True, weights=(10, 2, 1)),
}


def system_preset(system_id: int) -> SystemConfig:
    try:
        return SYSTEMS[int(system_id)]
    except (KeyError, ValueError):
        raise ConfigurationError(f"unknown system {system_id!r}; expected 1..5") from None


@dataclass
class TrainConfig:
    system_id: int = 5
    weights: tuple[float, float, float] | None = None  # overrides the preset weights
    lr: float = 1e-4
    lr_final_fraction: float = 1.0  # cosine decay to lr * this over `steps`; 1.0 keeps lr constant
    betas: tuple[float, float] = (0.9, 0.98)
    batch_size: int = 32
    steps: int = 1000
    seed: int = 0
    n_singers: int = 7
    target_singer: int = 0
    dropout: float = 0.1
    lambda_grl: float = 1.0
    grad_clip: float = 1.0
    non_saturating: bool = False
    per_discriminator_logistic: bool = False
    window_sizes: tuple[int, ...] = (2, 4)
    encoder_glu_blocks: int = 1
    attention_first: bool = True
    freeze_generator: bool = False
    corpus: str | None = None
    out: str | None = None
    log_every: int = 50
    checkpoint_every: int = 0

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        self.window_sizes = tuple(int(w) for w in self.window_sizes)
        if self.weights is not None:
            self.weights = tuple(float(w) for w in self.weights)
        system_preset(self.system_id)
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be positive")
        if self.steps < 0:
            raise ConfigurationError("steps must be nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 0.0 <= self.lr_final_fraction <= 1.0:
            raise ConfigurationError("lr_final_fraction must lie in [0, 1]")
        if self.lambda_grl < 0:
            raise ConfigurationError("lambda_grl must be nonnegative")

    def learning_rate(self, step: int) -> float:
        if self.lr_final_fraction == 1.0 or self.steps == 0:
            return self.lr
        frac = min(step, self.steps) / self.steps
        floor = self.lr * self.lr_final_fraction
        return floor + 0.5 * (self.lr - floor) * (1.0 + math.cos(math.pi * frac))

    @property
    def system(self) -> SystemConfig:
        base = system_preset(self.system_id)
        if self.weights is None:
            return base
        return dataclasses.replace(base, weights=self.weights)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {unknown}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> TrainConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def profile(name: str) -> TrainConfig:
    """Named preset ``system1`` .. ``system5``."""
    if not name.startswith("system"):
        raise ConfigurationError(f"unknown profile {name!r}")
    return TrainConfig(system_id=int(name[len("system"):]))
