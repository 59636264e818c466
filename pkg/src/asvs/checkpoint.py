"""Parameter checkpoints: one ``.npz`` archive tagged ``ASVS-CKPT-1``."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .errors import ValidationError
from .frontend import pitch_vocabulary
from .layers import Module
from .trainer import TrainState, init_state

HEADER = "ASVS-CKPT-1"


def _modules(state: TrainState) -> dict[str, Module]:
    mods = {"gen": state.model}
    if state.mrwds is not None:
        mods["disc"] = state.mrwds
    return mods


def save_checkpoint(state: TrainState, cfg: TrainConfig, path: str | Path) -> Path:
    path = Path(path)
    arrays: dict[str, np.ndarray] = {
        "header": np.array(HEADER),
        "config": np.array(json.dumps(cfg.to_dict())),
        "step": np.array(state.step),
        "rng_state": np.array(json.dumps(state.rng.bit_generator.state)),
        "model_rng_state": np.array(json.dumps(state.model_rng.bit_generator.state)),
        "pitch_midi_map": pitch_vocabulary(),
    }
    for prefix, module in _modules(state).items():
        for name, p in module.named_parameters():
            key = f"{prefix}.{name}"
            arrays[f"param/{key}"] = p.data
            arrays[f"adam_m/{key}"] = p.m
            arrays[f"adam_v/{key}"] = p.v
            arrays[f"adam_step/{key}"] = np.array(p.step)
        for name, sn in module.spectral_states().items():
            arrays[f"sn_u/{prefix}.{name}"] = sn.u
    with path.open("wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path: str | Path) -> tuple[TrainState, TrainConfig]:
    with np.load(Path(path), allow_pickle=False) as data:
        if "header" not in data or str(data["header"]) != HEADER:
            raise ValidationError(f"{path} is not an {HEADER} checkpoint")
        cfg = TrainConfig.from_dict(json.loads(str(data["config"])))
        state = init_state(cfg)
        if not np.array_equal(data["pitch_midi_map"], pitch_vocabulary()):
            raise ValidationError("checkpoint pitch vocabulary differs from this build")
        for prefix, module in _modules(state).items():
            for name, p in module.named_parameters():
                key = f"{prefix}.{name}"
                stored = data[f"param/{key}"]
                if stored.shape != p.shape:
                    raise ValidationError(f"{key}: checkpoint shape {stored.shape} vs model {p.shape}")
                p.data = stored.astype(p.dtype)
                p.m = data[f"adam_m/{key}"].astype(p.dtype)
                p.v = data[f"adam_v/{key}"].astype(p.dtype)
                p.step = int(data[f"adam_step/{key}"])
            for name, sn in module.spectral_states().items():
                sn.u = data[f"sn_u/{prefix}.{name}"]
                sn.sigma = None
        state.step = int(data["step"])
        state.rng.bit_generator.state = json.loads(str(data["rng_state"]))
        state.model_rng.bit_generator.state = json.loads(str(data["model_rng_state"]))
    return state, cfg
