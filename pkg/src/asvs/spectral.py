"""Spectral normalization by persistent power iteration."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter, Tensor, mul

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-12


def _unit(x: np.ndarray) -> np.ndarray:
    return x / max(float(np.linalg.norm(x)), SIGMA_FLOOR)


@dataclass
class SpectralNormState:
    """Left singular estimate ``u`` and the most recent top singular value estimate.

    ``sigma`` is refreshed only by :meth:`power_iterate`; forward passes read
    it as a constant, so the estimate is never differentiated through.
    """

    u: np.ndarray
    power_iterations_per_step: int = 1
    sigma: float | None = field(default=None)

    @classmethod
    def for_weight(cls, w: np.ndarray, rng: np.random.Generator, power_iterations_per_step: int = 1):
        u = _unit(rng.standard_normal(w.shape[0]))
        state = cls(u=u, power_iterations_per_step=power_iterations_per_step)
        state.power_iterate(w)
        return state

    def power_iterate(self, w: np.ndarray, iterations: int | None = None) -> float:
        mat = np.asarray(w, dtype=np.float64).reshape(w.shape[0], -1)
        u = self.u
        for _ in range(iterations or self.power_iterations_per_step):
            v = _unit(mat.T @ u)
            u = _unit(mat @ v)
        v = _unit(mat.T @ u)
        self.u = u
        self.sigma = float(u @ mat @ v)
        return self.sigma


def spectral_normalize(w: Parameter | Tensor, state: SpectralNormState, update: bool = True) -> Tensor:
    """Return ``w / sigma`` with sigma held constant for the backward pass."""
    if update or state.sigma is None:
        if update:
            state.power_iterate(w.data)
        else:
            # estimate sigma for the current weight without advancing u
            mat = np.asarray(w.data, dtype=np.float64).reshape(w.shape[0], -1)
            state.sigma = float(np.linalg.norm(mat.T @ state.u))
    sigma = state.sigma
    if not sigma > SIGMA_FLOOR:
        log.warning("spectral norm estimate %.3g below floor; weight left unnormalized", sigma)
        return mul(w, 1.0)
    return mul(w, 1.0 / sigma)
