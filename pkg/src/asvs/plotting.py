"""Figures written next to the CSV outputs: GV curves, loss curves, feature maps."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import GvReport  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "savefig.dpi": 120,
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_gv(report: GvReport, path: str | Path, label: str = "generated") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        dims = np.arange(len(report.reference))
        ax.semilogy(dims, report.reference, "k-", lw=1.5, label="reference")
        ax.semilogy(dims, np.maximum(report.generated, 1e-12), "--", lw=1.2, label=label)
        ax.set_xlabel("MGC dimension")
        ax.set_ylabel("averaged global variance")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_losses(history: Sequence[dict], path: str | Path,
                columns: Sequence[str] = ("L_G", "L_adv_singer", "L_adv_G", "L_adv_D", "L_total")) -> Path:
    steps = [r["step"] for r in history]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for col in columns:
            values = np.array([r.get(col, 0.0) for r in history])
            if np.any(values != 0):
                ax.plot(steps, values, lw=1.0, label=col)
        ax.set_xlabel("step")
        ax.set_ylabel("loss")
        if ax.lines:
            ax.legend(frameon=False, ncol=2)
        return _save(fig, path)


def plot_features(mgc: np.ndarray, path: str | Path, reference: np.ndarray | None = None, title: str = "") -> Path:
    """MGC heat maps (dimension against frame), with the reference underneath when given."""
    panels = [("generated", mgc)] + ([("reference", reference)] if reference is not None else [])
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(panels), 1, figsize=(6.4, 2.4 * len(panels)), squeeze=False)
        vmin = min(p[1].min() for p in panels)
        vmax = max(p[1].max() for p in panels)
        for ax, (name, data) in zip(axes[:, 0], panels):
            im = ax.imshow(data.T, aspect="auto", origin="lower", vmin=vmin, vmax=vmax, cmap="magma")
            ax.set_ylabel(f"{name}\nMGC dim")
            ax.grid(False)
        axes[-1, 0].set_xlabel("frame")
        fig.colorbar(im, ax=axes[:, 0].tolist())
        if title:
            axes[0, 0].set_title(title)
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
        return path
