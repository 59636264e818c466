"""Global variance, singer probing, and CSV export of evaluation data."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .decoder import MGC, N_BAP, N_MGC, VUV
from .errors import ValidationError
from .features import FeatureFrameSequence

log = logging.getLogger(__name__)

LOSS_COLUMNS = ("step", "L_G", "L1_mgc", "L1_bap", "CE_vuv", "L_adv_singer", "L_adv_G", "L_adv_D", "L_total")
GV_COLUMNS = ("dim", "gv_generated", "gv_reference")


def _as_array(f) -> np.ndarray:
    return f.features if isinstance(f, FeatureFrameSequence) else np.asarray(f, dtype=np.float64)


def global_variance(features: Iterable, dims: slice = MGC) -> np.ndarray:
    """Per-dimension variance over frames of each utterance, averaged over utterances."""
    per_utt = []
    for i, f in enumerate(features):
        x = _as_array(f)[:, dims]
        if x.shape[0] < 2:
            log.warning("utterance %d has %d frame(s); excluded from global variance", i, x.shape[0])
            continue
        per_utt.append(x.var(axis=0))
    if not per_utt:
        raise ValidationError("global variance needs at least one utterance with two or more frames")
    return np.mean(per_utt, axis=0)


@dataclass
class GvReport:
    generated: np.ndarray
    reference: np.ndarray

    def relative_error(self) -> np.ndarray:
        return np.abs(self.generated - self.reference) / np.maximum(self.reference, 1e-12)

    def rows(self):
        return [(d, float(g), float(r)) for d, (g, r) in enumerate(zip(self.generated, self.reference))]


def gv_report(generated: Iterable, reference: Iterable) -> GvReport:
    return GvReport(global_variance(generated), global_variance(reference))


def pooled(encodings: Sequence[np.ndarray]) -> np.ndarray:
    """Mean over the time axis of each ``[len, dim]`` encoding."""
    arrays = [np.asarray(e, dtype=np.float64) for e in encodings]
    if any(a.ndim != 2 for a in arrays):
        raise ValidationError("encodings must be [len, dim] arrays; use x[None, :] for a single vector")
    return np.vstack([a.mean(axis=0) for a in arrays])


def singer_probe(encodings: Sequence[np.ndarray], labels: Sequence[int], seed: int = 0,
                 test_fraction: float = 0.3) -> float:
    """Held-out accuracy of a fresh logistic-regression probe on time-pooled encodings."""
    from sklearn.linear_model import LogisticRegression
    from sklearn.model_selection import train_test_split
    from sklearn.pipeline import make_pipeline
    from sklearn.preprocessing import StandardScaler

    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        raise ValidationError("singer probe needs at least two singers")
    classes, counts = np.unique(labels, return_counts=True)
    n_test = int(np.ceil(test_fraction * len(labels)))
    if counts.min() < 2 or min(n_test, len(labels) - n_test) < len(classes):
        raise ValidationError(f"{len(labels)} samples are too few for a stratified probe over {len(classes)} singers")
    x = pooled(encodings)
    x_tr, x_te, y_tr, y_te = train_test_split(x, labels, test_size=test_fraction, random_state=seed, stratify=labels)
    probe = make_pipeline(StandardScaler(), LogisticRegression(max_iter=5000))
    probe.fit(x_tr, y_tr)
    return float(probe.score(x_te, y_te))


# -- CSV export ----------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.12g}"


def write_gv_csv(report: GvReport | None, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GV_COLUMNS)
        if report is not None:
            for d, g, r in report.rows():
                w.writerow([d, _fmt(g), _fmt(r)])
    return path


def read_gv_csv(path: str | Path) -> GvReport | None:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return None
    return GvReport(np.array([float(r["gv_generated"]) for r in rows]),
                    np.array([float(r["gv_reference"]) for r in rows]))


def write_loss_csv(history: Sequence[dict], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOSS_COLUMNS)
        for row in history:
            w.writerow([int(row["step"])] + [_fmt(float(row.get(c, 0.0))) for c in LOSS_COLUMNS[1:]])
    return path


def read_loss_csv(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        return [{k: (int(v) if k == "step" else float(v)) for k, v in row.items()} for row in csv.DictReader(fh)]


def feature_columns() -> list[str]:
    return ["frame"] + [f"mgc{i}" for i in range(N_MGC)] + [f"bap{i}" for i in range(N_BAP)] + ["vuv"]


def write_feature_dump(features: FeatureFrameSequence | np.ndarray | None, path: str | Path) -> Path:
    """Frame-major CSV, one row per frame."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(feature_columns())
        if features is not None:
            for t, row in enumerate(_as_array(features)):
                w.writerow([t] + [_fmt(v) for v in row])
    return path


def read_feature_dump(path: str | Path) -> np.ndarray:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))[1:]
    if not rows:
        return np.zeros((0, VUV + 1))
    return np.array([[float(v) for v in r[1:]] for r in rows])

