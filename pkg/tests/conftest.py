import numpy as np
import pytest

from asvs.corpus import CorpusSpec, generate_corpus


def rel_err(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


@pytest.fixture(scope="session")
def tiny_corpus():
    """Seven singers, two short songs each."""
    spec = CorpusSpec(n_singers=7, songs_per_singer=[2] * 7, seq_len=(2, 4), duration_range=(1, 4),
                      eval_fraction=0.0, seed=21)
    return generate_corpus(spec)


_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(criterion: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE[criterion] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (int(k.split()[0].rstrip("ab")), k)):
        passed, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
