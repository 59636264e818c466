import csv
import json

import pytest

from asvs.cli import run


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    spec = tmp_path_factory.mktemp("cfg") / "spec.json"
    spec.write_text(json.dumps({"songs_per_singer": [4] * 7, "seq_len": [2, 3], "duration_range": [1, 4],
                                "eval_fraction": 0.5}))
    assert run(["gen-corpus", "--config", str(spec), "--seed", "1", "--out", str(out)]) == 0
    return out


def test_gen_corpus_writes_manifest(corpus_dir):
    manifest = json.loads((corpus_dir / "manifest.json").read_text())
    assert len(manifest["utterances"]) == 28
    run_manifest = json.loads((corpus_dir / "run_manifest.json").read_text())
    assert run_manifest["seed"] == 1 and "asvs_version" in run_manifest


def test_train_synthesize_evaluate(corpus_dir, tmp_path):
    run_dir = tmp_path / "run"
    assert run(["train", "--system", "5", "--steps", "3", "--seed", "7", "--batch-size", "2",
                "--corpus", str(corpus_dir), "--out", str(run_dir)]) == 0
    with (run_dir / "losses.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert (run_dir / "losses.png").stat().st_size > 0
    manifest = json.loads((run_dir / "run_manifest.json").read_text())
    assert manifest["seed"] == 7 and len(manifest["config_hash"]) == 16

    synth = tmp_path / "synth"
    assert run(["synthesize", "--checkpoint", str(run_dir / "checkpoint.npz"), "--corpus", str(corpus_dir),
                "--out", str(synth), "--figures"]) == 0
    assert len(list(synth.glob("*.feat"))) == 14
    assert list(synth.glob("*_mgc.png"))

    ev = tmp_path / "eval"
    assert run(["evaluate", "--corpus", str(corpus_dir), "--checkpoint", str(run_dir / "checkpoint.npz"),
                "--generated", str(synth), "--out", str(ev)]) == 0
    report = json.loads((ev / "report.json").read_text())
    assert 0.0 <= report["singer_probe_accuracy"] <= 1.0
    assert (ev / "gv.png").exists()


def test_evaluate_on_reference_is_self_consistent(corpus_dir, tmp_path):
    assert run(["evaluate", "--corpus", str(corpus_dir), "--generated", str(corpus_dir / "features"),
                "--out", str(tmp_path)]) == 0
    with (tmp_path / "gv.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 60
    assert all(r["gv_generated"] == r["gv_reference"] for r in rows)


def test_identical_runs_give_identical_csv(corpus_dir, tmp_path):
    for name in ("a", "b"):
        assert run(["train", "--system", "3", "--steps", "2", "--seed", "4", "--batch-size", "2",
                    "--corpus", str(corpus_dir), "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "losses.csv").read_bytes() == (tmp_path / "b" / "losses.csv").read_bytes()


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"system_id": 5, "bogus": 1}))
    assert run(["train", "--config", str(bad), "--corpus", "x"]) == 2
    assert "bogus" in capsys.readouterr().err


def test_missing_corpus_exits_2(tmp_path):
    assert run(["train", "--system", "1", "--steps", "1", "--out", str(tmp_path)]) == 2


def test_invariant_violation_exits_3(tmp_path):
    score = tmp_path / "bad.score"
    score.write_text("singer 0\n1 2 0\n")
    ck = tmp_path / "ck"
    assert run(["synthesize", "--checkpoint", str(ck), "--score", str(score)]) == 2
    assert run(["evaluate", "--corpus", str(tmp_path / "nope")]) == 2


def test_gradcheck_passes(capsys):
    assert run(["gradcheck"]) == 0
    assert "FAIL" not in capsys.readouterr().out
