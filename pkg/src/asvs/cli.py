"""``asvs`` command line: gen-corpus, train, synthesize, evaluate, gradcheck."""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import TrainConfig, profile
from .errors import (AlignmentError, ConfigurationError, DimensionError, InvariantViolation, ValidationError,
                     VocabularyError)

log = logging.getLogger("asvs")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2, 3


def _thread_limit():
    threads = os.environ.get("ASVS_THREADS")
    if not threads:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(int(threads))


def _write_manifest(out: Path, command: str, payload: dict) -> Path:
    manifest = {
        "command": command,
        "asvs_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        **payload,
    }
    path = out / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig.load(args.config) if args.config else profile(f"system{args.system or 5}")
    overrides = {}
    if args.system is not None:
        overrides["system_id"] = args.system
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.corpus is not None:
        overrides["corpus"] = args.corpus
    if args.out is not None:
        overrides["out"] = args.out
    if getattr(args, "batch_size", None) is not None:
        overrides["batch_size"] = args.batch_size
    if getattr(args, "lr", None) is not None:
        overrides["lr"] = args.lr
    return TrainConfig.from_dict({**cfg.to_dict(), **overrides})


# -- commands ------------------------------------------------------------

def cmd_gen_corpus(args) -> int:
    from .corpus import CorpusSpec, generate_corpus, recording_counts

    data = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    if args.unbalance is not None:
        data["unbalance"] = args.unbalance
    if args.scale is not None:
        data["songs_per_singer"] = recording_counts(args.scale, data.get("n_singers", 7))
    try:
        spec = CorpusSpec(**data)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    out = Path(args.out or "corpus")
    corpus = generate_corpus(spec)
    corpus.save(out)
    _write_manifest(out, "gen-corpus", {"seed": spec.seed, "spec": spec.to_dict(), "utterances": len(corpus)})
    print(f"wrote {len(corpus)} utterances to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .checkpoint import save_checkpoint
    from .corpus import Corpus
    from .evaluation import write_loss_csv
    from .plotting import plot_losses
    from .trainer import init_state, train

    cfg = _train_config(args)
    if not cfg.corpus:
        raise ConfigurationError("train needs --corpus (or 'corpus' in the config)")
    out = Path(cfg.out or "run")
    out.mkdir(parents=True, exist_ok=True)
    corpus = Corpus.load(cfg.corpus)
    cfg.save(out / "config.json")
    state = init_state(cfg)

    def checkpoint_cb(st):
        if cfg.checkpoint_every and st.step % cfg.checkpoint_every == 0:
            save_checkpoint(st, cfg, out / f"checkpoint_{st.step:06d}.npz")

    state = train(cfg, corpus.utterances, state, callback=checkpoint_cb)
    save_checkpoint(state, cfg, out / "checkpoint.npz")
    write_loss_csv(state.history, out / "losses.csv")
    plot_losses(state.history, out / "losses.png")
    _write_manifest(out, "train", {"config_hash": cfg.digest(), "seed": cfg.seed, "system": cfg.system_id,
                                   "steps": state.step})
    print(f"trained system {cfg.system_id} for {state.step} steps; outputs in {out}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    from .checkpoint import load_checkpoint
    from .corpus import Corpus
    from .evaluation import write_feature_dump
    from .frontend import ScoreSequence
    from .plotting import plot_features
    from .trainer import synthesize

    state, cfg = load_checkpoint(args.checkpoint)
    out = Path(args.out or "synth")
    out.mkdir(parents=True, exist_ok=True)
    if args.score:
        jobs = [(Path(s).stem, ScoreSequence.load(s), None) for s in args.score]
    else:
        corpus = Corpus.load(args.corpus or cfg.corpus)
        jobs = [(u.name, u.score, u.features) for u in corpus.split(args.split)]
    for name, score, ref in jobs:
        feats = synthesize(score, state, cfg)
        feats.save(out / f"{name}.feat")
        write_feature_dump(feats, out / f"{name}.csv")
    if jobs and args.figures:
        name, score, ref = jobs[0]
        feats = synthesize(score, state, cfg)
        plot_features(feats.mgc, out / f"{name}_mgc.png", None if ref is None else ref.mgc, title=name)
    _write_manifest(out, "synthesize", {"checkpoint": str(args.checkpoint), "config_hash": cfg.digest(),
                                        "seed": cfg.seed, "files": len(jobs)})
    print(f"synthesized {len(jobs)} utterances into {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .checkpoint import load_checkpoint
    from .corpus import Corpus
    from .evaluation import gv_report, singer_probe, write_gv_csv
    from .features import FeatureFrameSequence
    from .plotting import plot_gv
    from .trainer import synthesize

    if not args.corpus:
        raise ConfigurationError("evaluate needs --corpus for reference features")
    corpus = Corpus.load(args.corpus)
    refs = corpus.split(args.split)
    out = Path(args.out or "eval")
    out.mkdir(parents=True, exist_ok=True)
    state = cfg = None
    if args.checkpoint:
        state, cfg = load_checkpoint(args.checkpoint)
    if args.generated:
        gen = [FeatureFrameSequence.load(Path(args.generated) / f"{u.name}.feat") for u in refs]
    elif state is not None:
        gen = [synthesize(u.score, state, cfg) for u in refs]
    else:
        raise ConfigurationError("evaluate needs --generated or --checkpoint")
    result = {"n_utterances": len(refs)}
    if refs:
        report = gv_report(gen, [u.features for u in refs])
        write_gv_csv(report, out / "gv.csv")
        plot_gv(report, out / "gv.png")
        result["gv_mean_relative_error"] = float(np.mean(report.relative_error()))
    else:
        write_gv_csv(None, out / "gv.csv")
    if state is not None and state.model.multi_singer:
        from . import autodiff as ad

        state.model.eval()
        with ad.no_grad():
            encs = [state.model.encode(u.score).data for u in corpus.utterances]
        try:
            result["singer_probe_accuracy"] = singer_probe(encs, [u.singer_id for u in corpus.utterances],
                                                           seed=args.seed or 0)
        except ValidationError as exc:
            log.warning("singer probe skipped: %s", exc)
            result["singer_probe_accuracy"] = None
    (out / "report.json").write_text(json.dumps(result, indent=2) + "\n")
    _write_manifest(out, "evaluate", {"corpus": args.corpus, "seed": args.seed,
                                      "config_hash": cfg.digest() if cfg else None})
    print(json.dumps(result, indent=2))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import format_table, run_suite

    results = run_suite(seed=args.seed or 0)
    print(format_table(results))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gradcheck.txt").write_text(format_table(results) + "\n")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# -- parser --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asvs", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        return p

    p = common(sub.add_parser("gen-corpus", help="write a synthetic multi-singer corpus"))
    p.add_argument("--unbalance", type=float, help="0 = shared score distribution, 1 = disjoint phoneme sets")
    p.add_argument("--scale", type=float, help="song counts as a fraction of the seven-singer table")
    p.set_defaults(func=cmd_gen_corpus)

    p = common(sub.add_parser("train", help="train one of the five systems"))
    p.add_argument("--system", type=int, choices=range(1, 6))
    p.add_argument("--steps", type=int)
    p.add_argument("--corpus")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("synthesize", help="generate features from a checkpoint"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus")
    p.add_argument("--split", default="eval")
    p.add_argument("--score", nargs="*", help="score files to synthesize instead of a corpus split")
    p.add_argument("--figures", action="store_true", help="also render an MGC map of the first utterance")
    p.set_defaults(func=cmd_synthesize)

    p = common(sub.add_parser("evaluate", help="global variance report and singer probe"))
    p.add_argument("--corpus")
    p.add_argument("--split", default="eval")
    p.add_argument("--checkpoint")
    p.add_argument("--generated", help="directory of synthesized .feat files")
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("gradcheck", help="finite-difference check of every primitive and block"))
    p.set_defaults(func=cmd_gradcheck)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"asvs: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantViolation, ValidationError, AlignmentError, DimensionError, VocabularyError) as exc:
        print(f"asvs: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
