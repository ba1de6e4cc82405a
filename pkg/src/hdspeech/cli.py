"""Command-line entry point: ingest, synth, transcribe, features, evaluate, report, run."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

import yaml

from .config import ConfigError, RunConfig, load_config, save_config
from .corpus import CorpusError, ingest_corpus
from .evaluation.loso import run_loso
from .evaluation.report import build_report, emit_report, load_report
from .evaluation.synth import (SpecError, SynthSpec, generate_synthetic_corpus, graded_spec,
                               noiseless_spec, separable_spec, write_synthetic_corpus)
from .lexicon import LexiconError
from .transcript import TranscriptError

log = logging.getLogger("hdspeech")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
VALIDATION_ERRORS = (ConfigError, CorpusError, LexiconError, TranscriptError, SpecError)
FAILED_MARKER = "FAILED"
PRESETS = {"separable": separable_spec, "graded": graded_spec, "noiseless": noiseless_spec}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="corpus manifest (JSON)")
    p.add_argument("--config", help="run configuration (YAML)")
    p.add_argument("--seed", type=int, help="run seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--workers", type=int, help="parallel folds; 0 = one per logical core")
    p.add_argument("--modes", help="comma-separated subset of FA-ORAT,FA-GF,ASRT")
    p.add_argument("--methods", help="comma-separated subset of knn,dtw-knn,dnn,lstm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdspeech", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a manifest and summarize the corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="write corpus summary JSON here")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--config", help="synthetic-corpus spec (YAML)")
    p.add_argument("--preset", choices=sorted(PRESETS), default="separable")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    for name, text in (("transcribe", "train fold models and transcribe every speaker"),
                       ("features", "extract fold features (resumes from transcripts)"),
                       ("evaluate", "classify, evaluate and write the report"),
                       ("run", "alias of evaluate: the full pipeline")):
        _add_run_flags(sub.add_parser(name, help=text))

    p = sub.add_parser("report", help="re-emit CSV tables from a report.json")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    return parser


def _split(v):
    return [x.strip() for x in v.split(",") if x.strip()] if v else None


def _run_config(args) -> RunConfig:
    return load_config(args.config, seed=args.seed, out=args.out, workers=args.workers,
                       modes=_split(args.modes), methods=_split(args.methods))


def cmd_ingest(args) -> int:
    corpus = ingest_corpus(args.manifest)
    summary = {"source": corpus.source, "n_speakers": len(corpus),
               "passage_sentences": len(corpus.passage),
               "speakers": [{"id": s.speaker_id, "label": s.label, "stage": s.stage,
                             "utterances": len(s.transcript.utterances),
                             "frames": s.features.n_frames} for s in corpus.speakers]}
    text = json.dumps(summary, indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.config:
        data = yaml.safe_load(Path(args.config).read_text()) or {}
        spec = SynthSpec.from_dict(data)
    else:
        spec = PRESETS[args.preset]()
    synth = generate_synthetic_corpus(spec, args.seed)
    manifest = write_synthetic_corpus(synth, args.out)
    print(manifest)
    return EXIT_OK


STOP = {"transcribe": "transcripts", "features": "features"}


def cmd_pipeline(args) -> int:
    cfg = _run_config(args)
    corpus = ingest_corpus(args.manifest)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / FAILED_MARKER
    if marker.exists():
        marker.unlink()
    save_config(cfg, out / f"config_seed{cfg.seed}.yaml")
    try:
        results = run_loso(corpus, cfg, out, STOP.get(args.command))
        if args.command in STOP:
            print(f"{args.command}: {len(results)} folds checkpointed under {out / 'checkpoints'}")
            return EXIT_OK
        report = build_report(corpus, cfg, results)
        for path in emit_report(report, out):
            print(path)
    except Exception as exc:
        marker.write_text(f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}")
        raise
    return EXIT_OK


def cmd_report(args) -> int:
    for path in emit_report(load_report(args.report), args.out):
        print(path)
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "synth": cmd_synth, "transcribe": cmd_pipeline,
            "features": cmd_pipeline, "evaluate": cmd_pipeline, "run": cmd_pipeline,
            "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
