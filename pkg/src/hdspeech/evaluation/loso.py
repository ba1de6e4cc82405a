"""Leave-one-speaker-out orchestration with per-fold models and a leakage audit.

Each fold trains its acoustic model, bigram LM and augmented lexicon on the
training speakers only, transcribes every speaker with them, extracts features,
filters them on the training speakers, sweeps hyperparameters on a speaker-level
80/20 split and predicts the held-out speaker. Fold artifacts are shared by every
(mode, method) run of that fold.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..acoustic.train import TrainingUtterance, default_schedule, flat_start, train_em
from ..classifiers.predictors import (Dataset, Ensemble, PredictorConfig, fit, sweep_hyperparams,
                                      write_sweep_log)
from ..config import RunConfig
from ..features import (compute_gop, filter_features, speaker_features, summarize_speaker, summary_names,
                        write_feature_csv)
from ..lexicon import augment_lexicon, train_bigram
from ..transcription import (ASRT, FA_GF, FA_ORAT, Decoder, compute_wer, prepare_asrt,
                             prepare_fa_gf, prepare_fa_orat, token_prons)

log = logging.getLogger(__name__)


class LeakageError(AssertionError):
    pass


class FoldError(ValueError):
    pass


@dataclass
class FoldModels:
    fold: int
    held_out: str
    am: object
    lm: object
    lexicon: object
    provenance: dict = field(default_factory=dict)


@dataclass
class FoldResult:
    fold: int
    held_out: str
    predictions: dict            # mode -> method -> 0/1
    sweeps: dict                 # mode -> method -> {"best": ..., "log": [...]}
    retained: dict               # mode -> {"utterance": [...], "static": [...]}
    heldout_raw: dict            # mode -> (names, raw utterance matrix as nested lists)
    wer: dict | None             # ASRT scores of the held-out speaker
    audit: list                  # (artifact, ids used) pairs that were checked
    flagged: dict = field(default_factory=dict)
    gop_max: dict = field(default_factory=dict)  # mode -> largest per-phone GoP over all speakers


def training_ids(corpus, held_out: str) -> list[str]:
    return [s for s in corpus.ids if s != held_out]


def train_fold_models(corpus, fold: int, held_out: str, cfg: RunConfig) -> FoldModels:
    train = [corpus.by_id(s) for s in training_ids(corpus, held_out)]
    ids = frozenset(r.speaker_id for r in train)
    lexicon = augment_lexicon(corpus.lexicon, [a for r in train for a in r.transcript.error_annotations()])
    utts = []
    for r in train:
        for i, u in enumerate(r.transcript.utterances):
            a, b = r.utterance_frames(i)
            utts.append(TrainingUtterance(r.features.frames[a:b], token_prons(lexicon, u.words),
                                          f"{r.speaker_id}/{i}"))
    model = flat_start(utts, corpus.phones)
    ac = cfg.acoustic
    schedule = default_schedule(model.n_pdfs, ac.max_gaussians)
    am, hist = train_em(model, utts, ac.iterations_per_stage, schedule, ac.optional_silence)
    am.provenance = ids
    sequences = [u.words for r in train for u in r.transcript.utterances]
    lm = train_bigram(sequences, vocab=lexicon.entries.keys())
    lm.provenance = ids
    log.info("fold %d (%s): %d Gaussians, final log-likelihood %.1f", fold, held_out,
             am.total_gaussians, hist.log_likelihood[-1])
    return FoldModels(fold, held_out, am, lm, lexicon,
                      {"acoustic_model": ids, "language_model": ids, "lexicon": ids})


def transcribe_fold(corpus, fm: FoldModels, cfg: RunConfig) -> dict:
    """mode -> speaker id -> TranscriptionResult, for every speaker."""
    out = {}
    decoder = Decoder(fm.am, fm.lexicon, fm.lm, cfg.acoustic.lm_scale) if ASRT in cfg.modes else None
    for mode in cfg.modes:
        res = {}
        for r in corpus.speakers:
            if mode == FA_ORAT:
                res[r.speaker_id] = prepare_fa_orat(r, fm.am, fm.lexicon)
            elif mode == FA_GF:
                res[r.speaker_id] = prepare_fa_gf(r, corpus.passage, fm.am, fm.lexicon)
            else:
                res[r.speaker_id] = prepare_asrt(r, fm.am, fm.lexicon, fm.lm, cfg.acoustic.lm_scale, decoder)
        out[mode] = res
    return out


def speaker_wer(record, result) -> dict:
    """Pooled WER of one speaker's decoded utterances against the manual transcript."""
    ins = dele = sub = n = 0
    refs = record.transcript.utterances
    for u in result.utterances:
        w = compute_wer(refs[u.index].words, u.tokens)
        ins, dele, sub, n = ins + w.ins, dele + w.dele, sub + w.sub, n + w.ref_len
    return {"wer": 100.0 * (ins + dele + sub) / n if n else 0.0, "ins": ins, "del": dele,
            "sub": sub, "ref_len": n}


def features_fold(corpus, transcripts: dict, cfg: RunConfig) -> dict:
    """mode -> speaker id -> SpeakerFeatures."""
    phones = list(corpus.phones)
    return {mode: {sid: speaker_features(corpus.by_id(sid), res, mode, phones,
                                         pause_min=cfg.pause_ms / 1000.0)
                   for sid, res in results.items()}
            for mode, results in transcripts.items()}


def inner_split(ids, labels, fraction: float, rng) -> tuple[list[str], list[str]]:
    """Stratified speaker-level split; each class puts at least one speaker on each side."""
    train, val = [], []
    for c in (0, 1):
        members = [s for s, y in zip(ids, labels) if y == c]
        if len(members) < 2:
            raise FoldError("each class needs at least 2 training speakers for the inner split")
        members = [members[i] for i in rng.permutation(len(members))]
        n_val = min(len(members) - 1, max(1, int(round(fraction * len(members)))))
        val += members[:n_val]
        train += members[n_val:]
    return sorted(train), sorted(val)


def _predictor_config(method: str, cfg: RunConfig) -> PredictorConfig:
    c = cfg.classifier
    return PredictorConfig(method, l2_kernel=c.l2_kernel, l2_bias=c.l2_bias, lr=c.lr,
                           batch_size=c.batch_size, max_epochs=c.max_epochs, patience=c.patience,
                           seed=cfg.seed, k_grid=tuple(c.k_grid), width_grid=tuple(c.width_grid),
                           dropout_grid=tuple(c.dropout_grid))


def classify_fold(corpus, fold: int, held_out: str, feats: dict, cfg: RunConfig):
    """Filter, sweep and predict for every (mode, method); returns partial FoldResult fields."""
    train_ids = training_ids(corpus, held_out)
    y = {s: corpus.by_id(s).y for s in corpus.ids}
    ytr = [y[s] for s in train_ids]
    if len(set(ytr)) < 2:
        raise FoldError(f"fold {fold}: training speakers contain a single class")
    rng = np.random.default_rng([cfg.seed, fold, 1])
    fit_ids, val_ids = inner_split(train_ids, ytr, cfg.val_fraction, rng)
    audit = [("inner_split", sorted(set(fit_ids) | set(val_ids)))]
    preds, sweeps, retained = {}, {}, {}
    for mode, sf in feats.items():
        dyn_train = np.concatenate([sf[s].dynamic for s in train_ids])
        y_utt = np.concatenate([[y[s]] * len(sf[s].dynamic) for s in train_ids])
        keep_u = filter_features(dyn_train, y_utt, cfg.var_eps, cfg.gain_eps)
        names = [sf[train_ids[0]].names[j] for j in keep_u]
        dyn = {s: sf[s].dynamic[:, keep_u] for s in corpus.ids}
        stat = {s: summarize_speaker(dyn[s]) for s in corpus.ids}
        keep_s = filter_features(np.stack([stat[s] for s in train_ids]), ytr, cfg.var_eps, cfg.gain_eps)
        stat = {s: v[keep_s] for s, v in stat.items()}
        snames = [summary_names(names)[j] for j in keep_s]
        retained[mode] = {"utterance": names, "static": snames}
        audit.append((f"{mode}/feature_filter", list(train_ids)))
        preds[mode], sweeps[mode] = {}, {}
        for method in cfg.methods:
            pc = _predictor_config(method, cfg)
            src = stat if pc.is_static else dyn

            def data(ids):
                inputs = np.stack([src[s] for s in ids]) if pc.is_static else [src[s] for s in ids]
                return Dataset(inputs, [y[s] for s in ids], list(ids))

            sweep = sweep_hyperparams(pc, data(fit_ids), data(val_ids), key=(fold, 0))
            test_input = [src[held_out]] if not pc.is_static else src[held_out][None]
            if method in ("knn", "dtw-knn"):
                model = fit(sweep.best, data(train_ids))
                pred = int(model.predict(test_input)[0])
            else:
                members = [sweep.best_model] + [fit(sweep.best, data(fit_ids), data(val_ids), key=(fold, i))
                                                for i in range(1, sweep.best.ensemble_size)]
                pred = int(Ensemble(members).predict(test_input)[0])
            preds[mode][method] = pred
            best = {"k": sweep.best.k, "width": sweep.best.width, "dropout": sweep.best.dropout}
            sweeps[mode][method] = {"best": best, "log": sweep.log}
            audit.append((f"{mode}/{method}/sweep", sorted(set(fit_ids) | set(val_ids))))
    return preds, sweeps, retained, audit


def audit_fold(result: FoldResult) -> None:
    for artifact, ids in result.audit:
        if result.held_out in ids:
            raise LeakageError(f"fold {result.fold}: held-out speaker {result.held_out} used by {artifact}")


# -- checkpoints ----------------------------------------------------------------


def run_key(corpus, cfg: RunConfig) -> str:
    blob = json.dumps({"config": cfg.fingerprint(), "corpus": corpus.source, "ids": corpus.ids},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Checkpoints:
    """Pickled per-fold stage outputs named by seed and fold, keyed to the run settings."""

    def __init__(self, out_dir, seed: int, key: str):
        self.root = Path(out_dir) / "checkpoints" if out_dir else None
        self.seed, self.key = seed, key

    def _path(self, stage: str, fold: int) -> Path:
        return self.root / f"seed{self.seed}_fold{fold:02d}_{stage}.pkl"

    def load(self, stage: str, fold: int):
        if self.root is None or not self._path(stage, fold).exists():
            return None
        with self._path(stage, fold).open("rb") as fh:
            key, value = pickle.load(fh)
        return value if key == self.key else None

    def save(self, stage: str, fold: int, value) -> None:
        if self.root is None:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self._path(stage, fold).with_suffix(".tmp")
        with tmp.open("wb") as fh:
            pickle.dump((self.key, value), fh)
        os.replace(tmp, self._path(stage, fold))


STAGE_ORDER = ("models", "transcripts", "features", "result")


def _write_fold_artifacts(out_dir, cfg, corpus, fm, transcripts, feats, res: FoldResult) -> None:
    d = Path(out_dir) / "artifacts" / f"seed{cfg.seed}_fold{fm.fold:02d}_{fm.held_out}"
    d.mkdir(parents=True, exist_ok=True)
    fm.am.save(d / "acoustic_model.npz")
    fm.lm.export(d / "bigram.tsv")
    fm.lexicon.save(d / "lexicon.dict")
    for mode, results in transcripts.items():
        r = results[fm.held_out]
        ali = [{"index": int(u.index), "start": int(u.start), "end": int(u.end), "tokens": list(u.tokens),
                "segments": [[s.phone, int(s.start), int(s.end), float(s.log_likelihood), int(s.token)]
                             for s in u.alignment.segments]} for u in r.utterances]
        tag = mode.lower()
        (d / f"alignment_{tag}.json").write_text(json.dumps(ali, sort_keys=True) + "\n")
        sf = feats[mode]
        rows, ids = [], []
        for sid in corpus.ids:
            for i, row in enumerate(sf[sid].raw):
                rows.append(row)
                ids.append(f"{sid}/{i}")
        write_feature_csv(d / f"features_{tag}_utterance.csv", sf[fm.held_out].names, rows, ids)
        for method, sw in res.sweeps.get(mode, {}).items():
            write_sweep_log(d / f"sweep_{tag}_{method}.csv", [dict(r, fold=fm.fold) for r in sw["log"]])


def run_fold(corpus, fold: int, cfg: RunConfig, out_dir=None, stop_after: str | None = None):
    held_out = corpus.ids[fold]
    ck = Checkpoints(out_dir, cfg.seed, run_key(corpus, cfg))
    res = ck.load("result", fold)
    if res is not None and stop_after is None:
        return res
    fm = ck.load("models", fold)
    if fm is None:
        fm = train_fold_models(corpus, fold, held_out, cfg)
        ck.save("models", fold, fm)
    if stop_after == "models":
        return fm
    transcripts = ck.load("transcripts", fold)
    if transcripts is None:
        transcripts = transcribe_fold(corpus, fm, cfg)
        ck.save("transcripts", fold, transcripts)
    if stop_after == "transcripts":
        return transcripts
    feats = ck.load("features", fold)
    if feats is None:
        feats = features_fold(corpus, transcripts, cfg)
        ck.save("features", fold, feats)
    if stop_after == "features":
        return feats
    preds, sweeps, retained, audit = classify_fold(corpus, fold, held_out, feats, cfg)
    audit = [(name, sorted(ids)) for name, ids in fm.provenance.items()] + audit
    wer = None
    if ASRT in transcripts:
        wer = speaker_wer(corpus.by_id(held_out), transcripts[ASRT][held_out])
    heldout_raw = {m: (f[held_out].names, f[held_out].raw.tolist()) for m, f in feats.items()}
    flagged = {m: t[held_out].flagged for m, t in transcripts.items() if t[held_out].flagged}
    gop_max = {m: max((g for r in t.values() for u in r.utterances
                       for _, g in compute_gop(u.alignment, u.loop_span, fm.am.silence or "")),
                      default=float("-inf"))
               for m, t in transcripts.items()}
    res = FoldResult(fold, held_out, preds, sweeps, retained, heldout_raw, wer, audit, flagged, gop_max)
    audit_fold(res)
    if out_dir and cfg.write_artifacts:
        _write_fold_artifacts(out_dir, cfg, corpus, fm, transcripts, feats, res)
    ck.save("result", fold, res)
    return res


def _fold_task(args):
    return run_fold(*args)


def run_loso(corpus, cfg: RunConfig, out_dir=None, stop_after: str | None = None) -> list:
    """Run every fold (in parallel when ``cfg.workers`` allows); results ordered by speaker id."""
    if len(corpus) < 4:
        raise FoldError("LOSO needs at least 4 speakers")
    tasks = [(corpus, f, cfg, out_dir, stop_after) for f in range(len(corpus))]
    workers = cfg.workers or os.cpu_count() or 1
    if workers == 1:
        return [_fold_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(_fold_task, tasks))


def fold_result_dict(res: FoldResult) -> dict:
    d = asdict(res)
    d.pop("heldout_raw")
    return d
