"""EvaluationReport assembly and emission as JSON plus CSV tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..transcription import FA_ORAT
from .loso import fold_result_dict
from .metrics import (HD_STAGES, STAGE_ROWS, cochrans_q, compute_metrics, confusion_by_stage,
                      stage_significance)

REPORT_VERSION = 1


def _mean_sd(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"mean": None, "sd": None, "n": 0}
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(v.mean()), "sd": sd, "n": int(v.size)}


def _significance(corpus, fold_results, mode=FA_ORAT):
    if not fold_results or mode not in fold_results[0].heldout_raw:
        return None
    kept = set.intersection(*[set(r.retained[mode]["utterance"]) for r in fold_results])
    if not kept:
        return None
    names = [n for n in fold_results[0].heldout_raw[mode][0] if n in kept]
    rows, owners = [], []
    for r in fold_results:
        all_names, raw = r.heldout_raw[mode]
        idx = [all_names.index(n) for n in names]
        for row in raw:
            rows.append([row[j] for j in idx])
            owners.append(r.held_out)
    stages = {s.speaker_id: s.stage for s in corpus.speakers}
    return stage_significance(np.array(rows), stages, owners, names)


def build_report(corpus, cfg, fold_results) -> dict:
    ids = [r.held_out for r in fold_results]
    labels = [corpus.by_id(s).y for s in ids]
    stages = [corpus.by_id(s).stage for s in ids]
    results, runs, correct, treatments = {}, [], [], []
    for mode in cfg.modes:
        results[mode] = {}
        for method in cfg.methods:
            pred = [r.predictions[mode][method] for r in fold_results]
            m = compute_metrics(pred, labels)
            m["predictions"] = dict(zip(ids, pred))
            results[mode][method] = m
            runs.append(pred)
            correct.append([int(p == y) for p, y in zip(pred, labels)])
            treatments.append(f"{mode}/{method}")
    cq = None
    if len(treatments) >= 2:
        q = cochrans_q(np.array(correct).T)
        cq = {"q": q.q, "df": q.df, "p": q.p, "treatments": treatments}
    wer = None
    if any(r.wer is not None for r in fold_results):
        per = {r.held_out: r.wer for r in fold_results}
        groups = {"overall": ids, "HD": [s for s in ids if corpus.by_id(s).label == "HD"],
                  "HC": [s for s in ids if corpus.by_id(s).label == "HC"]}
        wer = {"speakers": per}
        for g, members in groups.items():
            wer[g] = {k: _mean_sd([per[s][k] for s in members]) for k in ("wer", "ins", "del", "sub")}
    audit_checks = sum(len(r.audit) for r in fold_results)
    return {
        "version": REPORT_VERSION,
        "seed": cfg.seed,
        "config": cfg.fingerprint(),
        "corpus": {"source": corpus.source, "n_speakers": len(corpus),
                   "speakers": [{"id": s.speaker_id, "label": s.label, "stage": s.stage}
                                for s in corpus.speakers]},
        "results": results,
        "confusion_by_stage": confusion_by_stage(runs, stages),
        "cochran_q": cq,
        "wer": wer,
        "stage_significance": _significance(corpus, fold_results),
        "audit": {"passed": True, "checks": audit_checks},
        "folds": [fold_result_dict(r) for r in fold_results],
    }


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1, allow_nan=True) + "\n"


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, float) else v


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def emit_report(report: dict, directory) -> list[Path]:
    """Write report.json and the WER, results, confusion and significance CSVs."""
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot write report to {d}: {exc}") from exc
    paths = [d / "report.json", d / "results.csv", d / "confusion.csv"]
    paths[0].write_text(dumps(report))
    _write_csv(paths[1], ["mode", "method", "accuracy", "f1_hd", "precision", "recall"],
               [[mode, method, m["accuracy"], m["f1_hd"], m["precision"], m["recall"]]
                for mode, ms in sorted(report["results"].items()) for method, m in sorted(ms.items())])
    conf = report["confusion_by_stage"]
    _write_csv(paths[2], ["stage", "healthy", "hd"],
               [[s, *(conf[s] if conf.get(s) else ["", ""])] for s in STAGE_ROWS])
    if report.get("wer"):
        w = report["wer"]
        rows = [[sid, v["wer"], v["ins"], v["del"], v["sub"], v["ref_len"]]
                for sid, v in sorted(w["speakers"].items())]
        for g in ("overall", "HD", "HC"):
            rows.append([f"{g} mean", *[w[g][k]["mean"] for k in ("wer", "ins", "del", "sub")], ""])
            rows.append([f"{g} sd", *[w[g][k]["sd"] for k in ("wer", "ins", "del", "sub")], ""])
        paths.append(d / "wer.csv")
        _write_csv(paths[-1], ["speaker", "wer", "ins", "del", "sub", "ref_len"], rows)
    sig = report.get("stage_significance")
    if sig:
        rows = []
        for stage in HD_STAGES:
            fams = sig["stages"].get(stage)
            if fams is None:
                rows.append([stage, "unavailable", "", "", "", ""])
                continue
            for fam, v in sorted(fams.items()):
                rows.append([stage, fam, v["increase"], v["decrease"], v["no change"], v["n"]])
        paths.append(d / "significance.csv")
        _write_csv(paths[-1], ["stage", "family", "increase_pct", "decrease_pct", "no_change_pct",
                               "n_features"], rows)
    return paths


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())
