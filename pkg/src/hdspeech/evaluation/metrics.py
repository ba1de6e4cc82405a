"""Classification metrics, confusion by stage, Cochran's Q and stage-wise t-tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..corpus import STAGES

STAGE_ROWS = STAGES  # rows of the confusion table, Healthy first
HD_STAGES = STAGES[1:]
FAMILIES = ("gop", "rate", "pause", "filler")


def compute_metrics(predictions, labels) -> dict:
    """Accuracy and F1 of the HD (positive, 1) class; F1 is 0 when P + R = 0."""
    p = np.asarray(predictions, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if p.shape != y.shape:
        raise ValueError("predictions and labels differ in length")
    if p.size == 0:
        raise ValueError("no predictions")
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"accuracy": float(np.mean(p == y)), "precision": precision, "recall": recall, "f1_hd": f1}


def confusion_by_stage(prediction_sets, stages) -> dict[str, list[float] | None]:
    """Row-normalized (Healthy, HD) prediction fractions per true stage.

    ``prediction_sets`` is one prediction vector or a list of them (one per run);
    each run's table is computed separately and the runs are averaged with equal
    weight. Stages with no speakers map to ``None``.
    """
    stages = list(stages)
    for s in stages:
        if s not in STAGES:
            raise ValueError(f"unknown stage {s!r}")
    sets = np.asarray(prediction_sets, dtype=np.int64)
    if sets.ndim == 1:
        sets = sets[None]
    if sets.shape[1] != len(stages):
        raise ValueError("predictions and stages differ in length")
    st = np.array(stages)
    out = {}
    for s in STAGE_ROWS:
        mask = st == s
        if not mask.any():
            out[s] = None
            continue
        hd = float(np.mean([np.mean(run[mask]) for run in sets]))
        out[s] = [1.0 - hd, hd]
    return out


@dataclass(frozen=True)
class CochranResult:
    q: float
    df: int
    p: float


def cochrans_q(x) -> CochranResult:
    """Cochran's Q over a subjects x treatments 0/1 matrix."""
    x = np.asarray(x, dtype=np.int64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("need a subjects x treatments matrix with at least 2 treatments")
    if np.any((x != 0) & (x != 1)):
        raise ValueError("entries must be 0/1")
    k = x.shape[1]
    col = x.sum(axis=0)
    row = x.sum(axis=1)
    denom = k * row.sum() - np.sum(row**2)
    if denom == 0:
        return CochranResult(0.0, k - 1, 1.0)
    q = k * (k - 1) * np.sum((col - col.mean()) ** 2) / denom
    return CochranResult(float(q), k - 1, float(stats.chi2.sf(q, k - 1)))


def pooled_ttest(a, b) -> tuple[float, float]:
    """Classic two-sample t-test with pooled variance; returns (t, two-sided p)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each group needs at least 2 values")
    df = na + nb - 2
    sp2 = (np.sum((a - a.mean()) ** 2) + np.sum((b - b.mean()) ** 2)) / df
    se = np.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    diff = a.mean() - b.mean()
    if se == 0:
        if diff == 0:
            return 0.0, 1.0
        return float(np.copysign(np.inf, diff)), 0.0
    t = diff / se
    return float(t), float(2.0 * stats.t.sf(abs(t), df))


def feature_family(name: str) -> str | None:
    if name.startswith("gop"):
        return "gop"
    if name.startswith("pause"):
        return "pause"
    if name.startswith("filler"):
        return "filler"
    if name in ("phone_count", "phones_per_sec", "phones_per_word", "word_count", "words_per_sec",
                "duration"):
        return "rate"
    return None


def stage_significance(values, speaker_stages, speaker_of_row, names, alpha: float = 0.05) -> dict:
    """Per stage and family: percentage of features significantly up, down or unchanged vs HC.

    ``values`` is (utterances, features) pooled over speakers; ``speaker_of_row`` maps
    each row to its speaker and ``speaker_stages`` maps speakers to stages. Each stage
    comparison is its own Bonferroni family over all given features. Stages with data
    from fewer than 2 speakers are reported as unavailable (``None``).
    """
    values = np.asarray(values, dtype=float)
    row_stage = np.array([speaker_stages[s] for s in speaker_of_row])
    row_spk = np.array(speaker_of_row)
    hc = row_stage == "control"
    m = values.shape[1]
    table: dict = {"alpha": alpha, "n_features": m, "stages": {}, "features": {}}
    fams = [feature_family(n) for n in names]
    for stage in HD_STAGES:
        sel = row_stage == stage
        if len(set(row_spk[sel].tolist())) < 2 or len(set(row_spk[hc].tolist())) < 2:
            table["stages"][stage] = None
            continue
        calls = []
        for j in range(m):
            t, p = pooled_ttest(values[sel, j], values[hc, j])
            sig = p * m < alpha
            calls.append("increase" if sig and t > 0 else "decrease" if sig and t < 0 else "no change")
            table["features"].setdefault(names[j], {})[stage] = {"t": t, "p": p, "call": calls[-1]}
        per_family = {}
        for fam in FAMILIES:
            idx = [j for j in range(m) if fams[j] == fam]
            if not idx:
                continue
            per_family[fam] = {c: 100.0 * sum(calls[j] == c for j in idx) / len(idx)
                               for c in ("increase", "decrease", "no change")}
            per_family[fam]["n"] = len(idx)
        table["stages"][stage] = per_family
    return table
