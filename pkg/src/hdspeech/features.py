"""Utterance-level filler, pause, rate and GoP features; speaker normalization and summaries."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .transcript import FILLER
from .transcription import FA_GF

PAUSE_MIN_SECONDS = 0.150
VAR_EPS = 1e-12
GAIN_EPS = 1e-12
STAT_NAMES = ("max", "min", "mean", "sd", "range", "q25", "q50", "q75")


class FeatureError(ValueError):
    pass


def compute_gop(alignment, loop_span, silence: str = "SIL") -> list[tuple[str, float]]:
    """Per non-silence segment: (forced LL - best phone-loop LL over the same frames) / frames.

    ``loop_span[i]`` is the phone-loop score over segment ``i``'s frame span.
    """
    if len(loop_span) != len(alignment.segments):
        raise FeatureError("phone-loop scores do not match the alignment")
    out = []
    for seg, loop in zip(alignment.segments, loop_span):
        if seg.phone == silence:
            continue
        if seg.n_frames <= 0:
            raise FeatureError("zero-length segment")
        out.append((seg.phone, (seg.log_likelihood - loop) / seg.n_frames))
    return out


def _ratio(a: float, b: float) -> float:
    return a / b if b > 0 else 0.0


def _block(prefix: str, count: float, dur: float, n_words: int, n_phones: int, span: float) -> dict:
    return {
        f"{prefix}_count": float(count),
        f"{prefix}_per_sec": _ratio(count, span),
        f"{prefix}_per_word": _ratio(count, n_words),
        f"{prefix}_per_phone": _ratio(count, n_phones),
        f"{prefix}_dur": float(dur),
        f"{prefix}_dur_per_sec": _ratio(dur, span),
    }


def utterance_feature_names(mode: str, phones, silence: str = "SIL") -> list[str]:
    names = []
    if mode != FA_GF:
        names += list(_block("filler", 0, 0, 0, 0, 1))
    names += list(_block("pause", 0, 0, 0, 0, 1))
    names += ["phone_count", "phones_per_sec", "phones_per_word", "word_count", "words_per_sec",
              "duration", "gop_mean", "gop_min", "gop_sd"]
    names += [f"gop_{p}" for p in phones if p != silence]
    return names


def extract_utterance_features(utt, mode: str, phones, silence: str = "SIL",
                               pause_min: float = PAUSE_MIN_SECONDS) -> dict[str, float]:
    """Feature dictionary for one transcribed utterance, keyed by stable names.

    Durations are measured over the speech span (first to last non-silence segment).
    Pauses are silences of at least 150 ms lying strictly between spoken segments.
    Fillers are excluded from word and phone counts.
    """
    segs = utt.alignment.segments
    shift = utt.frame_shift
    speech = [i for i, s in enumerate(segs) if s.phone != silence]
    if utt.alignment.frame_count <= 0:
        raise FeatureError("utterance duration must be positive")
    if speech:
        span = (segs[speech[-1]].end - segs[speech[0]].start) * shift
    else:
        span = utt.alignment.frame_count * shift
    filler_pos = {i for i, k in enumerate(utt.kinds) if k == FILLER}
    n_words = len(utt.tokens) - len(filler_pos)
    spoken = [segs[i] for i in speech]
    n_phones = sum(1 for s in spoken if s.token not in filler_pos)
    feats: dict[str, float] = {}
    if mode != FA_GF:
        filler_dur = sum(s.n_frames for s in spoken if s.token in filler_pos) * shift
        feats.update(_block("filler", len(filler_pos), filler_dur, n_words, n_phones, span))
    pauses = []
    if speech:
        for s in segs[speech[0]:speech[-1]]:
            if s.phone == silence and s.n_frames * shift >= pause_min - 1e-9:
                pauses.append(s.n_frames * shift)
    feats.update(_block("pause", len(pauses), sum(pauses), n_words, n_phones, span))
    feats.update({
        "phone_count": float(n_phones),
        "phones_per_sec": _ratio(n_phones, span),
        "phones_per_word": _ratio(n_phones, n_words),
        "word_count": float(n_words),
        "words_per_sec": _ratio(n_words, span),
        "duration": float(span),
    })
    gop = compute_gop(utt.alignment, utt.loop_span, silence)
    vals = np.array([g for _, g in gop]) if gop else np.zeros(1)
    feats["gop_mean"] = float(vals.mean())
    feats["gop_min"] = float(vals.min())
    feats["gop_sd"] = float(vals.std())
    by_phone: dict[str, list[float]] = {}
    for p, g in gop:
        by_phone.setdefault(p, []).append(g)
    for p in phones:
        if p != silence:
            # absent phones take the utterance mean so the vector stays fixed-length
            feats[f"gop_{p}"] = float(np.mean(by_phone[p])) if p in by_phone else feats["gop_mean"]
    return feats


def utterance_matrix(result, mode: str, phones, silence: str = "SIL",
                     pause_min: float = PAUSE_MIN_SECONDS) -> tuple[list[str], np.ndarray]:
    names = utterance_feature_names(mode, phones, silence)
    rows = []
    for utt in result.utterances:
        f = extract_utterance_features(utt, mode, phones, silence, pause_min)
        rows.append([f[n] for n in names])
    return names, np.array(rows, dtype=float).reshape(len(rows), len(names))


def znormalize_speaker(x: np.ndarray) -> np.ndarray:
    """Per-column z-score with the population SD; zero-SD columns become 0."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 1:
        raise FeatureError("speaker has no utterances")
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    out = np.zeros_like(x)
    ok = sd > 0
    out[:, ok] = (x[:, ok] - mu[ok]) / sd[ok]
    return out


def summarize_speaker(x: np.ndarray) -> np.ndarray:
    """Eight statistics per column, laid out feature-major (f0 stats, f1 stats, ...)."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 1:
        raise FeatureError("speaker has no utterances")
    mx, mn = x.max(axis=0), x.min(axis=0)
    q25, q50, q75 = np.quantile(x, [0.25, 0.5, 0.75], axis=0, method="linear")
    stats = np.stack([mx, mn, x.mean(axis=0), x.std(axis=0), mx - mn, q25, q50, q75], axis=1)
    return stats.reshape(-1)


def summary_names(names) -> list[str]:
    return [f"{n}:{s}" for n in names for s in STAT_NAMES]


def _entropy(y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    p = np.bincount(y, minlength=2) / len(y)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def information_gain(x: np.ndarray, y: np.ndarray) -> float:
    """Class entropy minus entropy after splitting ``x`` at its median (x > median).

    When no value exceeds the median (e.g. a 0/1 column with mostly ones) the split
    becomes x >= median so a two-valued column still separates.
    """
    y = np.asarray(y, dtype=np.int64)
    x = np.asarray(x)
    med = np.median(x)
    hi = x > med
    if not hi.any():
        hi = x >= med
    cond = sum(m.mean() * _entropy(y[m]) for m in (hi, ~hi) if m.any())
    return _entropy(y) - cond


def filter_features(x: np.ndarray, y, var_eps: float = VAR_EPS, gain_eps: float = GAIN_EPS) -> np.ndarray:
    """Indices of columns with non-zero variance and non-zero information gain."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(set(y.tolist())) < 2:
        raise FeatureError("feature filtering needs both classes")
    keep = [j for j in range(x.shape[1])
            if x[:, j].var() >= var_eps and information_gain(x[:, j], y) >= gain_eps]
    if not keep:
        raise FeatureError("no informative features")
    return np.array(keep, dtype=np.int64)


@dataclass
class SpeakerFeatures:
    """Dynamic (normalized per-utterance) and static (summary) features of one speaker."""

    speaker_id: str
    label: str
    stage: str
    names: list[str]
    raw: np.ndarray
    dynamic: np.ndarray

    @property
    def static(self) -> np.ndarray:
        return summarize_speaker(self.dynamic)

    @property
    def static_names(self) -> list[str]:
        return summary_names(self.names)


def speaker_features(record, result, mode: str, phones, silence: str = "SIL",
                     pause_min: float = PAUSE_MIN_SECONDS) -> SpeakerFeatures:
    names, raw = utterance_matrix(result, mode, phones, silence, pause_min)
    if raw.shape[0] == 0:
        raise FeatureError(f"speaker {record.speaker_id}: no usable utterances")
    return SpeakerFeatures(record.speaker_id, record.label, record.stage, names, raw,
                           znormalize_speaker(raw))


def write_feature_csv(path, names, rows, row_ids) -> None:
    """One row per ``row_ids`` entry (speaker or speaker/utterance) under a stable header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + list(names))
        for rid, row in zip(row_ids, rows):
            w.writerow([rid] + [repr(float(v)) for v in row])
