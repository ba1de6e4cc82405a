"""Synthetic read-speech corpora emitted directly in feature space from a generating HMM.

Every speaker reads the passage, one utterance per sentence. Stage-dependent settings
control fillers, long pauses, pronunciation errors, speaking rate and how far phone
realizations drift toward other phones (which lowers GoP). The generator logs every
injected event and boundary so downstream stages can be checked against it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..acoustic.model import SIL, MonophoneHmmSet, single_gaussian_model
from ..corpus import STAGES, Corpus, SpeakerRecord
from ..dsp import FeatureMatrix
from ..lexicon import DEFAULT_PHONES, FILLERS, Lexicon, parse_lexicon
from ..transcript import FILLER, WORD, AnnotatedTranscript, Token, Utterance

FRAME_SHIFT = 0.010


class SpecError(ValueError):
    pass


@dataclass
class StageParams:
    pause_rate: float = 0.0       # long pauses per word (Poisson mean scales with sentence length)
    filler_rate: float = 0.0      # fillers per word
    error_rate: float = 0.0       # mispronounced words per word
    duration_scale: float = 1.0   # multiplies mean state duration
    distort_prob: float = 0.0     # chance a phone is realized off-target
    distort_amount: float = 0.0   # interpolation weight toward another phone's means

    def check(self, stage: str) -> None:
        for k, v in asdict(self).items():
            if not np.isfinite(v) or v < 0:
                raise SpecError(f"stage {stage}: {k} must be a non-negative number, got {v}")
        if self.duration_scale <= 0 or self.distort_prob > 1 or self.distort_amount > 1:
            raise SpecError(f"stage {stage}: duration_scale > 0 and probabilities <= 1 required")


@dataclass
class SynthSpec:
    speakers_per_stage: dict = field(default_factory=lambda: {"control": 10, "premanifest": 3,
                                                              "early": 4, "late": 3})
    stages: dict = field(default_factory=dict)
    n_sentences: int | None = None
    dim: int = 52
    mean_scale: float = 0.8
    noise_sd: float = 1.0
    state_frames: float = 3.0       # mean frames per HMM state
    pause_frames: tuple = (15, 40)  # long-pause length range, inclusive
    short_sil_prob: float = 0.1     # chance of a sub-threshold gap between two tokens
    short_sil_frames: tuple = (3, 8)
    edge_sil_frames: tuple = (5, 10)
    speaker_jitter: float = 0.2     # coefficient of variation of per-speaker rate multipliers
    difficulty_power: float = 2.0   # event rates scale with (sentence length / mean length) ** power

    def __post_init__(self):
        self.stages = {s: (p if isinstance(p, StageParams) else StageParams(**p))
                       for s, p in self.stages.items()}
        for s in STAGES:
            self.stages.setdefault(s, StageParams())
        self.pause_frames = tuple(self.pause_frames)
        self.short_sil_frames = tuple(self.short_sil_frames)
        self.edge_sil_frames = tuple(self.edge_sil_frames)

    def check(self) -> None:
        for s, n in self.speakers_per_stage.items():
            if s not in STAGES:
                raise SpecError(f"unknown stage {s!r}")
            if int(n) < 0:
                raise SpecError(f"negative speaker count for {s}")
        for s, p in self.stages.items():
            if s not in STAGES:
                raise SpecError(f"unknown stage {s!r}")
            p.check(s)
        for name in ("mean_scale", "noise_sd", "state_frames"):
            if not getattr(self, name) > 0:
                raise SpecError(f"{name} must be positive")
        if self.state_frames < 1:
            raise SpecError("state_frames must be at least 1")
        if self.speaker_jitter < 0 or not 0 <= self.short_sil_prob <= 1:
            raise SpecError("speaker_jitter and short_sil_prob must be non-negative")
        lo, hi = self.pause_frames
        if not 0 < lo <= hi or self.short_sil_frames[1] >= lo:
            raise SpecError("pause lengths must exceed short-silence lengths")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stages"] = {s: asdict(p) for s, p in self.stages.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(**d)


def separable_spec(n_speakers: int = 20, n_sentences: int | None = 4) -> SynthSpec:
    """Large, clean effects: controls never pause, hesitate or err."""
    n_hd = n_speakers // 2
    hd = StageParams(pause_rate=0.25, filler_rate=0.2, error_rate=0.06, duration_scale=1.6,
                     distort_prob=0.4, distort_amount=0.7)
    per = [n_hd // 3 + (i < n_hd % 3) for i in range(3)]
    return SynthSpec({"control": n_speakers - n_hd, "premanifest": per[0], "early": per[1],
                      "late": per[2]},
                     {"premanifest": hd, "early": hd, "late": hd}, n_sentences=n_sentences)


def graded_spec(n_per_stage: int = 4, n_sentences: int | None = 4) -> SynthSpec:
    """Effects that grow from premanifest through early to late."""
    def level(a):
        return StageParams(pause_rate=0.2 * a, filler_rate=0.15 * a, error_rate=0.06 * a,
                           duration_scale=1.0 + 0.5 * a, distort_prob=0.4 * a, distort_amount=0.7)
    return SynthSpec({"control": 2 * n_per_stage, "premanifest": n_per_stage,
                      "early": n_per_stage, "late": n_per_stage},
                     {"premanifest": level(0.08), "early": level(0.4), "late": level(1.0)},
                     n_sentences=n_sentences)


def noiseless_spec(n_speakers: int = 2, n_sentences: int | None = 2) -> SynthSpec:
    return SynthSpec({"control": n_speakers}, {}, n_sentences=n_sentences, short_sil_prob=0.0,
                     speaker_jitter=0.0)


def load_default_passage(n_sentences: int | None = None) -> list[list[str]]:
    text = resources.files("hdspeech").joinpath("data", "grandfather.txt").read_text()
    sents = [line.split() for line in text.splitlines() if line.strip()]
    return sents[:n_sentences] if n_sentences else sents


def load_default_lexicon() -> Lexicon:
    text = resources.files("hdspeech").joinpath("data", "grandfather.dict").read_text()
    return parse_lexicon(text, DEFAULT_PHONES, "grandfather.dict")


@dataclass
class SyntheticCorpus:
    corpus: Corpus
    model: MonophoneHmmSet
    metadata: dict
    spec: SynthSpec
    seed: int


def generating_model(spec: SynthSpec, seed: int, phones=DEFAULT_PHONES) -> MonophoneHmmSet:
    rng = np.random.default_rng([seed, 0])
    means = rng.normal(0.0, spec.mean_scale, size=(len(phones), 3, spec.dim))
    stay = 1.0 - 1.0 / spec.state_frames
    return single_gaussian_model(list(phones), means, spec.noise_sd**2, 3, stay, SIL)


def _emit(rng, model, phone, frames_per_state, other=None, amount=0.0):
    out = []
    for j, n in enumerate(frames_per_state):
        mu = model.gmms[model.pdf(phone, j)].means[0]
        if other is not None:
            mu = (1 - amount) * mu + amount * model.gmms[model.pdf(other, j)].means[0]
        out.append(mu + model.gmms[model.pdf(phone, j)].variances[0] ** 0.5 * rng.standard_normal((n, len(mu))))
    return out


def _speaker(rng, spec, model, passage, lexicon, params: StageParams, sid: str):
    """Generate one recording; returns (frames, transcript, metadata)."""
    phones = [p for p in model.phones if p != SIL]
    jitter = (lambda: rng.gamma(1 / spec.speaker_jitter**2, spec.speaker_jitter**2)) \
        if spec.speaker_jitter > 0 else (lambda: 1.0)
    rates = {k: getattr(params, k) * jitter() for k in ("pause_rate", "filler_rate", "error_rate")}
    dur_scale = params.duration_scale * (jitter() ** 0.25 if spec.speaker_jitter > 0 else 1.0)
    mean_dur = spec.state_frames * dur_scale
    chunks, utts, meta_utts = [], [], []
    t = 0

    def add_segment(phone, token, segs, other=None, amount=0.0, n_frames=None):
        nonlocal t
        if n_frames is None:
            per_state = [1 + int(rng.poisson(mean_dur - 1)) for _ in range(3)]
        else:
            base = [n_frames // 3] * 3
            for j in range(n_frames % 3):
                base[j] += 1
            per_state = base
        chunks.extend(_emit(rng, model, phone, per_state, other, amount))
        n = sum(per_state)
        segs.append([phone, t, t + n, token])
        t += n

    lengths = np.array([len(x) for x in passage], dtype=float)
    weight = (lengths / lengths.mean()) ** spec.difficulty_power
    weight = weight / weight.mean()
    for k, sent in enumerate(passage):
        start = t
        wk = weight[k]
        distort_prob = min(1.0, params.distort_prob * wk)
        tokens: list[Token] = []
        # token list with fillers dropped into random gaps
        words = list(sent)
        n_fill = int(rng.poisson(rates["filler_rate"] * wk * len(words)))
        fill_at = sorted(rng.integers(0, len(words) + 1, size=n_fill).tolist())
        seq = []
        fi = 0
        for i in range(len(words) + 1):
            while fi < n_fill and fill_at[fi] == i:
                seq.append((FILLER, sorted(FILLERS)[int(rng.integers(len(FILLERS)))]))
                fi += 1
            if i < len(words):
                seq.append((WORD, words[i]))
        word_pos = [i for i, (kind, _) in enumerate(seq) if kind == WORD]
        n_err = min(int(rng.poisson(rates["error_rate"] * wk * len(words))), len(word_pos))
        err_pos = set(rng.choice(word_pos, size=n_err, replace=False).tolist()) if n_err else set()
        gaps = len(seq) - 1
        n_pause = min(int(rng.poisson(rates["pause_rate"] * wk * len(words))), gaps)
        pause_gaps = set(rng.choice(gaps, size=n_pause, replace=False).tolist()) if n_pause else set()
        segs, pauses, fillers, errors = [], [], [], []
        lo, hi = spec.edge_sil_frames
        add_segment(SIL, -1, segs, n_frames=int(rng.integers(lo, hi + 1)))
        for i, (kind, w) in enumerate(seq):
            if kind == FILLER:
                pron = FILLERS[w]
                fillers.append({"index": i, "token": w, "start": t})
                tokens.append(Token(w, FILLER))
            else:
                prons = lexicon.prons(w)
                pron = prons[int(rng.integers(len(prons)))]
                if i in err_pos:
                    pos = int(rng.integers(len(pron)))
                    sub = [p for p in phones if p != pron[pos]]
                    pron = pron[:pos] + (sub[int(rng.integers(len(sub)))],) + pron[pos + 1:]
                    errors.append({"index": i, "word": w, "phones": list(pron)})
                    tokens.append(Token(w, WORD, w, tuple(pron)))
                else:
                    tokens.append(Token(w))
            for ph in pron:
                other, amount = None, 0.0
                if distort_prob > 0 and rng.random() < distort_prob:
                    other = phones[int(rng.integers(len(phones)))]
                    amount = params.distort_amount
                add_segment(ph, i, segs, other, amount)
            if kind == FILLER:
                fillers[-1]["end"] = t
            if i < gaps:
                if i in pause_gaps:
                    a, b = spec.pause_frames
                    add_segment(SIL, -1, segs, n_frames=int(rng.integers(a, b + 1)))
                    pauses.append([segs[-1][1], segs[-1][2]])
                elif rng.random() < spec.short_sil_prob:
                    a, b = spec.short_sil_frames
                    add_segment(SIL, -1, segs, n_frames=int(rng.integers(a, b + 1)))
        add_segment(SIL, -1, segs, n_frames=int(rng.integers(lo, hi + 1)))
        utts.append(Utterance(round(start * FRAME_SHIFT, 3), round(t * FRAME_SHIFT, 3), tokens))
        meta_utts.append({"sentence": k, "start": start, "end": t,
                          "tokens": [tok.render() for tok in tokens], "segments": segs,
                          "pauses": pauses, "fillers": fillers, "errors": errors})
    frames = np.concatenate(chunks)
    meta = {"speaker_id": sid, "rates": rates, "duration_scale": dur_scale, "utterances": meta_utts}
    return frames, AnnotatedTranscript(utts), meta


def generate_synthetic_corpus(spec: SynthSpec, seed: int) -> SyntheticCorpus:
    spec.check()
    passage = load_default_passage(spec.n_sentences)
    lexicon = load_default_lexicon()
    words = {w for s in passage for w in s}
    lexicon = Lexicon({w: list(p) for w, p in lexicon.entries.items() if w in words}).with_fillers()
    model = generating_model(spec, seed)
    records, meta = [], {}
    n = 0
    for stage in STAGES:
        for _ in range(int(spec.speakers_per_stage.get(stage, 0))):
            n += 1
            sid = f"S{n:02d}"
            rng = np.random.default_rng([seed, 1, n])
            frames, transcript, m = _speaker(rng, spec, model, passage, lexicon, spec.stages[stage], sid)
            label = "HC" if stage == "control" else "HD"
            m.update(label=label, stage=stage)
            records.append(SpeakerRecord(sid, label, stage, FeatureMatrix(frames, FRAME_SHIFT), transcript))
            meta[sid] = m
    corpus = Corpus(records, passage, lexicon, tuple(model.phones), f"synthetic:{seed}")
    return SyntheticCorpus(corpus, model, meta, spec, seed)


def write_synthetic_corpus(synth: SyntheticCorpus, out_dir) -> Path:
    """Write manifest, passage, lexicon, per-speaker features/transcripts and metadata."""
    out = Path(out_dir)
    (out / "speakers").mkdir(parents=True, exist_ok=True)
    c = synth.corpus
    (out / "passage.txt").write_text("".join(" ".join(s) + "\n" for s in c.passage))
    base = Lexicon({w: p for w, p in c.lexicon.entries.items() if w not in c.lexicon.filler_tokens})
    base.save(out / "lexicon.dict")
    entries = []
    for r in c.speakers:
        np.save(out / "speakers" / f"{r.speaker_id}.npy", r.features.frames, allow_pickle=False)
        r.transcript.save(out / "speakers" / f"{r.speaker_id}.txt")
        entries.append({"id": r.speaker_id, "label": r.label, "stage": r.stage,
                        "features": f"speakers/{r.speaker_id}.npy",
                        "transcript": f"speakers/{r.speaker_id}.txt"})
    manifest = {"sample_rate": 16000, "passage": "passage.txt", "lexicon": "lexicon.dict",
                "phones": list(c.phones), "speakers": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out / "metadata.json").write_text(json.dumps(
        {"seed": synth.seed, "spec": synth.spec.to_dict(), "speakers": synth.metadata},
        indent=1, sort_keys=True) + "\n")
    synth.model.save(out / "generating_model.npz")
    return out / "manifest.json"


__all__ = ["StageParams", "SynthSpec", "SyntheticCorpus", "SpecError", "separable_spec",
           "graded_spec", "noiseless_spec", "generate_synthetic_corpus", "write_synthetic_corpus",
           "generating_model", "load_default_passage", "load_default_lexicon"]
