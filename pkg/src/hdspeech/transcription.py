"""Transcription regimes (FA-ORAT, FA-GF, ASRT), word decoding and WER scoring."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .acoustic.graph import forced_graph, word_loop_graph
from .acoustic.viterbi import (AlignmentError, PhoneAlignment, Segment, best_path,
                               path_to_alignment, phone_loop_score, phone_loop_span_scores)
from .lexicon import Lexicon
from .transcript import FILLER, WORD

log = logging.getLogger(__name__)

FA_ORAT, FA_GF, ASRT = "FA-ORAT", "FA-GF", "ASRT"
MODES = (FA_ORAT, FA_GF, ASRT)


@dataclass
class UtteranceResult:
    index: int
    start: int  # frame offset of the utterance inside the recording
    end: int
    tokens: list[str]
    kinds: list[str]
    alignment: PhoneAlignment
    loop_score: float
    loop_span: list[float]  # best free phone-loop score over each aligned segment's frames
    frame_shift: float = 0.010

    @property
    def duration(self) -> float:
        return (self.end - self.start) * self.frame_shift


@dataclass
class TranscriptionResult:
    mode: str
    speaker_id: str
    utterances: list[UtteranceResult]
    flagged: list[tuple[int, str]] = field(default_factory=list)


def token_prons(lexicon: Lexicon, words) -> list[list[tuple[str, ...]]]:
    return [lexicon.prons(w) for w in words]


def _score_utterance(model, emit, alignment, index, start, tokens, kinds, shift):
    loop, _, _ = phone_loop_score(model, emit, emit=emit)
    spans = [(s.start, s.end) for s in alignment.segments]
    loop_span = phone_loop_span_scores(model, emit, spans).tolist()
    return UtteranceResult(index, start, start + alignment.frame_count, list(tokens), list(kinds),
                           alignment, loop, loop_span, shift)


def prepare_fa_orat(record, model, lexicon: Lexicon) -> TranscriptionResult:
    """Force-align every manually segmented utterance to its manual transcript."""
    feats = record.features
    out, flagged = [], []
    for i, utt in enumerate(record.transcript.utterances):
        a, b = record.utterance_frames(i)
        words = utt.words
        kinds = [t.kind for t in utt.tokens]
        try:
            emit = model.log_emissions(feats.frames[a:b])
            ali = _align(model, emit, token_prons(lexicon, words))
            out.append(_score_utterance(model, emit, ali, i, a, words, kinds, feats.frame_shift))
        except AlignmentError as exc:
            log.warning("speaker %s utterance %d excluded: %s", record.speaker_id, i, exc)
            flagged.append((i, str(exc)))
    return TranscriptionResult(FA_ORAT, record.speaker_id, out, flagged)


def _align(model, emit, prons) -> PhoneAlignment:
    if emit.shape[0] < model.n_states:
        raise AlignmentError("alignment infeasible")
    graph = forced_graph(model, prons, optional_silence=True)
    return path_to_alignment(graph, *best_path(graph, model, emit))


def prepare_fa_gf(record, passage, model, lexicon: Lexicon) -> TranscriptionResult:
    """Align the whole recording to the canonical passage, then split at sentence onsets."""
    words = [w for sent in passage for w in sent]
    offsets = np.cumsum([0] + [len(s) for s in passage])
    feats = record.features
    emit = model.log_emissions(feats.frames)
    ali = _align(model, emit, token_prons(lexicon, words))
    onsets = []
    for k in range(len(passage)):
        first = next(s for s in ali.segments if s.token == offsets[k])
        onsets.append(first.start)
    onsets.append(ali.frame_count)
    out = []
    for k, sent in enumerate(passage):
        a, b = onsets[k], onsets[k + 1]
        segs = [Segment(s.phone, s.start - a, s.end - a, s.log_likelihood, s.token - offsets[k] if s.token >= 0 else -1)
                for s in ali.segments if a <= s.start < b]
        sub = PhoneAlignment(segs, float(sum(s.log_likelihood for s in segs)), b - a)
        out.append(_score_utterance(model, emit[a:b], sub, k, a, sent, [WORD] * len(sent),
                                    feats.frame_shift))
    return TranscriptionResult(FA_GF, record.speaker_id, out)


class Decoder:
    """Exact Viterbi word-loop decoder with bigram scores (no pruning)."""

    def __init__(self, model, lexicon: Lexicon, lm, lm_scale: float = 1.0):
        self.model = model
        self.lexicon = lexicon
        self.vocab = [w for w in lm.vocab if w in lexicon]
        if not self.vocab:
            raise ValueError("decoder vocabulary is empty")
        prons = {w: lexicon.prons(w) for w in self.vocab}
        self.graph = word_loop_graph(model, self.vocab, prons, lm, lm_scale)

    def decode(self, frames=None, emit=None) -> list[str]:
        if emit is None:
            emit = self.model.log_emissions(getattr(frames, "frames", frames))
        _, states, _, starts = best_path(self.graph, self.model, emit)
        ids = self.graph.word_entry[states]
        return [self.vocab[w] for w in ids[starts & (ids >= 0)]]


def decode_utterance(obs, model, lexicon: Lexicon, lm, lm_scale: float = 1.0) -> list[str]:
    return Decoder(model, lexicon, lm, lm_scale).decode(obs)


def prepare_asrt(record, model, lexicon: Lexicon, lm, lm_scale: float = 1.0,
                 decoder: Decoder | None = None) -> TranscriptionResult:
    """Decode each manually segmented utterance, then force-align the hypothesis."""
    decoder = decoder or Decoder(model, lexicon, lm, lm_scale)
    feats = record.features
    out, flagged = [], []
    utts = record.transcript.utterances
    if not utts:
        log.warning("speaker %s: empty segmentation", record.speaker_id)
    for i in range(len(utts)):
        a, b = record.utterance_frames(i)
        try:
            emit = model.log_emissions(feats.frames[a:b])
            if emit.shape[0] < model.n_states:
                raise AlignmentError("alignment infeasible")
            words = decoder.decode(emit=emit)
            kinds = [FILLER if w in lexicon.filler_tokens else WORD for w in words]
            ali = _align(model, emit, token_prons(lexicon, words))
            out.append(_score_utterance(model, emit, ali, i, a, words, kinds, feats.frame_shift))
        except AlignmentError as exc:
            log.warning("speaker %s utterance %d excluded: %s", record.speaker_id, i, exc)
            flagged.append((i, str(exc)))
    return TranscriptionResult(ASRT, record.speaker_id, out, flagged)


# -- word error rate -----------------------------------------------------------


@dataclass(frozen=True)
class WerResult:
    wer: float
    ins: int
    dele: int
    sub: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.ins + self.dele + self.sub


def compute_wer(ref, hyp) -> WerResult:
    """Levenshtein alignment with unit costs; backtrace prefers sub, then ins, then del."""
    ref, hyp = list(ref), list(hyp)
    n, m = len(ref), len(hyp)
    if n == 0:
        if m:
            raise ValueError("undefined WER: empty reference with non-empty hypothesis")
        return WerResult(0.0, 0, 0, 0, 0)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i, j] = min(d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]), d[i, j - 1] + 1, d[i - 1, j] + 1)
    i, j = n, m
    ins = dele = sub = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            sub += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif j > 0 and d[i, j] == d[i, j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dele += 1
            i -= 1
    return WerResult(100.0 * (ins + dele + sub) / n, ins, dele, sub, n)
