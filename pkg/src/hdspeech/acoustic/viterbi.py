"""Viterbi search over state graphs: forced alignment, phone loop, span scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .graph import Graph, forced_graph, phone_loop_graph


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    phone: str
    start: int
    end: int
    log_likelihood: float
    token: int = -1

    @property
    def n_frames(self) -> int:
        return self.end - self.start


@dataclass
class PhoneAlignment:
    segments: list[Segment]
    total_log_likelihood: float
    frame_count: int

    @property
    def phone_sequence(self) -> list[str]:
        return [s.phone for s in self.segments]

    def check(self, tol: float = 1e-6) -> None:
        pos = 0
        for s in self.segments:
            if s.start != pos or s.end <= s.start:
                raise AssertionError("segments do not tile the frame range")
            pos = s.end
        if pos != self.frame_count:
            raise AssertionError("segments do not cover every frame")
        if abs(sum(s.log_likelihood for s in self.segments) - self.total_log_likelihood) > tol:
            raise AssertionError("segment log-likelihoods do not sum to the total")


@numba.njit(cache=True)
def _viterbi_kernel(emit, pdf, pred_src, pred_lp, init_lp, final_lp):
    T = emit.shape[0]
    S = pdf.shape[0]
    K = pred_src.shape[1]
    back = np.full((T, S), -1, dtype=np.int32)
    prev = np.empty(S)
    cur = np.empty(S)
    for s in range(S):
        prev[s] = init_lp[s] + emit[0, pdf[s]]
    for t in range(1, T):
        for s in range(S):
            best = -np.inf
            bk = -1
            for k in range(K):
                src = pred_src[s, k]
                if src < 0:
                    break
                v = prev[src] + pred_lp[s, k]
                if v > best:
                    best = v
                    bk = k
            back[t, s] = bk
            if bk >= 0:
                cur[s] = best + emit[t, pdf[s]]
            else:
                cur[s] = -np.inf
        for s in range(S):
            prev[s] = cur[s]
    best = -np.inf
    bs = -1
    for s in range(S):
        v = prev[s] + final_lp[s]
        if v > best:
            best = v
            bs = s
    states = np.full(T, -1, dtype=np.int64)
    arcs = np.full(T, -1, dtype=np.int64)
    if bs < 0:
        return best, states, arcs
    s = bs
    for t in range(T - 1, -1, -1):
        states[t] = s
        if t > 0:
            k = back[t, s]
            arcs[t] = k
            s = pred_src[s, k]
    return best, states, arcs


@numba.njit(cache=True)
def _span_kernel(emit, pdf, pred_src, pred_lp, init_lp, final_lp, starts, ends):
    """Best path score of the graph restricted to each [start, end) frame span."""
    S = pdf.shape[0]
    K = pred_src.shape[1]
    out = np.empty(starts.shape[0])
    prev = np.empty(S)
    cur = np.empty(S)
    for i in range(starts.shape[0]):
        a = starts[i]
        for s in range(S):
            prev[s] = init_lp[s] + emit[a, pdf[s]]
        for t in range(a + 1, ends[i]):
            for s in range(S):
                best = -np.inf
                for k in range(K):
                    src = pred_src[s, k]
                    if src < 0:
                        break
                    v = prev[src] + pred_lp[s, k]
                    if v > best:
                        best = v
                cur[s] = best + emit[t, pdf[s]]
            for s in range(S):
                prev[s] = cur[s]
        best = -np.inf
        for s in range(S):
            v = prev[s] + final_lp[s]
            if v > best:
                best = v
        out[i] = best
    return out


def best_path(graph: Graph, model, emit: np.ndarray):
    """Run Viterbi; returns (score, state path, per-frame scores, segment-start flags)."""
    if emit.shape[0] == 0:
        raise AlignmentError("alignment infeasible: no frames")
    lp = graph.arc_lp(model)
    score, states, arcs = _viterbi_kernel(np.ascontiguousarray(emit), graph.pdf, graph.pred_src,
                                          lp, graph.init_lp, graph.final_lp)
    if not np.isfinite(score):
        raise AlignmentError("alignment infeasible")
    T = len(states)
    frame_lp = emit[np.arange(T), graph.pdf[states]].copy()
    starts = np.zeros(T, dtype=bool)
    starts[0] = True
    frame_lp[0] += graph.init_lp[states[0]]
    if T > 1:
        st, ar = states[1:], arcs[1:]
        frame_lp[1:] += lp[st, ar]
        starts[1:] = graph.arc_boundary[st, ar]
    frame_lp[-1] += graph.final_lp[states[-1]]
    return float(score), states, frame_lp, starts


def path_to_alignment(graph: Graph, score, states, frame_lp, starts) -> PhoneAlignment:
    bounds = np.flatnonzero(starts).tolist() + [len(states)]
    csum = np.concatenate([[0.0], np.cumsum(frame_lp)])
    segments = []
    for a, e in zip(bounds[:-1], bounds[1:]):
        lab = graph.labels[graph.seg[states[a]]]
        segments.append(Segment(lab.phone, a, e, float(csum[e] - csum[a]), lab.token))
    return PhoneAlignment(segments, score, len(states))


def _as_token_prons(phones):
    """Accept a flat phone list (one phone per token) or a list of alternative lists."""
    if phones and isinstance(phones[0], str):
        return [[(p,)] for p in phones]
    return phones


def viterbi_align(model, obs, phones, optional_silence: bool = True, emit=None) -> PhoneAlignment:
    """Maximum-likelihood alignment of ``obs`` constrained to the given sequence.

    ``phones`` is either a flat list of phones or a list of tokens, each a list of
    alternative pronunciations.
    """
    if not phones:
        raise AlignmentError("empty phone sequence")
    frames = getattr(obs, "frames", obs)
    if emit is None:
        emit = model.log_emissions(frames)
    graph = forced_graph(model, _as_token_prons(phones), optional_silence)
    return path_to_alignment(graph, *best_path(graph, model, emit))


def phone_loop_score(model, obs, emit=None):
    """Best unconstrained phone-loop path: (log-likelihood, phone sequence, alignment)."""
    frames = getattr(obs, "frames", obs)
    if len(frames) < model.n_states:
        raise AlignmentError("alignment infeasible")
    if emit is None:
        emit = model.log_emissions(frames)
    graph = phone_loop_graph(model)
    ali = path_to_alignment(graph, *best_path(graph, model, emit))
    return ali.total_log_likelihood, ali.phone_sequence, ali


def phone_loop_span_scores(model, emit: np.ndarray, spans) -> np.ndarray:
    """Best phone-loop score over each frame span taken on its own."""
    spans = np.asarray(spans, dtype=np.int64).reshape(-1, 2)
    if len(spans) == 0:
        return np.zeros(0)
    graph = phone_loop_graph(model)
    return _span_kernel(np.ascontiguousarray(emit), graph.pdf, graph.pred_src, graph.arc_lp(model),
                        graph.init_lp, graph.final_lp, spans[:, 0].copy(), spans[:, 1].copy())
