"""State graphs for forced alignment, the free phone loop and the word-loop decoder.

Every graph state emits through one pdf of the model. Arcs carry the pdf whose
transition probability applies (stay or advance) plus an additive extra score
(language model terms). Predecessor lists are sorted by source index so that the
Viterbi kernel's first-maximum rule prefers the lower-indexed predecessor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STAY, ADVANCE = 0, 1


@dataclass
class SegmentLabel:
    phone: str
    token: int  # token position for forced graphs, vocabulary id for the decoder, -1 for silence


@dataclass
class Graph:
    pdf: np.ndarray
    pos: np.ndarray
    seg: np.ndarray
    pred_src: np.ndarray
    arc_pdf: np.ndarray
    arc_kind: np.ndarray
    arc_extra: np.ndarray
    arc_boundary: np.ndarray
    init_lp: np.ndarray
    final_lp: np.ndarray
    labels: list[SegmentLabel]
    word_entry: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.pdf)

    def arc_lp(self, model) -> np.ndarray:
        key = id(model), model.trans.tobytes()
        hit = self._cache.get("lp")
        if hit is not None and hit[0] == key:
            return hit[1]
        with np.errstate(divide="ignore"):
            logt = np.log(model.trans)
        valid = self.pred_src >= 0
        lp = np.full(self.pred_src.shape, -np.inf)
        lp[valid] = logt[self.arc_pdf[valid], self.arc_kind[valid]] + self.arc_extra[valid]
        self._cache["lp"] = (key, lp)
        return lp


class GraphBuilder:
    def __init__(self, model):
        self.model = model
        self.pdf: list[int] = []
        self.pos: list[int] = []
        self.seg: list[int] = []
        self.labels: list[SegmentLabel] = []
        self.arcs: dict[int, list[tuple]] = {}
        self.init: dict[int, float] = {}
        self.final: dict[int, float] = {}

    def _arc(self, src, dst, pdf, kind, extra=0.0, boundary=False):
        self.arcs.setdefault(dst, []).append((src, boundary, pdf, kind, extra))

    def add_phone(self, phone: str, token: int) -> tuple[int, int]:
        n = self.model.n_states
        base_pdf = self.model.pdf(phone, 0)
        seg_id = len(self.labels)
        self.labels.append(SegmentLabel(phone, token))
        first = len(self.pdf)
        for j in range(n):
            s = first + j
            self.pdf.append(base_pdf + j)
            self.pos.append(j)
            self.seg.append(seg_id)
            if j > 0:
                self._arc(s - 1, s, base_pdf + j - 1, ADVANCE)
            self._arc(s, s, base_pdf + j, STAY)
        return first, first + n - 1

    def add_chain(self, phones, token: int) -> tuple[int, int]:
        entry = prev_exit = None
        for ph in phones:
            e, x = self.add_phone(ph, token)
            if prev_exit is None:
                entry = e
            else:
                self.connect(prev_exit, e)
            prev_exit = x
        return entry, prev_exit

    def connect(self, exit_state: int, entry_state: int, extra: float = 0.0) -> None:
        self._arc(exit_state, entry_state, self.pdf[exit_state], ADVANCE, extra, boundary=True)

    def build(self) -> Graph:
        S = len(self.pdf)
        K = max(len(v) for v in self.arcs.values())
        pred_src = np.full((S, K), -1, dtype=np.int64)
        arc_pdf = np.zeros((S, K), dtype=np.int64)
        arc_kind = np.zeros((S, K), dtype=np.int64)
        arc_extra = np.zeros((S, K))
        arc_boundary = np.zeros((S, K), dtype=bool)
        for dst, lst in self.arcs.items():
            for k, (src, boundary, pdf, kind, extra) in enumerate(sorted(lst, key=lambda a: (a[0], a[1]))):
                pred_src[dst, k] = src
                arc_boundary[dst, k] = boundary
                arc_pdf[dst, k] = pdf
                arc_kind[dst, k] = kind
                arc_extra[dst, k] = extra
        init_lp = np.full(S, -np.inf)
        final_lp = np.full(S, -np.inf)
        for s, v in self.init.items():
            init_lp[s] = v
        for s, v in self.final.items():
            final_lp[s] = v
        return Graph(np.array(self.pdf, dtype=np.int64), np.array(self.pos, dtype=np.int64),
                     np.array(self.seg, dtype=np.int64), pred_src, arc_pdf, arc_kind, arc_extra,
                     arc_boundary, init_lp, final_lp, list(self.labels))


def forced_graph(model, token_prons, optional_silence: bool = True) -> Graph:
    """Graph for a token sequence; each token is a list of alternative phone strings.

    With ``optional_silence`` a skippable silence phone may precede the first token,
    follow the last one and separate any two tokens, at no extra cost.
    """
    if not token_prons:
        raise ValueError("empty phone sequence")
    sil = model.silence if optional_silence else None
    b = GraphBuilder(model)
    prev_exits: list[int] = []
    if sil is not None:
        e, x = b.add_phone(sil, -1)
        b.init[e] = 0.0
        lead = [x]
    else:
        lead = []
    for i, prons in enumerate(token_prons):
        if not prons or any(len(p) == 0 for p in prons):
            raise ValueError(f"token {i} has an empty pronunciation")
        exits = []
        for pron in dict.fromkeys(tuple(p) for p in prons):
            e, x = b.add_chain(pron, i)
            if i == 0:
                b.init[e] = 0.0
                for src in lead:
                    b.connect(src, e)
            else:
                for src in prev_exits:
                    b.connect(src, e)
            exits.append(x)
        if sil is not None:
            e, x = b.add_phone(sil, -1)
            for src in exits:
                b.connect(src, e)
            exits = exits + [x]
        prev_exits = exits
    for s in prev_exits:
        b.final[s] = 0.0
    return b.build()


def phone_loop_graph(model) -> Graph:
    """Free loop: any phone may follow any phone; entering a phone costs nothing extra."""
    if model._loop_graph is None:
        b = GraphBuilder(model)
        ends = [b.add_phone(p, -1) for p in model.phones]
        for e, _ in ends:
            b.init[e] = 0.0
            for _, x in ends:
                b.connect(x, e)
        for _, x in ends:
            b.final[x] = 0.0
        model._loop_graph = b.build()
    return model._loop_graph


def word_loop_graph(model, vocab, prons, lm, lm_scale: float = 1.0) -> Graph:
    """Decoder graph over ``vocab`` with bigram scores on word-to-word arcs.

    ``prons[w]`` lists the pronunciations of word ``w``. Each pronunciation owns a
    skippable trailing silence so the bigram history survives pauses. Labels carry
    the vocabulary index of the word.
    """
    b = GraphBuilder(model)
    sil = model.silence
    branches = []  # (word id, entry, exits)
    lead = None
    if sil is not None:
        e, x = b.add_phone(sil, -1)
        b.init[e] = 0.0
        lead = x
    for wid, w in enumerate(vocab):
        for pron in dict.fromkeys(tuple(p) for p in prons[w]):
            e, x = b.add_chain(pron, wid)
            exits = [x]
            if sil is not None:
                se, sx = b.add_phone(sil, -1)
                b.connect(x, se)
                exits.append(sx)
            branches.append((wid, e, exits))
    for wid, e, _ in branches:
        start = lm_scale * lm.logprob(vocab[wid], lm.BOS)
        b.init[e] = start
        if lead is not None:
            b.connect(lead, e, start)
        for src_wid, _, exits in branches:
            extra = lm_scale * lm.logprob(vocab[wid], vocab[src_wid])
            for x in exits:
                b.connect(x, e, extra)
    for wid, _, exits in branches:
        end = lm_scale * lm.logprob(lm.EOS, vocab[wid])
        for x in exits:
            b.final[x] = end
    g = b.build()
    g.word_entry = np.full(g.n_states, -1, dtype=np.int64)
    for wid, e, _ in branches:
        g.word_entry[e] = wid
    return g
