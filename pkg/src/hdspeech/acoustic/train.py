"""Flat start and Viterbi-style EM training with binary mixture splitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .graph import forced_graph
from .model import SIL, Gmm, MonophoneHmmSet
from .viterbi import best_path

log = logging.getLogger(__name__)

VAR_FLOOR_SCALE = 1e-3
MIN_VAR_FLOOR = 1e-8
TRANS_FLOOR = 0.01
SPLIT_PERTURB = 0.2
OCC_POWER = 0.2
FRAMES_PER_GAUSSIAN = 10
MAX_GAUSSIANS = 500


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainingUtterance:
    """Frames plus the token sequence; each token lists alternative phone strings."""
    frames: np.ndarray
    tokens: list
    uid: str = ""

    @classmethod
    def from_phones(cls, frames, phones, uid=""):
        return cls(np.asarray(getattr(frames, "frames", frames), dtype=float),
                   [[(p,)] for p in phones], uid)


@dataclass
class TrainingHistory:
    log_likelihood: list[float] = field(default_factory=list)
    stage: list[int] = field(default_factory=list)
    total_gaussians: list[int] = field(default_factory=list)

    def within_stage_monotone(self, slack: float = 1e-6) -> bool:
        ll, st = self.log_likelihood, self.stage
        return all(ll[i] >= ll[i - 1] - slack for i in range(1, len(ll)) if st[i] == st[i - 1])


def flat_start(corpus, phones=None, n_states: int = 3, silence: str = SIL) -> MonophoneHmmSet:
    """One Gaussian per state at the global mean/variance, uniform legal transitions."""
    if not corpus:
        raise ValueError("empty corpus")
    seen = []
    for utt in corpus:
        for tok in utt.tokens:
            for pron in tok:
                seen.extend(pron)
    phone_set = list(phones) if phones is not None else sorted(set(seen) | {silence})
    missing = set(seen) - set(phone_set)
    if missing:
        raise ValueError(f"phones not in phone set: {sorted(missing)}")
    data = np.concatenate([u.frames for u in corpus])
    mean = data.mean(axis=0)
    var = data.var(axis=0)
    floor = np.maximum(VAR_FLOOR_SCALE * var, MIN_VAR_FLOOR)
    var = np.maximum(var, floor)
    n = len(phone_set) * n_states
    gmms = [Gmm(np.ones(1), mean[None].copy(), var[None].copy()) for _ in range(n)]
    model = MonophoneHmmSet(phone_set, gmms, np.full((n, 2), 0.5), floor, n_states, silence)
    model.is_flat = True
    return model


def equal_alignment(model, utt: TrainingUtterance) -> np.ndarray:
    """Pdf path spreading frames evenly over the first pronunciation of every token."""
    phones = [tok[0] for tok in utt.tokens]
    flat = [p for pron in phones for p in pron]
    if model.silence is not None:
        flat = [model.silence] + flat + [model.silence]
    pdfs = np.array([model.pdf(p, j) for p in flat for j in range(model.n_states)])
    T = len(utt.frames)
    if T < len(pdfs) and model.silence is not None:
        pdfs = pdfs[model.n_states:-model.n_states]
    if T < len(pdfs):
        raise TrainingError("utterance too short for equal alignment")
    idx = (np.arange(T) * len(pdfs)) // T
    return pdfs[idx]


def _state_paths(model, corpus, graphs, use_equal):
    """Align every utterance; returns pdf paths, stay flags and total log-likelihood."""
    total = 0.0
    paths = []
    for utt, g in zip(corpus, graphs):
        emit = model.log_emissions(utt.frames)
        score, states, _, _ = best_path(g, model, emit)
        total += score
        if use_equal:
            pdfs = equal_alignment(model, utt)
            stay = np.concatenate([[False], pdfs[1:] == pdfs[:-1]])
        else:
            pdfs = g.pdf[states]
            stay = np.concatenate([[False], states[1:] == states[:-1]])
        paths.append((pdfs, stay))
    if not np.isfinite(total):
        raise TrainingError("training diverged")
    return paths, total


def _reestimate(model, corpus, paths):
    n_pdf = model.n_pdfs
    X = np.concatenate([u.frames for u in corpus])
    ids = np.concatenate([p for p, _ in paths])
    # transitions: frame t's stay flag refers to the pdf at t-1
    stay_cnt = np.zeros(n_pdf)
    adv_cnt = np.zeros(n_pdf)
    for pdfs, stay in paths:
        if len(pdfs) > 1:
            np.add.at(stay_cnt, pdfs[:-1][stay[1:]], 1)
            np.add.at(adv_cnt, pdfs[:-1][~stay[1:]], 1)
    tot = stay_cnt + adv_cnt
    seen = tot > 0
    p_stay = np.clip(stay_cnt[seen] / tot[seen], TRANS_FLOOR, 1.0 - TRANS_FLOOR)
    model.trans[seen, 0] = p_stay
    model.trans[seen, 1] = 1.0 - p_stay

    order = np.argsort(ids, kind="stable")
    bounds = np.searchsorted(ids[order], np.arange(n_pdf + 1))
    occ = np.zeros(n_pdf)
    for k in range(n_pdf):
        rows = order[bounds[k]:bounds[k + 1]]
        occ[k] = len(rows)
        if len(rows) == 0:
            continue
        model.gmms[k] = _gmm_em_step(model.gmms[k], X[rows], model.var_floor)
    model.invalidate()
    model.is_flat = False
    return occ


def _gmm_em_step(g: Gmm, x: np.ndarray, floor: np.ndarray) -> Gmm:
    if g.n_components == 1:
        resp = np.ones((len(x), 1))
    else:
        diff = x[:, None, :] - g.means[None]
        comp = -0.5 * (np.sum(diff**2 / g.variances, axis=2) + np.sum(np.log(g.variances), axis=1))
        with np.errstate(divide="ignore"):
            comp = comp + np.log(g.weights)
        comp -= comp.max(axis=1, keepdims=True)
        resp = np.exp(comp)
        resp /= resp.sum(axis=1, keepdims=True)
    nk = resp.sum(axis=0)
    means = g.means.copy()
    variances = g.variances.copy()
    live = nk > 1e-10
    means[live] = (resp[:, live].T @ x) / nk[live, None]
    sq = (resp[:, live].T @ (x * x)) / nk[live, None] - means[live] ** 2
    variances[live] = np.maximum(sq, floor)
    return Gmm(nk / nk.sum(), means, variances)


def split_gmm(g: Gmm, target: int) -> Gmm:
    """Split the heaviest component until ``target`` components exist."""
    w, m, v = list(g.weights), list(g.means), list(g.variances)
    while len(w) < target:
        i = int(np.argmax(w))
        step = SPLIT_PERTURB * np.sqrt(v[i])
        w[i] = w[i] / 2.0
        w.append(w[i])
        m.append(m[i] + step)
        m[i] = m[i] - step
        v.append(v[i].copy())
    return Gmm(np.array(w), np.array(m), np.array(v))


def allocate_gaussians(occ: np.ndarray, current: np.ndarray, target_total: int) -> np.ndarray:
    """Per-state component targets proportional to occupancy**0.2, data-capped."""
    power = occ ** OCC_POWER
    share = target_total * power / max(power.sum(), 1e-300)
    cap = np.maximum(1, occ // FRAMES_PER_GAUSSIAN).astype(int)
    want = np.maximum(current, np.minimum(np.maximum(1, np.round(share).astype(int)), cap))
    while want.sum() > max(target_total, current.sum()):
        grown = np.flatnonzero(want > current)
        i = grown[np.argmax(want[grown])]
        want[i] -= 1
    return want


def default_schedule(n_pdfs: int, max_total: int = MAX_GAUSSIANS) -> list[int]:
    sched = []
    total = n_pdfs
    while total < max_total:
        total = min(2 * total, max_total)
        sched.append(total)
    return sched


def train_em(model: MonophoneHmmSet, corpus, iterations_per_stage: int = 4,
             mixture_schedule=None, optional_silence: bool = True, callback=None):
    """Viterbi EM; returns (trained model, TrainingHistory).

    Stage 0 trains the incoming model; every later stage first splits mixtures up
    to its target total. A flat-started model is first re-estimated from an even
    segmentation. After the last iteration a final alignment pass records the
    trained model's log-likelihood.
    """
    if mixture_schedule is None:
        mixture_schedule = default_schedule(model.n_pdfs)
    if any(b < a for a, b in zip(mixture_schedule, mixture_schedule[1:])):
        raise ValueError("mixture schedule must be non-decreasing")
    if mixture_schedule and mixture_schedule[-1] > MAX_GAUSSIANS:
        raise ValueError(f"mixture schedule exceeds {MAX_GAUSSIANS} Gaussians")
    model = model.copy()
    graphs = [forced_graph(model, u.tokens, optional_silence) for u in corpus]
    hist = TrainingHistory()
    occ = None
    it = 0
    for stage, target in enumerate([None] + list(mixture_schedule)):
        if target is not None and occ is not None and target > model.total_gaussians:
            current = np.array([g.n_components for g in model.gmms])
            want = allocate_gaussians(occ, current, target)
            model.gmms = [split_gmm(g, n) for g, n in zip(model.gmms, want)]
            model.invalidate()
        for _ in range(iterations_per_stage):
            paths, ll = _state_paths(model, corpus, graphs, use_equal=model.is_flat)
            hist.log_likelihood.append(ll)
            hist.stage.append(stage)
            hist.total_gaussians.append(model.total_gaussians)
            if callback is not None:
                callback(it, model, ll)
            occ = _reestimate(model, corpus, paths)
            it += 1
    _, ll = _state_paths(model, corpus, graphs, use_equal=False)
    hist.log_likelihood.append(ll)
    hist.stage.append(hist.stage[-1] if hist.stage else 0)
    hist.total_gaussians.append(model.total_gaussians)
    if callback is not None:
        callback(it, model, ll)
    log.debug("EM finished: %d Gaussians, log-likelihood %.3f", model.total_gaussians, ll)
    return model, hist
