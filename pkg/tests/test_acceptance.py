"""Acceptance criteria, one test (or a small group) per criterion.

Each test carries ``@pytest.mark.criterion(n, title)``; the terminal summary prints
one PASS/FAIL line per criterion. End-to-end runs are shared session fixtures so
the GoP sign check can look at every run made here.
"""

import itertools
import time

import numpy as np
import pytest

from hdspeech.acoustic.model import single_gaussian_model
from hdspeech.acoustic.train import TrainingUtterance, flat_start, train_em
from hdspeech.acoustic.viterbi import phone_loop_span_scores, viterbi_align
from hdspeech.classifiers import nets
from hdspeech.classifiers.knn import dtw_distance
from hdspeech.config import AcousticConfig, ClassifierConfig, RunConfig
from hdspeech.corpus import Corpus, SpeakerRecord
from hdspeech.dsp import FeatureMatrix
from hdspeech.evaluation.loso import (FoldResult, LeakageError, audit_fold, run_fold, run_loso,
                                      train_fold_models)
from hdspeech.evaluation.metrics import cochrans_q, pooled_ttest, stage_significance
from hdspeech.evaluation.report import build_report, dumps
from hdspeech.evaluation.synth import (generate_synthetic_corpus, graded_spec, noiseless_spec,
                                       separable_spec)
from hdspeech.features import compute_gop
from hdspeech.lexicon import train_bigram
from hdspeech.transcription import ASRT, FA_ORAT, compute_wer, prepare_asrt, prepare_fa_orat

import helpers
import oracles

METHODS = ["knn", "dtw-knn", "dnn", "lstm"]
GRADED_SEEDS = range(20)
ASRT_SEEDS = range(5)


def _cheap_config(seed=0, modes=(FA_ORAT,), methods=("knn",), **classifier):
    cl = dict(max_epochs=30, patience=5, width_grid=[4, 8], dropout_grid=[0.0, 0.2])
    cl.update(classifier)
    return RunConfig(modes=list(modes), methods=list(methods), seed=seed, workers=1, write_artifacts=False,
                     acoustic=AcousticConfig(iterations_per_stage=2, max_gaussians=1),
                     classifier=ClassifierConfig(**cl))


# -- shared end-to-end runs ---------------------------------------------------------------


@pytest.fixture(scope="session")
def separable_run(tmp_path_factory):
    synth = generate_synthetic_corpus(separable_spec(20, 5), seed=0)
    cfg = RunConfig(modes=[FA_ORAT], methods=METHODS, seed=0, workers=1,
                    acoustic=AcousticConfig(max_gaussians=1))
    t = time.perf_counter()
    results = run_loso(synth.corpus, cfg, tmp_path_factory.mktemp("separable"))
    report = build_report(synth.corpus, cfg, results)
    return synth, results, report, time.perf_counter() - t


@pytest.fixture(scope="session")
def graded_runs():
    out = []
    for seed in GRADED_SEEDS:
        synth = generate_synthetic_corpus(graded_spec(4, 4), seed)
        cfg = _cheap_config(seed)
        results = run_loso(synth.corpus, cfg)
        out.append((results, build_report(synth.corpus, cfg, results)))
    return out


@pytest.fixture(scope="session")
def asrt_runs():
    out = []
    for seed in ASRT_SEEDS:
        synth = generate_synthetic_corpus(separable_spec(8, 3), seed)
        cfg = _cheap_config(seed, modes=(ASRT,))
        results = run_loso(synth.corpus, cfg)
        out.append((results, build_report(synth.corpus, cfg, results)))
    return out


@pytest.fixture(scope="session")
def determinism_runs(tmp_path_factory):
    """Two complete runs, every mode and method, from separately generated corpora."""
    texts, results = [], []
    for name in ("first", "second"):
        synth = generate_synthetic_corpus(graded_spec(2, 2), seed=5)
        cfg = _cheap_config(5, modes=("FA-ORAT", "FA-GF", "ASRT"), methods=METHODS, max_epochs=8)
        res = run_loso(synth.corpus, cfg, tmp_path_factory.mktemp(name))
        results.append(res)
        texts.append(dumps(build_report(synth.corpus, cfg, res)))
    return texts, results


# -- 1: GoP oracle -------------------------------------------------------------------------


@pytest.mark.criterion(1, "GoP matches path enumeration")
def test_gop_matches_enumeration(note):
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    n_checked = n_phones = 0
    while n_checked < 30:
        phones = ["A", "B", "SIL"][: int(rng.integers(2, 4))]
        model = single_gaussian_model(phones, rng.normal(0, 1.5, size=(len(phones), 3, 1)),
                                      rng.uniform(0.3, 2.0, size=(len(phones), 3, 1)))
        stay = rng.uniform(0.1, 0.9, size=model.n_pdfs)
        model.trans = np.stack([stay, 1 - stay], axis=1)
        seq = list(rng.choice(["A", "B"], size=int(rng.integers(1, 3))))
        T = int(rng.integers(3 * len(seq), 7))
        frames = rng.normal(0, 2, size=(T, 1))
        ali = viterbi_align(model, frames, seq, optional_silence=False)
        emit = model.log_emissions(frames)
        loop = phone_loop_span_scores(model, emit, [(s.start, s.end) for s in ali.segments])
        got = compute_gop(ali, loop.tolist(), "SIL")
        want = oracles.gop_by_enumeration(model, seq, frames, "SIL")
        assert [p for p, _ in got] == [p for p, _ in want]
        for (_, g), (_, w) in zip(got, want):
            assert abs(g - w) <= 1e-8
        n_checked += 1
        n_phones += len(got)
    elapsed = time.perf_counter() - t
    note(1, f"{n_checked} instances, {n_phones} phones")
    assert elapsed < 10


# -- 3: DTW oracle ----------------------------------------------------------------------------


def _exhaustive_dtw_check():
    """Every pair of sequences over {0, 1, 2} with lengths 1..5, brute force by path incidence."""
    seqs = {n: np.array(list(itertools.product((0.0, 1.0, 2.0), repeat=n))) for n in range(1, 6)}
    pairs = 0
    for n, m in itertools.product(range(1, 6), repeat=2):
        paths = oracles.dtw_paths(n, m)
        inc = np.zeros((len(paths), n * m))
        for k, p in enumerate(paths):
            inc[k, [i * m + j for i, j in p]] = 1.0
        A, B = seqs[n], seqs[m]
        for a in A:
            cost = np.abs(a[None, :, None] - B[:, None, :]).reshape(len(B), n * m)
            brute = (cost @ inc.T).min(axis=1)  # integer-valued, so every summation order is exact
            got = np.array([dtw_distance(a, b) for b in B])
            assert np.array_equal(got, brute), (a, B[np.flatnonzero(got != brute)[0]])
            pairs += len(B)
    return pairs


@pytest.mark.criterion(3, "DTW matches alignment enumeration")
def test_dtw_exhaustive_and_random(note):
    t = time.perf_counter()
    pairs = _exhaustive_dtw_check()
    rng = np.random.default_rng(3)
    for _ in range(1000):
        d = int(rng.integers(1, 4))
        a = rng.normal(size=(int(rng.integers(1, 7)), d))
        b = rng.normal(size=(int(rng.integers(1, 7)), d))
        assert dtw_distance(a, b) == oracles.dtw_brute(a, b)
    elapsed = time.perf_counter() - t
    note(3, f"{pairs} exhaustive + 1000 random pairs")
    assert elapsed < 30


# -- 4: edit distance -----------------------------------------------------------------------


@pytest.mark.criterion(4, "WER decomposition matches edit distance")
def test_wer_against_edit_distance(note):
    t = time.perf_counter()
    rng = np.random.default_rng(4)
    alphabet = list("abcd")
    for _ in range(1000):
        ref = list(rng.choice(alphabet, size=int(rng.integers(1, 9))))
        hyp = list(rng.choice(alphabet, size=int(rng.integers(0, 9))))
        w = compute_wer(ref, hyp)
        assert w.ins + w.dele + w.sub == oracles.edit_distance(ref, hyp)
        assert w.ref_len == len(ref)
        assert w.ins - w.dele == len(hyp) - len(ref)
        assert min(w.ins, w.dele, w.sub) >= 0
        assert w.wer == pytest.approx(100.0 * (w.ins + w.dele + w.sub) / len(ref))
    elapsed = time.perf_counter() - t
    note(4, "1000 pairs")
    assert elapsed < 5


# -- 5: EM monotonicity ----------------------------------------------------------------------


def _em_corpus(seed):
    rng = np.random.default_rng([5, seed])
    gen = single_gaussian_model(["A", "B", "C", "SIL"], rng.normal(0, 2, size=(4, 3, 2)), 0.6)
    utts = []
    for i in range(8):
        phones = ["SIL"] + list(rng.choice(["A", "B", "C"], size=int(rng.integers(1, 4)))) + ["SIL"]
        frames = [rng.normal(gen.gmms[gen.pdf(p, j)].means[0], 0.8, size=(int(rng.integers(1, 5)), 2))
                  for p in phones for j in range(3)]
        utts.append(TrainingUtterance.from_phones(np.concatenate(frames), phones[1:-1], f"u{i}"))
    return utts


@pytest.mark.criterion(5, "Viterbi-EM log-likelihood never decreases")
@pytest.mark.parametrize("seed", range(5))
def test_em_monotone(seed, note):
    utts = _em_corpus(seed)
    lls = []
    model = flat_start(utts, ["A", "B", "C", "SIL"])
    train_em(model, utts, 10, [], optional_silence=True, callback=lambda it, m, ll: lls.append(ll))
    assert len(lls) == 11
    drops = [b - a for a, b in zip(lls, lls[1:])]
    assert min(drops) >= -1e-6
    if seed == 4:
        note(5, "5 corpora x 10 iterations, no mixture splits")


# -- 6: alignment recovery -------------------------------------------------------------------


@pytest.mark.criterion(6, "forced alignment recovers generated boundaries")
def test_alignment_recovery(note):
    hits = total = 0
    for seed in range(3):
        synth = generate_synthetic_corpus(noiseless_spec(n_speakers=3, n_sentences=None), seed)
        for r in synth.corpus.speakers:
            res = prepare_fa_orat(r, synth.model, synth.corpus.lexicon)
            h, n = helpers.boundary_hits(synth.metadata[r.speaker_id], res, tol=1)
            hits, total = hits + h, total + n
    note(6, f"{hits}/{total} segments within 1 frame ({100 * hits / total:.2f} %)")
    assert hits / total >= 0.99


# -- 7: gradient checks -------------------------------------------------------------------------


@pytest.mark.criterion(7, "MLP and LSTM gradients match finite differences")
@pytest.mark.parametrize("seed", range(10))
def test_mlp_gradients(seed):
    rng = np.random.default_rng([7, seed])
    p = nets.mlp_init(rng, 4, 5)
    for k in ("b1", "b2", "b3"):
        p[k] = rng.normal(0, 0.5, size=p[k].shape)
    x, y = rng.normal(size=(6, 4)), rng.integers(0, 2, size=6)
    masks = nets.dropout_masks(rng, (6, 5), 0.2, 2)
    _, g = nets.mlp_loss_grad(p, x, y, 1e-3, masks)
    num = oracles.numeric_grad(lambda q: nets.mlp_loss_grad(q, x, y, 1e-3, masks)[0], p, h=1e-5)
    assert oracles.max_relative_error(g, num) < 1e-4


@pytest.mark.criterion(7, "MLP and LSTM gradients match finite differences")
@pytest.mark.parametrize("seed", range(10))
def test_lstm_gradients(seed):
    rng = np.random.default_rng([17, seed])
    p = nets.lstm_init(rng, 3, 4)
    for k in p:
        if k.startswith("b") or k == "c":
            p[k] = p[k] + rng.normal(0, 0.3, size=p[k].shape)
    x, m = nets.pad_sequences([rng.normal(size=(int(t), 3)) for t in rng.integers(1, 6, size=4)])
    y = rng.integers(0, 2, size=4)
    rm = nets.dropout_masks(rng, (4, 4), 0.2, 2)
    _, g = nets.lstm_loss_grad(p, x, m, y, 1e-3, 1e-3, rm)
    num = oracles.numeric_grad(lambda q: nets.lstm_loss_grad(q, x, m, y, 1e-3, 1e-3, rm)[0], p, h=1e-5)
    assert oracles.max_relative_error(g, num) < 1e-4


# -- 8: ASRT sanity ---------------------------------------------------------------------------


@pytest.mark.criterion(8, "ASRT: zero WER when noiseless, impaired WER above control")
def test_asrt_noiseless_is_exact():
    synth = generate_synthetic_corpus(noiseless_spec(n_speakers=3, n_sentences=4), seed=8)
    lm = train_bigram(synth.corpus.passage)
    for r in synth.corpus.speakers:
        res = prepare_asrt(r, synth.model, synth.corpus.lexicon, lm)
        for u in res.utterances:
            assert compute_wer(r.transcript.utterances[u.index].words, u.tokens).wer == 0.0


@pytest.mark.criterion(8, "ASRT: zero WER when noiseless, impaired WER above control")
def test_asrt_impaired_above_control(asrt_runs, note):
    pairs = []
    for _, report in asrt_runs:
        pairs.append((report["wer"]["HD"]["wer"]["mean"], report["wer"]["HC"]["wer"]["mean"]))
    note(8, "HD/HC mean WER " + ", ".join(f"{a:.1f}/{b:.1f}" for a, b in pairs))
    assert all(hd > hc for hd, hc in pairs)


# -- 9: separable end to end -----------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(9, "separable corpus: LOSO accuracy >= 0.9 per method, < 15 min")
def test_separable_end_to_end(separable_run, note):
    _, _, report, elapsed = separable_run
    acc = {m: report["results"][FA_ORAT][m]["accuracy"] for m in METHODS}
    note(9, " ".join(f"{m}={a:.2f}" for m, a in acc.items()) + f", {elapsed / 60:.1f} min")
    assert all(a >= 0.9 for a in acc.values())
    assert elapsed < 15 * 60


# -- 10: statistics oracles ---------------------------------------------------------------------


def _scripted_cochran(x):
    rows = [[int(v) for v in r] for r in x]
    k = len(rows[0])
    C = [sum(r[j] for r in rows) for j in range(k)]
    R = [sum(r) for r in rows]
    cbar = sum(C) / k
    den = k * sum(R) - sum(r * r for r in R)
    q = 0.0 if den == 0 else k * (k - 1) * sum((c - cbar) ** 2 for c in C) / den
    return q, k - 1


def _scripted_t(a, b):
    """Pooled-variance t with the p-value from a numerically integrated Student density."""
    from math import gamma, pi, sqrt
    from scipy.integrate import quad
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    sp2 = (sum((v - ma) ** 2 for v in a) + sum((v - mb) ** 2 for v in b)) / (na + nb - 2)
    t = (ma - mb) / sqrt(sp2 * (1 / na + 1 / nb))
    nu = na + nb - 2
    c = gamma((nu + 1) / 2) / (sqrt(nu * pi) * gamma(nu / 2))
    tail, _ = quad(lambda s: c * (1 + s * s / nu) ** (-(nu + 1) / 2), abs(t), np.inf, epsabs=1e-13)
    return t, 2 * tail


@pytest.mark.criterion(10, "Cochran's Q and t-test pipeline match scripted computations")
def test_cochran_against_scripted():
    from scipy.stats import chi2
    hand = [[1, 1, 0], [1, 0, 0], [1, 1, 1], [0, 0, 0]]
    q, df = _scripted_cochran(hand)
    r = cochrans_q(hand)
    assert abs(r.q - q) <= 1e-9 and r.df == df
    # chi-square with 2 df has survival exp(-q/2)
    assert abs(r.p - np.exp(-q / 2)) <= 1e-6
    rng = np.random.default_rng(10)
    for _ in range(50):
        x = rng.integers(0, 2, size=(int(rng.integers(3, 40)), int(rng.integers(2, 13))))
        q, df = _scripted_cochran(x)
        r = cochrans_q(x)
        assert abs(r.q - q) <= 1e-9 and r.df == df
        assert abs(r.p - (chi2.sf(q, df) if q > 0 else 1.0)) <= 1e-6
    same = np.repeat(rng.integers(0, 2, size=(10, 1)), 4, axis=1)
    assert cochrans_q(same).q == 0.0 and cochrans_q(same).p == 1.0


@pytest.mark.criterion(10, "Cochran's Q and t-test pipeline match scripted computations")
def test_ttest_bonferroni_against_scripted():
    rng = np.random.default_rng(11)
    speakers = {"h1": "control", "h2": "control", "h3": "control", "p1": "premanifest", "p2": "premanifest",
                "e1": "early", "e2": "early", "l1": "late", "l2": "late"}
    names = ["gop_mean", "pause_count", "words_per_sec", "filler_count", "phone_count"]
    shift = {"premanifest": 0.1, "early": 0.6, "late": 1.5}
    rows, values = [], []
    for spk, stage in speakers.items():
        for _ in range(8):
            rows.append(spk)
            values.append(rng.normal(size=5) + shift.get(stage, 0.0) * np.array([-1, 1, -1, 1, 0]))
    values = np.array(values)
    table = stage_significance(values, speakers, rows, names)
    stage_of = [speakers[s] for s in rows]
    hc = [v for v, s in zip(values, stage_of) if s == "control"]
    for stage in ("premanifest", "early", "late"):
        grp = [v for v, s in zip(values, stage_of) if s == stage]
        for j, n in enumerate(names):
            t, p = _scripted_t([g[j] for g in grp], [h[j] for h in hc])
            cell = table["features"][n][stage]
            assert abs(cell["t"] - t) <= 1e-9
            assert abs(cell["p"] - p) <= 1e-6
            call = "no change" if p * len(names) >= 0.05 else ("increase" if t > 0 else "decrease")
            assert cell["call"] == call
        t, p = pooled_ttest([g[0] for g in grp], [h[0] for h in hc])
        assert (t, p) == (table["features"]["gop_mean"][stage]["t"], table["features"]["gop_mean"][stage]["p"])


# -- 11: graded stage effect ----------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(11, "HD-detection rate non-decreasing over stages in >= 90 % of seeds")
def test_graded_stage_monotone(graded_runs, note):
    ok = 0
    rates = []
    for _, report in graded_runs:
        c = report["confusion_by_stage"]
        r = [c[s][1] for s in ("premanifest", "early", "late")]
        rates.append(r)
        ok += r[0] <= r[1] <= r[2]
    mean = np.mean(rates, axis=0)
    note(11, f"{ok}/{len(graded_runs)} seeds monotone; mean rates "
             + " -> ".join(f"{v:.2f}" for v in mean))
    assert ok >= 0.9 * len(graded_runs)


# -- 12: determinism ---------------------------------------------------------------------------------


@pytest.mark.criterion(12, "identical inputs give byte-identical reports")
def test_reports_byte_identical(determinism_runs, note):
    texts, _ = determinism_runs
    note(12, f"{len(texts[0])} bytes, all modes and methods")
    assert texts[0] == texts[1]


# -- 13: no leakage ----------------------------------------------------------------------------------


def _all_fold_results(separable_run, graded_runs, asrt_runs, determinism_runs):
    yield from separable_run[1]
    for results, _ in graded_runs + asrt_runs:
        yield from results
    for results in determinism_runs[1]:
        yield from results


@pytest.mark.criterion(13, "no held-out speaker data in any fold artifact")
def test_audit_covers_every_artifact(separable_run, graded_runs, asrt_runs, determinism_runs, note):
    n_folds = n_checks = 0
    for res in _all_fold_results(separable_run, graded_runs, asrt_runs, determinism_runs):
        kinds = {name.split("/")[-1] for name, _ in res.audit}
        assert {"acoustic_model", "language_model", "lexicon", "inner_split", "feature_filter",
                "sweep"} <= kinds
        for _, ids in res.audit:
            assert res.held_out not in ids
        audit_fold(res)
        n_folds += 1
        n_checks += len(res.audit)
    for _, report in graded_runs + asrt_runs:
        assert report["audit"]["passed"]
    assert separable_run[2]["audit"]["passed"]
    note(13, f"{n_folds} folds, {n_checks} provenance checks")


@pytest.mark.criterion(13, "no held-out speaker data in any fold artifact")
def test_held_out_data_cannot_influence_fold():
    """Replacing the held-out speaker's frames with noise leaves every fold artifact unchanged."""
    synth = generate_synthetic_corpus(separable_spec(6, 2), seed=13)
    c = synth.corpus
    rng = np.random.default_rng(13)
    held = c.speakers[0]
    junk = SpeakerRecord(held.speaker_id, held.label, held.stage,
                         FeatureMatrix(rng.normal(size=held.features.frames.shape)), held.transcript)
    swapped = Corpus([junk] + c.speakers[1:], c.passage, c.lexicon, c.phones, c.source)
    cfg = _cheap_config(0, methods=("knn", "dnn"), max_epochs=5)
    a, b = train_fold_models(c, 0, held.speaker_id, cfg), train_fold_models(swapped, 0, held.speaker_id, cfg)
    for ga, gb in zip(a.am.gmms, b.am.gmms):
        np.testing.assert_array_equal(ga.means, gb.means)
        np.testing.assert_array_equal(ga.variances, gb.variances)
    np.testing.assert_array_equal(a.am.trans, b.am.trans)
    assert a.lexicon.entries == b.lexicon.entries
    ra, rb = run_fold(c, 0, cfg), run_fold(swapped, 0, cfg)
    assert ra.retained == rb.retained
    assert ra.sweeps == rb.sweeps
    assert held.speaker_id not in a.am.provenance and held.speaker_id not in a.lm.provenance


@pytest.mark.criterion(13, "no held-out speaker data in any fold artifact")
def test_leaky_fold_is_rejected():
    res = FoldResult(0, "S01", {}, {}, {}, {}, None, [("acoustic_model", ["S01", "S02"])])
    with pytest.raises(LeakageError, match="S01"):
        audit_fold(res)


# -- 2: GoP sign over every run ------------------------------------------------------------------------


@pytest.mark.criterion(2, "every per-phone GoP <= 1e-9 in every end-to-end run")
def test_gop_never_positive(separable_run, graded_runs, asrt_runs, determinism_runs, note):
    worst = -np.inf
    n = 0
    for res in _all_fold_results(separable_run, graded_runs, asrt_runs, determinism_runs):
        for g in res.gop_max.values():
            worst = max(worst, g)
            n += 1
    note(2, f"max GoP {worst:.3g} over {n} fold transcriptions")
    assert worst <= 1e-9
