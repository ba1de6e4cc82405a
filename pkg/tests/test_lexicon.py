import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdspeech.lexicon import (LexiconError, augment_lexicon, parse_lexicon, sequence_logprob,
                              train_bigram)


def test_parse_single_entry():
    lex = parse_lexicon("GRANDFATHER G R AE N D F AA DH ER\n")
    assert lex.prons("grandfather") == [("G", "R", "AE", "N", "D", "F", "AA", "DH", "ER")]


def test_alternate_pronunciations():
    lex = parse_lexicon("the DH AH\nthe DH IY\n")
    assert lex.prons("the") == [("DH", "AH"), ("DH", "IY")]


def test_unknown_phone_names_line():
    with pytest.raises(LexiconError, match=":2"):
        parse_lexicon("a AH\nb ZZ\n")


def test_augmentation_adds_alternate_and_is_idempotent():
    lex = parse_lexicon("banner B AE N ER\n")
    ann = [("banner", ("B", "AE", "N", "ER")), ("banner", ("B", "AH", "N", "ER"))]
    once = augment_lexicon(lex, ann)
    assert ("B", "AH", "N", "ER") in once.prons("banner")
    assert once.n_pronunciations() == 2
    twice = augment_lexicon(once, ann)
    assert twice.entries == once.entries
    assert lex.n_pronunciations() == 1  # input left untouched


def test_synthetic_annotations_add_one_alternate_per_distinct_pair():
    from hdspeech.evaluation.synth import generate_synthetic_corpus, separable_spec

    synth = generate_synthetic_corpus(separable_spec(6, 3), seed=4)
    ann = [a for r in synth.corpus.speakers for a in r.transcript.error_annotations()]
    base = synth.corpus.lexicon
    new = {(w, p) for w, p in ann if p not in base.prons(w)}
    assert ann, "generator produced no errors to count"
    assert augment_lexicon(base, ann).n_pronunciations() == base.n_pronunciations() + len(new)


# -- bigram ---------------------------------------------------------------------


def test_add_one_bigram_hand_count():
    lm = train_bigram([["a", "b", "a", "b"]], vocab={"a", "b"})
    assert lm.counts[("a", "b")] == 2
    assert lm.prob("b", "a") == pytest.approx(0.6)
    assert lm.prob("b", "b") == pytest.approx(1 / (2 + 3))  # b->a and b->EOS seen once each


def test_single_token_corpus_rows_normalize():
    lm = train_bigram([["a"]])
    for h in lm.histories:
        assert sum(lm.prob(w, h) for w in lm.vocab + [lm.EOS]) == pytest.approx(1.0)
    assert lm.prob("a", lm.BOS) > 0 and lm.prob(lm.EOS, "a") > 0


def test_sequence_logprob():
    lm = train_bigram([["a", "b", "a", "b"]])
    assert sequence_logprob(lm, []) == pytest.approx(math.log(lm.prob(lm.EOS, lm.BOS)))
    want = math.log(lm.prob("a", lm.BOS)) + math.log(0.6) + math.log(lm.prob(lm.EOS, "b"))
    assert sequence_logprob(lm, ["a", "b"]) == pytest.approx(want)


def test_out_of_vocabulary_rejected():
    lm = train_bigram([["a"]])
    with pytest.raises(LexiconError):
        lm.prob("zebra", "a")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.sampled_from("abcd"), min_size=1, max_size=6), min_size=1, max_size=5),
       st.lists(st.sampled_from("abcd"), max_size=8))
def test_bigram_is_normalized_and_logprob_nonpositive(corpus, seq):
    lm = train_bigram(corpus, vocab="abcd")
    for h in lm.histories:
        assert sum(lm.prob(w, h) for w in lm.vocab + [lm.EOS]) == pytest.approx(1.0)
    assert sequence_logprob(lm, seq) <= 0.0


def test_export_lists_every_cell(tmp_path):
    lm = train_bigram([["a", "b"]])
    lm.export(tmp_path / "lm.tsv")
    rows = (tmp_path / "lm.tsv").read_text().splitlines()
    assert rows[0] == "history\tword\tcount\tprob"
    assert len(rows) == 1 + 3 * 3
