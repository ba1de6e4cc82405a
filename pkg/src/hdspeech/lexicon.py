"""Pronunciation lexicon and add-one smoothed bigram language model."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

# ARPAbet without stress markers, plus the silence phone.
ARPABET = (
    "AA AE AH AO AW AY B CH D DH EH ER EY F G HH IH IY JH K L M N NG OW OY P R S SH T TH "
    "UH UW V W Y Z ZH"
).split()
DEFAULT_PHONES = tuple(ARPABET) + ("SIL",)
FILLERS = {"um": ("AH", "M"), "uh": ("AH",), "ah": ("AA",), "eh": ("EH",)}


class LexiconError(ValueError):
    pass


@dataclass
class Lexicon:
    entries: dict[str, list[tuple[str, ...]]] = field(default_factory=dict)
    filler_tokens: set[str] = field(default_factory=set)

    def add(self, word: str, phones) -> bool:
        pron = tuple(phones)
        prons = self.entries.setdefault(word, [])
        if pron in prons:
            return False
        prons.append(pron)
        return True

    def prons(self, word: str) -> list[tuple[str, ...]]:
        try:
            return self.entries[word]
        except KeyError:
            raise LexiconError(f"word {word!r} not in lexicon") from None

    def __contains__(self, word) -> bool:
        return word in self.entries

    @property
    def phones(self) -> set[str]:
        return {p for prons in self.entries.values() for pron in prons for p in pron}

    def copy(self) -> "Lexicon":
        return Lexicon({w: list(p) for w, p in self.entries.items()}, set(self.filler_tokens))

    def n_pronunciations(self) -> int:
        return sum(len(p) for p in self.entries.values())

    def with_fillers(self, fillers=None) -> "Lexicon":
        lex = self.copy()
        for w, pron in (fillers or FILLERS).items():
            lex.add(w, pron)
            lex.filler_tokens.add(w)
        return lex

    def save(self, path) -> None:
        lines = [f"{w} {' '.join(p)}" for w in sorted(self.entries) for p in self.entries[w]]
        Path(path).write_text("\n".join(lines) + "\n")


def parse_lexicon(text: str, phone_set=DEFAULT_PHONES, source: str = "<lexicon>") -> Lexicon:
    phone_set = set(phone_set)
    lex = Lexicon()
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) < 2:
            raise LexiconError(f"{source}:{lineno}: word without pronunciation")
        word = parts[0].lower()
        phones = [p.rstrip("012") for p in parts[1:]]
        bad = [p for p in phones if p not in phone_set]
        if bad:
            raise LexiconError(f"{source}:{lineno}: unknown phone {bad[0]!r}")
        lex.add(word, phones)
    if not lex.entries:
        raise LexiconError(f"{source}: empty lexicon")
    return lex


def load_lexicon(path, phone_set=DEFAULT_PHONES) -> Lexicon:
    """Read ``WORD PH1 PH2 ...`` lines; repeated words are alternate pronunciations."""
    return parse_lexicon(Path(path).read_text(), phone_set, str(path))


def augment_lexicon(lexicon: Lexicon, annotations) -> Lexicon:
    """Add each (intended word, produced phones) pair as an alternate pronunciation."""
    lex = lexicon.copy()
    for word, phones in annotations:
        if word not in lex:
            log.warning("error annotation for unknown word %r; adding errorful form only", word)
        lex.add(word, phones)
    return lex


class BigramLm:
    """Add-one smoothed bigram model over a closed vocabulary.

    Histories are the vocabulary plus ``<s>``; predictions are the vocabulary plus
    ``</s>``.
    """

    BOS = "<s>"
    EOS = "</s>"

    def __init__(self, counts: dict[tuple[str, str], int], vocab):
        self.vocab = sorted(set(vocab) - {self.BOS, self.EOS})
        self.counts = dict(counts)
        self.provenance: frozenset[str] = frozenset()
        self._targets = self.vocab + [self.EOS]
        self._hist_totals = Counter()
        for (h, _), c in self.counts.items():
            self._hist_totals[h] += c

    @property
    def histories(self) -> list[str]:
        return [self.BOS] + self.vocab

    def prob(self, word: str, history: str) -> float:
        if word not in self._targets and word != self.EOS:
            raise LexiconError(f"out-of-vocabulary token {word!r}")
        if history != self.BOS and history not in self.vocab:
            raise LexiconError(f"out-of-vocabulary token {history!r}")
        return (self.counts.get((history, word), 0) + 1) / (self._hist_totals[history] + len(self._targets))

    def logprob(self, word: str, history: str) -> float:
        return math.log(self.prob(word, history))

    def export(self, path) -> None:
        rows = ["history\tword\tcount\tprob"]
        for h in self.histories:
            for w in self._targets:
                rows.append(f"{h}\t{w}\t{self.counts.get((h, w), 0)}\t{self.prob(w, h)!r}")
        Path(path).write_text("\n".join(rows) + "\n")


def train_bigram(sequences, vocab=()) -> BigramLm:
    seqs = [list(s) for s in sequences]
    if not any(seqs):
        raise LexiconError("empty corpus")
    counts: Counter = Counter()
    words = set(vocab)
    for s in seqs:
        words.update(s)
        padded = [BigramLm.BOS] + s + [BigramLm.EOS]
        counts.update(zip(padded[:-1], padded[1:]))
    return BigramLm(counts, words)


def sequence_logprob(lm: BigramLm, tokens) -> float:
    padded = [lm.BOS] + list(tokens) + [lm.EOS]
    return sum(lm.logprob(w, h) for h, w in zip(padded[:-1], padded[1:]))
