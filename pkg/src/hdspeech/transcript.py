"""Annotated transcript files.

One utterance per line::

    <start-seconds> <end-seconds> token token ...

Fillers are written ``&um``; a mispronounced word is written
``word[intended=word,phones=P H O N E S]``. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .lexicon import FILLERS

WORD, FILLER = "word", "filler"
_TOKEN = re.compile(r"(&?[^\s\[\]]+)(?:\[([^\]]*)\])?")


class TranscriptError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    text: str
    kind: str = WORD
    intended: str | None = None
    phones: tuple[str, ...] | None = None

    @property
    def word(self) -> str:
        return self.intended or self.text

    def render(self) -> str:
        if self.kind == FILLER:
            return "&" + self.text
        if self.phones is not None:
            return f"{self.text}[intended={self.word},phones={' '.join(self.phones)}]"
        return self.text


@dataclass
class Utterance:
    start: float
    end: float
    tokens: list[Token] = field(default_factory=list)

    @property
    def words(self) -> list[str]:
        """Reference token sequence (intended words and fillers)."""
        return [t.word for t in self.tokens]


@dataclass
class AnnotatedTranscript:
    utterances: list[Utterance]

    def error_annotations(self) -> list[tuple[str, tuple[str, ...]]]:
        return [(t.word, t.phones) for u in self.utterances for t in u.tokens if t.phones is not None]

    def render(self) -> str:
        return "".join(f"{u.start:.3f} {u.end:.3f} {' '.join(t.render() for t in u.tokens)}\n"
                       for u in self.utterances)

    def save(self, path) -> None:
        Path(path).write_text(self.render())


def _parse_token(raw: str, attrs: str | None, where: str) -> Token:
    if raw.startswith("&"):
        name = raw[1:].lower()
        if name not in FILLERS:
            raise TranscriptError(f"{where}: unknown filler {raw!r}")
        if attrs is not None:
            raise TranscriptError(f"{where}: filler cannot carry an annotation")
        return Token(name, FILLER)
    text = raw.lower()
    if attrs is None:
        return Token(text)
    fields = {}
    for part in attrs.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise TranscriptError(f"{where}: malformed annotation {attrs!r}")
        fields[key.strip()] = value.strip()
    if set(fields) != {"intended", "phones"} or not fields["phones"]:
        raise TranscriptError(f"{where}: annotation needs intended= and phones=")
    return Token(text, WORD, fields["intended"].lower(), tuple(fields["phones"].split()))


def parse_transcript(text: str, source: str = "<transcript>") -> AnnotatedTranscript:
    utts = []
    prev_end = float("-inf")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        parts = line.split(None, 2)
        try:
            start, end = float(parts[0]), float(parts[1])
        except (IndexError, ValueError):
            raise TranscriptError(f"{where}: expected '<start> <end> tokens...'") from None
        if not end > start:
            raise TranscriptError(f"{where}: utterance end must follow its start")
        if start < prev_end:
            raise TranscriptError(f"{where}: utterance overlaps the previous one")
        body = parts[2] if len(parts) > 2 else ""
        tokens = []
        pos = 0
        while pos < len(body):
            if body[pos].isspace():
                pos += 1
                continue
            m = _TOKEN.match(body, pos)
            if m is None or m.end() == pos:
                raise TranscriptError(f"{where}: cannot parse token at {body[pos:pos + 20]!r}")
            tokens.append(_parse_token(m.group(1), m.group(2), where))
            pos = m.end()
        if not tokens:
            raise TranscriptError(f"{where}: utterance without tokens")
        utts.append(Utterance(start, end, tokens))
        prev_end = end
    return AnnotatedTranscript(utts)


def load_transcript(path) -> AnnotatedTranscript:
    return parse_transcript(Path(path).read_text(), str(path))


def load_passage(path) -> list[list[str]]:
    """Canonical passage: one sentence per line."""
    sentences = [line.lower().split() for line in Path(path).read_text().splitlines()]
    sentences = [s for s in sentences if s]
    if not sentences:
        raise TranscriptError(f"{path}: empty passage")
    return sentences
