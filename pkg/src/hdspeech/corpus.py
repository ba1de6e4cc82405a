"""Speaker records and manifest-driven corpus ingestion.

A manifest is JSON::

    {"sample_rate": 16000, "passage": "passage.txt", "lexicon": "lexicon.dict",
     "speakers": [{"id": "S01", "label": "HC", "stage": "control",
                   "audio": "S01.wav", "transcript": "S01.txt"}, ...]}

A speaker entry may give ``features`` (a ``.npy`` frame matrix with 10 ms shift)
instead of ``audio``; synthetic corpora use this. Relative paths resolve against
the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import AudioSegment, FeatureMatrix, extract_mfcc, read_wav
from .lexicon import DEFAULT_PHONES, Lexicon, load_lexicon
from .transcript import AnnotatedTranscript, load_passage, load_transcript

LABELS = ("HC", "HD")
STAGES = ("control", "premanifest", "early", "late")


class CorpusError(ValueError):
    pass


@dataclass
class SpeakerRecord:
    speaker_id: str
    label: str
    stage: str
    features: FeatureMatrix
    transcript: AnnotatedTranscript

    def __post_init__(self):
        if self.label not in LABELS:
            raise CorpusError(f"speaker {self.speaker_id}: unknown label {self.label!r}")
        if self.stage not in STAGES:
            raise CorpusError(f"speaker {self.speaker_id}: unknown stage {self.stage!r}")
        if (self.stage == "control") != (self.label == "HC"):
            raise CorpusError(f"speaker {self.speaker_id}: stage {self.stage} inconsistent with {self.label}")

    @property
    def y(self) -> int:
        return int(self.label == "HD")

    def utterance_frames(self, i: int) -> tuple[int, int]:
        u = self.transcript.utterances[i]
        shift = self.features.frame_shift
        start = int(round(u.start / shift))
        end = min(self.features.n_frames, int(round(u.end / shift)))
        return start, max(start, end)


@dataclass
class Corpus:
    speakers: list[SpeakerRecord]
    passage: list[list[str]]
    lexicon: Lexicon
    phones: tuple[str, ...] = DEFAULT_PHONES
    source: str = ""

    def __post_init__(self):
        ids = [s.speaker_id for s in self.speakers]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise CorpusError(f"duplicate speaker id {dup[0]}")
        self.speakers = sorted(self.speakers, key=lambda s: s.speaker_id)

    def __len__(self):
        return len(self.speakers)

    def __iter__(self):
        return iter(self.speakers)

    def by_id(self, speaker_id: str) -> SpeakerRecord:
        for s in self.speakers:
            if s.speaker_id == speaker_id:
                return s
        raise KeyError(speaker_id)

    @property
    def ids(self) -> list[str]:
        return [s.speaker_id for s in self.speakers]


def ingest_corpus(manifest_path) -> Corpus:
    """Load and validate every file named by the manifest; records sorted by id."""
    manifest_path = Path(manifest_path)
    try:
        meta = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read manifest {manifest_path}: {exc}") from exc
    root = manifest_path.parent
    rate = meta.get("sample_rate")
    phones = tuple(meta.get("phones", DEFAULT_PHONES))

    def resolve(entry, key, owner):
        if key not in entry:
            raise CorpusError(f"{owner}: missing '{key}'")
        path = root / entry[key]
        if not path.exists():
            raise CorpusError(f"{key} not found for {owner}: {path}")
        return path

    passage = load_passage(resolve(meta, "passage", "manifest"))
    lexicon = load_lexicon(resolve(meta, "lexicon", "manifest"), phones).with_fillers()
    records = []
    ids = set()
    for entry in meta.get("speakers", []):
        sid = str(entry.get("id", ""))
        if not sid:
            raise CorpusError("speaker entry without id")
        if sid in ids:
            raise CorpusError(f"duplicate speaker id {sid}")
        ids.add(sid)
        owner = f"speaker {sid}"
        transcript = load_transcript(resolve(entry, "transcript", owner))
        if "features" in entry:
            frames = np.load(resolve(entry, "features", owner), allow_pickle=False)
            features = FeatureMatrix(np.asarray(frames, dtype=float))
        else:
            if "audio" not in entry:
                raise CorpusError(f"{owner}: needs 'audio' or 'features'")
            path = root / entry["audio"]
            if not path.exists():
                raise CorpusError(f"audio not found for speaker {sid}: {path}")
            samples, sr = read_wav(path, rate)
            features = extract_mfcc(AudioSegment(samples, sr, sid))
        records.append(SpeakerRecord(sid, entry.get("label"), entry.get("stage"), features, transcript))
    if not records:
        raise CorpusError("manifest lists no speakers")
    return Corpus(records, passage, lexicon, phones, str(manifest_path))
