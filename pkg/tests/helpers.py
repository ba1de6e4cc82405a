"""Comparisons between transcription output and synthetic generation metadata."""


def speech_segments_from_metadata(utt_meta):
    return [(p, a, b, tok) for p, a, b, tok in utt_meta["segments"] if tok >= 0]


def speech_segments_from_result(utt):
    return [(s.phone, utt.start + s.start, utt.start + s.end, s.token)
            for s in utt.alignment.segments if s.token >= 0]


def boundary_hits(meta, result, tol=1):
    """(segments with both boundaries within ``tol`` frames, total generated speech segments).

    An utterance whose aligned phone/token sequence differs from the generated one
    counts all of its segments as misses.
    """
    hits = total = 0
    for utt in result.utterances:
        truth = speech_segments_from_metadata(meta["utterances"][utt.index])
        got = speech_segments_from_result(utt)
        total += len(truth)
        if [(p, t) for p, _, _, t in truth] != [(p, t) for p, _, _, t in got]:
            continue
        hits += sum(abs(a - c) <= tol and abs(b - d) <= tol
                    for (_, a, b, _), (_, c, d, _) in zip(truth, got))
    return hits, total
