from .graph import forced_graph, phone_loop_graph, word_loop_graph
from .model import SIL, Gmm, MonophoneHmmSet, single_gaussian_model
from .train import TrainingHistory, TrainingUtterance, flat_start, split_gmm, train_em
from .viterbi import (AlignmentError, PhoneAlignment, Segment, phone_loop_score,
                      phone_loop_span_scores, viterbi_align)

__all__ = [
    "SIL", "Gmm", "MonophoneHmmSet", "single_gaussian_model", "TrainingHistory", "TrainingUtterance",
    "flat_start", "split_gmm", "train_em", "AlignmentError", "PhoneAlignment", "Segment",
    "phone_loop_score", "phone_loop_span_scores", "viterbi_align", "forced_graph",
    "phone_loop_graph", "word_loop_graph",
]
