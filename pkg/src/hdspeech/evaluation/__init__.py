from .loso import FoldResult, LeakageError, audit_fold, run_fold, run_loso
from .metrics import (cochrans_q, compute_metrics, confusion_by_stage, pooled_ttest,
                      stage_significance)
from .report import build_report, dumps, emit_report, load_report
from .synth import (SynthSpec, StageParams, generate_synthetic_corpus, graded_spec, noiseless_spec,
                    separable_spec, write_synthetic_corpus)

__all__ = [
    "FoldResult", "LeakageError", "audit_fold", "run_fold", "run_loso", "cochrans_q",
    "compute_metrics", "confusion_by_stage", "pooled_ttest", "stage_significance", "build_report",
    "dumps", "emit_report", "load_report", "SynthSpec", "StageParams", "generate_synthetic_corpus",
    "graded_spec", "noiseless_spec", "separable_spec", "write_synthetic_corpus",
]
