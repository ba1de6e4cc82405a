"""ASRT word error rates for impaired and control speakers across seeded trials."""

import argparse
from dataclasses import dataclass

from hdspeech.config import AcousticConfig, RunConfig
from hdspeech.evaluation.loso import run_loso
from hdspeech.evaluation.report import build_report
from hdspeech.evaluation.synth import generate_synthetic_corpus, separable_spec


@dataclass
class AsrtExperiment:
    trials: int = 5
    speakers: int = 8
    sentences: int = 3
    lm_scale: float = 1.0


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    d = AsrtExperiment()
    p.add_argument("--trials", type=int, default=d.trials)
    p.add_argument("--speakers", type=int, default=d.speakers)
    p.add_argument("--sentences", type=int, default=d.sentences)
    p.add_argument("--lm-scale", type=float, default=d.lm_scale)
    exp = AsrtExperiment(**vars(p.parse_args(argv)))
    print("seed  WER HD (mean±sd)   WER HC (mean±sd)")
    for seed in range(exp.trials):
        synth = generate_synthetic_corpus(separable_spec(exp.speakers, exp.sentences), seed)
        cfg = RunConfig(modes=["ASRT"], methods=["knn"], seed=seed, workers=1, write_artifacts=False,
                        acoustic=AcousticConfig(iterations_per_stage=2, max_gaussians=1,
                                                lm_scale=exp.lm_scale))
        w = build_report(synth.corpus, cfg, run_loso(synth.corpus, cfg))["wer"]
        hd, hc = w["HD"]["wer"], w["HC"]["wer"]
        print(f"{seed:4d}  {hd['mean']:6.1f} ± {hd['sd']:5.1f}     {hc['mean']:6.1f} ± {hc['sd']:5.1f}")


if __name__ == "__main__":
    main()
