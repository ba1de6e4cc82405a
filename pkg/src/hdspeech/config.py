"""Run configuration, loaded from YAML."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .acoustic.train import MAX_GAUSSIANS
from .classifiers.predictors import DROPOUT_GRID, K_GRID, METHODS, WIDTH_GRID
from .transcription import MODES


class ConfigError(ValueError):
    pass


@dataclass
class AcousticConfig:
    iterations_per_stage: int = 4
    max_gaussians: int = MAX_GAUSSIANS
    optional_silence: bool = True
    lm_scale: float = 1.0


@dataclass
class ClassifierConfig:
    k_grid: list = field(default_factory=lambda: list(K_GRID))
    width_grid: list = field(default_factory=lambda: list(WIDTH_GRID))
    dropout_grid: list = field(default_factory=lambda: list(DROPOUT_GRID))
    lr: float = 0.01
    batch_size: int = 1
    max_epochs: int = 500
    patience: int = 20
    l2_kernel: float = 1e-4
    l2_bias: float = 1e-4


@dataclass
class RunConfig:
    modes: list = field(default_factory=lambda: list(MODES))
    methods: list = field(default_factory=lambda: list(METHODS))
    seed: int = 0
    out: str = "out"
    workers: int = 0  # 0 means one worker per logical core
    pause_ms: float = 150.0
    var_eps: float = 1e-12
    gain_eps: float = 1e-12
    val_fraction: float = 0.2
    write_artifacts: bool = True
    acoustic: AcousticConfig = field(default_factory=AcousticConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)

    def __post_init__(self):
        if isinstance(self.acoustic, dict):
            self.acoustic = _build(AcousticConfig, self.acoustic, "acoustic")
        if isinstance(self.classifier, dict):
            self.classifier = _build(ClassifierConfig, self.classifier, "classifier")
        self.modes, self.methods = list(self.modes), list(self.methods)
        self.validate()

    def validate(self) -> None:
        if not self.modes or not self.methods:
            raise ConfigError("at least one mode and one method are required")
        bad = [m for m in self.modes if m not in MODES] + [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown mode or method {bad[0]!r}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must lie in (0, 1)")
        if self.pause_ms <= 0 or self.workers < 0:
            raise ConfigError("pause_ms must be positive and workers non-negative")
        if self.acoustic.iterations_per_stage < 1:
            raise ConfigError("iterations_per_stage must be at least 1")
        if not 1 <= self.acoustic.max_gaussians <= MAX_GAUSSIANS:
            raise ConfigError(f"max_gaussians must lie in [1, {MAX_GAUSSIANS}]")
        c = self.classifier
        if c.lr <= 0 or c.batch_size < 1 or c.max_epochs < 1 or c.patience < 1:
            raise ConfigError("invalid classifier training settings")

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> dict:
        """Settings that determine results (output location and worker count excluded)."""
        d = self.to_dict()
        for k in ("out", "workers", "write_artifacts"):
            d.pop(k)
        return d


def _build(cls, data: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key {unknown[0]!r}")
    return cls(**data)


def load_config(path=None, **overrides) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return _build(RunConfig, data, "config")
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
