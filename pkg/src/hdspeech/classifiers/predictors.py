"""Predictor configs, training loops, the 5-model ensemble and the hyperparameter sweep."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import nets
from .knn import dtw_knn_predict, knn_predict

METHODS = ("knn", "dtw-knn", "dnn", "lstm")
STATIC_METHODS = ("knn", "dnn")
K_GRID = (1, 3, 5, 7, 9)
WIDTH_GRID = (32, 64, 128)
DROPOUT_GRID = (0.0, 0.2, 0.4)
ENSEMBLE_SIZE = 5
FORMAT_VERSION = 1


class DivergenceError(RuntimeError):
    pass


@dataclass
class PredictorConfig:
    method: str
    k: int = 1
    width: int = 64
    dropout: float = 0.0
    l2_kernel: float = 1e-4
    l2_bias: float = 1e-4
    lr: float = 0.01
    batch_size: int = 1
    max_epochs: int = 500
    patience: int = 20
    seed: int = 0
    ensemble_size: int = ENSEMBLE_SIZE
    k_grid: tuple = K_GRID
    width_grid: tuple = WIDTH_GRID
    dropout_grid: tuple = DROPOUT_GRID

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.k < 1 or self.width < 1 or not 0 <= self.dropout < 1:
            raise ValueError(f"invalid predictor config {self}")
        self.k_grid, self.width_grid = tuple(self.k_grid), tuple(self.width_grid)
        self.dropout_grid = tuple(self.dropout_grid)

    @property
    def is_static(self) -> bool:
        return self.method in STATIC_METHODS


@dataclass
class Dataset:
    """Static rows (n, F) or dynamic sequences (list of (T_i, F)) with 0/1 labels."""

    inputs: object
    y: np.ndarray
    ids: list = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.int64)
        if len(self.inputs) != len(self.y):
            raise ValueError("inputs and labels differ in length")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        idx = list(idx)
        if isinstance(self.inputs, np.ndarray):
            inputs = self.inputs[idx]
        else:
            inputs = [self.inputs[i] for i in idx]
        ids = [self.ids[i] for i in idx] if self.ids else []
        return Dataset(inputs, self.y[idx], ids)


class KnnModel:
    def __init__(self, config: PredictorConfig, train: Dataset):
        self.config = config
        self.train = train

    def predict(self, inputs) -> np.ndarray:
        fn = knn_predict if self.config.method == "knn" else dtw_knn_predict
        return np.array([fn(self.train.inputs, self.train.y, q, self.config.k) for q in inputs],
                        dtype=np.int64)


class NetModel:
    def __init__(self, config: PredictorConfig, params: dict, mu: np.ndarray, sd: np.ndarray,
                 val_accuracy: float = float("nan"), epochs: int = 0):
        self.config = config
        self.params = params
        self.mu, self.sd = mu, sd
        self.val_accuracy = val_accuracy
        self.epochs = epochs

    def _scale(self, inputs):
        if self.config.is_static:
            return (np.asarray(inputs, dtype=float) - self.mu) / self.sd
        return [(np.asarray(s, dtype=float) - self.mu) / self.sd for s in inputs]

    def predict_proba(self, inputs) -> np.ndarray:
        x = self._scale(inputs)
        if self.config.is_static:
            return nets.mlp_proba(self.params, x)
        return nets.lstm_proba(self.params, x)

    def predict(self, inputs) -> np.ndarray:
        return np.argmax(self.predict_proba(inputs), axis=1).astype(np.int64)

    def save(self, path) -> None:
        meta = {"version": FORMAT_VERSION, "config": asdict(self.config),
                "val_accuracy": self.val_accuracy, "epochs": self.epochs}
        np.savez(path, meta=json.dumps(meta), mu=self.mu, sd=self.sd,
                 **{f"p_{k}": v for k, v in self.params.items()})


def load_model(path) -> NetModel:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {meta.get('version')}")
        params = {k[2:]: z[k].copy() for k in z.files if k.startswith("p_")}
        return NetModel(PredictorConfig(**meta["config"]), params, z["mu"].copy(), z["sd"].copy(),
                        meta["val_accuracy"], meta["epochs"])


def _standardizer(config: PredictorConfig, inputs):
    rows = np.asarray(inputs, dtype=float) if config.is_static else np.concatenate(
        [np.asarray(s, dtype=float) for s in inputs])
    mu = rows.mean(axis=0)
    sd = rows.std(axis=0)
    sd[sd == 0] = 1.0
    return mu, sd


def _evaluate(kind, params, x, mask, y):
    if kind == "dnn":
        logits = nets.mlp_forward(params, x)[0]
    else:
        logits = nets.lstm_forward(params, x, mask)[0]
    return float(np.mean(np.argmax(logits, axis=1) == y))


def train_network(config: PredictorConfig, train: Dataset, val: Dataset | None = None,
                  key=(0,)) -> NetModel:
    """Minibatch gradient descent with early stopping on the validation split.

    Training stops once validation accuracy has not improved for ``patience`` epochs.
    The kept weights are from the latest epoch reaching the best accuracy. Without a
    validation split the training set is monitored instead.
    """
    if len(set(train.y.tolist())) < 2:
        raise ValueError("training data must contain both classes")
    rng = np.random.default_rng([config.seed, *key])
    mu, sd = _standardizer(config, train.inputs)
    scale = NetModel(config, {}, mu, sd)._scale
    kind = config.method
    xt = scale(train.inputs)
    monitor = val if val is not None and len(val) else train
    if kind == "dnn":
        params = nets.mlp_init(rng, xt.shape[1], config.width)
        xv, mv = scale(monitor.inputs), None
    else:
        params = nets.lstm_init(rng, xt[0].shape[1], config.width)
        xv, mv = nets.pad_sequences(scale(monitor.inputs))
    yv = monitor.y
    best_acc = _evaluate(kind, params, xv, mv, yv)
    best = {k: v.copy() for k, v in params.items()}
    best_epoch, wait = 0, 0
    n = len(train)
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        for a in range(0, n, config.batch_size):
            idx = perm[a:a + config.batch_size]
            yb = train.y[idx]
            if kind == "dnn":
                masks = nets.dropout_masks(rng, (len(idx), config.width), config.dropout, 2)
                loss, g = nets.mlp_loss_grad(params, xt[idx], yb, 0.0, masks)
            else:
                xb, mb = nets.pad_sequences([xt[i] for i in idx])
                rmasks = nets.dropout_masks(rng, (len(idx), config.width), config.dropout, 2)
                loss, g = nets.lstm_loss_grad(params, xb, mb, yb, config.l2_kernel, config.l2_bias, rmasks)
            if not np.isfinite(loss):
                raise DivergenceError(f"training diverged (loss {loss}) with config {config}")
            for k in params:
                params[k] -= config.lr * g[k]
        acc = _evaluate(kind, params, xv, mv, yv)
        if acc >= best_acc:
            # ties refresh the kept weights but do not reset the plateau counter
            wait = 0 if acc > best_acc else wait + 1
            best_acc, best_epoch = acc, epoch
            best = {k: v.copy() for k, v in params.items()}
        else:
            wait += 1
        if wait >= config.patience:
            break
    return NetModel(config, best, mu, sd, best_acc, best_epoch)


def fit(config: PredictorConfig, train: Dataset, val: Dataset | None = None, key=(0,)):
    if config.method in ("knn", "dtw-knn"):
        if len(train) == 0:
            raise ValueError("empty training set")
        return KnnModel(config, train)
    return train_network(config, train, val, key)


def accuracy(model, data: Dataset) -> float:
    return float(np.mean(model.predict(data.inputs) == data.y))


class Ensemble:
    """Mode of the hard predictions of exactly five members."""

    def __init__(self, models):
        models = list(models)
        if len(models) != ENSEMBLE_SIZE:
            raise ValueError(f"ensemble needs exactly {ENSEMBLE_SIZE} models, got {len(models)}")
        self.models = models

    def predict(self, inputs) -> np.ndarray:
        votes = np.stack([m.predict(inputs) for m in self.models])
        return ensemble_vote(votes)


def ensemble_vote(votes) -> np.ndarray:
    votes = np.asarray(votes, dtype=np.int64)
    if votes.shape[0] != ENSEMBLE_SIZE:
        raise ValueError(f"ensemble needs exactly {ENSEMBLE_SIZE} predictions, got {votes.shape[0]}")
    return (votes.sum(axis=0) * 2 > ENSEMBLE_SIZE).astype(np.int64)


def ensemble_predict(models, inputs) -> np.ndarray:
    return Ensemble(models).predict(inputs)


@dataclass
class SweepResult:
    best: PredictorConfig
    log: list[dict]
    best_model: object = None


def sweep_grid(config: PredictorConfig, n_train: int) -> list[PredictorConfig]:
    """Cells in tie-break order: smaller width, then smaller dropout, then smaller k."""
    if config.method in ("knn", "dtw-knn"):
        ks = [k for k in sorted(config.k_grid) if k <= n_train] or [1]
        return [replace(config, k=k) for k in ks]
    return [replace(config, width=w, dropout=d)
            for w in sorted(config.width_grid) for d in sorted(config.dropout_grid)]


def sweep_hyperparams(config: PredictorConfig, train: Dataset, val: Dataset, key=(0,)) -> SweepResult:
    """Grid search on a disjoint validation split; the first cell with the top accuracy wins."""
    if not len(val):
        raise ValueError("sweep needs a non-empty validation split")
    log, best, best_acc, best_model = [], None, -1.0, None
    for cell in sweep_grid(config, len(train)):
        model = fit(cell, train, val, key)
        acc = accuracy(model, val)
        log.append({"method": cell.method, "k": cell.k, "width": cell.width,
                    "dropout": cell.dropout, "val_accuracy": acc})
        if acc > best_acc:
            best, best_acc, best_model = cell, acc, model
    return SweepResult(best, log, best_model)


def write_sweep_log(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["fold", "method", "k", "width", "dropout", "val_accuracy"]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({c: (repr(r[c]) if isinstance(r.get(c), float) else r.get(c, "")) for c in cols})
