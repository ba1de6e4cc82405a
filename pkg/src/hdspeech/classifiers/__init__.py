from .knn import dtw_distance, dtw_knn_predict, knn_predict, vote
from .predictors import (METHODS, Dataset, DivergenceError, Ensemble, KnnModel, NetModel,
                         PredictorConfig, SweepResult, accuracy, ensemble_predict, ensemble_vote,
                         fit, load_model, sweep_grid, sweep_hyperparams, train_network,
                         write_sweep_log)

__all__ = [
    "dtw_distance", "dtw_knn_predict", "knn_predict", "vote", "METHODS", "Dataset",
    "DivergenceError", "Ensemble", "KnnModel", "NetModel", "PredictorConfig", "SweepResult",
    "accuracy", "ensemble_predict", "ensemble_vote", "fit", "load_model", "sweep_grid",
    "sweep_hyperparams", "train_network", "write_sweep_log",
]
