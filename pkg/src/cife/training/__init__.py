"""Training loop, prediction procedure and replicate runs."""
from cife.training.prediction import evaluate_accuracy, predict_proba_target, predict_target
from cife.training.trainer import Trainer, final_target_accuracy, split_accuracy, train
from cife.training.replicates import run_replicates, run_single, summarize

__all__ = [
    "evaluate_accuracy",
    "predict_proba_target",
    "predict_target",
    "Trainer",
    "final_target_accuracy",
    "split_accuracy",
    "train",
    "run_replicates",
    "run_single",
    "summarize",
]
