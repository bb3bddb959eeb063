"""Loss assembly, filtering, the pseudo-label pool and the training driver."""

from .loop import (LOG_FIELDS, EpochStats, GenerationStats, TrainConfig, TrainResult, chunk_pairs,
                   generate_candidates, generation_pass, reference_spectrum, run_training, scorer_for,
                   train_epoch, train_step, validation_mse, write_log)
from .loss import LossWeights, total_loss
from .pool import (GeneratedCandidate, HighQualityPool, PoolEntry, best_per_input, filter_candidates,
                   quartile_threshold)
from .schedule import TrainSchedule

__all__ = [
    "LOG_FIELDS", "EpochStats", "GeneratedCandidate", "GenerationStats", "HighQualityPool", "LossWeights",
    "PoolEntry", "TrainConfig", "TrainResult", "TrainSchedule", "best_per_input", "chunk_pairs",
    "filter_candidates", "generate_candidates", "generation_pass", "quartile_threshold", "reference_spectrum",
    "run_training", "scorer_for", "total_loss", "train_epoch", "train_step", "validation_mse", "write_log",
]
