"""End-to-end procedures: full-order, meta- and reduced-order training, studies."""

from .meta import MetaTrainConfig, meta_train, split_parameters
from .studies import (DEFAULT_LENGTHS, McStudyConfig, aggregate, benchmark_dataset, finite_difference_hessian,
                      hessian_from_gradient, hessian_spectrum, mc_study)
from .training import (FitResult, FullTrainConfig, ReducedTrainConfig, train_full, train_linear_baseline,
                       train_reduced)

__all__ = [
    "FitResult", "FullTrainConfig", "McStudyConfig", "MetaTrainConfig", "DEFAULT_LENGTHS", "ReducedTrainConfig",
    "aggregate", "benchmark_dataset", "finite_difference_hessian", "hessian_from_gradient", "hessian_spectrum",
    "mc_study", "meta_train", "split_parameters", "train_full", "train_linear_baseline", "train_reduced",
]
