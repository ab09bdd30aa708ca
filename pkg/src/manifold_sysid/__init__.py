"""Meta-learned parameter manifolds for neural state-space system identification."""

from . import _jax  # noqa: F401  (enables float64 before anything else)
from .estimators import ManifoldMetaLearner, NeuralSSMRegressor, ReducedSSMRegressor

__version__ = "0.1.0"

__all__ = ["ManifoldMetaLearner", "NeuralSSMRegressor", "ReducedSSMRegressor"]
