"""Input checks shared by the estimator API."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array, check_consistent_length

from .errors import DimensionMismatchError, NonFiniteValueError


def check_sequence(x, name: str = "X") -> np.ndarray:
    """A single-channel time series as a 1-D float array.

    Accepts shape (N,) or (N, 1); rejects NaN/inf and empty input.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2 and arr.shape[1] != 1:
        raise DimensionMismatchError(f"{name} must have a single channel, got shape {arr.shape}")
    if arr.ndim not in (1, 2):
        raise DimensionMismatchError(f"{name} must be 1-D or a single column, got shape {arr.shape}")
    try:
        arr = check_array(arr.reshape(-1, 1), ensure_2d=True, dtype=np.float64)
    except ValueError as exc:
        if "NaN" in str(exc) or "infinity" in str(exc):
            raise NonFiniteValueError(f"{name}: {exc}") from exc
        raise DimensionMismatchError(f"{name}: {exc}") from exc
    return arr[:, 0]


def check_sequence_pair(u, y) -> tuple[np.ndarray, np.ndarray]:
    """Validated (input, output) sequences of equal length."""
    u = check_sequence(u, "X")
    y = check_sequence(y, "y")
    try:
        check_consistent_length(u, y)
    except ValueError as exc:
        raise DimensionMismatchError(str(exc)) from exc
    return u, y
