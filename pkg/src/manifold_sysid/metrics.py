"""Fit index, rmse and the training MSE, each over samples k >= n_skip."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConstantOutputError, DimensionMismatchError


def default_n_skip(length: int) -> int:
    """Transient samples ignored by default: 100, or length // 10 below 1000."""
    return 100 if length >= 1000 else min(100, length // 10)


def _counted(y, y_hat, n_skip):
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise DimensionMismatchError(f"y has shape {y.shape} but y_hat has shape {y_hat.shape}")
    if not 0 <= n_skip < y.shape[0]:
        raise DimensionMismatchError(f"n_skip={n_skip} leaves no samples out of {y.shape[0]}")
    return y[n_skip:], y_hat[n_skip:]


def fit_index(y, y_hat, n_skip: int = 0) -> float:
    """100 * (1 - ||y - y_hat|| / ||y - mean(y)||), in percent."""
    y, y_hat = _counted(y, y_hat, n_skip)
    denom = np.linalg.norm(y - y.mean(axis=0))
    if denom == 0.0:
        raise ConstantOutputError("fit index undefined: y is constant over the counted samples")
    return float(100.0 * (1.0 - np.linalg.norm(y - y_hat) / denom))


def rmse(y, y_hat, n_skip: int = 0) -> float:
    y, y_hat = _counted(y, y_hat, n_skip)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def mse_loss(y, y_hat, n_skip: int = 0):
    """Mean squared residual over k >= n_skip.

    Accepts numpy or JAX arrays; JAX inputs are left untouched so the
    function can sit inside differentiated code.
    """
    if not hasattr(y, "shape"):
        y = np.asarray(y, dtype=float)
    if not hasattr(y_hat, "shape"):
        y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise DimensionMismatchError(f"y has shape {y.shape} but y_hat has shape {y_hat.shape}")
    if not 0 <= n_skip < y.shape[0]:
        raise DimensionMismatchError(f"n_skip={n_skip} leaves no samples out of {y.shape[0]}")
    r = y[n_skip:] - y_hat[n_skip:]
    return (r * r).mean()


@dataclass(frozen=True)
class MetricsReport:
    fit_percent: float
    rmse: float
    mse: float
    n_used: int
    n_skip: int

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(y, y_hat, n_skip: int | None = None) -> MetricsReport:
    """All indices at once; ``n_skip`` defaults to :func:`default_n_skip`."""
    n = np.asarray(y).shape[0]
    n_skip = default_n_skip(n) if n_skip is None else int(n_skip)
    mse = float(mse_loss(y, y_hat, n_skip))
    return MetricsReport(
        fit_percent=fit_index(y, y_hat, n_skip),
        rmse=float(np.sqrt(mse)),
        mse=mse,
        n_used=n - n_skip,
        n_skip=n_skip,
    )
