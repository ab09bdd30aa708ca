"""Single-dataset training: full-order, linear baseline and reduced-order."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .._jax import jnp
from ..archmods.encoder import EncoderParams, encode
from ..archmods.manifold import Manifold, lift
from ..archmods.scaling import Scaling
from ..archmods.ssm import SsmConfig, init_theta, ssm_forward, theta_layout
from ..boucwen import Dataset
from ..errors import DimensionMismatchError, NonFiniteError, NumericalError
from ..metrics import MetricsReport, default_n_skip, evaluate
from ..optim import AdamConfig, LbfgsConfig, OptimResult, Status, adamw_run, lbfgs_minimize
from .losses import (embedded_value_and_grad, full_value_and_grad, numpy_objective,
                     reduced_value_and_grad)

LINEAR_BLOCKS = ("A", "B", "C")


@dataclass(frozen=True)
class FullTrainConfig:
    """AdamW followed by L-BFGS on the full parameter vector."""

    ssm: SsmConfig = field(default_factory=SsmConfig)
    adam: AdamConfig = field(default_factory=lambda: AdamConfig(weight_decay=1e-4, total_iters=2000))
    lbfgs: LbfgsConfig = field(default_factory=lambda: LbfgsConfig(max_iters=1000))
    rho: float = 0.0
    n_skip: int | None = None
    scaling: Scaling = field(default_factory=Scaling)
    init_output_gain: float = 0.01

    def __post_init__(self):
        if not self.init_output_gain >= 0:
            raise ValueError("init_output_gain must be >= 0")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.n_skip is not None and self.n_skip < 0:
            raise ValueError("n_skip must be >= 0")


@dataclass(frozen=True)
class ReducedTrainConfig:
    """AdamW over manifold coordinates, started from the encoder's guess."""

    adam: AdamConfig = field(default_factory=lambda: AdamConfig(total_iters=1000))
    n_skip: int | None = None

    def __post_init__(self):
        if self.n_skip is not None and self.n_skip < 0:
            raise ValueError("n_skip must be >= 0")


@dataclass
class FitResult:
    """Outcome of one training run, with provenance.

    ``metrics`` is None when the run failed; ``train_loss`` is the final
    training criterion on the scaled data.
    """

    mode: str
    L: int
    run: int
    metrics: MetricsReport | None
    wall_time_s: float
    status: str
    seed: int | None = None
    config_hash: str = ""
    train_loss: float = math.nan
    trace: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def failed(self) -> bool:
        return self.metrics is None

    @property
    def fit_percent(self) -> float:
        return math.nan if self.metrics is None else self.metrics.fit_percent

    @property
    def rmse(self) -> float:
        return math.nan if self.metrics is None else self.metrics.rmse


def _scaled(d: Dataset, scaling: Scaling):
    return jnp.asarray(scaling.u(d.u_tr)), jnp.asarray(scaling.y(d.y_tr))


def _train_skip(n_skip, length):
    n_skip = default_n_skip(length) if n_skip is None else int(n_skip)
    if not n_skip < length:
        raise DimensionMismatchError(f"n_skip={n_skip} leaves no training samples out of {length}")
    return n_skip


def heldout_metrics(theta, ssm: SsmConfig, scaling: Scaling, u, y, n_skip=None) -> MetricsReport:
    """Metrics of the free-run simulation on (u, y) in raw units.

    Raises
    ------
    NonFiniteError
        If the simulation grows so large that the error overflows.
    """
    y_hat = scaling.y_inverse(ssm_forward(theta, theta_layout(ssm), scaling.u(np.asarray(u))))
    with np.errstate(over="ignore", invalid="ignore"):
        rep = evaluate(y, y_hat, n_skip)
    if not (np.isfinite(rep.mse) and np.isfinite(rep.fit_percent)):
        raise NonFiniteError("simulated output overflows on the evaluation data")
    return rep


def _adam_then_lbfgs(fun, x0, adam: AdamConfig, lbfgs: LbfgsConfig | None):
    """Run both stages; return (x, loss, status, trace)."""
    traces = []
    x, loss, status = np.array(x0, dtype=float), math.nan, Status.COMPLETED
    if adam.total_iters:
        res: OptimResult = adamw_run(fun, x, adam)
        traces.append(res.trace)
        if res.status == Status.DIVERGED:
            return x, math.nan, Status.DIVERGED, np.concatenate(traces)
        x, status = res.x, res.status
        loss = fun(x)[0]
    if lbfgs is not None and lbfgs.max_iters:
        res = lbfgs_minimize(fun, x, lbfgs)
        traces.append(res.trace[1:])
        x, loss, status = res.x, res.fun, res.status
    if math.isnan(loss):
        loss = fun(x)[0]
    return x, loss, status, (np.concatenate(traces) if traces else np.empty(0))


def _finish(mode, d, run, seed, config_hash, t0, fit):
    """Evaluate a trained parameter vector, turning numerical trouble into a failed result."""
    x, loss, status, trace, metrics_fn = fit
    metrics = None
    if status != Status.DIVERGED and np.isfinite(loss):
        try:
            metrics = metrics_fn(x)
        except NumericalError:
            metrics = None
    if metrics is None:
        status = Status.FAILED
    return FitResult(mode, d.n_train, run, metrics, time.perf_counter() - t0, str(status),
                     seed, config_hash, float(loss), trace)


def train_full(
    d: Dataset,
    cfg: FullTrainConfig = FullTrainConfig(),
    seed: int = 0,
    theta0=None,
    run: int = 0,
    config_hash: str = "",
) -> tuple[np.ndarray, FitResult]:
    """Fit every parameter of the state-space model to the training portion.

    Parameters
    ----------
    d : Dataset
    cfg : FullTrainConfig
    seed : int
        Initialization seed, ignored when ``theta0`` is given.
    theta0 : array_like, optional
        Starting point, e.g. a lifted manifold point.

    Returns
    -------
    theta_hat : ndarray
    result : FitResult
        Metrics on the test portion. Divergence gives a failed result
        (``status == "failed"``, no metrics) instead of an exception.
    """
    t0 = time.perf_counter()
    layout = theta_layout(cfg.ssm)
    n_skip = _train_skip(cfg.n_skip, d.n_train)
    if theta0 is None:
        x0 = init_theta(cfg.ssm, seed, cfg.init_output_gain)
    else:
        x0 = np.asarray(theta0, dtype=float).reshape(-1)
    if x0.size != layout.size:
        raise DimensionMismatchError(f"theta0 has {x0.size} entries, architecture has {layout.size}")
    u, y = _scaled(d, cfg.scaling)
    fun = numpy_objective(full_value_and_grad, layout, u, y, n_skip, cfg.rho)
    try:
        x, loss, status, trace = _adam_then_lbfgs(fun, x0, cfg.adam, cfg.lbfgs)
    except NumericalError:
        x, loss, status, trace = x0, math.nan, Status.DIVERGED, np.empty(0)
    res = _finish("full", d, run, seed, config_hash, t0, (
        x, loss, status, trace,
        lambda th: heldout_metrics(th, cfg.ssm, cfg.scaling, d.u_te, d.y_te)))
    return x, res


def linear_index(ssm: SsmConfig) -> np.ndarray:
    """Positions of the A, B, C blocks inside theta."""
    layout = theta_layout(ssm)
    return np.concatenate([np.arange(layout[n].start, layout[n].stop) for n in LINEAR_BLOCKS])


def train_linear_baseline(
    d: Dataset,
    cfg: FullTrainConfig = FullTrainConfig(),
    seed: int = 0,
    run: int = 0,
    config_hash: str = "",
) -> tuple[np.ndarray, FitResult]:
    """Fit only (A, B, C) with the neural blocks frozen at zero.

    Uses the optimizer stack of ``cfg``. The returned theta has zeros in
    every neural block.
    """
    t0 = time.perf_counter()
    layout = theta_layout(cfg.ssm)
    n_skip = _train_skip(cfg.n_skip, d.n_train)
    index = linear_index(cfg.ssm)
    x0 = init_theta(cfg.ssm, seed)[index]
    u, y = _scaled(d, cfg.scaling)
    fun = numpy_objective(embedded_value_and_grad, jnp.asarray(index), layout, u, y, n_skip, cfg.rho)

    def embed(x):
        theta = np.zeros(layout.size)
        theta[index] = x
        return theta

    try:
        x, loss, status, trace = _adam_then_lbfgs(fun, x0, cfg.adam, cfg.lbfgs)
    except NumericalError:
        x, loss, status, trace = x0, math.nan, Status.DIVERGED, np.empty(0)
    res = _finish("linear", d, run, seed, config_hash, t0, (
        x, loss, status, trace,
        lambda v: heldout_metrics(embed(v), cfg.ssm, cfg.scaling, d.u_te, d.y_te)))
    return embed(x), res


def check_compatible(m: Manifold, psi: EncoderParams) -> None:
    if psi.config.n_phi != m.n_phi:
        raise DimensionMismatchError(
            f"encoder outputs {psi.config.n_phi} coordinates but the manifold has dimension {m.n_phi}")
    if psi.config.n_in != m.ssm.n_u + m.ssm.n_y:
        raise DimensionMismatchError(
            f"encoder reads {psi.config.n_in} channels, the model has {m.ssm.n_u + m.ssm.n_y}")


def train_reduced(
    d: Dataset,
    m: Manifold,
    psi: EncoderParams,
    cfg: ReducedTrainConfig = ReducedTrainConfig(),
    run: int = 0,
    seed: int | None = None,
    config_hash: str = "",
) -> tuple[np.ndarray, FitResult]:
    """Fit manifold coordinates only, starting from the encoder's estimate.

    With ``cfg.adam.total_iters == 0`` the result is the encoder's amortized
    estimate as is.
    """
    t0 = time.perf_counter()
    check_compatible(m, psi)
    layout = theta_layout(m.ssm)
    n_skip = _train_skip(cfg.n_skip, d.n_train)
    phi0 = encode(psi, d.u_tr, d.y_tr, m.scaling)
    u, y = _scaled(d, m.scaling)
    fun = numpy_objective(reduced_value_and_grad, jnp.asarray(m.V), jnp.asarray(m.theta_bias),
                          layout, u, y, n_skip)
    try:
        if not np.all(np.isfinite(phi0)):
            raise NumericalError("encoder produced non-finite coordinates")
        x, loss, status, trace = _adam_then_lbfgs(fun, phi0, cfg.adam, None)
    except NumericalError:
        x, loss, status, trace = phi0, math.nan, Status.DIVERGED, np.empty(0)
    res = _finish("reduced", d, run, seed, config_hash, t0, (
        x, loss, status, trace,
        lambda p: heldout_metrics(lift(m, p), m.ssm, m.scaling, d.u_te, d.y_te)))
    return x, res
