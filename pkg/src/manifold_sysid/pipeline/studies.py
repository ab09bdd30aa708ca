"""Monte Carlo studies over training length and the Hessian diagnostic."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .._jax import jnp
from ..archmods.encoder import EncoderParams
from ..archmods.manifold import Manifold
from ..archmods.ssm import theta_layout
from ..boucwen import CoeffRanges, Dataset, make_dataset
from ..diffcore import sym_eig
from ..errors import ConfigError, NonFiniteError
from ..hashing import config_hash
from ..metrics import default_n_skip
from ..rng import derive_seed, make_rng
from ..signals import MultisineSpec
from .losses import full_grad_batch
from .training import (FitResult, FullTrainConfig, ReducedTrainConfig, check_compatible,
                       train_full, train_linear_baseline, train_reduced)

DEFAULT_LENGTHS = (100, 200, 400, 500, 600, 800, 1000, 2000, 3000, 4000, 5000)
MODES = ("full", "reduced", "linear")
THREADS_ENV = "MANIFOLD_SYSID_THREADS"


@dataclass(frozen=True)
class McStudyConfig:
    """Monte Carlo study over training-sequence lengths.

    One long nominal-system record (noisy output) supplies the training
    windows; a separate noise-free record of ``test_length`` samples is the
    common test set.
    """

    lengths: tuple[int, ...] = DEFAULT_LENGTHS
    runs: int = 100
    modes: tuple[str, ...] = ("full", "reduced")
    long_length: int = 40960
    test_length: int = 8192
    noise_std: float = 8e-6
    substeps: int = 10
    full: FullTrainConfig = field(default_factory=FullTrainConfig)
    reduced: ReducedTrainConfig = field(default_factory=ReducedTrainConfig)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(v) for v in self.lengths))
        object.__setattr__(self, "modes", tuple(self.modes))
        if int(self.runs) != self.runs or self.runs < 1:
            raise ConfigError(f"runs must be a positive integer, got {self.runs}")
        if not self.lengths:
            raise ConfigError("at least one length is required")
        bad = [m for m in self.modes if m not in MODES]
        if bad or not self.modes or len(set(self.modes)) != len(self.modes):
            raise ConfigError(f"modes must be distinct entries of {MODES}, got {self.modes}")
        for L in self.lengths:
            if not 2 <= L <= self.long_length:
                raise ConfigError(f"length {L} outside [2, long_length={self.long_length}]")
            for n_skip in (self.full.n_skip, self.reduced.n_skip):
                skip = default_n_skip(L) if n_skip is None else n_skip
                if L < 2 * skip:
                    raise ConfigError(f"length {L} is shorter than twice n_skip={skip}")


def benchmark_dataset(cfg: McStudyConfig) -> Dataset:
    """Nominal-coefficient record: long noisy training part, noise-free test part."""
    return make_dataset(CoeffRanges.fixed(), MultisineSpec(cfg.long_length), MultisineSpec(cfg.test_length),
                        cfg.noise_std, cfg.substeps, rng=derive_seed(cfg.seed, "mc_data", 0))


def window(source: Dataset, cfg: McStudyConfig, L: int, run: int) -> Dataset:
    """The run-th random length-L training window, paired with the full test record."""
    start = int(make_rng(derive_seed(cfg.seed, f"mc_window/{L}", run)).integers(0, source.n_train - L + 1))
    sl = slice(start, start + L)
    return Dataset(source.u_tr[sl], source.y_tr[sl], source.u_te, source.y_te, source.fs,
                   coeffs=source.coeffs, noise_std=source.noise_std)


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def mc_study(
    cfg: McStudyConfig,
    m: Manifold | None = None,
    psi: EncoderParams | None = None,
    threads: int | None = None,
    source: Dataset | None = None,
) -> list[FitResult]:
    """Train one model per (mode, length, run) and score it on the common test set.

    Results come back ordered by mode (as listed in ``cfg.modes``), length
    and run. Every task derives its own seeds, so the output does not
    depend on ``threads``. Failed runs are recorded with ``status ==
    "failed"`` and never abort the study.
    """
    if "reduced" in cfg.modes:
        if m is None or psi is None:
            raise ConfigError("reduced-mode runs need a manifold and an encoder")
        check_compatible(m, psi)
    source = benchmark_dataset(cfg) if source is None else source
    chash = config_hash(cfg)
    tasks = [(mode, L, run) for mode in cfg.modes for L in cfg.lengths for run in range(cfg.runs)]

    def run_task(task):
        mode, L, run = task
        d = window(source, cfg, L, run)
        seed = derive_seed(cfg.seed, f"mc_init/{L}", run)
        if mode == "full":
            return train_full(d, cfg.full, seed=seed, run=run, config_hash=chash)[1]
        if mode == "linear":
            return train_linear_baseline(d, cfg.full, seed=seed, run=run, config_hash=chash)[1]
        return train_reduced(d, m, psi, cfg.reduced, run=run, seed=seed, config_hash=chash)[1]

    n = worker_count(threads)
    if n == 1:
        return [run_task(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(run_task, tasks))


def aggregate(results: list[FitResult]) -> list[dict]:
    """Per-(mode, L) median and quartiles of fit and rmse over successful runs.

    Groups appear in first-seen order. Quartiles use linear interpolation
    between order statistics; groups without a successful run get NaN.
    """
    groups: dict[tuple[str, int], list[FitResult]] = {}
    for r in results:
        groups.setdefault((r.mode, r.L), []).append(r)
    rows = []
    for (mode, L), rs in groups.items():
        ok = [r for r in rs if not r.failed]
        row = {"mode": mode, "L": L, "n_runs": len(rs), "n_failed": len(rs) - len(ok)}
        for key in ("fit_percent", "rmse", "wall_time_s"):
            vals = np.array([getattr(r, key) for r in ok], dtype=float)
            q = np.percentile(vals, [25, 50, 75]) if vals.size else np.full(3, np.nan)
            row[f"{key}_q25"], row[f"{key}_median"], row[f"{key}_q75"] = (float(v) for v in q)
        rows.append(row)
    return rows


def hessian_from_gradient(grad, x, h: float = 1e-4) -> np.ndarray:
    """Symmetrized central-difference Hessian of any gradient callable."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=float).reshape(-1)
    H = np.empty((x.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        H[:, j] = (np.asarray(grad(x + e), dtype=float) - np.asarray(grad(x - e), dtype=float)) / (2.0 * h)
    if not np.all(np.isfinite(H)):
        raise NonFiniteError("gradient is non-finite near x")
    return 0.5 * (H + H.T)


def finite_difference_hessian(theta, d: Dataset, cfg: FullTrainConfig = FullTrainConfig(),
                              h: float = 1e-4) -> np.ndarray:
    """Hessian of the full-order training loss, symmetrized.

    Column j is (g(theta + h e_j) - g(theta - h e_j)) / 2h with g the exact
    reverse-mode gradient.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if not np.all(np.isfinite(theta)):
        raise NonFiniteError("theta contains non-finite entries")
    layout = theta_layout(cfg.ssm)
    n = theta.size
    n_skip = default_n_skip(d.n_train) if cfg.n_skip is None else cfg.n_skip
    u = jnp.asarray(cfg.scaling.u(d.u_tr))
    y = jnp.asarray(cfg.scaling.y(d.y_tr))
    steps = h * np.eye(n)
    grads = np.asarray(full_grad_batch(jnp.asarray(np.concatenate([theta + steps, theta - steps])),
                                       layout, u, y, n_skip, cfg.rho))
    if not np.all(np.isfinite(grads)):
        raise NonFiniteError("gradient is non-finite near theta")
    H = (grads[:n] - grads[n:]).T / (2.0 * h)
    return 0.5 * (H + H.T)


def hessian_spectrum(theta, d: Dataset, h: float = 1e-4, cfg: FullTrainConfig = FullTrainConfig()) -> np.ndarray:
    """Ascending eigenvalues of :func:`finite_difference_hessian`."""
    return sym_eig(finite_difference_hessian(theta, d, cfg, h))
