"""Joint training of the lifting network and the encoder over a system class."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._jax import jnp
from ..archmods.encoder import EncoderConfig, EncoderParams, encoder_layout, init_encoder
from ..archmods.manifold import Manifold, gamma_count, init_gamma
from ..archmods.scaling import Scaling
from ..archmods.ssm import SsmConfig, theta_count, theta_layout
from ..boucwen import CoeffRanges, meta_batch
from ..errors import ConfigError, DivergenceError
from ..metrics import default_n_skip
from ..optim import AdamConfig, Status, adamw_run
from ..rng import derive_seed
from ..signals import MultisineSpec
from .losses import meta_value_and_grad


@dataclass(frozen=True)
class MetaTrainConfig:
    """Settings of one meta-training run.

    Train and test portions of every sampled dataset share the length
    ``seq_len``. Each iteration draws a fresh batch unless ``pool_size`` is
    set, in which case iteration t reuses batch ``t % pool_size``. With
    ``input_seed`` set every dataset is excited by the same input pair.
    """

    ssm: SsmConfig = field(default_factory=SsmConfig)
    n_phi: int = 20
    encoder_hidden: int = 128
    head_hidden: int = 128
    batch_size: int = 128
    seq_len: int = 2000
    n_skip: int | None = None
    adam: AdamConfig = field(default_factory=lambda: AdamConfig(
        lr_init=2e-4, lr_final=2e-5, total_iters=200_000, schedule="cosine"))
    ranges: CoeffRanges = field(default_factory=CoeffRanges.broad)
    fs: float = 750.0
    f_lo: float = 5.0
    f_hi: float = 150.0
    input_rms: float = 50.0
    noise_std: float = 8e-6
    substeps: int = 10
    seed: int = 0
    pool_size: int | None = None
    input_seed: int | None = None
    scaling: Scaling = field(default_factory=Scaling)
    init_output_gain: float = 1.0
    freeze_manifold: bool = False
    freeze_encoder: bool = False

    def __post_init__(self):
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ConfigError(f"batch_size must be a positive integer, got {self.batch_size}")
        if not 1 <= self.n_phi < theta_count(self.ssm):
            raise ConfigError(f"need 1 <= n_phi < n_theta = {theta_count(self.ssm)}, got {self.n_phi}")
        if self.pool_size is not None and self.pool_size < 1:
            raise ConfigError("pool_size must be >= 1")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.init_output_gain < 0:
            raise ConfigError("init_output_gain must be >= 0")
        if not self.n_skip_used < self.seq_len:
            raise ConfigError(f"n_skip={self.n_skip_used} leaves no samples of {self.seq_len}")
        self.excitation  # validates the multisine settings

    @property
    def n_skip_used(self) -> int:
        return default_n_skip(self.seq_len) if self.n_skip is None else int(self.n_skip)

    @property
    def excitation(self) -> MultisineSpec:
        return MultisineSpec(self.seq_len, self.fs, self.f_lo, self.f_hi, self.input_rms)

    @property
    def encoder(self) -> EncoderConfig:
        return EncoderConfig(self.ssm.n_u + self.ssm.n_y, self.encoder_hidden, self.head_hidden, self.n_phi)

    @property
    def n_gamma(self) -> int:
        return gamma_count(theta_count(self.ssm), self.n_phi)


def batch_arrays(cfg: MetaTrainConfig, t: int):
    """Scaled (u_tr, y_tr, u_te, y_te) stacks of shape (b, seq_len) for iteration ``t``."""
    index = t if cfg.pool_size is None else t % cfg.pool_size
    spec = cfg.excitation
    data = meta_batch(cfg.batch_size, cfg.ranges, spec, spec, cfg.noise_std, cfg.substeps,
                      seed=derive_seed(cfg.seed, "meta_iter", index), input_seed=cfg.input_seed)
    sc = cfg.scaling
    return tuple(jnp.asarray(np.stack(a)) for a in (
        [sc.u(d.u_tr) for d in data], [sc.y(d.y_tr) for d in data],
        [sc.u(d.u_te) for d in data], [sc.y(d.y_te) for d in data]))


def initial_parameters(cfg: MetaTrainConfig) -> np.ndarray:
    """concat(gamma, psi) at initialization."""
    gamma = init_gamma(cfg.ssm, cfg.n_phi, derive_seed(cfg.seed, "meta_init", 0), cfg.init_output_gain)
    psi = init_encoder(cfg.encoder, derive_seed(cfg.seed, "meta_init", 1))
    return np.concatenate([gamma, psi])


def meta_objective(cfg: MetaTrainConfig):
    """``(params, batch) -> (loss, grad)`` for the batch-mean test MSE."""
    t_layout = theta_layout(cfg.ssm)
    e_layout = encoder_layout(cfg.encoder)
    n_skip = cfg.n_skip_used

    def fun(x, batch):
        val, g = meta_value_and_grad(jnp.asarray(x), t_layout, e_layout, cfg.n_phi, *batch, n_skip)
        return float(val), np.asarray(g, dtype=float)

    return fun


def split_parameters(params, cfg: MetaTrainConfig) -> tuple[Manifold, EncoderParams]:
    params = np.asarray(params, dtype=float)
    m = Manifold.from_gamma(params[: cfg.n_gamma], cfg.ssm, cfg.n_phi, cfg.scaling)
    return m, EncoderParams(cfg.encoder, params[cfg.n_gamma:])


def meta_train(cfg: MetaTrainConfig, params0=None) -> tuple[Manifold, EncoderParams, np.ndarray]:
    """Adam on (gamma, psi) jointly, one freshly sampled batch per iteration.

    Returns the trained manifold, encoder and the per-iteration batch loss.

    Raises
    ------
    DivergenceError
        If the loss turns non-finite or exceeds the divergence guard.
    """
    x0 = initial_parameters(cfg) if params0 is None else np.array(params0, dtype=float).reshape(-1)
    if x0.size != cfg.n_gamma + encoder_layout(cfg.encoder).size:
        raise ConfigError(f"initial parameters have {x0.size} entries, config needs "
                          f"{cfg.n_gamma + encoder_layout(cfg.encoder).size}")
    mask = None
    if cfg.freeze_manifold or cfg.freeze_encoder:
        mask = np.ones(x0.size, dtype=bool)
        if cfg.freeze_manifold:
            mask[: cfg.n_gamma] = False
        if cfg.freeze_encoder:
            mask[cfg.n_gamma:] = False
    res = adamw_run(meta_objective(cfg), x0, cfg.adam, batches=lambda t: batch_arrays(cfg, t), mask=mask)
    if res.status == Status.DIVERGED:
        raise DivergenceError(f"meta-training loss blew up at iteration {res.n_iter}", index=res.n_iter)
    m, psi = split_parameters(res.x, cfg)
    return m, psi, res.trace
