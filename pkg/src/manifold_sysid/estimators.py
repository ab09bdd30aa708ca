"""scikit-learn style wrappers around the training procedures.

``X`` is the input sequence (shape (N,) or (N, 1)), ``y`` the measured
output; rows are time-ordered samples of one experiment, so shuffling or
cross-validation splitters that break time order do not apply. ``score``
returns the fit index in percent.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .archmods.encoder import EncoderParams, encode
from .archmods.manifold import Manifold, lift
from .archmods.scaling import Scaling
from .archmods.ssm import SsmConfig, ssm_forward, theta_layout
from .boucwen import CoeffRanges, Dataset
from .metrics import fit_index, default_n_skip
from .optim import AdamConfig, LbfgsConfig
from .pipeline.meta import MetaTrainConfig, meta_train
from .pipeline.training import (FullTrainConfig, ReducedTrainConfig, train_full, train_linear_baseline,
                                train_reduced)
from .validation import check_sequence, check_sequence_pair


def _as_dataset(u, y, fs=750.0) -> Dataset:
    # the test half is a placeholder; estimator scoring happens through predict
    return Dataset(u, y, u, y, fs)


class _SimulatorMixin:
    def predict(self, X) -> np.ndarray:
        """Free-run simulation from the zero state, in output units."""
        check_is_fitted(self, "theta_")
        u = check_sequence(X)
        scaling = Scaling(self.u_scale, self.y_scale)
        return scaling.y_inverse(ssm_forward(self.theta_, theta_layout(self.ssm_), scaling.u(u)))

    def score(self, X, y, sample_weight=None) -> float:
        """Fit index (percent) of the simulation, skipping the initial transient."""
        u, y = check_sequence_pair(X, y)
        n_skip = default_n_skip(y.size) if self.n_skip is None else self.n_skip
        return fit_index(y, self.predict(u), n_skip)


class NeuralSSMRegressor(_SimulatorMixin, RegressorMixin, BaseEstimator):
    """Neural state-space model trained on all parameters (AdamW, then L-BFGS).

    Parameters
    ----------
    n_x, hidden : int
        State dimension and hidden width of both nonlinear blocks.
    linear : bool
        Fit only A, B, C (the linear baseline) instead of every parameter.
    adam_iters, lr, weight_decay, lbfgs_iters
        Optimizer budget and settings.
    n_skip : int or None
        Transient samples ignored by the loss and by ``score``.
    random_state : int
        Initialization seed.
    """

    def __init__(self, n_x=3, hidden=16, linear=False, adam_iters=2000, lr=3e-3, weight_decay=1e-4,
                 lbfgs_iters=1000, n_skip=None, u_scale=50.0, y_scale=1000.0, init_output_gain=0.01,
                 random_state=0):
        self.n_x = n_x
        self.hidden = hidden
        self.linear = linear
        self.adam_iters = adam_iters
        self.lr = lr
        self.weight_decay = weight_decay
        self.lbfgs_iters = lbfgs_iters
        self.n_skip = n_skip
        self.u_scale = u_scale
        self.y_scale = y_scale
        self.init_output_gain = init_output_gain
        self.random_state = random_state

    def _config(self) -> FullTrainConfig:
        return FullTrainConfig(
            ssm=SsmConfig(n_x=self.n_x, hidden_f=self.hidden, hidden_g=self.hidden),
            adam=AdamConfig(lr_init=self.lr, lr_final=self.lr, weight_decay=self.weight_decay,
                            total_iters=self.adam_iters),
            lbfgs=LbfgsConfig(max_iters=self.lbfgs_iters),
            n_skip=self.n_skip, scaling=Scaling(self.u_scale, self.y_scale),
            init_output_gain=self.init_output_gain)

    def fit(self, X, y):
        u, y = check_sequence_pair(X, y)
        cfg = self._config()
        train = train_linear_baseline if self.linear else train_full
        self.theta_, self.result_ = train(_as_dataset(u, y), cfg, seed=self.random_state)
        self.ssm_ = cfg.ssm
        self.n_features_in_ = 1
        self.train_loss_ = self.result_.train_loss
        self.status_ = self.result_.status
        return self


class ReducedSSMRegressor(_SimulatorMixin, RegressorMixin, BaseEstimator):
    """Model confined to a learned manifold; only its coordinates are fitted.

    Parameters
    ----------
    manifold : Manifold
    encoder : EncoderParams
        Supplies the starting coordinates.
    iters, lr : optimizer budget (AdamW) over the coordinates.
    """

    def __init__(self, manifold: Manifold | None = None, encoder: EncoderParams | None = None, iters=1000,
                 lr=1e-3, n_skip=None):
        self.manifold = manifold
        self.encoder = encoder
        self.iters = iters
        self.lr = lr
        self.n_skip = n_skip

    def fit(self, X, y):
        if self.manifold is None or self.encoder is None:
            raise ValueError("ReducedSSMRegressor needs a manifold and an encoder")
        u, y = check_sequence_pair(X, y)
        cfg = ReducedTrainConfig(adam=AdamConfig(lr_init=self.lr, lr_final=self.lr, total_iters=self.iters),
                                 n_skip=self.n_skip)
        self.phi_, self.result_ = train_reduced(_as_dataset(u, y), self.manifold, self.encoder, cfg)
        self.theta_ = lift(self.manifold, self.phi_)
        self.ssm_ = self.manifold.ssm
        self.n_features_in_ = 1
        return self

    @property
    def u_scale(self):
        return self.manifold.scaling.u_scale

    @property
    def y_scale(self):
        return self.manifold.scaling.y_scale


class ManifoldMetaLearner(TransformerMixin, BaseEstimator):
    """Meta-learns a manifold and encoder from simulated Bouc-Wen systems.

    ``fit`` draws its own data from the simulator, so ``X`` is ignored.
    ``transform`` maps a list of (u, y) records to manifold coordinates,
    one row per record.
    """

    def __init__(self, n_phi=4, hidden=8, encoder_hidden=32, head_hidden=128, batch_size=16, seq_len=256,
                 iters=3000, lr=1e-3, lr_final=1e-4, range_fraction=0.2, noise_std=8e-6, random_state=0):
        self.n_phi = n_phi
        self.hidden = hidden
        self.encoder_hidden = encoder_hidden
        self.head_hidden = head_hidden
        self.batch_size = batch_size
        self.seq_len = seq_len
        self.iters = iters
        self.lr = lr
        self.lr_final = lr_final
        self.range_fraction = range_fraction
        self.noise_std = noise_std
        self.random_state = random_state

    def _config(self) -> MetaTrainConfig:
        return MetaTrainConfig(
            ssm=SsmConfig(hidden_f=self.hidden, hidden_g=self.hidden), n_phi=self.n_phi,
            encoder_hidden=self.encoder_hidden, head_hidden=self.head_hidden, batch_size=self.batch_size,
            seq_len=self.seq_len, adam=AdamConfig(lr_init=self.lr, lr_final=self.lr_final,
                                                  total_iters=self.iters, schedule="cosine"),
            ranges=CoeffRanges.around_nominal(self.range_fraction), noise_std=self.noise_std,
            seed=self.random_state)

    def fit(self, X=None, y=None):
        self.manifold_, self.encoder_, self.loss_trace_ = meta_train(self._config())
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "encoder_")
        rows = []
        for record in X:
            u, y = check_sequence_pair(*record)
            rows.append(encode(self.encoder_, u, y, self.manifold_.scaling))
        return np.array(rows).reshape(len(rows), self.n_phi)

    def reduced_regressor(self, **kwargs) -> ReducedSSMRegressor:
        check_is_fitted(self, "encoder_")
        return ReducedSSMRegressor(self.manifold_, self.encoder_, **kwargs)
