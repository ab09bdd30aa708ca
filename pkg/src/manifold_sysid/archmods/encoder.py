"""Sequence-to-vector encoder: bidirectional GRU, mean pooling, MLP head.

GRU cell, one bias per gate, gate blocks stacked update/reset/candidate:

    z  = sigmoid(Wx_z x + Wh_z h + b_z)
    r  = sigmoid(Wx_r x + Wh_r h + b_r)
    n  = tanh(Wx_n x + b_n + r * (Wh_n h))
    h' = (1 - z) * n + z * h

Both directions start from h = 0. Their hidden sequences are concatenated,
averaged over time and passed through ``2 n_h -> head_hidden (tanh) ->
n_phi (linear)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import partial

import numpy as np

from .._jax import jax, jnp, lax
from ..errors import DimensionMismatchError
from ..rng import SeedLike, make_rng
from .layout import ParamLayout
from .scaling import Scaling
from .ssm import glorot_uniform

DIRECTIONS = ("fwd", "bwd")


@dataclass(frozen=True)
class EncoderConfig:
    n_in: int = 2
    n_h: int = 128
    head_hidden: int = 128
    n_phi: int = 20

    def __post_init__(self):
        for name, val in asdict(self).items():
            if int(val) != val or val < 1:
                raise ValueError(f"{name} must be a positive integer, got {val}")

    def as_dict(self) -> dict:
        return asdict(self)


def encoder_layout(cfg: EncoderConfig) -> ParamLayout:
    nh = cfg.n_h
    blocks = []
    for d in DIRECTIONS:
        blocks += [(f"gru.{d}.W_x", (3 * nh, cfg.n_in)),
                   (f"gru.{d}.W_h", (3 * nh, nh)),
                   (f"gru.{d}.b", (3 * nh,), True)]
    blocks += [("head.W1", (cfg.head_hidden, 2 * nh)), ("head.b1", (cfg.head_hidden,), True),
               ("head.W2", (cfg.n_phi, cfg.head_hidden)), ("head.b2", (cfg.n_phi,), True)]
    return ParamLayout(blocks)


@dataclass(frozen=True)
class EncoderParams:
    config: EncoderConfig
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.layout.size:
            raise DimensionMismatchError(f"encoder needs {self.layout.size} parameters, got {v.size}")
        object.__setattr__(self, "values", v)

    @property
    def layout(self) -> ParamLayout:
        return encoder_layout(self.config)


def _gru(W_x, W_h, b, xs):
    nh = W_h.shape[1]
    gx = xs @ W_x.T + b

    def step(h, g):
        # one fused product; slicing W_h inside the loop is much slower
        hh = W_h @ h
        z = jax.nn.sigmoid(g[:nh] + hh[:nh])
        r = jax.nn.sigmoid(g[nh:2 * nh] + hh[nh:2 * nh])
        n = jnp.tanh(g[2 * nh:] + r * hh[2 * nh:])
        h = (1.0 - z) * n + z * h
        return h, h

    _, hs = lax.scan(step, jnp.zeros(nh, dtype=xs.dtype), gx)
    return hs


def pooled(p: dict, u_s, y_s):
    """Mean-pooled bidirectional hidden state for scaled sequences."""
    xs = jnp.stack([u_s, y_s], axis=1)
    h_f = _gru(p["gru.fwd.W_x"], p["gru.fwd.W_h"], p["gru.fwd.b"], xs)
    h_b = _gru(p["gru.bwd.W_x"], p["gru.bwd.W_h"], p["gru.bwd.b"], xs[::-1])
    return jnp.concatenate([h_f.mean(axis=0), h_b.mean(axis=0)])


def encode_scaled(p: dict, u_s, y_s):
    h = pooled(p, u_s, y_s)
    return p["head.W2"] @ jnp.tanh(p["head.W1"] @ h + p["head.b1"]) + p["head.b2"]


@partial(jax.jit, static_argnums=(1, 4))
def _run(values, layout, u_s, y_s, features_only):
    p = layout.unflatten(values)
    return pooled(p, u_s, y_s) if features_only else encode_scaled(p, u_s, y_s)


def _prepare(u_tr, y_tr, scaling):
    u = np.asarray(u_tr, dtype=float).reshape(-1)
    y = np.asarray(y_tr, dtype=float).reshape(-1)
    if u.size != y.size:
        raise DimensionMismatchError(f"u_tr has {u.size} samples but y_tr has {y.size}")
    if u.size < 1:
        raise DimensionMismatchError("encoder needs at least one sample")
    return jnp.asarray(scaling.u(u)), jnp.asarray(scaling.y(y))


def encode(psi: EncoderParams, u_tr, y_tr, scaling: Scaling | None = None) -> np.ndarray:
    """Manifold coordinates predicted from a training record (raw units)."""
    u, y = _prepare(u_tr, y_tr, scaling or Scaling())
    return np.asarray(_run(jnp.asarray(psi.values), psi.layout, u, y, False))


def pooled_features(psi: EncoderParams, u_tr, y_tr, scaling: Scaling | None = None) -> np.ndarray:
    """The 2 n_h pooled vector that feeds the head (forward half first)."""
    u, y = _prepare(u_tr, y_tr, scaling or Scaling())
    return np.asarray(_run(jnp.asarray(psi.values), psi.layout, u, y, True))


def init_encoder(cfg: EncoderConfig, rng: SeedLike) -> np.ndarray:
    """Glorot-uniform per gate block and per head layer, zero biases."""
    rng = make_rng(rng)
    layout = encoder_layout(cfg)
    nh = cfg.n_h
    blocks = {}
    for s in layout.segments:
        if s.bias:
            blocks[s.name] = np.zeros(s.shape)
        elif s.name.startswith("gru."):
            fan_in = s.shape[1]
            blocks[s.name] = np.concatenate([glorot_uniform(rng, (nh, fan_in)) for _ in range(3)])
        else:
            blocks[s.name] = glorot_uniform(rng, s.shape)
    return layout.flatten(blocks)
