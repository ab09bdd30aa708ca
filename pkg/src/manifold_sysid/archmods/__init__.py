"""Learnable architectures: base SSM, lifting network, encoder."""

from __future__ import annotations

import numpy as np

from ..rng import SeedLike
from .encoder import EncoderConfig, EncoderParams, encode, encoder_layout, init_encoder, pooled_features
from .layout import ParamLayout, Segment
from .manifold import Manifold, gamma_count, init_gamma, lift, manifold_layout
from .scaling import Scaling
from .ssm import SsmConfig, init_theta, ssm_forward, theta_count, theta_layout


def init_params(kind: str, cfg, rng: SeedLike) -> np.ndarray:
    """Initial flat parameters.

    ``kind`` is ``"ssm"`` (cfg: SsmConfig), ``"manifold"`` (cfg: a
    ``(SsmConfig, n_phi)`` pair) or ``"encoder"`` (cfg: EncoderConfig).
    """
    if kind == "ssm":
        return init_theta(cfg, rng)
    if kind == "manifold":
        ssm, n_phi = cfg
        return init_gamma(ssm, n_phi, rng)
    if kind == "encoder":
        return init_encoder(cfg, rng)
    raise ValueError(f"unknown parameter kind {kind!r}")


__all__ = [
    "EncoderConfig", "EncoderParams", "Manifold", "ParamLayout", "Scaling", "Segment", "SsmConfig",
    "encode", "encoder_layout", "gamma_count", "init_params", "lift", "manifold_layout",
    "pooled_features", "ssm_forward", "theta_count", "theta_layout",
]
