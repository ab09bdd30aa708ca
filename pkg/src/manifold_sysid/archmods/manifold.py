"""Linear lifting network theta = V phi + theta_bias."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatchError
from ..rng import SeedLike, make_rng
from .layout import ParamLayout
from .scaling import Scaling
from .ssm import SsmConfig, init_theta, theta_count


def manifold_layout(n_theta: int, n_phi: int) -> ParamLayout:
    """gamma = vec(V, theta_bias): V row-major, then the bias."""
    return ParamLayout([("V", (n_theta, n_phi)), ("theta_bias", (n_theta,), True)])


def gamma_count(n_theta: int, n_phi: int) -> int:
    return (n_phi + 1) * n_theta


@dataclass(frozen=True)
class Manifold:
    """Affine manifold of dimension ``n_phi`` inside the SSM parameter space."""

    V: np.ndarray
    theta_bias: np.ndarray
    ssm: SsmConfig = field(default_factory=SsmConfig)
    scaling: Scaling = field(default_factory=Scaling)

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        tb = np.array(self.theta_bias, dtype=float).reshape(-1)
        if V.ndim != 2 or V.shape[0] != tb.size:
            raise DimensionMismatchError(f"V has shape {V.shape} but theta_bias has {tb.size} entries")
        if tb.size != theta_count(self.ssm):
            raise DimensionMismatchError(
                f"manifold lives in R^{tb.size} but the architecture has {theta_count(self.ssm)} parameters")
        if not V.shape[1] < tb.size:
            raise DimensionMismatchError("manifold dimension must be below the parameter count")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "theta_bias", tb)

    @property
    def n_theta(self) -> int:
        return self.theta_bias.size

    @property
    def n_phi(self) -> int:
        return self.V.shape[1]

    @property
    def layout(self) -> ParamLayout:
        return manifold_layout(self.n_theta, self.n_phi)

    @property
    def gamma(self) -> np.ndarray:
        return np.concatenate([self.V.reshape(-1), self.theta_bias])

    @classmethod
    def from_gamma(cls, gamma, ssm: SsmConfig, n_phi: int, scaling: Scaling | None = None) -> Manifold:
        n_theta = theta_count(ssm)
        blocks = manifold_layout(n_theta, n_phi).unflatten(np.asarray(gamma, dtype=float))
        return cls(blocks["V"], blocks["theta_bias"], ssm, scaling or Scaling())


def lift(m: Manifold, phi) -> np.ndarray:
    """Map manifold coordinates to full parameters: V phi + theta_bias."""
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.size != m.n_phi:
        raise DimensionMismatchError(f"phi has {phi.size} entries, manifold has dimension {m.n_phi}")
    return m.V @ phi + m.theta_bias


def init_gamma(ssm: SsmConfig, n_phi: int, rng: SeedLike, output_gain: float = 1.0) -> np.ndarray:
    """V ~ N(0, 1/n_theta) entrywise, then a fresh SSM initialization as bias.

    ``output_gain`` is forwarded to :func:`init_theta` for the bias.
    """
    rng = make_rng(rng)
    n_theta = theta_count(ssm)
    V = rng.normal(0.0, 1.0 / np.sqrt(n_theta), size=(n_theta, n_phi))
    return np.concatenate([V.reshape(-1), init_theta(ssm, rng, output_gain)])
