"""Neural state-space base architecture.

    x[k+1] = A x[k] + B u[k] + N_f(x[k], u[k])
    y[k]   = C x[k] + N_g(x[k])

N_f and N_g are one-hidden-layer tanh networks, every affine layer with a
bias. Parameters live in one flat vector ordered as the blocks of
:func:`theta_layout`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import partial

import numpy as np

from .._jax import jax, jnp, lax
from ..errors import DimensionMismatchError, DivergenceError
from ..rng import SeedLike, make_rng
from .layout import ParamLayout

SPECTRAL_INIT = 0.9


@dataclass(frozen=True)
class SsmConfig:
    n_x: int = 3
    n_u: int = 1
    n_y: int = 1
    hidden_f: int = 16
    hidden_g: int = 16

    def __post_init__(self):
        for name, val in asdict(self).items():
            if int(val) != val or val < 1:
                raise ValueError(f"{name} must be a positive integer, got {val}")

    def as_dict(self) -> dict:
        return asdict(self)


def theta_layout(cfg: SsmConfig) -> ParamLayout:
    nx, nu, ny, hf, hg = cfg.n_x, cfg.n_u, cfg.n_y, cfg.hidden_f, cfg.hidden_g
    return ParamLayout([
        ("f.W1", (hf, nx + nu)), ("f.b1", (hf,), True),
        ("f.W2", (nx, hf)), ("f.b2", (nx,), True),
        ("g.W1", (hg, nx)), ("g.b1", (hg,), True),
        ("g.W2", (ny, hg)), ("g.b2", (ny,), True),
        ("A", (nx, nx)), ("B", (nx, nu)), ("C", (ny, nx)),
    ])


def theta_count(cfg: SsmConfig) -> int:
    return theta_layout(cfg).size


def rollout(p: dict, u, x0):
    """Simulate from ``x0`` given unflattened blocks ``p``.

    ``u`` has shape (N, n_u). Returns outputs (N, n_y) and the visited
    states (N, n_x), with y[k] computed from x[k].
    """

    def step(x, uk):
        y = p["C"] @ x + p["g.W2"] @ jnp.tanh(p["g.W1"] @ x + p["g.b1"]) + p["g.b2"]
        xu = jnp.concatenate([x, uk])
        x_next = p["A"] @ x + p["B"] @ uk + p["f.W2"] @ jnp.tanh(p["f.W1"] @ xu + p["f.b1"]) + p["f.b2"]
        return x_next, (y, x)

    _, (ys, xs) = lax.scan(step, x0, u)
    return ys, xs


def as_input_matrix(u, n_u: int):
    """Reshape an input sequence to (N, n_u)."""
    u = jnp.asarray(u)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[1] != n_u:
        raise DimensionMismatchError(f"input has shape {u.shape}, model expects (N, {n_u})")
    return u


@partial(jax.jit, static_argnums=1)
def _forward(theta, layout, u, x0):
    return rollout(layout.unflatten(theta), u, x0)


def ssm_forward(theta, layout: ParamLayout, u, x0=None) -> np.ndarray:
    """Output sequence of the base architecture.

    Parameters
    ----------
    theta : array_like
        Flat parameter vector matching ``layout``.
    layout : ParamLayout
        Output of :func:`theta_layout`.
    u : array_like, shape (N,) or (N, n_u)
    x0 : array_like, optional
        Initial state, zero by default.

    Returns
    -------
    ndarray, shape (N,) when n_y == 1, else (N, n_y)

    Raises
    ------
    DivergenceError
        If the rollout produces a non-finite state or output; ``index`` is
        the first affected step.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != layout.size:
        raise DimensionMismatchError(f"theta has {theta.size} entries, layout needs {layout.size}")
    n_x, n_u = layout["B"].shape
    u = as_input_matrix(np.asarray(u, dtype=float), n_u)
    if u.shape[0] < 1:
        raise DimensionMismatchError("input sequence is empty")
    x0 = np.zeros(n_x) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != n_x:
        raise DimensionMismatchError(f"x0 has {x0.size} entries, model has {n_x} states")
    ys, xs = _forward(jnp.asarray(theta), layout, u, jnp.asarray(x0))
    ys, xs = np.asarray(ys), np.asarray(xs)
    bad = ~(np.all(np.isfinite(ys), axis=1) & np.all(np.isfinite(xs), axis=1))
    if bad.any():
        k = int(np.argmax(bad))
        raise DivergenceError(f"state-space rollout became non-finite at step {k}", index=k)
    return ys[:, 0] if ys.shape[1] == 1 else ys


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    fan_out, fan_in = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


OUTPUT_WEIGHTS = ("f.W2", "g.W2")


def init_theta(cfg: SsmConfig, rng: SeedLike, output_gain: float = 1.0) -> np.ndarray:
    """Glorot-uniform weights (drawn in layout order), zero biases, A = 0.9 I.

    ``output_gain`` scales the output layers of N_f and N_g after drawing;
    a small gain starts the model close to its linear part without changing
    the random stream.
    """
    rng = make_rng(rng)
    layout = theta_layout(cfg)
    blocks = {}
    for s in layout.segments:
        if s.bias:
            blocks[s.name] = np.zeros(s.shape)
        elif s.name == "A":
            blocks[s.name] = SPECTRAL_INIT * np.eye(cfg.n_x)
        else:
            blocks[s.name] = glorot_uniform(rng, s.shape)
            if s.name in OUTPUT_WEIGHTS:
                blocks[s.name] = output_gain * blocks[s.name]
    return layout.flatten(blocks)
