"""Differentiable training criteria on scaled signals.

Every loss rolls the state-space model out from the zero state and skips
the first ``n_skip`` samples. Layouts and ``n_skip`` are static under jit,
so each distinct (architecture, sequence length) pair compiles once.
"""

from __future__ import annotations

from functools import partial

import numpy as np

from .._jax import jax, jnp
from ..archmods.encoder import encode_scaled
from ..archmods.layout import ParamLayout
from ..archmods.ssm import rollout
from ..metrics import mse_loss


def _predict(theta, layout: ParamLayout, u):
    n_x = layout["A"].shape[0]
    ys, _ = rollout(layout.unflatten(theta), u[:, None], jnp.zeros(n_x, dtype=u.dtype))
    return ys[:, 0]


def full_loss(theta, layout, u, y, n_skip, rho=0.0):
    """MSE of the free-run prediction plus ``rho * ||theta||^2``."""
    return mse_loss(y, _predict(theta, layout, u), n_skip) + rho * jnp.sum(theta * theta)


def reduced_loss(phi, V, theta_bias, layout, u, y, n_skip):
    """MSE of the model lifted from manifold coordinates ``phi``."""
    return mse_loss(y, _predict(V @ phi + theta_bias, layout, u), n_skip)


def embedded_loss(x, index, layout, u, y, n_skip, rho=0.0):
    """Full loss with only the entries ``index`` free and all others zero."""
    theta = jnp.zeros(layout.size, dtype=x.dtype).at[index].set(x)
    return full_loss(theta, layout, u, y, n_skip, rho)


def meta_loss(params, theta_layout, enc_layout, n_phi, u_tr, y_tr, u_te, y_te, n_skip):
    """Batch mean of the test MSE after encoding each training record.

    ``params`` is ``concat(gamma, psi)``; arrays carry a leading batch axis.
    """
    n_theta = theta_layout.size
    n_gamma = (n_phi + 1) * n_theta
    V = params[: n_theta * n_phi].reshape(n_theta, n_phi)
    theta_bias = params[n_theta * n_phi: n_gamma]
    p_enc = enc_layout.unflatten(params[n_gamma:])

    def one(ut, yt, uv, yv):
        phi = encode_scaled(p_enc, ut, yt)
        return reduced_loss(phi, V, theta_bias, theta_layout, uv, yv, n_skip)

    return jnp.mean(jax.vmap(one)(u_tr, y_tr, u_te, y_te))


full_value_and_grad = jax.jit(jax.value_and_grad(full_loss), static_argnums=(1, 4))
reduced_value_and_grad = jax.jit(jax.value_and_grad(reduced_loss), static_argnums=(3, 6))
embedded_value_and_grad = jax.jit(jax.value_and_grad(embedded_loss), static_argnums=(2, 5))
meta_value_and_grad = jax.jit(jax.value_and_grad(meta_loss), static_argnums=(1, 2, 3, 8))
full_grad = jax.jit(jax.grad(full_loss), static_argnums=(1, 4))


@partial(jax.jit, static_argnums=(1, 4))
def full_grad_batch(thetas, layout, u, y, n_skip, rho=0.0):
    """Gradients at a stack of parameter vectors."""
    return jax.vmap(lambda t: jax.grad(full_loss)(t, layout, u, y, n_skip, rho))(thetas)


def numpy_objective(vg, *args):
    """Wrap a jitted value-and-grad as ``x -> (float, ndarray)`` for the optimizers."""

    def fun(x):
        val, g = vg(jnp.asarray(x), *args)
        return float(val), np.asarray(g, dtype=float)

    return fun
