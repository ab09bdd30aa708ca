"""JAX import shim: every module imports jax through here so double
precision is enabled before the first array is created."""

import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp  # noqa: E402
from jax import lax  # noqa: E402

__all__ = ["jax", "jnp", "lax"]
