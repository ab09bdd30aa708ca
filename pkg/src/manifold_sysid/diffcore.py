"""Gradients, finite-difference oracles and a symmetric eigensolver.

Reverse-mode gradients come from JAX (double precision); the
finite-difference routine is plain numpy and never touches JAX's
derivative machinery, so it stays an independent check.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ._jax import jax, jnp
from .errors import DimensionMismatchError, NonFiniteError, NonFiniteValueError

LossFunction = Callable[[np.ndarray], float]


def _check_point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise NonFiniteValueError("parameter vector contains non-finite entries")
    return x


def make_value_and_grad(f: LossFunction, jit: bool = True) -> Callable[[np.ndarray], tuple[float, np.ndarray]]:
    """Wrap a JAX-traceable scalar loss as ``x -> (f(x), grad f(x))``.

    The returned callable takes and returns numpy arrays and raises
    :class:`NonFiniteError` if the value or any gradient entry is not finite.
    """
    vg = jax.value_and_grad(f)
    if jit:
        vg = jax.jit(vg)

    def evaluate(x):
        x = _check_point(x)
        val, g = vg(jnp.asarray(x))
        val = float(val)
        g = np.asarray(g, dtype=float)
        if not np.isfinite(val):
            raise NonFiniteError(f"loss evaluated to {val}")
        bad = np.flatnonzero(~np.isfinite(g))
        if bad.size:
            raise NonFiniteError(f"gradient is non-finite in {bad.size} entries (first: {bad[0]})")
        return val, g

    return evaluate


def value_and_grad(f: LossFunction, x) -> tuple[float, np.ndarray]:
    """Loss value and exact reverse-mode gradient at ``x``."""
    return make_value_and_grad(f, jit=False)(x)


def finite_diff_grad(f: LossFunction, x, h: float = 1e-5) -> np.ndarray:
    """Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    x = _check_point(x)
    g = np.empty_like(x)
    xp = x.copy()
    for i in range(x.size):
        xp[i] = x[i] + h
        fp = float(f(xp))
        xp[i] = x[i] - h
        fm = float(f(xp))
        xp[i] = x[i]
        g[i] = (fp - fm) / (2.0 * h)
    return g


def grad_rel_error(g, g_ref) -> float:
    """max |g - g_ref| relative to max |g_ref| (infinity-norm relative error)."""
    g = np.asarray(g, dtype=float)
    g_ref = np.asarray(g_ref, dtype=float)
    scale = np.max(np.abs(g_ref))
    return float(np.max(np.abs(g - g_ref)) / max(scale, np.finfo(float).tiny))


def sym_eig(m) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix.

    Entries asymmetric by more than 1e-8 (relative to the largest entry)
    are rejected; smaller asymmetry is removed by averaging with the
    transpose.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteValueError("matrix contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if m.size and np.max(np.abs(m - m.T)) > 1e-8 * scale:
        raise DimensionMismatchError("matrix is not symmetric within 1e-8")
    return np.linalg.eigvalsh(0.5 * (m + m.T))
