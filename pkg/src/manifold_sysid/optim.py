"""First-order and quasi-Newton minimizers over flat parameter vectors.

Both minimizers take ``fun(x) -> (loss, grad)`` with numpy in and out.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np

from .errors import DivergenceError

ValueAndGrad = Callable[..., tuple[float, np.ndarray]]

DIVERGENCE_FACTOR = 1e6


class Status(str, Enum):
    COMPLETED = "completed"
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    LINE_SEARCH_FAILED = "line_search_failed"
    DIVERGED = "diverged"
    FAILED = "failed"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class AdamConfig:
    lr_init: float = 1e-3
    lr_final: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    total_iters: int = 1000
    schedule: str = "constant"

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.lr_init >= self.lr_final > 0:
            raise ValueError("need lr_init >= lr_final > 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if int(self.total_iters) != self.total_iters or self.total_iters < 0:
            raise ValueError("total_iters must be a non-negative integer")
        if self.schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LbfgsConfig:
    """L-BFGS settings; ``memory=None`` keeps every pair (full BFGS)."""

    memory: int | None = 10
    max_iters: int = 1000
    c1: float = 1e-4
    c2: float = 0.9
    grad_tol: float = 1e-10
    max_ls_evals: int = 30
    refine: bool = True
    refine_tol: float = 1e-10

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.memory is not None and self.memory < 1:
            raise ValueError("memory must be >= 1 (or None for full memory)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    status: Status
    n_iter: int
    trace: np.ndarray
    lrs: np.ndarray = field(default_factory=lambda: np.empty(0))
    n_evals: int = 0


def cosine_lr(t: int, cfg: AdamConfig) -> float:
    """lr_final + (lr_init - lr_final) (1 + cos(pi t / T)) / 2."""
    if cfg.total_iters == 0:
        return cfg.lr_init
    frac = min(max(t, 0), cfg.total_iters) / cfg.total_iters
    return cfg.lr_final + 0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + math.cos(math.pi * frac))


def learning_rate(t: int, cfg: AdamConfig) -> float:
    return cosine_lr(t, cfg) if cfg.schedule == "cosine" else cfg.lr_init


def adamw_run(
    fun: ValueAndGrad,
    x0,
    cfg: AdamConfig,
    batches: Callable[[int], Any] | None = None,
    mask=None,
) -> OptimResult:
    """Adam with bias correction and decoupled weight decay.

    Each iteration first shrinks ``x`` by ``(1 - lr_t * weight_decay)`` and
    then takes the Adam step. With ``batches`` given the loss is called as
    ``fun(x, batches(t))``, which is how stochastic objectives get their
    data. The trace holds the loss at each iterate before its update.
    Entries where the boolean ``mask`` is False are never updated (neither
    decay nor step), so they stay bit-identical.

    Raises
    ------
    DivergenceError
        On a non-finite loss or gradient; ``index`` is the iteration.
    """
    x = np.array(x0, dtype=float).reshape(-1)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    trace = np.empty(cfg.total_iters)
    lrs = np.empty(cfg.total_iters)
    b1, b2 = cfg.beta1, cfg.beta2
    keep = None if mask is None else np.asarray(mask, dtype=bool).reshape(-1)
    if keep is not None and keep.size != x.size:
        raise ValueError(f"mask has {keep.size} entries, parameters have {x.size}")
    f0 = None
    for t in range(cfg.total_iters):
        lr = learning_rate(t, cfg)
        f, g = fun(x) if batches is None else fun(x, batches(t))
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            raise DivergenceError(f"non-finite loss or gradient at Adam iteration {t}", index=t)
        f0 = f if f0 is None else f0
        trace[t], lrs[t] = f, lr
        if f > DIVERGENCE_FACTOR * f0 and f0 > 0:
            return OptimResult(x, f, Status.DIVERGED, t, trace[: t + 1], lrs[: t + 1], t + 1)
        x_prev = x.copy() if keep is not None else None
        if cfg.weight_decay:
            x *= 1.0 - lr * cfg.weight_decay
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1 ** (t + 1))
        v_hat = v / (1.0 - b2 ** (t + 1))
        x -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        if keep is not None:
            x = np.where(keep, x, x_prev)
    last = float(trace[-1]) if cfg.total_iters else float("nan")
    return OptimResult(x, last, Status.COMPLETED, cfg.total_iters, trace, lrs, cfg.total_iters)


# --------------------------------------------------------------------------
# L-BFGS

def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db)."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if not np.isfinite(rad) or rad < 0:
        return None
    d2 = math.copysign(math.sqrt(rad), b - a)
    den = db - da + 2.0 * d2
    if den == 0:
        return None
    t = b - (b - a) * (db + d2 - d1) / den
    return t if np.isfinite(t) else None


class _LineSearch:
    """Strong-Wolfe search: bracketing phase plus cubic-interpolation zoom."""

    def __init__(self, fun, x, d, f0, g0, cfg: LbfgsConfig):
        self.fun, self.x, self.d = fun, x, d
        self.f0, self.d0 = f0, float(g0 @ d)
        self.cfg = cfg
        self.evals = 0
        self.best = None  # (alpha, f, g) with the lowest f seen

    def phi(self, a):
        self.evals += 1
        try:
            f, g = self.fun(self.x + a * self.d)
        except (ArithmeticError, ValueError):
            f, g = np.inf, None
        if not np.isfinite(f) or g is None or not np.all(np.isfinite(g)):
            return np.inf, None, np.nan
        if self.best is None or f < self.best[1]:
            self.best = (a, f, g)
        return f, g, float(g @ self.d)

    def armijo(self, a, f):
        return f <= self.f0 + self.cfg.c1 * a * self.d0

    def curvature(self, dphi):
        return abs(dphi) <= -self.cfg.c2 * self.d0

    def run(self, a1=1.0):
        a_prev, f_prev, d_prev = 0.0, self.f0, self.d0
        a = a1
        first = True
        while self.evals < self.cfg.max_ls_evals:
            f, g, dphi = self.phi(a)
            if not np.isfinite(f) or not self.armijo(a, f) or (not first and f >= f_prev):
                return self.zoom(a_prev, f_prev, d_prev, a, f, dphi)
            if self.curvature(dphi):
                return self.refined(a, f, g, dphi)
            if dphi >= 0:
                return self.zoom(a, f, dphi, a_prev, f_prev, d_prev)
            a_prev, f_prev, d_prev = a, f, dphi
            a *= 2.0
            first = False
        return None

    def refined(self, a, f, g, dphi):
        """One secant probe on the directional derivative.

        The root of the line through (0, d0) and (a, dphi) is the exact line
        minimizer when the loss is quadratic along the search line, which
        restores finite termination on quadratics. The probe is kept only if
        it still meets the Wolfe conditions and does not raise the loss.
        """
        if not self.cfg.refine or self.evals >= self.cfg.max_ls_evals:
            return a, f, g
        if abs(dphi) <= self.cfg.refine_tol * abs(self.d0) or not dphi > self.d0:
            return a, f, g
        t = a * self.d0 / (self.d0 - dphi)
        if not 0 < t <= 100.0 * a:
            return a, f, g
        ft, gt, dt = self.phi(t)
        if np.isfinite(ft) and ft <= f and abs(dt) < abs(dphi) and self.armijo(t, ft):
            return t, ft, gt
        return a, f, g

    def zoom(self, lo, flo, dlo, hi, fhi, dhi):
        while self.evals < self.cfg.max_ls_evals:
            width = hi - lo
            a = None
            if np.isfinite(fhi) and np.isfinite(dhi):
                a = _cubic_min(lo, flo, dlo, hi, fhi, dhi)
            lo_end, hi_end = min(lo, hi), max(lo, hi)
            margin = 0.1 * abs(width)
            if a is None or not (lo_end + margin <= a <= hi_end - margin):
                a = lo + 0.5 * width
            f, g, dphi = self.phi(a)
            if not np.isfinite(f) or not self.armijo(a, f) or f >= flo:
                hi, fhi, dhi = a, f, dphi
            else:
                if self.curvature(dphi):
                    return self.refined(a, f, g, dphi)
                if dphi * (hi - lo) >= 0:
                    hi, fhi, dhi = lo, flo, dlo
                lo, flo, dlo = a, f, dphi
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
                break
        return None


def lbfgs_minimize(fun: ValueAndGrad, x0, cfg: LbfgsConfig = LbfgsConfig()) -> OptimResult:
    """Limited-memory BFGS with a strong-Wolfe line search.

    Never raises on line-search trouble: the best iterate found so far is
    returned with ``Status.LINE_SEARCH_FAILED``. The loss at the returned
    point never exceeds the loss at ``x0``.

    Raises
    ------
    DivergenceError
        If the loss or gradient at ``x0`` is non-finite.
    """
    x = np.array(x0, dtype=float).reshape(-1)
    f, g = fun(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise DivergenceError("non-finite loss or gradient at the L-BFGS starting point", index=0)
    evals = 1
    trace = [f]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    status = Status.MAX_ITERS
    it = 0
    if np.max(np.abs(g), initial=0.0) <= cfg.grad_tol:
        return OptimResult(x, f, Status.CONVERGED, 0, np.array(trace), n_evals=evals)
    while it < cfg.max_iters:
        d = _two_loop(g, s_hist, y_hist, rho_hist)
        if not g @ d < 0:
            s_hist.clear(), y_hist.clear(), rho_hist.clear()
            d = -g
        ls = _LineSearch(fun, x, d, f, g, cfg)
        found = ls.run(1.0)
        evals += ls.evals
        if found is None:
            if ls.best is not None and ls.best[1] < f:
                a, f_new, g_new = ls.best
                x = x + a * d
                f, g = f_new, g_new
                trace.append(f)
                it += 1
            status = Status.LINE_SEARCH_FAILED
            break
        a, f_new, g_new = found
        s = a * d
        y = g_new - g
        sy = float(s @ y)
        x = x + s
        f, g = f_new, g_new
        trace.append(f)
        it += 1
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if cfg.memory is not None and len(s_hist) > cfg.memory:
                s_hist.pop(0), y_hist.pop(0), rho_hist.pop(0)
        if np.max(np.abs(g)) <= cfg.grad_tol:
            status = Status.CONVERGED
            break
    return OptimResult(x, f, status, it, np.array(trace), n_evals=evals)


def _two_loop(g, s_hist, y_hist, rho_hist):
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if s_hist:
        q *= (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q
