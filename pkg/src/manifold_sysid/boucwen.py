"""Bouc-Wen hysteretic oscillator: simulation and meta-dataset sampling.

State (p, v, z) follows

    p' = v
    v' = (u - k_L p - c_L v - z) / m_L
    z' = alpha v - beta (gamma |v| |z|^(nu-1) z + delta v |z|^nu)

with y = p. For nu == 1 the factor |z|^(nu-1) is taken as 1 everywhere,
including z = 0.

Integration is classical RK4 on a fixed grid of ``substeps`` steps per
sample with the input held constant over each sample interval. The
right-hand side has kinks where v or z change sign; a step that straddles
one is split at the switching point (located by Illinois regula falsi on
the RK4 map) so the scheme keeps its fourth-order accuracy. The split is
only needed, and only done, when beta != 0.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numba
import numpy as np

from .errors import DimensionMismatchError, DivergenceError, NonFiniteValueError, SpecError
from .rng import SeedLike, derive_seed, make_rng
from .signals import MultisineSpec, Signal, add_noise, multisine

COEFF_NAMES = ("m_L", "c_L", "k_L", "alpha", "beta", "gamma_bw", "delta", "nu")


@dataclass(frozen=True)
class BoucWenCoeffs:
    """Physical coefficients of one oscillator (masses in kg, forces in N)."""

    m_L: float
    c_L: float
    k_L: float
    alpha: float
    beta: float
    gamma_bw: float
    delta: float
    nu: float

    def __post_init__(self):
        vals = self.to_array()
        if not np.all(np.isfinite(vals)):
            raise SpecError("Bouc-Wen coefficients must be finite")
        if not (self.m_L > 0 and self.k_L > 0):
            raise SpecError(f"need m_L > 0 and k_L > 0, got m_L={self.m_L}, k_L={self.k_L}")
        if not self.nu >= 1:
            raise SpecError(f"need nu >= 1, got nu={self.nu}")

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in COEFF_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> BoucWenCoeffs:
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != len(COEFF_NAMES):
            raise DimensionMismatchError(f"expected {len(COEFF_NAMES)} coefficients, got {values.size}")
        return cls(*(float(v) for v in values))

    def as_dict(self) -> dict:
        return asdict(self)


NOMINAL = BoucWenCoeffs(m_L=2.0, c_L=10.0, k_L=5.0e4, alpha=5.0e4, beta=1000.0,
                        gamma_bw=0.8, delta=-1.1, nu=1.0)
_BROAD_MIN = (1.0, 5.0, 2.5e4, 2.5e4, 500.0, 0.5, -1.5, 1.0)
_BROAD_MAX = (3.0, 15.0, 7.5e4, 7.5e4, 4500.0, 0.9, -0.5, 1.0)


@dataclass(frozen=True)
class CoeffRanges:
    """Per-coefficient (min, max) sampling intervals, in COEFF_NAMES order."""

    low: tuple[float, ...]
    high: tuple[float, ...]

    def __post_init__(self):
        low = tuple(float(v) for v in self.low)
        high = tuple(float(v) for v in self.high)
        if len(low) != len(COEFF_NAMES) or len(high) != len(COEFF_NAMES):
            raise SpecError(f"ranges need {len(COEFF_NAMES)} entries per bound")
        if any(lo > hi for lo, hi in zip(low, high)):
            raise SpecError("every range needs min <= max")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)
        # both bounds must describe admissible systems
        BoucWenCoeffs(*low)
        BoucWenCoeffs(*high)

    @classmethod
    def broad(cls) -> CoeffRanges:
        """Wide ranges around the nominal system; the meta-training default."""
        return cls(_BROAD_MIN, _BROAD_MAX)

    @classmethod
    def fixed(cls, coeffs: BoucWenCoeffs = NOMINAL) -> CoeffRanges:
        vals = tuple(coeffs.to_array())
        return cls(vals, vals)

    @classmethod
    def around_nominal(cls, fraction: float) -> CoeffRanges:
        """Intervals nominal * (1 -/+ fraction), ordered for negative entries."""
        if not 0 <= fraction < 1:
            raise SpecError(f"fraction must lie in [0, 1), got {fraction}")
        nom = NOMINAL.to_array()
        a, b = nom * (1 - fraction), nom * (1 + fraction)
        low, high = np.minimum(a, b), np.maximum(a, b)
        # nu is pinned at exactly 1 in every range
        low[-1] = high[-1] = nom[-1]
        return cls(tuple(low), tuple(high))

    @classmethod
    def from_dict(cls, mapping: dict) -> CoeffRanges:
        missing = set(COEFF_NAMES) - set(mapping)
        extra = set(mapping) - set(COEFF_NAMES)
        if missing or extra:
            raise SpecError(f"range mapping mismatch: missing={sorted(missing)}, unknown={sorted(extra)}")
        return cls(tuple(mapping[n][0] for n in COEFF_NAMES), tuple(mapping[n][1] for n in COEFF_NAMES))

    def as_dict(self) -> dict:
        return {n: [lo, hi] for n, lo, hi in zip(COEFF_NAMES, self.low, self.high)}


@dataclass(frozen=True)
class Dataset:
    """Train/test input-output pair from one system."""

    u_tr: np.ndarray
    y_tr: np.ndarray
    u_te: np.ndarray
    y_te: np.ndarray
    fs: float
    coeffs: BoucWenCoeffs | None = None
    noise_std: float = 0.0
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        for f in fields(self)[:4]:
            a = np.array(getattr(self, f.name), dtype=float).reshape(-1)
            if a.size == 0:
                raise DimensionMismatchError(f"{f.name} is empty")
            if not np.all(np.isfinite(a)):
                raise NonFiniteValueError(f"{f.name} contains non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, f.name, a)
        if self.u_tr.size != self.y_tr.size:
            raise DimensionMismatchError(f"u_tr has {self.u_tr.size} samples but y_tr has {self.y_tr.size}")
        if self.u_te.size != self.y_te.size:
            raise DimensionMismatchError(f"u_te has {self.u_te.size} samples but y_te has {self.y_te.size}")
        if not self.fs > 0:
            raise SpecError(f"fs must be positive, got {self.fs}")

    @property
    def n_train(self) -> int:
        return self.u_tr.size

    @property
    def n_test(self) -> int:
        return self.u_te.size


# --------------------------------------------------------------------------
# integration kernels

@numba.njit(cache=True)
def _rhs(p, v, z, u, c):
    m, cl, k, alpha, beta, gamma, delta, nu = c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]
    az = abs(z)
    if nu == 1.0:
        zz = z
        zn = az
    else:
        zz = az ** (nu - 1.0) * z
        zn = az ** nu
    return v, (u - k * p - cl * v - z) / m, alpha * v - beta * (gamma * abs(v) * zz + delta * v * zn)


@numba.njit(cache=True)
def _rk4(p, v, z, u, h, c):
    a1, b1, c1 = _rhs(p, v, z, u, c)
    a2, b2, c2 = _rhs(p + 0.5 * h * a1, v + 0.5 * h * b1, z + 0.5 * h * c1, u, c)
    a3, b3, c3 = _rhs(p + 0.5 * h * a2, v + 0.5 * h * b2, z + 0.5 * h * c2, u, c)
    a4, b4, c4 = _rhs(p + h * a3, v + h * b3, z + h * c3, u, c)
    s = h / 6.0
    return (p + s * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            v + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
            z + s * (c1 + 2.0 * c2 + 2.0 * c3 + c4))


@numba.njit(cache=True)
def _switch_time(p, v, z, u, h, c, idx, f0, f1):
    # returns the bracket end just past the sign change of component idx
    lo, hi, flo, fhi = 0.0, h, f0, f1
    side = 0
    for _ in range(100):
        t = (lo * fhi - hi * flo) / (fhi - flo)
        if not (lo < t < hi):
            t = 0.5 * (lo + hi)
        q = _rk4(p, v, z, u, t, c)
        f = q[idx]
        if f == 0.0:
            return t
        if (f < 0.0) == (flo < 0.0):
            lo, flo = t, f
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = t, f
            if side == 1:
                flo *= 0.5
            side = 1
        if hi - lo <= 1e-14 * h:
            break
    return hi


@numba.njit(cache=True)
def _advance(p, v, z, u, h, c, split):
    remaining = h
    for _ in range(16):
        p1, v1, z1 = _rk4(p, v, z, u, remaining, c)
        if not split:
            return p1, v1, z1
        tau = 2.0 * remaining
        if v * v1 < 0.0:
            tau = _switch_time(p, v, z, u, remaining, c, 1, v, v1)
        if z * z1 < 0.0:
            tau = min(tau, _switch_time(p, v, z, u, remaining, c, 2, z, z1))
        if tau >= remaining:
            return p1, v1, z1
        p, v, z = _rk4(p, v, z, u, tau, c)
        remaining -= tau
    return _rk4(p, v, z, u, remaining, c)


@numba.njit(cache=True)
def _simulate_kernel(c, u, h, substeps, x0, y):
    split = c[4] != 0.0
    p, v, z = x0[0], x0[1], x0[2]
    for k in range(u.size):
        y[k] = p
        for _ in range(substeps):
            p, v, z = _advance(p, v, z, u[k], h, c, split)
        if not (np.isfinite(p) and np.isfinite(v) and np.isfinite(z)):
            return k
    return -1


# --------------------------------------------------------------------------
# public operations

def simulate(coeffs: BoucWenCoeffs, u, substeps: int = 10, x0=None, fs: float | None = None) -> Signal:
    """Simulate the oscillator driven by ``u`` and return the position.

    Parameters
    ----------
    coeffs : BoucWenCoeffs
    u : Signal or array_like
        Input force samples (zero-order hold between samples). A bare array
        needs ``fs``.
    substeps : int
        RK4 steps per sample interval, h = 1 / (fs * substeps).
    x0 : array_like of 3, optional
        Initial (p, v, z); zero by default.

    Returns
    -------
    Signal
        y_k = p(t_k), same length as ``u``.

    Raises
    ------
    DivergenceError
        If the state becomes non-finite; ``index`` is the sample interval
        during which it happened.
    """
    if isinstance(u, Signal):
        fs = u.fs if fs is None else fs
        u_arr = u.samples
    else:
        u_arr = np.asarray(u, dtype=float).reshape(-1)
        if fs is None:
            raise SpecError("fs is required when u is a bare array")
    if u_arr.size < 1:
        raise SpecError("input must have at least one sample")
    if int(substeps) != substeps or substeps < 1:
        raise SpecError(f"substeps must be a positive integer, got {substeps}")
    x0 = np.zeros(3) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != 3:
        raise DimensionMismatchError(f"x0 must have 3 entries, got {x0.size}")
    y = np.empty(u_arr.size)
    bad = _simulate_kernel(coeffs.to_array(), np.ascontiguousarray(u_arr), 1.0 / (fs * substeps),
                           int(substeps), x0, y)
    if bad >= 0:
        raise DivergenceError(f"Bouc-Wen state became non-finite while integrating sample {bad}", index=int(bad))
    return Signal(y, fs)


def sample_coefficients(ranges: CoeffRanges, rng: SeedLike) -> BoucWenCoeffs:
    """Draw each coefficient independently and uniformly from its range."""
    rng = make_rng(rng)
    return BoucWenCoeffs.from_array(rng.uniform(np.array(ranges.low), np.array(ranges.high)))


def make_dataset(
    ranges: CoeffRanges,
    spec_tr: MultisineSpec,
    spec_te: MultisineSpec,
    noise_std: float,
    substeps: int = 10,
    rng: SeedLike = 0,
    input_seed: int | None = None,
) -> Dataset:
    """Sample one system and simulate a train/test pair from zero state.

    Draw order on ``rng``: coefficients, training phases, test phases,
    training noise. With ``input_seed`` set, both inputs are instead drawn
    from a fresh stream seeded with it (so equal specs give equal inputs).
    Only the training output is corrupted by noise.
    """
    if spec_tr.fs != spec_te.fs:
        raise SpecError("train and test specs must share fs")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = make_rng(rng)
    coeffs = sample_coefficients(ranges, rng)
    if input_seed is None:
        u_tr = multisine(spec_tr, rng)
        u_te = multisine(spec_te, rng)
    else:
        u_tr = multisine(spec_tr, make_rng(input_seed))
        u_te = multisine(spec_te, make_rng(input_seed))
    y_tr = simulate(coeffs, u_tr, substeps)
    y_te = simulate(coeffs, u_te, substeps)
    y_tr = add_noise(y_tr, noise_std, rng)
    return Dataset(u_tr.samples, y_tr.samples, u_te.samples, y_te.samples, spec_tr.fs,
                   coeffs=coeffs, noise_std=float(noise_std), seed=seed)


def meta_batch(
    b: int,
    ranges: CoeffRanges,
    spec_tr: MultisineSpec,
    spec_te: MultisineSpec,
    noise_std: float,
    substeps: int = 10,
    seed: int = 0,
    input_seed: int | None = None,
) -> list[Dataset]:
    """``b`` independent datasets; element i uses
    ``derive_seed(seed, "meta_batch", i)``."""
    if int(b) != b or b < 1:
        raise SpecError(f"batch size must be a positive integer, got {b}")
    return [
        make_dataset(ranges, spec_tr, spec_te, noise_std, substeps,
                     derive_seed(seed, "meta_batch", i), input_seed=input_seed)
        for i in range(b)
    ]
