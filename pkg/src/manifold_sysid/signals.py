"""Excitation and measurement-noise signals.

Inputs are random-phase multisines on the harmonic grid ``fs / n_samples``,
so each realization is exactly periodic in ``n_samples`` and leakage free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteValueError, SpecError
from .rng import SeedLike, make_rng


@dataclass(frozen=True)
class MultisineSpec:
    """Random-phase multisine definition.

    Parameters
    ----------
    n_samples : int
        Sequence length (one period).
    fs : float
        Sampling frequency in Hz.
    f_lo, f_hi : float
        Edges of the excited band in Hz, inclusive.
    target_rms : float
        Root-mean-square amplitude of the generated signal.
    """

    n_samples: int
    fs: float = 750.0
    f_lo: float = 5.0
    f_hi: float = 150.0
    target_rms: float = 50.0

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise SpecError(f"n_samples must be an integer >= 2, got {self.n_samples}")
        if not (0 < self.f_lo < self.f_hi <= self.fs / 2):
            raise SpecError(
                f"need 0 < f_lo < f_hi <= fs/2, got f_lo={self.f_lo}, "
                f"f_hi={self.f_hi}, fs={self.fs}"
            )
        if not self.target_rms > 0:
            raise SpecError(f"target_rms must be positive, got {self.target_rms}")
        if self.harmonics().size == 0:
            raise SpecError(
                f"no harmonic of fs/N = {self.fs / self.n_samples:g} Hz lies in "
                f"[{self.f_lo}, {self.f_hi}] Hz"
            )

    @property
    def resolution(self) -> float:
        return self.fs / self.n_samples

    def harmonics(self) -> np.ndarray:
        """Excited harmonic indices k with f_lo <= k fs/N <= f_hi."""
        k = np.arange(1, self.n_samples // 2 + 1)
        f = k * self.fs / self.n_samples
        return k[(f >= self.f_lo) & (f <= self.f_hi)]


@dataclass(frozen=True)
class Signal:
    """A finite, uniformly sampled real sequence."""

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        x = np.array(self.samples, dtype=float).reshape(-1)
        if x.size < 1:
            raise SpecError("a signal needs at least one sample")
        if not np.all(np.isfinite(x)):
            raise NonFiniteValueError("signal contains non-finite samples")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.size

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)


def multisine(spec: MultisineSpec, rng: SeedLike) -> Signal:
    """Draw one random-phase multisine realization.

    All lines in the excited set share one amplitude; the phases are i.i.d.
    uniform on [0, 2*pi), drawn in increasing harmonic order. The amplitude
    is fixed afterwards so that the sample RMS equals ``spec.target_rms``.
    """
    rng = make_rng(rng)
    n = spec.n_samples
    k = spec.harmonics()
    phases = rng.uniform(0.0, 2.0 * np.pi, size=k.size)
    spectrum = np.zeros(n // 2 + 1, dtype=complex)
    spectrum[k] = 0.5 * n * np.exp(1j * phases)
    if n % 2 == 0 and k[-1] == n // 2:
        # irfft keeps only the real part of the Nyquist bin
        spectrum[n // 2] = n * np.cos(phases[-1])
    u = np.fft.irfft(spectrum, n)
    u *= spec.target_rms / rms(u)
    return Signal(u, spec.fs)


def add_noise(y: Signal, std: float, rng: SeedLike) -> Signal:
    """Add white Gaussian noise of standard deviation ``std``.

    White noise at the sample rate already spans the whole band [0, fs/2],
    so no shaping filter is applied.
    """
    if not std >= 0:
        raise SpecError(f"noise std must be >= 0, got {std}")
    rng = make_rng(rng)
    e = rng.standard_normal(len(y))
    return Signal(y.samples + std * e, y.fs)


def rms(x) -> float:
    """Root mean square of a signal or array."""
    a = np.asarray(x, dtype=float).reshape(-1)
    if a.size == 0:
        raise SpecError("rms of an empty sequence")
    return float(np.sqrt(np.mean(a * a)))
