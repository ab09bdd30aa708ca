import numpy as np
import pytest
from hypothesis import given, strategies as st

from manifold_sysid.errors import SpecError
from manifold_sysid.signals import MultisineSpec, Signal, add_noise, multisine, rms

BENCH = MultisineSpec(8192, fs=750.0, f_lo=5.0, f_hi=150.0, target_rms=50.0)


def _outside_band_energy(u, spec):
    U = np.abs(np.fft.rfft(u)) ** 2
    inside = np.zeros(U.size, dtype=bool)
    inside[spec.harmonics()] = True
    return U[~inside].sum() / U.sum()


def test_benchmark_multisine_rms_and_band():
    u = multisine(BENCH, 0).samples
    assert u.size == 8192
    assert abs(rms(u) - 50.0) <= 1e-9
    assert _outside_band_energy(u, BENCH) <= 1e-9


def test_single_tone_has_amplitude_rms_times_sqrt2():
    spec = MultisineSpec(100, fs=100.0, f_lo=4.5, f_hi=5.5, target_rms=3.0)
    assert list(spec.harmonics()) == [5]
    u = multisine(spec, 1).samples
    amp = 2.0 * np.abs(np.fft.rfft(u)[5]) / u.size
    assert amp == pytest.approx(3.0 * np.sqrt(2.0), rel=1e-12)
    assert np.max(np.abs(u)) <= 3.0 * np.sqrt(2.0) * (1 + 1e-12)


def test_seeded_determinism():
    a = multisine(BENCH, 7).samples
    b = multisine(BENCH, 7).samples
    c = multisine(BENCH, 8).samples
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_rejects_empty_band_and_bad_edges():
    with pytest.raises(SpecError):
        MultisineSpec(10, fs=100.0, f_lo=11.0, f_hi=12.0)
    with pytest.raises(SpecError):
        MultisineSpec(100, fs=100.0, f_lo=20.0, f_hi=10.0)
    with pytest.raises(SpecError):
        MultisineSpec(1)
    with pytest.raises(SpecError):
        MultisineSpec(100, target_rms=0.0)


@given(seed=st.integers(0, 2**32), n=st.integers(64, 3000))
def test_rms_and_spectrum_invariants(seed, n):
    spec = MultisineSpec(n, fs=750.0, f_lo=5.0, f_hi=150.0, target_rms=50.0)
    u = multisine(spec, seed).samples
    assert abs(rms(u) - 50.0) / 50.0 <= 1e-9
    assert _outside_band_energy(u, spec) <= 1e-9


def test_noise_zero_std_is_identity():
    y = Signal(np.linspace(-1, 1, 50), 750.0)
    assert np.array_equal(add_noise(y, 0.0, 3).samples, y.samples)


def test_noise_statistics():
    n = 100_000
    y = Signal(np.zeros(n), 750.0)
    e = add_noise(y, 8e-3, 11).samples
    assert abs(e.std() - 8e-3) / 8e-3 < 0.02
    assert abs(e.mean()) < 4 * 8e-3 / np.sqrt(n)


def test_noise_rejects_negative_std():
    with pytest.raises(SpecError):
        add_noise(Signal(np.zeros(3), 1.0), -1.0, 0)


def test_rms_examples():
    assert rms([-2.5] * 7) == 2.5
    assert rms([3.0, 4.0]) == pytest.approx(np.sqrt(12.5), abs=1e-12)
    assert rms([3.0, 4.0]) == pytest.approx(3.5355339, abs=1e-7)
    assert rms(np.zeros(4)) == 0.0
    with pytest.raises(SpecError):
        rms([])
