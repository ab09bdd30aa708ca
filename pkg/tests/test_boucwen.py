from dataclasses import replace

import numpy as np
import pytest

from manifold_sysid.boucwen import (NOMINAL, BoucWenCoeffs, CoeffRanges, make_dataset, meta_batch,
                                    sample_coefficients, simulate)
from manifold_sysid.errors import DivergenceError, SpecError
from manifold_sysid.signals import MultisineSpec, Signal, multisine

FS = 750.0
LINEAR = replace(NOMINAL, beta=0.0)


def _rel_max(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def linear_step_response(c: BoucWenCoeffs, force: float, t):
    """Closed-form step response of m p'' + c p' + (k + alpha) p = F from rest."""
    k = c.k_L + c.alpha
    wn = np.sqrt(k / c.m_L)
    zeta = c.c_L / (2.0 * np.sqrt(k * c.m_L))
    wd = wn * np.sqrt(1.0 - zeta**2)
    decay = np.exp(-zeta * wn * t)
    return force / k * (1.0 - decay * (np.cos(wd * t) + zeta * wn / wd * np.sin(wd * t)))


def test_nominal_row():
    c = sample_coefficients(CoeffRanges.fixed(), 0)
    assert c == BoucWenCoeffs(m_L=2, c_L=10, k_L=5e4, alpha=5e4, beta=1000, gamma_bw=0.8, delta=-1.1, nu=1)


def test_broad_range_sampling_statistics():
    r = CoeffRanges.broad()
    rng = np.random.default_rng(0)
    draws = np.array([sample_coefficients(r, rng).to_array() for _ in range(10_000)])
    lo, hi = np.array(r.low), np.array(r.high)
    assert np.all(draws >= lo) and np.all(draws <= hi)
    mid = 0.5 * (lo + hi)
    assert np.all(np.abs(draws.mean(axis=0) - mid) <= 0.02 * np.abs(mid))
    assert np.all(draws[:, -1] == 1.0)


def test_zero_input_zero_state_is_equilibrium():
    y = simulate(NOMINAL, np.zeros(500), fs=FS).samples
    assert np.all(y == 0.0)


def test_linear_step_matches_closed_form():
    n, force = 1500, 10.0
    y = simulate(LINEAR, np.full(n, force), substeps=10, fs=FS).samples
    exact = linear_step_response(LINEAR, force, np.arange(n) / FS)
    assert _rel_max(y, exact) <= 1e-6


@pytest.mark.parametrize("coeffs", [LINEAR, NOMINAL], ids=["linear", "nominal"])
def test_step_halving_is_fourth_order(coeffs):
    u = multisine(MultisineSpec(2000), 0)
    y = {s: simulate(coeffs, u, s).samples for s in (1, 2, 16)}
    ratio = np.max(np.abs(y[1] - y[16])) / np.max(np.abs(y[2] - y[16]))
    assert ratio >= 12


@pytest.mark.xfail(strict=True, reason="substeps=10 is about 7e-7 from its 20-substep refinement; "
                                       "the 1e-7 bound needs about 16 substeps")
def test_substep_refinement_10_to_20():
    u = multisine(MultisineSpec(8192), 0)
    y10 = simulate(NOMINAL, u, 10).samples
    y20 = simulate(NOMINAL, u, 20).samples
    assert _rel_max(y10, y20) < 1e-7


def test_substep_refinement_20_to_40():
    u = multisine(MultisineSpec(8192), 0)
    assert _rel_max(simulate(NOMINAL, u, 20).samples, simulate(NOMINAL, u, 40).samples) < 1e-7


def test_free_response_decays():
    y = simulate(NOMINAL, np.zeros(int(2 * FS) + 1), x0=[1e-3, 0.0, 0.0], fs=FS).samples
    assert abs(y[-1]) < np.max(np.abs(y[: int(0.2 * FS)]))


def test_noise_free_dataset_is_reproducible_from_coefficients():
    spec = MultisineSpec(600)
    d = make_dataset(CoeffRanges.broad(), spec, spec, 0.0, rng=5)
    assert np.array_equal(d.y_tr, simulate(d.coeffs, Signal(d.u_tr, FS)).samples)


def test_shared_input_seed_gives_equal_portions():
    spec = MultisineSpec(600)
    d = make_dataset(CoeffRanges.broad(), spec, spec, 0.0, rng=5, input_seed=99)
    assert np.array_equal(d.u_tr, d.u_te)
    assert np.array_equal(d.y_tr, d.y_te)


def test_noise_only_on_training_portion():
    spec = MultisineSpec(600)
    d = make_dataset(CoeffRanges.fixed(), spec, spec, 1e-4, rng=5)
    assert np.array_equal(d.y_te, simulate(NOMINAL, Signal(d.u_te, FS)).samples)
    assert not np.array_equal(d.y_tr, simulate(NOMINAL, Signal(d.u_tr, FS)).samples)


def test_benchmark_setup_is_simulable():
    spec = MultisineSpec(8192)
    d = make_dataset(CoeffRanges.fixed(), spec, spec, 8e-6, rng=0)
    assert np.all(np.isfinite(d.y_te))
    assert 0 < np.max(np.abs(d.y_te)) < 1e-2


def test_independent_seeds_give_distinct_systems():
    spec = MultisineSpec(64)
    a = make_dataset(CoeffRanges.broad(), spec, spec, 0.0, rng=1)
    b = make_dataset(CoeffRanges.broad(), spec, spec, 0.0, rng=2)
    assert a.coeffs != b.coeffs


def test_meta_batch_elements():
    spec = MultisineSpec(64)
    batch = meta_batch(128, CoeffRanges.broad(), spec, spec, 8e-6, seed=3)
    assert len(batch) == 128
    coeffs = {tuple(d.coeffs.to_array()) for d in batch}
    assert len(coeffs) == 128
    again = meta_batch(128, CoeffRanges.broad(), spec, spec, 8e-6, seed=3)
    assert all(np.array_equal(a.y_tr, b.y_tr) for a, b in zip(batch, again))


def test_meta_batch_of_one_matches_make_dataset():
    from manifold_sysid.rng import derive_seed
    spec = MultisineSpec(64)
    (d,) = meta_batch(1, CoeffRanges.broad(), spec, spec, 8e-6, seed=3)
    ref = make_dataset(CoeffRanges.broad(), spec, spec, 8e-6, rng=derive_seed(3, "meta_batch", 0))
    assert np.array_equal(d.y_tr, ref.y_tr) and d.coeffs == ref.coeffs


def test_divergence_names_the_sample():
    unstable = replace(NOMINAL, alpha=-6e4, beta=0.0)  # net stiffness k + alpha < 0
    with pytest.raises(DivergenceError) as exc:
        simulate(unstable, np.full(20000, 1e3), fs=FS)
    assert exc.value.index is not None and exc.value.index > 0


def test_invalid_arguments():
    with pytest.raises(SpecError):
        simulate(NOMINAL, np.zeros(3), substeps=0, fs=FS)
    with pytest.raises(SpecError):
        simulate(NOMINAL, np.zeros(3))
    with pytest.raises(SpecError):
        CoeffRanges((2,) * 8, (1,) * 8)
