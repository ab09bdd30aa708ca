import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from manifold_sysid.errors import ConstantOutputError, DimensionMismatchError
from manifold_sysid.metrics import default_n_skip, evaluate, fit_index, mse_loss, rmse

vals = st.floats(-1e3, 1e3, allow_nan=False)


def test_fit_examples():
    y = np.array([1.0, 2.0, 3.0])
    assert fit_index(y, y) == 100.0
    assert fit_index(y, np.full(3, y.mean())) == 0.0
    expected = 100.0 * (1.0 - 1.0 / np.sqrt(2.0))
    assert fit_index(y, [1.0, 2.0, 4.0]) == pytest.approx(expected, abs=1e-12)
    assert fit_index(y, [1.0, 2.0, 4.0]) == pytest.approx(29.289322, abs=1e-6)


def test_fit_rejects_constant_output():
    with pytest.raises(ConstantOutputError):
        fit_index([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ConstantOutputError):
        fit_index([5.0, 1.0, 1.0], [1.0, 1.0, 1.0], n_skip=1)


def test_rmse_examples():
    y = np.array([1.0, 2.0, 3.0])
    assert rmse(y, y) == 0.0
    assert rmse(y, [1.0, 2.0, 4.0]) == pytest.approx(np.sqrt(1 / 3), abs=1e-15)
    assert rmse(y, [1.0, 2.0, 4.0]) == pytest.approx(0.5773503, abs=1e-7)
    assert rmse(y, y - 0.25) == pytest.approx(0.25, abs=1e-15)


def test_mse_examples(rng):
    y = rng.normal(size=30)
    y_hat = rng.normal(size=30)
    assert mse_loss(y, y) == 0.0
    assert rmse(y, y_hat) ** 2 == pytest.approx(mse_loss(y, y_hat), rel=1e-14)
    assert mse_loss(y, y_hat, 29) == (y[-1] - y_hat[-1]) ** 2


def test_length_checks():
    with pytest.raises(DimensionMismatchError):
        mse_loss([1.0, 2.0], [1.0])
    with pytest.raises(DimensionMismatchError):
        rmse([1.0, 2.0], [1.0, 2.0], n_skip=2)


def test_default_skip():
    assert default_n_skip(8192) == 100
    assert default_n_skip(1000) == 100
    assert default_n_skip(250) == 25
    assert default_n_skip(999) == 99


def test_report_is_consistent(rng):
    y, y_hat = rng.normal(size=500), rng.normal(size=500)
    r = evaluate(y, y_hat)
    assert r.n_skip == 50 and r.n_used == 450
    assert r.rmse == pytest.approx(np.sqrt(r.mse), rel=1e-15)
    assert r.fit_percent == fit_index(y, y_hat, 50)


@given(arrays(float, 20, elements=vals), arrays(float, 20, elements=vals),
       st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_fit_invariant_under_common_affine_map(y, y_hat, a, b):
    if np.linalg.norm(y - y.mean()) < 1e-3:
        y = y + np.arange(20)
    f = fit_index(y, y_hat)
    assert fit_index(a * y + b, a * y_hat + b) == pytest.approx(f, rel=1e-9, abs=1e-9)


@given(arrays(float, 15, elements=vals), arrays(float, 15, elements=vals), st.integers(0, 14))
def test_mse_nonnegative_and_zero_only_for_exact_fit(y, y_hat, n_skip):
    m = mse_loss(y, y_hat, n_skip)
    assert m >= 0
    assert (m == 0) == bool(np.all(y[n_skip:] == y_hat[n_skip:]))


def test_added_noise_cannot_lower_expected_mse(rng):
    y = rng.normal(size=200)
    y_hat = y + 0.3 * rng.normal(size=200)
    base = mse_loss(y, y_hat)
    noisy = np.mean([mse_loss(y, y_hat + 0.2 * rng.normal(size=200)) for _ in range(100)])
    assert noisy > base
