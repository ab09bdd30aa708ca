import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from manifold_sysid.archmods import SsmConfig, theta_count
from manifold_sysid.boucwen import CoeffRanges, make_dataset
from manifold_sysid.errors import DimensionMismatchError, NonFiniteValueError
from manifold_sysid.estimators import ManifoldMetaLearner, NeuralSSMRegressor, ReducedSSMRegressor
from manifold_sysid.metrics import fit_index
from manifold_sysid.signals import MultisineSpec
from manifold_sysid.validation import check_sequence, check_sequence_pair


@pytest.fixture(scope="module")
def data():
    return make_dataset(CoeffRanges.fixed(), MultisineSpec(400), MultisineSpec(400), 8e-6, rng=1)


def test_params_round_trip_through_clone():
    est = NeuralSSMRegressor(hidden=4, adam_iters=10, random_state=3)
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert twin.set_params(lr=0.01).lr == 0.01


def test_fit_predict_score(data):
    est = NeuralSSMRegressor(hidden=4, adam_iters=40, lbfgs_iters=10).fit(data.u_tr, data.y_tr)
    y_hat = est.predict(data.u_te.reshape(-1, 1))
    assert y_hat.shape == data.y_te.shape
    assert est.score(data.u_te, data.y_te) == pytest.approx(fit_index(data.y_te, y_hat, 40), abs=1e-12)
    assert est.theta_.size == theta_count(SsmConfig(hidden_f=4, hidden_g=4))


def test_linear_mode_zeroes_network_blocks(data):
    est = NeuralSSMRegressor(hidden=4, linear=True, adam_iters=20, lbfgs_iters=5).fit(data.u_tr, data.y_tr)
    assert np.count_nonzero(est.theta_) <= 9 + 3 + 3


def test_unfitted_predict_raises(data):
    with pytest.raises(NotFittedError):
        NeuralSSMRegressor().predict(data.u_te)


def test_meta_learner_and_reduced_regressor(data):
    ml = ManifoldMetaLearner(n_phi=2, hidden=4, encoder_hidden=4, head_hidden=4, batch_size=2, seq_len=64,
                             iters=2).fit()
    Z = ml.transform([(data.u_tr, data.y_tr), (data.u_te, data.y_te)])
    assert Z.shape == (2, 2)
    red = ml.reduced_regressor(iters=3).fit(data.u_tr, data.y_tr)
    assert red.phi_.shape == (2,)
    assert np.isfinite(red.score(data.u_te, data.y_te))
    with pytest.raises(ValueError):
        ReducedSSMRegressor().fit(data.u_tr, data.y_tr)


def test_sequence_validation():
    assert check_sequence([[1.0], [2.0]]).shape == (2,)
    with pytest.raises(DimensionMismatchError):
        check_sequence(np.zeros((3, 2)))
    with pytest.raises(NonFiniteValueError):
        check_sequence([1.0, np.nan])
    with pytest.raises(DimensionMismatchError):
        check_sequence_pair([1.0, 2.0], [1.0])
