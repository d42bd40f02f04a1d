import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from interp_bound import InterpolationBound, LinearGaussianTeacher, MinNormInterpolator, generate_dataset
from interp_bound.exceptions import AssumptionViolation


def data(n=5, p=12, m=1, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = rng.normal(size=n) if m == 1 else rng.normal(size=(n, m))
    return X, y


def test_min_norm_matches_pinv():
    X, y = data()
    est = MinNormInterpolator().fit(X, y)
    np.testing.assert_allclose(est.coef_, np.linalg.pinv(X) @ y, atol=1e-12)
    np.testing.assert_allclose(est.predict(X), y, atol=1e-10)
    assert est.score(X, y) == pytest.approx(1.0)
    assert est.predict(X).shape == (5,)


def test_multi_output_shapes():
    X, Y = data(n=4, p=10, m=2)
    est = MinNormInterpolator().fit(X, Y)
    assert est.coef_.shape == (20,) and est.predict(X).shape == (4, 2)
    assert est.n_outputs_ == 2


def test_params_and_clone():
    est = MinNormInterpolator(family="random-features", width=30, random_state=3)
    params = est.get_params()
    assert params["width"] == 30 and params["random_state"] == 3
    c = clone(est).set_params(width=40)
    assert c.width == 40 and est.width == 30
    assert "delta" in InterpolationBound().get_params()


def test_not_fitted_and_bad_input():
    with pytest.raises(NotFittedError):
        MinNormInterpolator().predict(np.zeros((1, 3)))
    X, y = data()
    est = MinNormInterpolator().fit(X, y)
    with pytest.raises(ValueError):
        est.predict(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        MinNormInterpolator().fit(X, y[:3])
    with pytest.raises(AssumptionViolation):
        MinNormInterpolator().fit(*data(n=12, p=5))


def test_nonlinear_families():
    X, y = data(n=3, p=2)
    est = MinNormInterpolator(family="mlp-tanh", width=3).fit(X, 0.3 * y)
    np.testing.assert_allclose(est.predict(X), 0.3 * y, atol=1e-9)
    assert est.result_.method == "two-phase"


def test_bound_estimator():
    t = LinearGaussianTeacher(input_dim=40, noise=0.1)
    ds = generate_dataset(t, 10, seed=0)
    est = InterpolationBound(distribution=t).fit(ds.X, ds.Y[:, 0])
    assert est.terms_.P_source == "closed-form"
    assert est.tau_ * 10 == pytest.approx(2 * est.terms_.delta_R)
    assert est.bound_terms()["pac_rhs"] == est.pac_rhs_
    bare = InterpolationBound().fit(ds.X, ds.Y[:, 0])
    assert bare.terms_.P_source == "unavailable"
