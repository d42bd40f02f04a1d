import math

import numpy as np
import pytest

from interp_bound.exceptions import DimensionError, QuadratureError
from interp_bound.laplace import (
    ColdPosteriorSpec,
    QuadratureGrid,
    fit_remainder_rate,
    gamma_schedule,
    kl_exact_gaussian,
    kl_quadrature,
    laplace_neg_log_Z,
    laplace_terms,
    log_Z_exact_gaussian,
    log_Z_quadrature,
    posterior_gaussian,
    prior_gaussian,
    zeta_n_exact_gaussian,
    zeta_n_quadrature,
)
from interp_bound.models import Dataset, FunctionModel, LinearGaussianTeacher, ModelSpec, generate_dataset
from interp_bound.regularizers import Regularizer


def toy():
    return (ModelSpec("linear-features", input_dim=2), Dataset(np.array([[1.0, 0.0]]), np.array([1.0])),
            Regularizer.quadratic(2))


def exact_neg_log_Z_toy(gamma, tau):
    # Z = E_{theta ~ N(0, tau I)} exp(-(theta_1 - 1)^2 / gamma)
    s = gamma / (gamma + 2 * tau)
    return -(0.5 * math.log(s) - 1.0 / (gamma + 2 * tau))


@pytest.mark.parametrize("gamma,tau", [(1.0, 1.0), (1e-2, 0.1), (1e-6, 1e-3)])
def test_toy_log_Z_hand_formula(gamma, tau):
    model, ds, reg = toy()
    spec = ColdPosteriorSpec(model, ds, reg, gamma, tau)
    exact = log_Z_exact_gaussian(model, ds, reg, gamma, tau)
    assert -exact == pytest.approx(exact_neg_log_Z_toy(gamma, tau), rel=1e-13)
    quad = log_Z_quadrature(spec)
    assert abs(quad.value - exact) <= 1e-8 and quad.error <= 1e-8


def test_flat_likelihood_gives_zero():
    model = FunctionModel(lambda t, x: np.zeros(1), lambda t, x: np.zeros((1, 2)), 2, 1)
    ds = Dataset(np.zeros((1, 1)), np.zeros(1))
    spec = ColdPosteriorSpec(model, ds, Regularizer.quadratic(2), 0.1, 0.5)
    grid = QuadratureGrid.gaussian(*prior_gaussian(spec.reg, spec.tau), nodes=61)
    assert abs(log_Z_quadrature(spec, grid, grid).value) <= 1e-12
    est = kl_quadrature(spec, grid, grid)
    assert abs(est.kl) <= 1e-12


def test_large_gamma_limits():
    model, ds, reg = toy()
    assert abs(log_Z_exact_gaussian(model, ds, reg, 1e12, 1.0)) <= 1e-11
    assert kl_exact_gaussian(model, ds, reg, 1e12, 1.0) <= 1e-11


def test_kl_inequality_toy():
    model, ds, reg = toy()
    spec = ColdPosteriorSpec(model, ds, reg, 1e-3, 1.0)
    est = kl_quadrature(spec)
    assert est.gap > 0 and est.kl <= -est.log_Z
    assert est.identity_error <= 1e-6
    assert est.kl == pytest.approx(kl_exact_gaussian(model, ds, reg, 1e-3, 1.0), abs=1e-8)


def test_three_dim_general_problem():
    rng = np.random.default_rng(0)
    model = ModelSpec("linear-features", input_dim=3)
    ds = Dataset(rng.normal(size=(2, 3)), rng.normal(size=2))
    M = rng.normal(size=(3, 3))
    reg = Regularizer.quadratic(3, anchor=rng.normal(size=3), weight=M @ M.T + np.eye(3))
    spec = ColdPosteriorSpec(model, ds, reg, 1e-2, 0.1)
    grid = QuadratureGrid.gaussian(*posterior_gaussian(spec), nodes=61)
    prior_grid = QuadratureGrid.gaussian(*prior_gaussian(reg, 0.1), nodes=61)
    quad = log_Z_quadrature(spec, grid, prior_grid)
    assert quad.value == pytest.approx(log_Z_exact_gaussian(model, ds, reg, 1e-2, 0.1), abs=1e-8)


def test_coarea_constant_remainder_vanishes_when_gamma_is_small():
    # with gamma far below tau the Laplace formula with the 2 pi constant is O(tau)-accurate
    rng = np.random.default_rng(1)
    model = ModelSpec("linear-features", input_dim=3)
    ds = Dataset(rng.normal(size=(1, 3)), np.array([0.7]))
    reg = Regularizer.quadratic(3, weight=np.diag([1.0, 2.0, 3.0]))
    dR, S, K, mn = laplace_terms(model, ds, reg)
    pts = []
    for tau in (1e-1, 3e-2, 1e-2, 3e-3, 1e-3):
        gamma = tau**3
        exact = -log_Z_exact_gaussian(model, ds, reg, gamma, tau, normalize_likelihood=True)
        pts.append((tau, abs(exact - laplace_neg_log_Z(dR, S, K, mn, tau, constant="coarea"))))
    fit = fit_remainder_rate(pts)
    assert fit.slope >= 0.9 and fit.r_squared >= 0.95


def test_grid_rejects_high_dimension_and_narrow_boxes():
    with pytest.raises(DimensionError):
        QuadratureGrid((0,) * 4, (1,) * 4)
    model, ds, reg = toy()
    spec = ColdPosteriorSpec(model, ds, reg, 1e-2, 0.1)
    narrow = QuadratureGrid((-0.1, -0.1), (2.0, 0.1))
    with pytest.raises(QuadratureError, match="boundary"):
        log_Z_quadrature(spec, narrow)


def test_rate_fit_power_laws():
    taus = np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    fit = fit_remainder_rate(list(zip(taus, 3.0 * taus)))
    assert abs(fit.slope - 1.0) <= 1e-6 and fit.r_squared == pytest.approx(1.0)
    assert fit_remainder_rate(list(zip(taus, 0.5 * taus**2))).slope == pytest.approx(2.0)
    with pytest.raises(ValueError):
        fit_remainder_rate([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(ValueError):
        fit_remainder_rate([(1e-1, 0.0)] * 4)


def test_gamma_schedule():
    assert gamma_schedule(0.1) == pytest.approx(1e-2)
    assert gamma_schedule(0.1, coeff=2.0, power=3.0) == pytest.approx(2e-3)


def test_zeta_no_gap_is_one():
    model = ModelSpec("linear-features", input_dim=1)
    ds = Dataset(np.array([[1.0], [2.0]]), np.array([0.5, -1.0]))
    reg = Regularizer.quadratic(1)

    def empirical(T):
        F = model.predict_many(T, ds.X)
        return np.mean(np.sum((F - ds.Y) ** 2, axis=2), axis=1)

    z = zeta_n_quadrature(model, ds, reg, 0.1, true_risk_fn=empirical)
    assert z.value == pytest.approx(1.0, abs=1e-12) and z.leading == pytest.approx(1.0, abs=1e-12)


def test_zeta_rate_quadratic_gap_d1():
    model = ModelSpec("linear-features", input_dim=1)
    ds = Dataset(np.array([[1.0], [-0.5]]), np.array([0.3, 0.2]))
    reg = Regularizer.quadratic(1, anchor=[0.1])

    def risk(T):
        return 0.8 * (T[:, 0] - 0.4) ** 2 + 0.05

    errs = []
    for tau in (0.1, 0.03, 0.01, 0.003):
        z = zeta_n_quadrature(model, ds, reg, tau, true_risk_fn=risk)
        errs.append((tau, abs(z.value - z.leading)))
    fit = fit_remainder_rate(errs)
    assert 0.9 <= fit.slope <= 1.1


def test_zeta_quadrature_matches_exact_gaussian():
    t = LinearGaussianTeacher(input_dim=2, noise=0.3)
    model = ModelSpec("linear-features", input_dim=2)
    ds = generate_dataset(t, 1, seed=0)
    reg = Regularizer.quadratic(2)
    for tau in (0.1, 0.01):
        z = zeta_n_quadrature(model, ds, reg, tau, t)
        assert z.value == pytest.approx(zeta_n_exact_gaussian(model, ds, reg, tau, t), rel=1e-9)
    tiny = zeta_n_quadrature(model, ds, reg, 1e-9, t)
    assert tiny.value == pytest.approx(tiny.leading, rel=1e-6)
