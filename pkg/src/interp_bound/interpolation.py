"""Constrained interpolators: argmin R(theta) subject to f(x_i, theta) = y_i.

Two routes: an exact weighted minimum-norm formula for linear-in-theta
models with quadratic R, and a two-phase manifold method (Gauss-Newton onto
the zero-loss set, then projected-gradient descent of R along it) for any
smooth model.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .exceptions import (
    AssumptionViolation,
    ConditioningError,
    DegenerateDeltaRError,
    SolverError,
)
from .linalg import nullspace_basis, solve_gram
from .seeding import rng_for

DEFAULT_TOL = 1e-10
DEFAULT_TOL_R = 1e-8
DEGENERATE_DELTA_R = 1e-12

_EPS = np.finfo(float).eps


@dataclass
class InterpolationResult:
    theta_star: np.ndarray
    R_star: float
    residual_norm: float
    jacobian_min_singular_value: float
    iterations: int
    method: str
    stationarity: float
    phase1_iterations: int = 0
    phase2_iterations: int = 0
    seed: object = None
    history: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "method": self.method,
            "R_star": self.R_star,
            "residual_norm": self.residual_norm,
            "jacobian_min_singular_value": self.jacobian_min_singular_value,
            "stationarity": self.stationarity,
            "iterations": self.iterations,
            "phase1_iterations": self.phase1_iterations,
            "phase2_iterations": self.phase2_iterations,
        }


def residual_norm(model, theta, dataset):
    """Max over samples of ``||f(x_i, theta) - y_i||``."""
    R = model.predict(theta, dataset.X) - dataset.Y
    return float(np.max(np.linalg.norm(R, axis=1)))


def _rank_tol(s, shape):
    return max(shape) * _EPS * s[0]


def _min_singular_value(DF):
    s = la.svdvals(DF)
    return float(s[-1]), _rank_tol(s, DF.shape)


def _check_overparameterized(model, dataset):
    k, d = dataset.n * model.output_dim, model.param_dim
    if d <= k:
        raise AssumptionViolation(
            "B", f"interpolation needs d > m*n, got d={d}, m*n={k}"
        )


def _kkt_residual(DF, g):
    lam = solve_gram(DF @ DF.T, DF @ g)
    return float(np.linalg.norm(g - DF.T @ lam))


def _finish(model, dataset, reg, theta, method, stationarity, **kw):
    DF = model.jacobian(theta, dataset.X)
    smin, tol = _min_singular_value(DF)
    if smin <= tol:
        raise AssumptionViolation(
            "B", f"Jacobian at theta* is rank deficient (sigma_min={smin:.3e})"
        )
    return InterpolationResult(
        theta_star=theta,
        R_star=reg.value(theta),
        residual_norm=residual_norm(model, theta, dataset),
        jacobian_min_singular_value=smin,
        method=method,
        stationarity=stationarity,
        **kw,
    )


def interpolate_closed_form(model, dataset, reg):
    """Weighted minimum-norm interpolator
    ``a + A^-1 Phi^T (Phi A^-1 Phi^T)^-1 (y - Phi a)``.
    """
    if not model.is_linear:
        raise TypeError("closed-form interpolation needs a model that is linear in theta")
    if reg.family != "quadratic":
        raise TypeError("closed-form interpolation needs a quadratic regularizer")
    _check_overparameterized(model, dataset)
    Phi = model.jacobian(np.zeros(model.param_dim), dataset.X)
    smin, tol = _min_singular_value(Phi)
    if smin <= tol:
        raise AssumptionViolation(
            "B", f"feature matrix is rank deficient (sigma_min={smin:.3e})"
        )
    a, A = reg.anchor, reg.weight
    cA = la.cho_factor(A)
    AinvPhiT = la.cho_solve(cA, Phi.T)
    try:
        lam = solve_gram(Phi @ AinvPhiT, dataset.targets - Phi @ a)
    except ConditioningError as exc:
        raise AssumptionViolation("B", str(exc)) from exc
    theta = a + AinvPhiT @ lam
    stat = _kkt_residual(Phi, reg.grad(theta))
    return _finish(model, dataset, reg, theta, "closed-form", stat, iterations=0)


def gauss_newton_project(model, dataset, theta, tol=DEFAULT_TOL, max_iters=100):
    """Minimum-norm Gauss-Newton steps onto ``F(theta) = y``.

    Returns ``(theta, iterations)``; raises :class:`SolverError` on rank loss,
    line-search failure or non-convergence.
    """
    theta = np.array(theta, dtype=float)
    y = dataset.targets
    for it in range(max_iters + 1):
        r = y - model.predict(theta, dataset.X).reshape(-1)
        rn = np.linalg.norm(r)
        if np.max(np.linalg.norm(r.reshape(dataset.n, -1), axis=1)) <= tol:
            return theta, it
        if it == max_iters:
            break
        DF = model.jacobian(theta, dataset.X)
        try:
            step = DF.T @ solve_gram(DF @ DF.T, r)
        except ConditioningError as exc:
            raise SolverError(
                f"rank loss along the Gauss-Newton path: {exc}",
                {"iteration": it, "min_eigenvalue": exc.min_eigenvalue},
            ) from exc
        alpha = 1.0
        while True:
            trial = theta + alpha * step
            rt = np.linalg.norm(y - model.predict(trial, dataset.X).reshape(-1))
            if rt < rn:
                break
            alpha *= 0.5
            if alpha < 1e-12:
                raise SolverError(
                    "Gauss-Newton line search failed",
                    {"iteration": it, "residual": float(rn)},
                )
        theta = trial
    raise SolverError(
        f"Gauss-Newton did not reach residual {tol:g} in {max_iters} iterations",
        {"residual": float(rn)},
    )


def interpolate_two_phase(
    model,
    dataset,
    reg,
    tol=DEFAULT_TOL,
    tol_R=DEFAULT_TOL_R,
    max_iters=500,
    seed=0,
    theta_init=None,
    init_scale=0.5,
    memory=10,
):
    """Gauss-Newton onto the zero-loss manifold, then descend R along it.

    Phase 2 projects ``-grad R`` onto ``ker DF(theta)``, picks a
    Barzilai-Borwein trial step, backtracks on a non-monotone Armijo test and
    re-corrects onto the manifold after every trial. Stops when the tangent
    gradient norm ``||U^T grad R||`` is at most ``tol_R``.
    """
    _check_overparameterized(model, dataset)
    if theta_init is None:
        theta = reg.global_minimizer() + init_scale * rng_for(seed).normal(size=model.param_dim)
    else:
        theta = np.array(theta_init, dtype=float)
    theta, it1 = gauss_newton_project(model, dataset, theta, tol, max_iters)

    R_hist = [reg.value(theta)]
    prev = None
    alpha0 = 1.0
    for it2 in range(max_iters + 1):
        g = reg.grad(theta)
        DF = model.jacobian(theta, dataset.X)
        try:
            U = nullspace_basis(DF)
        except AssumptionViolation as exc:
            raise SolverError(f"rank loss along the manifold path: {exc}", {"iteration": it2}) from exc
        pg = U @ (U.T @ g)
        stat = float(np.linalg.norm(U.T @ g))
        if stat <= tol_R:
            return _finish(
                model, dataset, reg, theta, "two-phase", stat,
                iterations=it1 + it2, phase1_iterations=it1,
                phase2_iterations=it2, seed=seed,
                history={"R": R_hist},
            )
        if it2 == max_iters:
            break
        if prev is not None:
            s, yv = theta - prev[0], pg - prev[1]
            sy = float(s @ yv)
            alpha0 = float(s @ s) / sy if sy > 0 else 2.0 * alpha0
            alpha0 = min(max(alpha0, 1e-12), 1e12)
        p = -pg
        pp = float(p @ p)
        ref = max(R_hist[-memory:])
        slack = 16 * _EPS * max(1.0, abs(R_hist[-1]))
        alpha = alpha0
        while True:
            try:
                trial, _ = gauss_newton_project(model, dataset, theta + alpha * p, tol, 50)
                R_trial = reg.value(trial)
                if R_trial <= ref - 1e-4 * alpha * pp + slack:
                    break
            except SolverError:
                pass
            alpha *= 0.5
            if alpha * np.sqrt(pp) < 1e-16 * (1.0 + np.linalg.norm(theta)):
                raise SolverError(
                    "phase 2 stalled: step fell below the minimum",
                    {"iteration": it2, "stationarity": stat, "R": R_hist[-1]},
                )
        prev = (theta, pg)
        theta = trial
        R_hist.append(R_trial)
    raise SolverError(
        f"phase 2 did not reach stationarity {tol_R:g} in {max_iters} iterations",
        {"stationarity": stat, "R": R_hist[-1]},
    )


def interpolate(model, dataset, reg, method="auto", **kwargs):
    if method == "auto":
        method = "closed-form" if model.is_linear and reg.family == "quadratic" else "two-phase"
    if method == "closed-form":
        return interpolate_closed_form(model, dataset, reg)
    if method == "two-phase":
        return interpolate_two_phase(model, dataset, reg, **kwargs)
    raise ValueError(f"unknown interpolation method {method!r}")


def delta_R(result, reg):
    """``R(theta*) - R(theta_0)``; raises when it is numerically zero."""
    R0 = reg.value(reg.global_minimizer())
    dR = result.R_star - R0
    if dR <= DEGENERATE_DELTA_R * max(1.0, abs(result.R_star)):
        raise DegenerateDeltaRError(
            f"delta_R = {dR:.3e} is degenerate: the global minimizer of R already "
            "interpolates, so log(delta_R) is undefined"
        )
    return float(dR)
