"""Brute-force checks of the Laplace asymptotics behind the bound.

Low-dimensional (d <= 3) tensor quadrature of the cold-posterior normalizer,
of the dispersion integral and of KL(rho_gamma || pi), exact Gaussian
formulas for linear models with quadratic R, and log-log rate fits.

Conventions: the cold posterior is ``rho ∝ pi(theta) exp(-(n/gamma) L_n)``
and the Gibbs prior ``pi ∝ exp(-R/tau)`` is normalized. ``Z`` below is
``E_pi exp(-(n/gamma) L_n)``; the "normalized-likelihood" variant divides
by ``(pi gamma)^(mn/2)``, which makes its ``gamma -> 0`` limit finite.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg as la
from numpy.polynomial.legendre import leggauss
from scipy.special import logsumexp
from scipy.stats import linregress

from .bound import curvature, lagrange_multipliers, manifold_hessian, sharpness
from .exceptions import ConditioningError, DimensionError, InvariantFailure, QuadratureError
from .interpolation import delta_R as _delta_R, interpolate
from .linalg import nullspace_basis
from .models import LinearGaussianTeacher, output_hessians

MAX_QUADRATURE_DIM = 3
BOUNDARY_RATIO = 1e-16
DEFAULT_NODES = 201
DEFAULT_HALF_WIDTH = 9.0
KL_IDENTITY_TOL = 1e-6
LAPLACE_CONSTANTS = {"pi": math.pi, "coarea": 2.0 * math.pi}


class QuadratureEstimate(NamedTuple):
    value: float
    error: float


class KLEstimate(NamedTuple):
    kl: float
    gap: float
    log_Z: float
    identity_error: float


class ZetaEstimate(NamedTuple):
    value: float
    leading: float
    error: float


class RateFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class ColdPosteriorSpec:
    model: object
    dataset: object
    reg: object
    gamma: float
    tau: float

    def __post_init__(self):
        if self.gamma <= 0 or self.tau <= 0:
            raise ValueError("gamma and tau must be positive")

    @property
    def dim(self):
        return self.model.param_dim

    def log_likelihood(self, thetas):
        """``-(n/gamma) L_n`` row-wise, i.e. ``-sum_i ||f - y_i||^2 / gamma``."""
        F = self.model.predict_many(thetas, self.dataset.X)
        return -np.sum((F - self.dataset.Y) ** 2, axis=(1, 2)) / self.gamma

    def log_prior_unnormalized(self, thetas):
        return -self.reg.values(thetas) / self.tau

    def log_density(self, thetas):
        return self.log_likelihood(thetas) + self.log_prior_unnormalized(thetas)


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product rule on a box, optionally mapped by ``theta = shift + A u``.

    With ``transform = A`` the box lives in ``u`` coordinates and weights pick
    up ``|det A|``. :meth:`gaussian` uses the scaled principal axes of the
    covariance, so thin correlated posteriors are resolved.
    """

    lower: tuple
    upper: tuple
    nodes: int = DEFAULT_NODES
    rule: str = "gauss-legendre"
    shift: Optional[tuple] = None
    transform: Optional[tuple] = None

    def __post_init__(self):
        lo, hi = np.atleast_1d(self.lower), np.atleast_1d(self.upper)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("grid bounds must satisfy lower < upper per dimension")
        if lo.size > MAX_QUADRATURE_DIM:
            raise DimensionError(
                f"tensor quadrature is limited to d <= {MAX_QUADRATURE_DIM}, got d={lo.size}"
            )
        if self.rule not in ("gauss-legendre", "trapezoid"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))
        if (self.shift is None) != (self.transform is None):
            raise ValueError("shift and transform must be given together")
        if self.transform is not None:
            A = np.atleast_2d(np.asarray(self.transform, dtype=float))
            b = np.atleast_1d(np.asarray(self.shift, dtype=float))
            if A.shape != (lo.size, lo.size) or b.shape != (lo.size,):
                raise DimensionError("transform must be d x d and shift a d-vector")
            if abs(np.linalg.det(A)) == 0.0:
                raise ValueError("transform must be invertible")
            object.__setattr__(self, "transform", tuple(map(tuple, A)))
            object.__setattr__(self, "shift", tuple(b))

    @property
    def dim(self):
        return len(self.lower)

    @property
    def total_nodes(self):
        return self.nodes ** self.dim

    @classmethod
    def gaussian(cls, mean, cov, half_width=DEFAULT_HALF_WIDTH, nodes=DEFAULT_NODES, rule="gauss-legendre"):
        """Box of ``± half_width`` standard deviations along each principal axis."""
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        w, V = np.linalg.eigh(np.atleast_2d(cov))
        if w[0] <= 0:
            raise QuadratureError("grid covariance must be positive definite")
        A = V * np.sqrt(w)
        h = float(half_width)
        return cls((-h,) * mean.size, (h,) * mean.size, nodes, rule, tuple(mean), tuple(map(tuple, A)))

    def with_nodes(self, nodes):
        return QuadratureGrid(self.lower, self.upper, nodes, self.rule, self.shift, self.transform)

    def _axis(self, lo, hi):
        if self.rule == "gauss-legendre":
            x, w = leggauss(self.nodes)
        else:
            x = np.linspace(-1.0, 1.0, self.nodes)
            w = np.full(self.nodes, 2.0 / (self.nodes - 1))
            w[[0, -1]] *= 0.5
        half = 0.5 * (hi - lo)
        return lo + half * (x + 1.0), w * half

    def points(self):
        """``(points (N, d), log_weights (N,), boundary_mask (N,))``."""
        axes = [self._axis(lo, hi) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        wmesh = np.meshgrid(*[np.log(a[1]) for a in axes], indexing="ij")
        idx = np.meshgrid(*[np.arange(self.nodes)] * self.dim, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
        logw = np.sum([w.reshape(-1) for w in wmesh], axis=0)
        edge = np.zeros(pts.shape[0], dtype=bool)
        for ix in idx:
            ix = ix.reshape(-1)
            edge |= (ix == 0) | (ix == self.nodes - 1)
        if self.transform is not None:
            A = np.asarray(self.transform)
            pts = np.asarray(self.shift) + pts @ A.T
            logw = logw + np.linalg.slogdet(A)[1]
        return pts, logw, edge


def _log_integral(grid, log_f, label):
    """``log ∫ exp(log_f)`` on ``grid`` with the boundary-decay check."""
    pts, logw, edge = grid.points()
    lf = log_f(pts)
    peak = np.max(lf)
    ratio = float(np.exp(np.max(lf[edge]) - peak))
    if ratio > BOUNDARY_RATIO:
        raise QuadratureError(
            f"{label}: integrand at the grid boundary is {ratio:.3e} of its peak "
            f"(limit {BOUNDARY_RATIO:g}); widen the grid"
        )
    return float(logsumexp(lf + logw)), pts, logw, lf


def _is_linear_quadratic(model, reg):
    return model.is_linear and reg.family == "quadratic"


def posterior_gaussian(spec, center=None):
    """Mean and covariance of the (exact or Gauss-Newton) Gaussian posterior."""
    model, reg, ds = spec.model, spec.reg, spec.dataset
    if _is_linear_quadratic(model, reg):
        Phi = model.jacobian(np.zeros(model.param_dim), ds.X)
        prec = (2.0 / spec.gamma) * Phi.T @ Phi + reg.weight / spec.tau
        rhs = (2.0 / spec.gamma) * Phi.T @ ds.targets + reg.weight @ reg.anchor / spec.tau
        cov = la.inv(prec)
        return la.solve(prec, rhs, assume_a="pos"), 0.5 * (cov + cov.T)
    if center is None:
        center = interpolate(model, ds, reg).theta_star
    DF = model.jacobian(center, ds.X)
    prec = (2.0 / spec.gamma) * DF.T @ DF + reg.hess(center) / spec.tau
    cov = la.inv(prec)
    return np.asarray(center, dtype=float), 0.5 * (cov + cov.T)


def prior_gaussian(reg, tau):
    theta0 = reg.global_minimizer()
    H = reg.hess(theta0)
    w = np.linalg.eigvalsh(H)
    if w[0] <= 0:
        raise QuadratureError("Hessian of R at theta_0 is singular; pass an explicit prior grid")
    cov = tau * la.inv(H)
    return theta0, 0.5 * (cov + cov.T)


def _grid_like(grid, gaussian):
    """``grid``, or a default box around the Gaussian returned by ``gaussian()``."""
    if grid is None:
        return QuadratureGrid.gaussian(*gaussian())
    return grid


def log_prior_normalizer(reg, tau, grid=None):
    """``log ∫ exp(-R/tau)`` by quadrature."""
    grid = _grid_like(grid, lambda: prior_gaussian(reg, tau))
    return _log_integral(grid, lambda t: -reg.values(t) / tau, "prior normalizer")[0]


def log_Z_quadrature(spec, grid=None, prior_grid=None, refine=True):
    """``log Z = log E_pi exp(-(n/gamma) L_n)`` by tensor quadrature.

    The error estimate is the change when the node count is roughly halved.
    """
    grid = _grid_like(grid, lambda: posterior_gaussian(spec))
    prior_grid = _grid_like(prior_grid, lambda: prior_gaussian(spec.reg, spec.tau))

    def once(g, pg):
        post = _log_integral(g, spec.log_density, "posterior normalizer")[0]
        return post - log_prior_normalizer(spec.reg, spec.tau, pg)

    value = once(grid, prior_grid)
    err = 0.0
    if refine:
        coarse = grid.nodes // 2 + 1
        err = abs(value - once(grid.with_nodes(coarse), prior_grid.with_nodes(coarse)))
    return QuadratureEstimate(value, err)


def log_Z_exact_gaussian(model, dataset, reg, gamma, tau, normalize_likelihood=False):
    """Exact ``log Z`` for a linear-in-theta model with quadratic R.

    ``exp(-||Phi theta - y||^2 / gamma)`` is ``(pi gamma)^(k/2)`` times the
    ``N(y; Phi theta, gamma/2 I)`` density, so
    ``Z = (pi gamma)^(k/2) N(y; Phi a, gamma/2 I + tau Phi A^-1 Phi^T)``.
    With ``normalize_likelihood`` the ``(pi gamma)^(k/2)`` factor is dropped.
    """
    if not _is_linear_quadratic(model, reg):
        raise TypeError("exact Gaussian normalizer needs a linear model and quadratic R")
    Phi = model.jacobian(np.zeros(model.param_dim), dataset.X)
    k = Phi.shape[0]
    cov = 0.5 * gamma * np.eye(k) + tau * Phi @ la.solve(reg.weight, Phi.T, assume_a="pos")
    try:
        c, low = la.cho_factor(cov)
    except la.LinAlgError as exc:
        raise ConditioningError("combined covariance is not positive definite") from exc
    r = dataset.targets - Phi @ reg.anchor
    quad = float(r @ la.cho_solve((c, low), r))
    logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
    log_normal = -0.5 * (quad + logdet + k * math.log(2.0 * math.pi))
    if normalize_likelihood:
        return log_normal
    return 0.5 * k * math.log(math.pi * gamma) + log_normal


def laplace_terms(model, dataset, reg, result=None):
    """``(delta_R, S, K, mn)`` at the interpolator, via the bound engine."""
    if result is None:
        result = interpolate(model, dataset, reg)
    theta = result.theta_star
    DF = model.jacobian(theta, dataset.X)
    S, _ = sharpness(DF)
    _, g, hess = reg.eval_grad_hess(theta)
    lam = lagrange_multipliers(DF, g)
    out_h = None if model.is_linear else output_hessians(model, theta, dataset)
    H_M = manifold_hessian(hess, out_h, lam, nullspace_basis(DF))
    K = curvature(H_M, reg.hess(reg.global_minimizer()))[0]
    return _delta_R(result, reg), S, K, DF.shape[0]


def laplace_neg_log_Z(delta_R, S, K, mn, tau, constant="pi"):
    """Leading-order ``-log Z``: ``dR/tau + (mn/2) log(c tau) + (S + K)/2``.

    ``constant='pi'`` uses ``c = pi``; ``'coarea'`` uses
    ``c = 2 pi``, the value obtained from the Gaussian prior normalizer.
    """
    c = LAPLACE_CONSTANTS[constant]
    return delta_R / tau + 0.5 * mn * math.log(c * tau) + 0.5 * (S + K)


def kl_quadrature(spec, grid=None, prior_grid=None, tol=KL_IDENTITY_TOL):
    """KL(rho_gamma || pi) and the gap ``(n/gamma) E_rho L_n`` by quadrature.

    Raises :class:`InvariantFailure` when ``KL + gap`` differs from
    ``-log Z`` by more than ``tol`` (relative to ``max(1, |log Z|)``).
    """
    grid = _grid_like(grid, lambda: posterior_gaussian(spec))
    log_post, pts, logw, lf = _log_integral(grid, spec.log_density, "posterior normalizer")
    log_C = log_prior_normalizer(spec.reg, spec.tau, prior_grid)
    p = np.exp(lf + logw - log_post)
    log_rho = lf - log_post
    log_pi = spec.log_prior_unnormalized(pts) - log_C
    kl = float(np.sum(p * (log_rho - log_pi)))
    gap = float(np.sum(p * -spec.log_likelihood(pts)))
    log_Z = log_post - log_C
    err = abs(kl + gap + log_Z)
    if err > tol * max(1.0, abs(log_Z)):
        raise InvariantFailure(f"KL + gap differs from -log Z by {err:.3e}")
    return KLEstimate(kl, gap, log_Z, err)


def kl_exact_gaussian(model, dataset, reg, gamma, tau):
    """Closed-form KL between the Gaussian cold posterior and Gaussian prior."""
    spec = ColdPosteriorSpec(model, dataset, reg, gamma, tau)
    mu, cov = posterior_gaussian(spec)
    prior_prec = reg.weight / tau
    diff = mu - reg.anchor
    d = mu.size
    _, logdet_post = np.linalg.slogdet(cov)
    _, logdet_prior_prec = np.linalg.slogdet(prior_prec)
    return 0.5 * float(
        np.trace(prior_prec @ cov) + diff @ prior_prec @ diff - d - logdet_prior_prec - logdet_post
    )


def _gap_quadratic(model, dataset, distribution):
    """``n (L - L_n)`` as ``(value_fn, hessian)`` for the linear-Gaussian case."""
    w, c, const = distribution.risk_quadratic(model)
    Phi = model.jacobian(np.zeros(model.param_dim), dataset.X)
    y, n = dataset.targets, dataset.n

    def g(thetas):
        T = np.atleast_2d(thetas)
        L = np.sum(w * (T - c) ** 2, axis=1) + const
        nLn = np.sum((T @ Phi.T - y) ** 2, axis=1)
        return n * L - nLn

    def grad(theta):
        return 2.0 * n * w * (theta - c) - 2.0 * Phi.T @ (Phi @ theta - y)

    return g, grad, 2.0 * n * np.diag(w) - 2.0 * Phi.T @ Phi


def _gap_function(model, dataset, distribution, true_risk_fn):
    if true_risk_fn is not None:
        n = dataset.n

        def g(thetas):
            T = np.atleast_2d(thetas)
            F = model.predict_many(T, dataset.X)
            nLn = np.sum((F - dataset.Y) ** 2, axis=(1, 2))
            return n * np.asarray(true_risk_fn(T)) - nLn

        return g, None, None
    if isinstance(distribution, LinearGaussianTeacher) and distribution.supports_closed_form(model):
        return _gap_quadratic(model, dataset, distribution)
    raise TypeError("zeta_n needs a closed-form true risk (linear-Gaussian) or true_risk_fn")


def zeta_n_quadrature(model, dataset, reg, tau, distribution=None, grid=None, prior_grid=None,
                      true_risk_fn=None, refine=False):
    """``zeta_n = E_pi exp(n (L - L_n))`` by quadrature, and its leading term
    ``exp(n (L(theta_0) - L_n(theta_0)))``.
    """
    g, grad, G = _gap_function(model, dataset, distribution, true_risk_fn)
    theta0 = reg.global_minimizer()
    leading = float(np.exp(g(theta0[None, :])[0]))
    if grid is None:
        m0, cov0 = prior_gaussian(reg, tau)
        if G is not None:
            prec = la.inv(cov0) - G
            if np.linalg.eigvalsh(prec)[0] <= 0:
                raise QuadratureError("zeta_n integrand is not integrable at this tau")
            cov0 = la.inv(prec)
            m0 = m0 + cov0 @ grad(theta0)
        # without the gap curvature the tilt is unknown, so widen the prior box
        width = DEFAULT_HALF_WIDTH if G is not None else 1.5 * DEFAULT_HALF_WIDTH
        grid = QuadratureGrid.gaussian(m0, 0.5 * (cov0 + cov0.T), half_width=width)
    prior_grid = _grid_like(prior_grid, lambda: prior_gaussian(reg, tau))

    def once(gr, pg):
        lf = lambda t: g(t) - reg.values(t) / tau
        return _log_integral(gr, lf, "zeta_n integrand")[0] - log_prior_normalizer(reg, tau, pg)

    log_val = once(grid, prior_grid)
    err = 0.0
    if refine:
        coarse = grid.nodes // 2 + 1
        err = abs(math.exp(log_val) - math.exp(once(grid.with_nodes(coarse), prior_grid.with_nodes(coarse))))
    return ZetaEstimate(math.exp(log_val), leading, err)


def zeta_n_exact_gaussian(model, dataset, reg, tau, distribution):
    """Closed-form ``zeta_n`` for linear-features, quadratic R, linear-Gaussian data."""
    g, grad, G = _gap_quadratic(model, dataset, distribution)
    theta0, C = prior_gaussian(reg, tau)
    b = grad(theta0)
    M = la.inv(C) - G
    if np.linalg.eigvalsh(M)[0] <= 0:
        raise ConditioningError("zeta_n diverges: prior precision does not dominate the gap curvature")
    _, logdet = np.linalg.slogdet(np.eye(theta0.size) - C @ G)
    return float(np.exp(g(theta0[None])[0] + 0.5 * b @ la.solve(M, b) - 0.5 * logdet))


def fit_remainder_rate(values):
    """Least-squares slope of ``log error`` against ``log parameter``.

    ``values`` is a sequence of ``(parameter, error)`` pairs.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 4:
        raise ValueError("rate fitting needs at least 4 (parameter, error) pairs")
    if np.any(arr <= 0):
        raise ValueError("parameters and errors must be positive for a log-log fit")
    fit = linregress(np.log(arr[:, 0]), np.log(arr[:, 1]))
    return RateFit(float(fit.slope), float(fit.intercept), float(fit.rvalue**2))


def gamma_schedule(tau, coeff=1.0, power=2.0):
    """Cold-posterior temperature tied to the prior temperature."""
    return coeff * tau**power
