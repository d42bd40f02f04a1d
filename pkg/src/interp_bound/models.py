"""Model families f(x, theta), their Jacobians and output Hessians, risks,
and synthetic data.

Jacobians are stacked sample-major: row ``i * m + j`` holds the gradient of
output ``j`` at sample ``i`` (zero-based), so ``DF`` has shape ``(n*m, d)``
and matches ``Dataset.targets``.
"""
import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .exceptions import DimensionError
from .seeding import rng_for

FAMILIES = ("linear-features", "random-features", "mlp-tanh")
MAX_MLP_WIDTH = 256

_EPS = np.finfo(float).eps


def fd_steps(theta):
    """Central-difference steps ``eps**(1/3) * (1 + |theta_i|)``."""
    return _EPS ** (1.0 / 3.0) * (1.0 + np.abs(theta))


@dataclass(frozen=True)
class ModelSpec:
    """A built-in differentiable model family.

    * ``linear-features``: ``f_j(x) = x[:n_features] @ theta_j``.
    * ``random-features``: ``f_j(x) = tanh(W x + b) @ theta_j`` with ``W, b``
      frozen from ``seed``; linear in theta, nonlinear in x.
    * ``mlp-tanh``: one hidden tanh layer, all weights trainable. Parameter
      layout is ``[W1 (width x p), b1, W2 (m x width), b2]`` with the bias
      blocks present only when ``bias`` is true.
    """

    family: str
    input_dim: int
    output_dim: int = 1
    n_features: Optional[int] = None
    width: int = 16
    bias: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise DimensionError("input_dim and output_dim must be positive")
        if self.family == "linear-features":
            p = self.input_dim if self.n_features is None else self.n_features
            if not 1 <= p <= self.input_dim:
                raise DimensionError(
                    f"n_features={p} must lie in [1, input_dim={self.input_dim}]"
                )
        elif self.width < 1:
            raise DimensionError("width must be positive")
        if self.family == "mlp-tanh" and self.width > MAX_MLP_WIDTH:
            raise DimensionError(f"mlp-tanh width is capped at {MAX_MLP_WIDTH}")

    @property
    def is_linear(self):
        return self.family in ("linear-features", "random-features")

    @property
    def n_basis(self):
        """Number of features per output for the linear-in-theta families."""
        if self.family == "linear-features":
            return self.input_dim if self.n_features is None else self.n_features
        return self.width

    @property
    def param_dim(self):
        m, p, w = self.output_dim, self.input_dim, self.width
        if self.is_linear:
            return m * self.n_basis
        return w * p + m * w + (w + m if self.bias else 0)

    @cached_property
    def _frozen_layer(self):
        rng = np.random.default_rng(self.seed)
        W = rng.normal(0.0, 1.0 / np.sqrt(self.input_dim), size=(self.width, self.input_dim))
        b = rng.normal(0.0, 1.0, size=self.width) if self.bias else np.zeros(self.width)
        return W, b

    def _check(self, theta, X):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if theta.size != self.param_dim:
            raise DimensionError(f"theta has length {theta.size}, model expects {self.param_dim}")
        if X.shape[1] != self.input_dim:
            raise DimensionError(f"inputs have dimension {X.shape[1]}, model expects {self.input_dim}")
        return theta, X

    def features(self, X):
        """Feature matrix (n, n_basis) of a linear-in-theta family."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.family == "linear-features":
            return X[:, : self.n_basis].copy()
        if self.family == "random-features":
            W, b = self._frozen_layer
            return np.tanh(X @ W.T + b)
        raise TypeError("mlp-tanh is not linear in theta")

    def _unpack_mlp(self, theta):
        p, m, w = self.input_dim, self.output_dim, self.width
        i = 0
        W1 = theta[i : i + w * p].reshape(w, p)
        i += w * p
        if self.bias:
            b1 = theta[i : i + w]
            i += w
        else:
            b1 = np.zeros(w)
        W2 = theta[i : i + m * w].reshape(m, w)
        i += m * w
        b2 = theta[i : i + m] if self.bias else np.zeros(m)
        return W1, b1, W2, b2

    def predict(self, theta, X):
        """Outputs with shape (n, m)."""
        theta, X = self._check(theta, X)
        if self.is_linear:
            return self.features(X) @ theta.reshape(self.output_dim, -1).T
        W1, b1, W2, b2 = self._unpack_mlp(theta)
        return np.tanh(X @ W1.T + b1) @ W2.T + b2

    def predict_many(self, thetas, X):
        """Outputs for a batch of parameter vectors, shape (N, n, m)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self.is_linear:
            Phi = self.features(X)
            T = thetas.reshape(len(thetas), self.output_dim, -1)
            return np.einsum("ip,Njp->Nij", Phi, T)
        return np.stack([self.predict(t, X) for t in thetas])

    def jacobian(self, theta, X):
        """Analytic Jacobian stack, shape (n*m, d)."""
        theta, X = self._check(theta, X)
        n, m = X.shape[0], self.output_dim
        if self.is_linear:
            Phi = self.features(X)
            DF = np.zeros((n, m, m, Phi.shape[1]))
            for j in range(m):
                DF[:, j, j, :] = Phi
            return DF.reshape(n * m, -1)
        W1, b1, W2, _ = self._unpack_mlp(theta)
        H = np.tanh(X @ W1.T + b1)
        G = W2[None, :, :] * (1.0 - H**2)[:, None, :]
        blocks = [(G[..., None] * X[:, None, None, :]).reshape(n, m, -1)]
        if self.bias:
            blocks.append(G)
        dW2 = np.zeros((n, m, m, self.width))
        for j in range(m):
            dW2[:, j, j, :] = H
        blocks.append(dW2.reshape(n, m, -1))
        if self.bias:
            blocks.append(np.broadcast_to(np.eye(m), (n, m, m)))
        return np.concatenate(blocks, axis=2).reshape(n * m, -1)

    @property
    def smooth(self):
        return True

    def to_dict(self):
        return {
            "family": self.family,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "n_features": self.n_features,
            "width": self.width,
            "bias": self.bias,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FunctionModel:
    """User-supplied model from a per-sample function and its gradient.

    ``func(theta, x)`` returns an m-vector and ``grad(theta, x)`` the (m, d)
    Jacobian. Used for synthetic test hooks such as ``f = theta_1 * theta_2``.
    """

    func: Callable
    grad: Callable
    param_dim: int
    input_dim: int
    output_dim: int = 1
    smooth: bool = True
    family: str = "custom"

    is_linear = False

    def predict(self, theta, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        theta = np.asarray(theta, dtype=float)
        return np.array([np.atleast_1d(self.func(theta, x)) for x in X], dtype=float)

    def predict_many(self, thetas, X):
        return np.stack([self.predict(t, X) for t in np.atleast_2d(thetas)])

    def jacobian(self, theta, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        theta = np.asarray(theta, dtype=float)
        rows = [np.atleast_2d(self.grad(theta, x)) for x in X]
        return np.concatenate(rows, axis=0).reshape(X.shape[0] * self.output_dim, self.param_dim)

    def to_dict(self):
        return {"family": self.family, "param_dim": self.param_dim}


@dataclass(frozen=True)
class LinearGaussianTeacher:
    """Gaussian design ``x ~ N(0, diag(cov))`` with linear teacher and noise.

    ``cov_i = i**(-cov_decay)`` (identity for ``cov_decay = 0``). The teacher
    matrix ``beta`` (m x input_dim) has iid ``N(0, signal**2 / input_dim)``
    entries drawn from ``teacher_seed``; ``y = beta x + noise * eps``.
    """

    input_dim: int
    output_dim: int = 1
    noise: float = 0.0
    teacher_seed: int = 0
    signal: float = 1.0
    cov_decay: float = 0.0

    def __post_init__(self):
        if self.noise < 0:
            raise ValueError(f"noise level must be non-negative, got {self.noise}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise DimensionError("input_dim and output_dim must be positive")

    @cached_property
    def cov(self):
        return np.arange(1, self.input_dim + 1, dtype=float) ** (-self.cov_decay)

    @cached_property
    def beta(self):
        rng = np.random.default_rng(self.teacher_seed)
        return rng.normal(0.0, self.signal / np.sqrt(self.input_dim),
                          size=(self.output_dim, self.input_dim))

    def sample(self, n, rng):
        X = rng.normal(size=(n, self.input_dim)) * np.sqrt(self.cov)
        Y = X @ self.beta.T + self.noise * rng.normal(size=(n, self.output_dim))
        return X, Y

    def supports_closed_form(self, model):
        return (
            isinstance(model, ModelSpec)
            and model.family == "linear-features"
            and model.input_dim == self.input_dim
            and model.output_dim == self.output_dim
        )

    def risk_quadratic(self, model):
        """``(weights, center, const)`` with ``L(theta) = sum w (theta - c)**2 + const``."""
        if not self.supports_closed_form(model):
            raise TypeError("closed-form risk needs a matching linear-features model")
        p = model.n_basis
        w = np.tile(self.cov[:p], self.output_dim)
        c = self.beta[:, :p].reshape(-1)
        omitted = float(np.sum(self.cov[p:] * self.beta[:, p:] ** 2))
        return w, c, omitted + self.output_dim * self.noise**2

    def residual_cov(self, model, theta):
        """Covariance (m x m) of the Gaussian residual ``f(x, theta) - y``."""
        p = model.n_basis
        D = np.zeros((self.output_dim, self.input_dim))
        D[:, :p] = np.asarray(theta).reshape(self.output_dim, p)
        D -= self.beta
        return (D * self.cov) @ D.T + self.noise**2 * np.eye(self.output_dim)

    def to_dict(self):
        return {
            "kind": "linear-gaussian",
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "noise": self.noise,
            "teacher_seed": self.teacher_seed,
            "signal": self.signal,
            "cov_decay": self.cov_decay,
        }


@dataclass(frozen=True)
class InjectedGaussianLoss:
    """Test hook: per-sample losses iid ``N(mu, var)`` regardless of theta."""

    mu: float
    var: float

    def sample_losses(self, rng, size):
        return rng.normal(self.mu, np.sqrt(self.var), size=size)

    def true_risk(self, theta=None):
        return self.mu

    def to_dict(self):
        return {"kind": "injected-gaussian-loss", "mu": self.mu, "var": self.var}


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    descriptor: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.shape[0] != Y.shape[0]:
            raise DimensionError(f"{X.shape[0]} inputs but {Y.shape[0]} outputs")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.Y.shape[1]

    @property
    def targets(self):
        """Outputs flattened sample-major, aligned with Jacobian rows."""
        return self.Y.reshape(-1)

    def to_csv(self, path):
        header = [f"x_{i + 1}" for i in range(self.X.shape[1])]
        header += [f"y_{j + 1}" for j in range(self.m)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for x, y in zip(self.X, self.Y):
                writer.writerow([repr(float(v)) for v in np.concatenate([x, y])])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
        ycols = [i for i, h in enumerate(header) if h.startswith("y_")]
        if not xcols or not ycols or len(xcols) + len(ycols) != len(header):
            raise ValueError(f"CSV header must be x_1..x_p, y_1..y_m; got {header}")
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(-1, len(header))
        return cls(data[:, xcols], data[:, ycols], descriptor={"kind": "csv", "path": str(path)})


def generate_dataset(distribution, n, seed):
    """Draw ``n`` samples reproducibly from a synthetic distribution."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng_for(seed)
    X, Y = distribution.sample(n, rng)
    return Dataset(X, Y, descriptor=dict(distribution.to_dict(), n=n))


def eval_model(model, theta, x):
    """Model output at a single input, an m-vector."""
    return model.predict(theta, np.atleast_2d(x))[0]


def jacobian(model, theta, dataset):
    return model.jacobian(theta, dataset.X)


def output_hessians(model, theta, dataset, step_scale=1.0):
    """Hessians of every stacked output, shape (n*m, d, d).

    Central differences of the analytic Jacobian, symmetrized. Linear-in-theta
    models short-circuit to exact zeros.
    """
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    k = dataset.n * model.output_dim
    if model.is_linear:
        return np.zeros((k, d, d))
    h = step_scale * fd_steps(theta)
    H = np.empty((k, d, d))
    for i in range(d):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h[i]
        tm[i] -= h[i]
        hi = tp[i] - tm[i]
        if hi == 0.0:
            raise FloatingPointError(f"finite-difference step underflow at parameter {i}")
        H[:, :, i] = (jacobian(model, tp, dataset) - jacobian(model, tm, dataset)) / hi
    return 0.5 * (H + H.transpose(0, 2, 1))


def per_sample_losses(model, theta, dataset):
    R = model.predict(theta, dataset.X) - dataset.Y
    return np.sum(R**2, axis=1)


def empirical_risk(model, theta, dataset):
    """Mean squared loss ``(1/n) sum_i ||f(x_i, theta) - y_i||**2``."""
    return float(np.mean(per_sample_losses(model, theta, dataset)))


def true_risk(model, theta, distribution, n_mc=10_000, seed=0, method="auto", chunk=20_000):
    """Population risk ``E ||f(x, theta) - y||**2`` and its standard error.

    Uses the closed form for linear-features models under a matching
    :class:`LinearGaussianTeacher` (standard error 0), otherwise Monte Carlo.
    """
    if method not in ("auto", "closed-form", "monte-carlo"):
        raise ValueError(f"unknown method {method!r}")
    if isinstance(distribution, InjectedGaussianLoss):
        return distribution.true_risk(theta), 0.0
    closed = distribution.supports_closed_form(model)
    if method == "closed-form" and not closed:
        raise TypeError("closed-form true risk is unavailable for this model/distribution")
    if closed and method != "monte-carlo":
        w, c, const = distribution.risk_quadratic(model)
        return float(np.sum(w * (np.asarray(theta) - c) ** 2) + const), 0.0
    if n_mc < 1:
        raise ValueError("n_mc must be positive")
    total, total_sq = 0.0, 0.0
    for k, start in enumerate(range(0, n_mc, chunk)):
        size = min(chunk, n_mc - start)
        rng = rng_for(seed, k)
        X, Y = distribution.sample(size, rng)
        losses = np.sum((model.predict(theta, X) - Y) ** 2, axis=1)
        total += losses.sum()
        total_sq += (losses**2).sum()
    mean = total / n_mc
    var = max(total_sq / n_mc - mean**2, 0.0) * n_mc / max(n_mc - 1, 1)
    return float(mean), float(np.sqrt(var / n_mc))
