"""Independent oracles shared by the tests."""
import numpy as np


def fd_jacobian(model, theta, X, h=1e-6):
    """Central finite differences of the stacked model outputs."""
    theta = np.asarray(theta, dtype=float)
    cols = []
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h * (1.0 + abs(theta[i]))
        cols.append((model.predict(theta + e, X) - model.predict(theta - e, X)).reshape(-1) / (2 * e[i]))
    return np.stack(cols, axis=1)


def fd_hessians(model, theta, X, h):
    """Second differences of outputs: shape (n*m, d, d)."""
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    f = lambda t: model.predict(t, X).reshape(-1)  # noqa: E731
    H = np.empty((f(theta).size, d, d))
    for i in range(d):
        for j in range(d):
            ei, ej = np.zeros(d), np.zeros(d)
            ei[i], ej[j] = h, h
            H[:, i, j] = (f(theta + ei + ej) - f(theta + ei - ej) - f(theta - ei + ej) + f(theta - ei - ej)) / (4 * h * h)
    return H


def make_linear(Phi):
    """linear-features model and dataset inputs reproducing the feature matrix Phi."""
    from interp_bound.models import ModelSpec

    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    return ModelSpec("linear-features", input_dim=Phi.shape[1]), Phi
