"""scikit-learn style estimators wrapping the solver and the bound engine."""
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .bound import assemble_report
from .interpolation import interpolate
from .models import Dataset, ModelSpec
from .regularizers import Regularizer


class MinNormInterpolator(RegressorMixin, BaseEstimator):
    """Fit the regularizer-minimal interpolator of the training data.

    With the default linear features and quadratic regularizer this is the
    (weighted) minimum-norm least-squares solution. Other model families or
    the smooth-power regularizer use the two-phase manifold solver.

    Fitted attributes: ``coef_`` (the interpolating parameters), ``model_``,
    ``regularizer_``, ``result_``, ``n_features_in_`` and ``n_outputs_``.
    """

    def __init__(
        self,
        family="linear-features",
        n_features=None,
        width=16,
        bias=True,
        model_seed=0,
        regularizer="quadratic",
        anchor=None,
        weight=None,
        exponent=4,
        scale=1.0,
        ridge=0.0,
        method="auto",
        tol=1e-10,
        tol_R=1e-8,
        max_iters=500,
        random_state=0,
    ):
        self.family = family
        self.n_features = n_features
        self.width = width
        self.bias = bias
        self.model_seed = model_seed
        self.regularizer = regularizer
        self.anchor = anchor
        self.weight = weight
        self.exponent = exponent
        self.scale = scale
        self.ridge = ridge
        self.method = method
        self.tol = tol
        self.tol_R = tol_R
        self.max_iters = max_iters
        self.random_state = random_state

    def _build(self, X, Y):
        model = ModelSpec(self.family, input_dim=X.shape[1], output_dim=Y.shape[1],
                          n_features=self.n_features, width=self.width, bias=self.bias,
                          seed=self.model_seed)
        if self.regularizer == "quadratic":
            reg = Regularizer.quadratic(model.param_dim, anchor=self.anchor, weight=self.weight)
        elif self.regularizer == "smooth-power":
            reg = Regularizer.smooth_power(model.param_dim, exponent=self.exponent,
                                           scale=self.scale, ridge=self.ridge)
        else:
            raise ValueError(f"unknown regularizer {self.regularizer!r}")
        return model, reg

    def _fit_core(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=float)
        self._single_output = y.ndim == 1
        Y = y.reshape(-1, 1) if y.ndim == 1 else y
        model, reg = self._build(X, Y)
        dataset = Dataset(X, Y, descriptor={"kind": "estimator"})
        method = self.method
        if method == "auto":
            method = "closed-form" if model.is_linear and reg.family == "quadratic" else "two-phase"
        kw = {} if method == "closed-form" else dict(
            tol=self.tol, tol_R=self.tol_R, max_iters=self.max_iters, seed=self.random_state)
        result = interpolate(model, dataset, reg, method=method, **kw)
        self.model_, self.regularizer_, self.result_ = model, reg, result
        self.coef_ = result.theta_star
        self.n_features_in_ = X.shape[1]
        self.n_outputs_ = Y.shape[1]
        return dataset

    def fit(self, X, y):
        self._fit_core(X, y)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        out = self.model_.predict(self.coef_, X)
        return out[:, 0] if self._single_output else out


class InterpolationBound(MinNormInterpolator):
    """Interpolator that also evaluates the generalization bound at its fit.

    ``distribution`` (for example a :class:`LinearGaussianTeacher`) enables
    the dispersion term; without it ``P`` is reported as unavailable and
    left out of ``pac_rhs_``.
    """

    def __init__(
        self,
        family="linear-features",
        n_features=None,
        width=16,
        bias=True,
        model_seed=0,
        regularizer="quadratic",
        anchor=None,
        weight=None,
        exponent=4,
        scale=1.0,
        ridge=0.0,
        method="auto",
        tol=1e-10,
        tol_R=1e-8,
        max_iters=500,
        random_state=0,
        delta=0.05,
        distribution=None,
        n_replicates=1000,
    ):
        super().__init__(
            family=family, n_features=n_features, width=width, bias=bias,
            model_seed=model_seed, regularizer=regularizer, anchor=anchor, weight=weight,
            exponent=exponent, scale=scale, ridge=ridge, method=method, tol=tol,
            tol_R=tol_R, max_iters=max_iters, random_state=random_state,
        )
        self.delta = delta
        self.distribution = distribution
        self.n_replicates = n_replicates

    def fit(self, X, y):
        dataset = self._fit_core(X, y)
        terms = assemble_report(self.model_, dataset, self.regularizer_, self.result_,
                                self.distribution, delta=self.delta, T=self.n_replicates,
                                seed=self.random_state)
        self.terms_ = terms
        self.pac_rhs_ = terms.pac_rhs
        self.iic_ = terms.iic
        self.tau_ = terms.tau
        return self

    def bound_terms(self):
        check_is_fitted(self, "terms_")
        return self.terms_.to_json_dict()
