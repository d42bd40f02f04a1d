"""Generalization bounds for interpolating models.

Computes the sharpness, curvature and dispersion terms of a PAC-Bayes bound
at a constrained interpolator, and checks the underlying Laplace asymptotics
by brute-force quadrature in low dimension.
"""
__version__ = "0.1.0"

from .bound import BoundTerms, assemble_report, iic, pac_bound_rhs, temperature  # noqa: E402
from .config import RunConfig, load_config, parse_config  # noqa: E402
from .estimators import InterpolationBound, MinNormInterpolator  # noqa: E402
from .exceptions import *  # noqa: E402,F401,F403
from .interpolation import InterpolationResult, delta_R, interpolate  # noqa: E402
from .models import (  # noqa: E402
    Dataset,
    FunctionModel,
    InjectedGaussianLoss,
    LinearGaussianTeacher,
    ModelSpec,
    generate_dataset,
)
from .regularizers import Regularizer  # noqa: E402

__all__ = [
    "BoundTerms", "Dataset", "FunctionModel", "InjectedGaussianLoss", "InterpolationBound",
    "InterpolationResult", "LinearGaussianTeacher", "MinNormInterpolator", "ModelSpec",
    "Regularizer", "RunConfig", "assemble_report", "delta_R", "generate_dataset", "iic",
    "interpolate", "load_config", "pac_bound_rhs", "parse_config", "temperature",
]
