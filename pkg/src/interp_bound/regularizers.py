"""Explicit regularizers R(theta) with analytic derivatives."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DimensionError

REGULARIZER_FAMILIES = ("quadratic", "smooth-power")


@dataclass(frozen=True, eq=False)
class Regularizer:
    """``quadratic``: ``R = 1/2 (theta - a)^T A (theta - a)`` with ``A`` PD.

    ``smooth-power``: ``R = scale * (||theta||**q / q + ridge ||theta||**2 / 2)``
    with even ``q >= 4``. With ``ridge = 0`` the Hessian vanishes at the
    minimizer, which the curvature term cannot handle.
    """

    family: str
    dim: int
    anchor: Optional[np.ndarray] = None
    weight: Optional[np.ndarray] = None
    exponent: int = 4
    scale: float = 1.0
    ridge: float = 0.0

    def __post_init__(self):
        if self.family not in REGULARIZER_FAMILIES:
            raise ValueError(f"unknown regularizer {self.family!r}")
        if self.family == "quadratic":
            a = np.zeros(self.dim) if self.anchor is None else np.asarray(self.anchor, dtype=float)
            if a.shape != (self.dim,):
                raise DimensionError(f"anchor has shape {a.shape}, expected ({self.dim},)")
            A = np.eye(self.dim) if self.weight is None else np.asarray(self.weight, dtype=float)
            if A.ndim == 1:
                A = np.diag(A)
            if A.shape != (self.dim, self.dim):
                raise DimensionError(f"weight has shape {A.shape}, expected ({self.dim}, {self.dim})")
            if np.max(np.abs(A - A.T)) > 1e-8 * np.linalg.norm(A):
                raise ValueError("quadratic weight must be symmetric")
            A = 0.5 * (A + A.T)
            if np.linalg.eigvalsh(A)[0] <= 0:
                raise ValueError("quadratic weight must be positive definite")
            object.__setattr__(self, "anchor", a)
            object.__setattr__(self, "weight", A)
        else:
            q = self.exponent
            if int(q) != q or q < 4 or q % 2:
                raise ValueError(f"smooth-power exponent must be an even integer >= 4, got {q}")
            if self.scale <= 0 or self.ridge < 0:
                raise ValueError("smooth-power needs scale > 0 and ridge >= 0")

    @classmethod
    def quadratic(cls, dim, anchor=None, weight=None):
        return cls("quadratic", dim, anchor=anchor, weight=weight)

    @classmethod
    def smooth_power(cls, dim, exponent=4, scale=1.0, ridge=0.0):
        return cls("smooth-power", dim, exponent=exponent, scale=scale, ridge=ridge)

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.dim:
            raise DimensionError(f"theta has length {theta.size}, regularizer expects {self.dim}")
        return theta

    def value(self, theta):
        return self.eval_grad_hess(theta, order=0)[0]

    def values(self, thetas):
        """R evaluated row-wise on an (N, d) batch."""
        T = np.atleast_2d(np.asarray(thetas, dtype=float))
        if T.shape[1] != self.dim:
            raise DimensionError(f"batch has {T.shape[1]} columns, regularizer expects {self.dim}")
        if self.family == "quadratic":
            D = T - self.anchor
            return 0.5 * np.einsum("Ni,ij,Nj->N", D, self.weight, D)
        s = np.einsum("Ni,Ni->N", T, T)
        return self.scale * (s ** (self.exponent // 2) / self.exponent + 0.5 * self.ridge * s)

    def grad(self, theta):
        return self.eval_grad_hess(theta, order=1)[1]

    def hess(self, theta):
        return self.eval_grad_hess(theta)[2]

    def eval_grad_hess(self, theta, order=2):
        theta = self._check(theta)
        if self.family == "quadratic":
            r = theta - self.anchor
            g = self.weight @ r
            return 0.5 * float(r @ g), g, (self.weight.copy() if order >= 2 else None)
        q, c = self.exponent, self.scale
        s = float(theta @ theta)
        val = c * (s ** (q // 2) / q + 0.5 * self.ridge * s)
        g = c * (s ** (q // 2 - 1) + self.ridge) * theta
        H = None
        if order >= 2:
            H = c * (s ** (q // 2 - 1) + self.ridge) * np.eye(self.dim)
            if q > 2:
                H += c * (q - 2) * s ** (q // 2 - 2) * np.outer(theta, theta)
        return val, g, H

    def global_minimizer(self):
        if self.family == "quadratic":
            return self.anchor.copy()
        return np.zeros(self.dim)

    def to_dict(self):
        if self.family == "quadratic":
            return {"family": "quadratic", "dim": self.dim}
        return {
            "family": "smooth-power",
            "dim": self.dim,
            "exponent": self.exponent,
            "scale": self.scale,
            "ridge": self.ridge,
        }


def reg_eval_grad_hess(reg, theta):
    return reg.eval_grad_hess(theta)


def global_minimizer(reg):
    return reg.global_minimizer()
