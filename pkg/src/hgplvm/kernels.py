"""Hyperboloid exponential kernel and its derivatives.

k(x, y) = sigma * exp(-d_L(x, y) / kappa) on the Lorentz model. The length
scale kappa is a fixed hyperparameter; sigma is learned in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry

# pairs closer than this are treated as coincident (gradient convention: zero)
COINCIDENT_DIST = 1e-9


@dataclass(frozen=True)
class HEKernelParams:
    """Variance sigma > 0 and length scale kappa > 0."""

    sigma: float
    kappa: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")


def kernel_eval(params, x, y):
    """Kernel value sigma * exp(-d_L(x,y)/kappa) for single points."""
    return params.sigma * np.exp(-geometry.distance(x, y) / params.kappa)


def gram(params, rows, cols=None):
    """Gram matrix with entries k(rows[i], cols[j]).

    rows: (R, Q+1), cols: (C, Q+1) (defaults to rows). Returns (R, C).
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] == 0:
        raise ValueError("gram: empty point list")
    D = geometry.pairwise_distance(rows, None if cols is None else np.atleast_2d(cols))
    return params.sigma * np.exp(-D / params.kappa)


def gram_and_grad_coeff(params, rows, cols=None):
    """Gram matrix and gradient prefactors from one distance evaluation."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] == 0:
        raise ValueError("gram: empty point list")
    cols2 = None if cols is None else np.atleast_2d(cols)
    w = geometry.pairwise_neg_inner_minus_one(rows, cols2)  # z - 1 >= 0
    d = geometry.arccosh1p(w)
    k = params.sigma * np.exp(-d / params.kappa)
    root = np.sqrt(w * (w + 2.0))  # sqrt(z^2 - 1)
    coincident = d < COINCIDENT_DIST
    safe = np.where(coincident, 1.0, root)
    coeff = np.where(coincident, 0.0, k / (params.kappa * safe))
    return k, coeff


def grad_coeff(params, rows, cols):
    """Scalar prefactors c[i,j] of the ambient kernel gradient.

    d k(r_i, c_j) / d c_j = c[i,j] * (g_l r_i) with
    c = k / (kappa * sqrt(z^2 - 1)), z = -<r_i, c_j>_L. Coincident pairs
    (z <= 1) get c = 0 by convention.
    """
    return gram_and_grad_coeff(params, rows, cols)[1]


def kernel_grad_point(params, x, y):
    """Ambient gradient of k(x, y) w.r.t. the Q+1 coordinates of x.

    Returns c * (g_l y) = c * [-y_0, y_1, ..., y_Q]; zero at coincidence.
    Finite differences along the lifted spatial coordinates are the ground
    truth for this expression.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = grad_coeff(params, y[None, :], x[None, :])[0, 0]
    gl_y = np.concatenate([[-y[0]], y[1:]])
    return c * gl_y


def variance_grad(params, dF_dK, K):
    """Chain dF/dK into dF/dsigma = (1/sigma) * sum_ij (dF/dK)_ij K_ij."""
    dF_dK = np.asarray(dF_dK, dtype=float)
    K = np.asarray(K, dtype=float)
    if dF_dK.shape != K.shape:
        raise ValueError(f"variance_grad: shape mismatch {dF_dK.shape} vs {K.shape}")
    return float(np.sum(dF_dK * K) / params.sigma)
