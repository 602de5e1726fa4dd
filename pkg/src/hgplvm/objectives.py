"""Objectives of the three hyperboloid GP-LVM variants and their gradients.

Full:      F   = -(ND/2) log 2pi - (D/2) log|K_nn + b^-1 I| - (1/2) tr[(K_nn + b^-1 I)^-1 Y Y^T]
Sparse:    F'  = -(D/2) log[(2pi)^N |A| / (b^N |K_mm|)] - (1/2) tr(W Y Y^T)
                 - (bD/2) tr(K_nn) + (bD/2) tr(K_mm^-1 K_mn K_nm)
           with A = K_mm + b K_mn K_nm, W = b I - b^2 K_nm A^-1 K_mn
Bayesian:  F'b = same shape with Psi statistics (A_b = K_mm + b Psi2,
                 W_b = b I - b^2 Psi1^T A_b^-1 Psi1) minus sum_i KL_i.

Latent gradients are ambient (Q+1)-row gradients obtained by chaining
dF/dGram through the kernel gradient; every analytic gradient here is
validated against central finite differences. The kernel diagonal is the
constant sigma, so tr(K_nn) = N sigma exactly and inducing columns do not
contribute latent gradients at coincident pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import wrapped
from .kernels import HEKernelParams, gram, gram_and_grad_coeff

BASE_JITTER = 1e-6
RETRY_JITTER = 1e-4


class ConditioningError(RuntimeError):
    """Raised when a covariance factorization fails even after jitter retry."""


@dataclass
class ModelConfig:
    variant: str  # "full" | "sparse" | "bayesian"
    q: int
    kernel: HEKernelParams
    beta: float
    m: Optional[int] = None
    h: Optional[int] = None

    def __post_init__(self):
        if self.variant not in ("full", "sparse", "bayesian"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.variant in ("sparse", "bayesian") and (self.m is None or self.m < 1):
            raise ValueError("sparse variants need m >= 1 inducing points")
        if self.variant == "bayesian" and (self.h is None or self.h < 1):
            raise ValueError("bayesian variant needs h >= 1 MC samples")


@dataclass
class ObjectiveEval:
    """Objective value plus the gradient bundle for one evaluation."""

    value: float
    grad_x: np.ndarray  # (N, Q+1) ambient rows; variational means for bayesian
    dlog_sigma: float
    dlog_beta: float
    grad_log_s: Optional[np.ndarray] = None  # (N, Q), bayesian only
    kl_sum: Optional[float] = None
    jitter_used: float = field(default=0.0)


def hyperparam_grads(ev):
    """Log-space hyperparameter gradients of an evaluated objective."""
    return {"dlog_sigma": ev.dlog_sigma, "dlog_beta": ev.dlog_beta}


def _chol(M, retry_scale):
    """SPD factorization with one jitter retry; reports the jitter used."""
    try:
        return cho_factor(M, lower=True), 0.0
    except LinAlgError:
        pass
    bumped = M + retry_scale * np.eye(M.shape[0])
    try:
        return cho_factor(bumped, lower=True), retry_scale
    except LinAlgError as exc:
        raise ConditioningError(
            f"factorization failed even with retry jitter {retry_scale:.3e}"
        ) from exc


def _logdet(cf):
    return 2.0 * float(np.sum(np.log(np.diag(cf[0]))))


def _gl_flip(P):
    """Apply g_l columnwise: negate the time coordinate of each row."""
    out = np.array(P, dtype=float, copy=True)
    out[:, 0] = -out[:, 0]
    return out


def objective_full(Y, X, config):
    """Log-likelihood of the full model with all gradients."""
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, d = Y.shape
    if X.shape[0] != n:
        raise ValueError("Y rows and latent count disagree")
    kern = config.kernel
    beta = config.beta

    K, coeff = gram_and_grad_coeff(kern, X)
    C = K + (1.0 / beta) * np.eye(n)
    cf, jit = _chol(C, RETRY_JITTER * kern.sigma)
    CinvY = cho_solve(cf, Y)
    value = (
        -0.5 * n * d * np.log(2.0 * np.pi)
        - 0.5 * d * _logdet(cf)
        - 0.5 * float(np.sum(CinvY * Y))
    )

    Cinv = cho_solve(cf, np.eye(n))
    dF_dK = -0.5 * d * Cinv + 0.5 * CinvY @ CinvY.T
    # x_i enters through row i and column i of K_nn: symmetric factor 2
    P = dF_dK * coeff
    grad_x = 2.0 * P @ _gl_flip(X)

    dlog_sigma = float(np.sum(dF_dK * K))
    dlog_beta = -float(np.trace(dF_dK)) / beta
    return ObjectiveEval(
        value=float(value),
        grad_x=grad_x,
        dlog_sigma=dlog_sigma,
        dlog_beta=dlog_beta,
        jitter_used=jit,
    )


def _sparse_core(Y, Kmm, Kmn, beta, sigma):
    """Pieces shared by the sparse value/gradients: factorize K_mm and A."""
    cf_m, jit_m = _chol(Kmm, RETRY_JITTER * sigma)
    A = Kmm + beta * (Kmn @ Kmn.T)
    cf_a, jit_a = _chol(A, RETRY_JITTER * sigma)
    B = Kmn @ Y
    AinvB = cho_solve(cf_a, B)
    t_quad = float(np.sum(AinvB * B))  # tr(K_nm A^-1 K_mn Y Y^T)
    KmmInvKmn = cho_solve(cf_m, Kmn)
    t_nystrom = float(np.sum(KmmInvKmn * Kmn))  # tr(K_mm^-1 K_mn K_nm)
    return cf_m, cf_a, AinvB, t_quad, KmmInvKmn, t_nystrom, max(jit_m, jit_a)


def objective_sparse(Y, X, Z, config):
    """Sparse lower bound; Z carries no gradient (handled by resampling)."""
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n, d = Y.shape
    m = Z.shape[0]
    kern = config.kernel
    beta = config.beta

    Kmm = gram(kern, Z) + BASE_JITTER * kern.sigma * np.eye(m)
    Kmn, C_mn = gram_and_grad_coeff(kern, Z, X)
    cf_m, cf_a, AinvB, t_quad, KmmInvKmn, t_nystrom, jit = _sparse_core(
        Y, Kmm, Kmn, beta, kern.sigma
    )
    tr_yy = float(np.sum(Y * Y))
    psi0 = n * kern.sigma
    value = (
        -0.5 * d * (n * np.log(2.0 * np.pi) + _logdet(cf_a) - n * np.log(beta) - _logdet(cf_m))
        - 0.5 * (beta * tr_yy - beta**2 * t_quad)
        - 0.5 * beta * d * psi0
        + 0.5 * beta * d * t_nystrom
    )

    AinvKmn = cho_solve(cf_a, Kmn)
    T = AinvB  # A^-1 K_mn Y, (m, d)
    B = Kmn @ Y
    dF_dKmn = (
        -beta * d * AinvKmn
        + beta**2 * T @ Y.T
        - beta**3 * T @ (B.T @ AinvKmn)
        + beta * d * KmmInvKmn
    )
    Ainv = cho_solve(cf_a, np.eye(m))
    KmmInv = cho_solve(cf_m, np.eye(m))
    dF_dKmm = (
        0.5 * d * KmmInv
        - 0.5 * d * Ainv
        - 0.5 * beta**2 * T @ T.T
        - 0.5 * beta * d * KmmInvKmn @ KmmInvKmn.T
    )

    grad_x = (dF_dKmn * C_mn).T @ _gl_flip(Z)

    dlog_sigma = (
        float(np.sum(dF_dKmn * Kmn)) + float(np.sum(dF_dKmm * Kmm)) - 0.5 * beta * d * psi0
    )
    KK = Kmn @ Kmn.T
    dlog_beta = (
        -0.5 * beta * d * float(np.sum(Ainv * KK))
        + 0.5 * n * d
        - 0.5 * beta * tr_yy
        + beta**2 * t_quad
        - 0.5 * beta**3 * float(np.sum((T @ T.T) * KK))
        - 0.5 * beta * d * psi0
        + 0.5 * beta * d * t_nystrom
    )
    return ObjectiveEval(
        value=float(value),
        grad_x=grad_x,
        dlog_sigma=dlog_sigma,
        dlog_beta=dlog_beta,
        jitter_used=jit,
    )


@dataclass
class PsiStats:
    """MC kernel expectations: psi1 (M, N), psi2 (M, M), psi0 = N sigma.

    kzx caches the per-sample kernel block (M, N, H) for gradient reuse.
    """

    psi1: np.ndarray
    psi2: np.ndarray
    psi0: float
    kzx: np.ndarray
    czx: np.ndarray


def psi_stats(params, Z, sample):
    """Monte-Carlo Psi statistics from a cached reparameterized sample.

    Psi1[k,i] = (1/H) sum_h k(z_k, x_i^(h)); Psi2 accumulates the matching
    outer products over data points; psi0 = N sigma exactly (constant
    kernel diagonal).
    """
    Z = np.asarray(Z, dtype=float)
    x = sample.x  # (N, H, Q+1)
    n, h, dim = x.shape
    Kzx, Czx = gram_and_grad_coeff(params, Z, x.reshape(n * h, dim))
    Kzx = Kzx.reshape(-1, n, h)
    psi1 = Kzx.mean(axis=2)
    psi2 = np.einsum("knh,lnh->kl", Kzx, Kzx) / h
    return PsiStats(psi1=psi1, psi2=psi2, psi0=n * params.sigma, kzx=Kzx, czx=Czx.reshape(-1, n, h))


def objective_bayesian(Y, state, Z, zeta, config):
    """Evidence lower bound with wrapped-Gaussian variational posteriors.

    zeta: (N, H, Q) frozen standard-normal draws shared by the value and the
    pathwise gradients. grad_x holds the ambient gradients w.r.t. the
    variational means; grad_log_s those w.r.t. log s_iq.
    """
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    n, d = Y.shape
    m = Z.shape[0]
    h = zeta.shape[1]
    kern = config.kernel
    beta = config.beta

    mu_b = state.mu[:, None, :]
    s_b = state.s[:, None, :]
    sample = wrapped.wg_sample(mu_b, s_b, zeta)
    stats = psi_stats(kern, Z, sample)
    psi1, psi2, psi0, Kzx = stats.psi1, stats.psi2, stats.psi0, stats.kzx
    kl_each = wrapped.kl_mc(state.mu, state.s, sample)
    kl_sum = float(np.sum(kl_each))

    Kmm = gram(kern, Z) + BASE_JITTER * kern.sigma * np.eye(m)
    cf_m, jit_m = _chol(Kmm, RETRY_JITTER * kern.sigma)
    A = Kmm + beta * psi2
    cf_a, jit_a = _chol(A, RETRY_JITTER * kern.sigma)

    B = psi1 @ Y
    T = cho_solve(cf_a, B)  # A_b^-1 Psi1 Y
    t_quad = float(np.sum(T * B))
    t_nystrom = float(np.trace(cho_solve(cf_m, psi2)))
    tr_yy = float(np.sum(Y * Y))
    value = (
        -0.5 * d * (n * np.log(2.0 * np.pi) + _logdet(cf_a) - n * np.log(beta) - _logdet(cf_m))
        - 0.5 * (beta * tr_yy - beta**2 * t_quad)
        - 0.5 * beta * d * psi0
        + 0.5 * beta * d * t_nystrom
        - kl_sum
    )

    Ainv = cho_solve(cf_a, np.eye(m))
    KmmInv = cho_solve(cf_m, np.eye(m))
    dF_dPsi1 = beta**2 * T @ Y.T  # (m, n)
    dF_dPsi2 = -0.5 * beta * d * Ainv - 0.5 * beta**3 * T @ T.T + 0.5 * beta * d * KmmInv
    KmmInvPsi2 = cho_solve(cf_m, psi2)
    dF_dKmm = (
        0.5 * d * KmmInv
        - 0.5 * d * Ainv
        - 0.5 * beta**2 * T @ T.T
        - 0.5 * beta * d * KmmInvPsi2 @ KmmInv
    )

    # chain dF/dPsi through each sample's kernel row to ambient x gradients
    C_zx = stats.czx
    coef = (dF_dPsi1[:, :, None] + 2.0 * np.einsum("kl,lnh->knh", dF_dPsi2, Kzx)) / h
    g_x = np.einsum("knh,ka->nha", coef * C_zx, _gl_flip(Z))

    grads = wrapped.reparam_grads(mu_b, s_b, sample)
    grad_mu = np.einsum("nha,nhab->nb", g_x, grads.dx_dmu) - np.sum(grads.dkl_dmu, axis=1) / h
    grad_s = np.einsum("nha,nhaq->nq", g_x, grads.dx_ds) - np.sum(grads.dkl_ds, axis=1) / h
    grad_log_s = grad_s * state.s

    dlog_sigma = (
        float(np.sum(dF_dPsi1 * psi1))
        + 2.0 * float(np.sum(dF_dPsi2 * psi2))
        + float(np.sum(dF_dKmm * Kmm))
        - 0.5 * beta * d * psi0
    )
    dlog_beta = (
        -0.5 * beta * d * float(np.sum(Ainv * psi2))
        + 0.5 * n * d
        - 0.5 * beta * tr_yy
        + beta**2 * t_quad
        - 0.5 * beta**3 * float(np.sum((T @ T.T) * psi2))
        - 0.5 * beta * d * psi0
        + 0.5 * beta * d * t_nystrom
    )
    return ObjectiveEval(
        value=float(value),
        grad_x=grad_mu,
        dlog_sigma=dlog_sigma,
        dlog_beta=dlog_beta,
        grad_log_s=grad_log_s,
        kl_sum=kl_sum,
        jitter_used=max(jit_m, jit_a),
    )
