"""Wrapped Gaussian distributions on the Lorentz model.

Sampling chain: zeta ~ N(0, I_Q)  ->  v~ = S^{1/2} zeta  ->  v = [0, v~]
-> u = PT_{mu_0 -> mu}(v)  ->  x = Exp_mu(u). The density follows from the
change of variables of this chain,

    log N^w(x | mu, S) = log N(v~ | 0, S) - (Q-1) log(sinh(r)/r),  r = |u|_L.

All functions are vectorized; batch axes of ``mu``/``s`` and ``zeta`` are
aligned by broadcasting, with the convention that the trailing batch axis of
a sample is the Monte-Carlo axis H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry

LOG_2PI = float(np.log(2.0 * np.pi))


def _g1(r):
    """(r cosh r - sinh r) / r^3, series below 1e-4 (limit 1/3)."""
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-4
    rs = np.where(small, 1.0, r)
    r2 = r * r
    series = 1.0 / 3.0 + r2 / 30.0 + r2 * r2 / 840.0
    with np.errstate(over="ignore"):
        exact = (rs * np.cosh(rs) - np.sinh(rs)) / rs**3
    return np.where(small, series, exact)


def _h1(r):
    """(coth r - 1/r) / r, series below 1e-4 (limit 1/3)."""
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-4
    rs = np.where(small, 1.0, r)
    r2 = r * r
    series = 1.0 / 3.0 - r2 / 45.0 + 2.0 * r2 * r2 / 945.0
    exact = (1.0 / np.tanh(rs) - 1.0 / rs) / rs
    return np.where(small, series, exact)


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("variational variances must be strictly positive")
    return s


@dataclass
class VariationalState:
    """Per-datum wrapped-Gaussian parameters: means on L^Q, diagonal variances.

    mu: (..., Q+1) hyperboloid points; s: (..., Q) positive variances.
    """

    mu: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.s = _check_s(self.s)
        geometry.check_point(self.mu)
        if self.mu.shape[:-1] != self.s.shape[:-1] or self.mu.shape[-1] != self.s.shape[-1] + 1:
            raise ValueError(f"inconsistent shapes mu {self.mu.shape}, s {self.s.shape}")


@dataclass
class ReparamSample:
    """Cached sampling chain: zeta (..., Q), v/u/x (..., Q+1).

    v has zero time component; u is tangent at mu; x = Exp_mu(u) exactly.
    """

    zeta: np.ndarray
    v: np.ndarray
    u: np.ndarray
    x: np.ndarray


def transport_from_origin(mu, vt):
    """PT_{mu_0 -> mu}([0, v~]) in closed form: u_0 = mu~.v~, u~ = v~ + c mu~.

    mu: (..., Q+1), vt: (..., Q). Returns u: (..., Q+1).
    """
    mu = np.asarray(mu, dtype=float)
    vt = np.asarray(vt, dtype=float)
    c = np.sum(mu[..., 1:] * vt, axis=-1, keepdims=True) / (mu[..., 0:1] + 1.0)
    u0 = np.sum(mu[..., 1:] * vt, axis=-1, keepdims=True)
    ut = vt + c * mu[..., 1:]
    return np.concatenate([u0, ut], axis=-1)


def wg_sample(mu, s, zeta):
    """Deterministic reparameterized draw for standard-normal zeta (..., Q)."""
    mu = np.asarray(mu, dtype=float)
    s = _check_s(s)
    zeta = np.asarray(zeta, dtype=float)
    vt = np.sqrt(s) * zeta
    v = np.concatenate([np.zeros_like(vt[..., :1]), vt], axis=-1)
    u = transport_from_origin(mu, vt)
    x = geometry.exp_map(mu, u)
    # present one batch shape to consumers regardless of input broadcasting
    batch = np.broadcast_shapes(zeta.shape[:-1], u.shape[:-1])
    return ReparamSample(
        zeta=np.ascontiguousarray(np.broadcast_to(zeta, batch + zeta.shape[-1:])),
        v=np.ascontiguousarray(np.broadcast_to(v, batch + v.shape[-1:])),
        u=np.ascontiguousarray(np.broadcast_to(u, batch + u.shape[-1:])),
        x=np.ascontiguousarray(np.broadcast_to(x, batch + x.shape[-1:])),
    )


def _invert_chain(mu, x):
    """Recover (v~, r) such that x = Exp_mu(PT_{mu_0->mu}([0, v~])), r = |v~|."""
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    w = geometry.neg_inner_minus_one(mu, x)
    d = geometry.arccosh1p(w)
    # u = Log_mu(x) = (x - (1+w) mu) / sinhc(d); zero where x == mu
    u = (x - (1.0 + w)[..., None] * mu) / geometry.sinhc(d)[..., None]
    v = geometry.parallel_transport(mu, geometry.origin(mu.shape[-1] - 1), u)
    return v[..., 1:], d


def wg_log_density(mu, s, x, sample=None):
    """Log density of the wrapped Gaussian N^w(x | mu, S).

    With a cached ``sample`` (whose x equals the argument) the chain is not
    inverted; otherwise the log-map preimage is recovered from x.
    """
    mu = np.asarray(mu, dtype=float)
    s = _check_s(s)
    q = s.shape[-1]
    if sample is not None:
        vt = sample.v[..., 1:]
        r = geometry.lorentz_norm(sample.u)
    else:
        vt, r = _invert_chain(mu, x)
    quad = np.sum(vt * vt / s, axis=-1)
    log_normal = -0.5 * q * LOG_2PI - 0.5 * np.sum(np.log(s), axis=-1) - 0.5 * quad
    return log_normal - (q - 1) * np.log(geometry.sinhc(r))


def log_prior(x):
    """Log density of N^w(. | mu_0, I): a function of rho = d(mu_0, x) only."""
    x = np.asarray(x, dtype=float)
    q = x.shape[-1] - 1
    w = _prior_w(x)
    rho = geometry.arccosh1p(w)
    return -0.5 * q * LOG_2PI - 0.5 * rho * rho - (q - 1) * np.log(geometry.sinhc(rho))


def _prior_w(x):
    """-<mu_0, x>_L - 1 via the cancellation-free difference form."""
    x0m1 = x[..., 0] - 1.0
    return np.maximum(0.5 * (np.sum(x[..., 1:] ** 2, axis=-1) - x0m1 * x0m1), 0.0)


def log_prior_xgrad(x):
    """Ambient gradient of log_prior w.r.t. the Q+1 coordinates of x."""
    x = np.asarray(x, dtype=float)
    q = x.shape[-1] - 1
    w = _prior_w(x)
    rho = geometry.arccosh1p(w)
    # d log_prior / dw = [-rho - (q-1)(coth rho - 1/rho)] / sinh(rho)
    small = rho < 1e-4
    rr = np.where(small, 1.0, rho)
    series = -(1.0 + (q - 1) / 3.0) + rho * rho * (
        (1.0 + (q - 1) / 3.0) / 6.0 + (q - 1) / 45.0
    )
    exact = -(rr + (q - 1) * (1.0 / np.tanh(rr) - 1.0 / rr)) / np.sinh(rr)
    g_w = np.where(small, series, exact)
    grad = np.empty_like(x)
    grad[..., 0] = g_w * -(x[..., 0] - 1.0)
    grad[..., 1:] = g_w[..., None] * x[..., 1:]
    return grad


def kl_mc(mu, s, sample):
    """Monte-Carlo KL[q || p], p = N^w(. | mu_0, I), averaged over the
    trailing sample axis H (the plain per-sample sums are divided by H)."""
    if sample.x.ndim < 2 or sample.x.shape[-2] == 0:
        raise ValueError("kl_mc needs at least one sample along the MC axis")
    mu = np.asarray(mu, dtype=float)
    log_q = wg_log_density(mu[..., None, :], np.asarray(s)[..., None, :], sample.x, sample=sample)
    log_p = log_prior(sample.x)
    return np.mean(log_q - log_p, axis=-1)


@dataclass
class ReparamGrads:
    """Ambient Jacobians of the sampling chain and per-sample KL gradients.

    dx_dmu: (..., Q+1, Q+1) with [a, b] = dx_a / dmu_b; dx_ds: (..., Q+1, Q);
    dkl_dmu: (..., Q+1); dkl_ds: (..., Q). KL rows refer to the integrand
    log q - log p evaluated per sample.
    """

    dx_dmu: np.ndarray
    dx_ds: np.ndarray
    dkl_dmu: np.ndarray
    dkl_ds: np.ndarray


def reparam_grads(mu, s, sample):
    """Differentiate the frozen-zeta sampling chain w.r.t. mu (ambient) and s.

    mu: (..., Q+1) and s: (..., Q) broadcast against the sample batch shape.
    Central finite differences of the chain are the ground truth.
    """
    zeta = sample.zeta
    batch = zeta.shape[:-1]
    q = zeta.shape[-1]
    dim = q + 1
    mu = np.broadcast_to(np.asarray(mu, dtype=float), batch + (dim,))
    s = np.broadcast_to(_check_s(s), batch + (q,))

    vt = sample.v[..., 1:]
    u = sample.u
    m0 = mu[..., 0]
    mt = mu[..., 1:]
    den = m0 + 1.0
    c = np.sum(mt * vt, axis=-1) / den
    wvec = mu.copy()
    wvec[..., 0] += 1.0  # mu_0 + mu

    r = geometry.lorentz_norm(u)
    shc = geometry.sinhc(r)
    g1 = _g1(r)
    h1 = _h1(r)
    cosh_r = np.cosh(r)
    glu = u.copy()
    glu[..., 0] = -glu[..., 0]  # g_l u, so glu . w = <u, w>_L

    # du/dmu: column 0 and spatial columns
    du_dmu = np.zeros(batch + (dim, dim))
    du_dmu[..., :, 0] = -(c / den)[..., None] * wvec
    du_dmu[..., 0, 0] += c
    du_dmu[..., :, 1:] += (vt / den[..., None])[..., None, :] * wvec[..., :, None]
    idx = np.arange(1, dim)
    du_dmu[..., idx, idx] += c[..., None]

    # du/ds_q = (vt_q / 2 s_q) * (e_{q+1} + mt_q/den * w)
    coef = vt / (2.0 * s)
    du_ds = coef[..., None, :] * (mt / den[..., None])[..., None, :] * wvec[..., :, None]
    du_ds[..., idx, idx - 1] += coef

    ip_mu = np.einsum("...a,...ab->...b", glu, du_dmu)
    ip_s = np.einsum("...a,...aq->...q", glu, du_ds)

    def chain(du, ip):
        out = (
            shc[..., None, None] * ip[..., None, :] * mu[..., :, None]
            + g1[..., None, None] * ip[..., None, :] * u[..., :, None]
            + shc[..., None, None] * du
        )
        return out

    dx_dmu = chain(du_dmu, ip_mu)
    di = np.arange(dim)
    dx_dmu[..., di, di] += cosh_r[..., None]
    dx_ds = chain(du_ds, ip_s)

    # exp_map recomputes x_0 from the spatial part, so the chain's time row
    # is determined by the spatial rows: dx_0 = (x~ / x_0) . dx~
    xt_over_x0 = sample.x[..., 1:] / sample.x[..., 0:1]
    dx_dmu[..., 0, :] = np.einsum("...q,...qb->...b", xt_over_x0, dx_dmu[..., 1:, :])
    dx_ds[..., 0, :] = np.einsum("...q,...qk->...k", xt_over_x0, dx_ds[..., 1:, :])

    # KL integrand gradients: d(log q)/dtheta - grad_x(log p) . dx/dtheta
    lp_grad = log_prior_xgrad(sample.x)
    corr = (q - 1) * h1
    dlogq_dmu = -corr[..., None] * ip_mu
    dlogq_ds = -0.5 / s - corr[..., None] * ip_s
    dkl_dmu = dlogq_dmu - np.einsum("...a,...ab->...b", lp_grad, dx_dmu)
    dkl_ds = dlogq_ds - np.einsum("...a,...aq->...q", lp_grad, dx_ds)
    return ReparamGrads(dx_dmu=dx_dmu, dx_ds=dx_ds, dkl_dmu=dkl_dmu, dkl_ds=dkl_ds)
