"""Exact arithmetic on the Lorentz model of hyperbolic space.

Points live on the upper hyperboloid in R^{Q+1}: <x,x>_L = -1, x_0 > 0,
with the Lorentzian inner product <a,b>_L = -a_0 b_0 + sum_{q>=1} a_q b_q.
All functions accept a single vector (Q+1,) or a stack (..., Q+1) and
vectorize over leading axes.
"""

from __future__ import annotations

import numpy as np

# |<x,x>_L + 1| tolerance for points produced here
POINT_ATOL = 1e-9
# |<base,vec>_L| tolerance for tangency
TANGENT_ATOL = 1e-8


def lorentz_inner(a, b):
    """Lorentzian inner product -a_0 b_0 + sum_{q>=1} a_q b_q.

    a, b: (..., Q+1), broadcastable. Returns (...,) scalar(s).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] < 2 or a.shape[-1] != b.shape[-1]:
        raise ValueError(
            f"lorentz_inner needs equal last dims >= 2, got {a.shape[-1]} and {b.shape[-1]}"
        )
    return np.sum(a[..., 1:] * b[..., 1:], axis=-1) - a[..., 0] * b[..., 0]


def pairwise_lorentz_inner(A, B):
    """All-pairs Lorentzian inner products.

    A: (N, Q+1), B: (M, Q+1). Returns (N, M) with entry <A[i], B[j]>_L.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[-1] != B.shape[-1]:
        raise ValueError("pairwise_lorentz_inner: dimension mismatch")
    return A[:, 1:] @ B[:, 1:].T - np.outer(A[:, 0], B[:, 0])


def lorentz_norm(v):
    """Lorentz norm sqrt(<v,v>_L) of tangent vectors; clamps tiny negatives."""
    sq = lorentz_inner(v, v)
    return np.sqrt(np.maximum(sq, 0.0))


def lift(spatial):
    """Map spatial coordinates onto the hyperboloid: x_0 = sqrt(1 + |x~|^2).

    spatial: (..., Q). Returns (..., Q+1).
    """
    spatial = np.asarray(spatial, dtype=float)
    if not np.all(np.isfinite(spatial)):
        raise ValueError("lift: non-finite input")
    x0 = np.sqrt(1.0 + np.sum(spatial**2, axis=-1, keepdims=True))
    return np.concatenate([x0, spatial], axis=-1)


def origin(q):
    """The hyperboloid origin mu_0 = [1, 0, ..., 0] in R^{q+1}."""
    mu0 = np.zeros(q + 1)
    mu0[0] = 1.0
    return mu0


def check_point(x, atol=POINT_ATOL):
    """Raise unless x satisfies the hyperboloid invariants."""
    x = np.asarray(x, dtype=float)
    sq = lorentz_inner(x, x)
    if np.any(np.abs(sq + 1.0) > atol):
        raise ValueError(f"point off hyperboloid: |<x,x>_L + 1| = {np.max(np.abs(sq + 1.0)):.3e}")
    if np.any(x[..., 0] <= 0):
        raise ValueError("point on lower sheet: x_0 <= 0")
    x0_re = np.sqrt(1.0 + np.sum(x[..., 1:] ** 2, axis=-1))
    if np.any(np.abs(x[..., 0] - x0_re) > atol):
        raise ValueError("x_0 inconsistent with spatial coordinates")
    return x


def check_tangent(base, vec, atol=TANGENT_ATOL):
    """Raise unless vec is Lorentz-orthogonal to base with <v,v>_L >= 0."""
    ip = lorentz_inner(base, vec)
    if np.any(np.abs(ip) > atol):
        raise ValueError(f"vector not tangent at base: |<mu,v>_L| = {np.max(np.abs(ip)):.3e}")
    sq = lorentz_inner(vec, vec)
    if np.any(sq < -atol):
        raise ValueError("tangent vector with negative Lorentz square norm")
    return vec


def _relift(x):
    """Recompute x_0 from the spatial part; controls constraint drift."""
    out = np.array(x, dtype=float, copy=True)
    out[..., 0] = np.sqrt(1.0 + np.sum(out[..., 1:] ** 2, axis=-1))
    return out


def sinhc(r):
    """sinh(r)/r with a 4-term Taylor series below r = 1e-4."""
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-4
    rs = np.where(small, 0.0, r)
    r2 = r * r
    series = 1.0 + r2 / 6.0 + r2 * r2 / 120.0 + r2 * r2 * r2 / 5040.0
    with np.errstate(invalid="ignore", divide="ignore"):
        exact = np.where(small, 1.0, np.sinh(rs) / np.where(small, 1.0, rs))
    return np.where(small, series, exact)


def neg_inner_minus_one(x, y):
    """-<x,y>_L - 1 for hyperboloid points, elementwise with broadcasting.

    Uses the identity -<x,y>_L - 1 = (|x~ - y~|^2 - (x_0 - y_0)^2) / 2,
    which avoids the cancellation that makes the direct inner product lose
    absolute accuracy ~eps/d for nearby points. Clamped to >= 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    w = 0.5 * (np.sum(d[..., 1:] ** 2, axis=-1) - d[..., 0] ** 2)
    return np.maximum(w, 0.0)


def pairwise_neg_inner_minus_one(A, B=None):
    """All-pairs -<a,b>_L - 1 via the cancellation-free difference form."""
    from scipy.spatial.distance import cdist

    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = A if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    sq_spatial = cdist(A[:, 1:], B[:, 1:], "sqeuclidean")
    dt = A[:, 0:1] - B[:, 0][None, :]
    return np.maximum(0.5 * (sq_spatial - dt * dt), 0.0)


def arccosh1p(w):
    """acosh(1 + w) for w >= 0 without rounding w into 1 + w."""
    w = np.asarray(w, dtype=float)
    return np.log1p(w + np.sqrt(w * (w + 2.0)))


def distance(x, y):
    """Geodesic length acosh(-<x,y>_L); argument clamped to >= 1."""
    return arccosh1p(neg_inner_minus_one(x, y))


def pairwise_distance(A, B=None):
    """All-pairs geodesic distances; (N, M) for A (N, Q+1), B (M, Q+1)."""
    return arccosh1p(pairwise_neg_inner_minus_one(A, B))


def exp_map(mu, v):
    """Wrap tangent v at mu onto the hyperboloid along the geodesic.

    cosh(|v|_L) mu + sinh(|v|_L) v / |v|_L, with the series limit mu + v
    for |v|_L < 1e-6. x_0 is recomputed afterwards.
    """
    mu = np.asarray(mu, dtype=float)
    v = np.asarray(v, dtype=float)
    r = lorentz_norm(v)[..., None]
    tiny = r < 1e-6
    # cosh(r)*mu + sinhc(r)*v covers both branches; sinhc handles r -> 0
    out = np.cosh(np.where(tiny, 0.0, r)) * mu + sinhc(r[..., 0])[..., None] * v
    out = np.where(tiny, mu + v, out)
    return _relift(out)


def proj_tangent(mu, g):
    """Project ambient g onto the tangent space at mu: g + <mu,g>_L mu."""
    mu = np.asarray(mu, dtype=float)
    g = np.asarray(g, dtype=float)
    return g + lorentz_inner(mu, g)[..., None] * mu


def parallel_transport(nu, mu, v):
    """Carry tangent v from nu to mu along the connecting geodesic.

    Uses v + <mu - a*nu, v>_L / (a + 1) * (nu + mu) with a = -<nu,mu>_L >= 1,
    which is the identity at nu = mu and preserves the Lorentz norm.
    Near-coincident base points short-circuit to the identity.
    """
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    v = np.asarray(v, dtype=float)
    a = -lorentz_inner(nu, mu)
    coef = lorentz_inner(mu - a[..., None] * nu, v) / (a + 1.0)
    out = v + coef[..., None] * (nu + mu)
    same = np.abs(a - 1.0) < 1e-12
    return np.where(same[..., None], v, out)


def to_poincare(x):
    """Diffeomorphism onto the Poincare ball: [x_1..x_Q] / (1 + x_0)."""
    x = np.asarray(x, dtype=float)
    return x[..., 1:] / (1.0 + x[..., 0:1])
