import numpy as np
import pytest

from hgplvm import geometry
from hgplvm.kernels import HEKernelParams, gram, grad_coeff, kernel_eval, kernel_grad_point, variance_grad


def spatial_grad_fd(params, x, y, step=1e-6):
    """Central differences of k(lift(x~), y) along the Q free spatial coords."""
    xs = np.array(x[1:], dtype=float)
    out = np.zeros_like(xs)
    for q in range(xs.size):
        hi = xs.copy()
        lo = xs.copy()
        hi[q] += step
        lo[q] -= step
        out[q] = (kernel_eval(params, geometry.lift(hi), y) - kernel_eval(params, geometry.lift(lo), y)) / (
            2 * step
        )
    return out


def compose_with_lift(ambient_grad, x):
    """Fold the ambient gradient through dx_0/dx_q = x_q / x_0."""
    return ambient_grad[1:] + ambient_grad[0] * x[1:] / x[0]


class TestKernelEval:
    def test_self_value_is_sigma(self):
        p = HEKernelParams(sigma=2.5, kappa=3.0)
        x = geometry.lift([0.3, -0.7])
        assert kernel_eval(p, x, x) == pytest.approx(2.5)

    def test_hand_value_at_log2_distance(self):
        p = HEKernelParams(sigma=1.0, kappa=1.0)
        t = np.log(2.0)
        x = geometry.origin(2)
        y = np.array([np.cosh(t), np.sinh(t), 0.0])
        assert kernel_eval(p, x, y) == pytest.approx(0.5, rel=1e-12)

    def test_large_lengthscale_limit(self):
        p = HEKernelParams(sigma=1.7, kappa=1e12)
        rng = np.random.default_rng(0)
        x, y = geometry.lift(rng.normal(size=(2, 2)))
        assert kernel_eval(p, x, y) == pytest.approx(1.7, rel=1e-9)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            HEKernelParams(sigma=0.0, kappa=1.0)
        with pytest.raises(ValueError):
            HEKernelParams(sigma=1.0, kappa=-2.0)


class TestGram:
    def test_single_point(self):
        p = HEKernelParams(sigma=0.8, kappa=2.0)
        K = gram(p, geometry.origin(2)[None, :])
        np.testing.assert_allclose(K, [[0.8]])

    def test_transpose_symmetry(self):
        p = HEKernelParams(sigma=1.0, kappa=5.0)
        rng = np.random.default_rng(1)
        A = geometry.lift(rng.normal(size=(4, 2)))
        B = geometry.lift(rng.normal(size=(6, 2)))
        np.testing.assert_allclose(gram(p, A, B), gram(p, B, A).T, rtol=1e-14)

    def test_empty_rejected(self):
        p = HEKernelParams(sigma=1.0, kappa=1.0)
        with pytest.raises(ValueError):
            gram(p, np.zeros((0, 3)))

    @pytest.mark.parametrize("kappa", [10.0, 100.0])
    @pytest.mark.parametrize("seed", range(10))
    def test_positive_definite_200_points(self, kappa, seed):
        p = HEKernelParams(sigma=1.3, kappa=kappa)
        rng = np.random.default_rng(seed)
        X = geometry.lift(rng.normal(size=(200, 2)) * 2.0)
        K = gram(p, X)
        eigmin = np.linalg.eigvalsh(K)[0]
        assert eigmin >= -1e-8 * p.sigma

    def test_entries_in_range_and_unit_diag(self):
        p = HEKernelParams(sigma=2.0, kappa=7.0)
        rng = np.random.default_rng(2)
        X = geometry.lift(rng.normal(size=(30, 2)))
        K = gram(p, X)
        assert np.all(K > 0) and np.all(K <= p.sigma + 1e-15)
        np.testing.assert_allclose(np.diag(K), p.sigma)

    def test_euclidean_limit_small_points(self):
        p = HEKernelParams(sigma=1.0, kappa=0.5)
        rng = np.random.default_rng(3)
        a = rng.uniform(-1e-3, 1e-3, size=(50, 2))
        K = gram(p, geometry.lift(a))
        D_e = np.linalg.norm(a[:, None, :] - a[None, :, :], axis=-1)
        K_e = p.sigma * np.exp(-D_e / p.kappa)
        assert np.max(np.abs(K - K_e)) <= 1e-6 * p.sigma


class TestKernelGradPoint:
    def test_zero_at_coincidence(self):
        p = HEKernelParams(sigma=1.0, kappa=1.0)
        x = geometry.lift([0.2, 0.4])
        np.testing.assert_array_equal(kernel_grad_point(p, x, x), np.zeros(3))

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        p = HEKernelParams(sigma=rng.uniform(0.5, 2.0), kappa=rng.uniform(0.5, 20.0))
        x, y = geometry.lift(rng.normal(size=(2, 2)))
        analytic = compose_with_lift(kernel_grad_point(p, x, y), x)
        fd = spatial_grad_fd(p, x, y)
        assert np.max(np.abs(analytic - fd)) <= 1e-5 * max(np.max(np.abs(fd)), 1e-12)

    def test_chain_rule_magnitude(self):
        # |grad| = k/kappa * |dd/dx| with dd/dx the ambient distance gradient
        p = HEKernelParams(sigma=1.4, kappa=3.0)
        rng = np.random.default_rng(99)
        x, y = geometry.lift(rng.normal(size=(2, 2)))
        g = kernel_grad_point(p, x, y)
        k = kernel_eval(p, x, y)
        z = -geometry.lorentz_inner(x, y)
        dd_dx = np.concatenate([[-y[0]], y[1:]]) / np.sqrt(z * z - 1.0)
        np.testing.assert_allclose(g, -(k / p.kappa) * -dd_dx, rtol=1e-10)
        np.testing.assert_allclose(np.linalg.norm(g), k / p.kappa * np.linalg.norm(dd_dx), rtol=1e-10)

    def test_grad_coeff_matches_pointwise(self):
        p = HEKernelParams(sigma=1.0, kappa=2.0)
        rng = np.random.default_rng(4)
        A = geometry.lift(rng.normal(size=(3, 2)))
        B = geometry.lift(rng.normal(size=(5, 2)))
        C = grad_coeff(p, A, B)
        for i in range(3):
            for j in range(5):
                g = kernel_grad_point(p, B[j], A[i])
                gl_a = np.concatenate([[-A[i, 0]], A[i, 1:]])
                np.testing.assert_allclose(g, C[i, j] * gl_a, rtol=1e-12, atol=1e-15)


class TestVarianceGrad:
    def test_zero_sensitivity(self):
        p = HEKernelParams(sigma=1.0, kappa=1.0)
        assert variance_grad(p, np.zeros((3, 3)), np.eye(3)) == 0.0

    def test_identity_trace(self):
        p = HEKernelParams(sigma=2.0, kappa=1.0)
        n = 5
        assert variance_grad(p, np.eye(n), p.sigma * np.eye(n)) == pytest.approx(n)

    def test_shape_mismatch(self):
        p = HEKernelParams(sigma=1.0, kappa=1.0)
        with pytest.raises(ValueError):
            variance_grad(p, np.zeros((2, 3)), np.zeros((3, 2)))

    def test_matches_fd_of_weighted_sum(self):
        # d/dlog(sigma) sum(dF_dK * K(sigma)) for fixed dF_dK equals
        # sigma * variance_grad since every gram entry is proportional to sigma
        rng = np.random.default_rng(5)
        X = geometry.lift(rng.normal(size=(6, 2)))
        W = rng.normal(size=(6, 6))
        sigma = 1.3

        def f(log_sigma):
            K = gram(HEKernelParams(sigma=np.exp(log_sigma), kappa=2.0), X)
            return np.sum(W * K)

        h = 1e-6
        fd = (f(np.log(sigma) + h) - f(np.log(sigma) - h)) / (2 * h)
        p = HEKernelParams(sigma=sigma, kappa=2.0)
        analytic = sigma * variance_grad(p, W, gram(p, X))
        assert analytic == pytest.approx(fd, rel=1e-4)
