"""Riemannian gradient-ascent training loop.

Each epoch: evaluate the objective and its gradients, move every latent
point (or variational mean) by projecting the ambient row gradient into the
tangent space and wrapping the scaled step with the exponential map, then
ascend the log-space hyperparameters. Inducing positions are refreshed by
resampling from the current latents instead of gradient updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np
from threadpoolctl import threadpool_limits

from . import geometry, wrapped
from .kernels import HEKernelParams
from .objectives import (
    ConditioningError,
    ModelConfig,
    objective_bayesian,
    objective_full,
    objective_sparse,
)


class TrainingError(RuntimeError):
    """Raised when training cannot continue (NaN objective, conditioning)."""


@dataclass
class TrainConfig:
    max_iter: int
    lr_latent: float = 0.05
    lr_hyper: float = 0.005
    resample_every: int = 10
    variance_freeze_epochs: int = 100
    init_scale: float = 1e-3
    warmup_epochs: int = 10

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.lr_latent <= 0 or self.lr_hyper <= 0:
            raise ValueError("learning rates must be positive")
        if self.resample_every < 1:
            raise ValueError("resample_every must be >= 1")


@dataclass
class TrainState:
    """Everything the loop mutates; latent is (N, Q+1) points for the point
    variants and a VariationalState for the Bayesian one."""

    latent: Union[np.ndarray, wrapped.VariationalState]
    Z: Optional[np.ndarray]
    log_sigma: float
    log_beta: float
    epoch: int
    rng_seed: int

    @property
    def positions(self):
        """Latent point positions (variational means for Bayesian)."""
        if isinstance(self.latent, wrapped.VariationalState):
            return self.latent.mu
        return self.latent


@dataclass
class TrainResult:
    state: TrainState
    trace: np.ndarray  # (epochs, 4): epoch, objective, log_sigma, log_beta
    warnings: List[str] = field(default_factory=list)


def riemannian_step(x, ambient_grad, alpha):
    """One ascent step: flip the time component (g_l^-1), project, wrap.

    x: (..., Q+1) points, ambient_grad matching rows. Rows with non-finite
    gradients are left unchanged; returns (new_points, rejected_mask).
    """
    x = np.asarray(x, dtype=float)
    g = np.array(ambient_grad, dtype=float, copy=True)
    bad = ~np.all(np.isfinite(g), axis=-1)
    g[bad] = 0.0
    g[..., 0] = -g[..., 0]
    step = geometry.proj_tangent(x, g)
    out = geometry.exp_map(x, alpha * step)
    out = np.where(bad[..., None], x, out)
    return out, bad


def init_latent(n, q, seed, scale=1e-3):
    """Spatial coordinates ~ U(-scale, scale) per axis, lifted onto L^Q."""
    if n < 1:
        raise ValueError("need at least one point")
    rng = np.random.default_rng(seed)
    return geometry.lift(rng.uniform(-scale, scale, size=(n, q)))


def resample_inducing(positions, m, rng):
    """Snapshot M distinct latent positions via a seeded shuffle."""
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    if m > n:
        raise ValueError(f"cannot sample {m} inducing points from {n} latents")
    idx = rng.permutation(n)[:m]
    return positions[idx].copy()


def _init_variances(n, q, rng):
    # variance parameters start near 1e-5; strictly positive by construction
    return 1e-5 * (1.0 + rng.uniform(0.0, 1e-2, size=(n, q)))


def train(Y, config, tconfig, seed):
    """Run the full loop; a pure function of (Y, configs, seed).

    BLAS pools are pinned to one thread for the duration: the loop
    interleaves many small factorizations with elementwise work, where
    spinning BLAS workers cause large slowdowns, and a fixed thread count
    keeps reductions bit-reproducible.
    """
    with threadpool_limits(limits=1):
        return _train_loop(Y, config, tconfig, seed)


def _train_loop(Y, config, tconfig, seed):
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    q = config.q
    ss = np.random.SeedSequence(seed)
    init_ss, resample_ss, zeta_ss = ss.spawn(3)
    resample_rng = np.random.default_rng(resample_ss)
    zeta_rng = np.random.default_rng(zeta_ss)

    X = init_latent(n, q, init_ss, scale=tconfig.init_scale)
    if config.variant == "bayesian":
        latent = wrapped.VariationalState(mu=X, s=_init_variances(n, q, np.random.default_rng(init_ss.spawn(1)[0])))
    else:
        latent = X

    state = TrainState(
        latent=latent,
        Z=None,
        log_sigma=float(np.log(config.kernel.sigma)),
        log_beta=float(np.log(config.beta)),
        epoch=0,
        rng_seed=seed,
    )
    if config.variant in ("sparse", "bayesian"):
        state.Z = resample_inducing(state.positions, config.m, resample_rng)

    trace = np.zeros((tconfig.max_iter, 4))
    warnings: List[str] = []

    for epoch in range(tconfig.max_iter):
        lr = tconfig.lr_latent * min(1.0, (epoch + 1) / tconfig.warmup_epochs)
        kern = HEKernelParams(float(np.exp(state.log_sigma)), config.kernel.kappa)
        cfg = ModelConfig(
            variant=config.variant,
            q=q,
            kernel=kern,
            beta=float(np.exp(state.log_beta)),
            m=config.m,
            h=config.h,
        )
        try:
            if config.variant == "full":
                ev = objective_full(Y, state.latent, cfg)
            elif config.variant == "sparse":
                ev = objective_sparse(Y, state.latent, state.Z, cfg)
            else:
                zeta = zeta_rng.normal(size=(n, config.h, q))
                ev = objective_bayesian(Y, state.latent, state.Z, zeta, cfg)
        except ConditioningError as exc:
            raise TrainingError(f"covariance factorization failed at epoch {epoch}: {exc}") from exc

        if not np.isfinite(ev.value):
            raise TrainingError(f"objective became non-finite at epoch {epoch}")
        trace[epoch] = (epoch, ev.value, state.log_sigma, state.log_beta)

        new_pos, rejected = riemannian_step(state.positions, ev.grad_x, lr)
        if np.any(rejected):
            warnings.append(
                f"epoch {epoch}: rejected non-finite gradient for {int(rejected.sum())} point(s)"
            )
        if config.variant == "bayesian":
            s = state.latent.s
            if epoch >= tconfig.variance_freeze_epochs:
                gs = ev.grad_log_s
                if np.all(np.isfinite(gs)):
                    s = np.exp(np.log(s) + tconfig.lr_hyper * gs)
                else:
                    warnings.append(f"epoch {epoch}: skipped non-finite variance gradient")
            state.latent = wrapped.VariationalState(mu=new_pos, s=s)
        else:
            state.latent = new_pos

        # hyperparameter gradients are sums over all N*D residual terms;
        # normalize so lr_hyper means a per-datum log-space rate
        hyper_scale = tconfig.lr_hyper / (n * Y.shape[1])
        if np.isfinite(ev.dlog_sigma):
            state.log_sigma += hyper_scale * ev.dlog_sigma
        else:
            warnings.append(f"epoch {epoch}: skipped non-finite sigma gradient")
        if np.isfinite(ev.dlog_beta):
            state.log_beta += hyper_scale * ev.dlog_beta
        else:
            warnings.append(f"epoch {epoch}: skipped non-finite beta gradient")

        state.epoch = epoch + 1
        if config.variant in ("sparse", "bayesian") and (epoch + 1) % tconfig.resample_every == 0:
            geometry.check_point(state.positions)
            state.Z = resample_inducing(state.positions, config.m, resample_rng)

    geometry.check_point(state.positions)
    return TrainResult(state=state, trace=trace, warnings=warnings)
