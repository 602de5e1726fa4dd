"""Hyperboloid Gaussian-process latent variable models."""

__version__ = "0.1.0"

from . import datasets, geometry, kernels, metrics, objectives, training, wrapped  # noqa: F401
from .kernels import HEKernelParams  # noqa: F401
from .objectives import ModelConfig  # noqa: F401
from .training import TrainConfig, train  # noqa: F401
