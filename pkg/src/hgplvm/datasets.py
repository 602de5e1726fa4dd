"""Deterministic generators for the synthetic binary tree and spiral data.

The binary tree of depth d has 2^d - 1 nodes in heap order (children of
node i are 2i+1 and 2i+2). Node codes are path indicators: bit j of node
i's code is 1 iff node j lies on the root-to-i path, so the hamming
distance between two codes equals the tree-path distance between the
nodes. Samples oscillate the node code by independent bit flips.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class SbtSpec:
    depth: int
    samples_per_node: int = 20
    flip_prob: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.depth < 2:
            raise ValueError("depth must be >= 2")
        if not 0.0 <= self.flip_prob < 0.5:
            raise ValueError("flip_prob must be in [0, 0.5)")
        if self.samples_per_node < 1:
            raise ValueError("samples_per_node must be >= 1")


@dataclass
class Dataset:
    Y: np.ndarray  # (N, D) observations
    labels: np.ndarray  # (N,) integer node / class index
    node_codes: Optional[np.ndarray] = None  # (nodes, D) binary, SBT only
    depth_of_node: Optional[np.ndarray] = None  # (nodes,), root depth = 1

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def d(self):
        return self.Y.shape[1]


def sbt_codes(depth):
    """Path-indicator codes, ((2^d - 1) x (2^d - 1)) in {0, 1}."""
    if depth < 2:
        raise ValueError("depth must be >= 2")
    n_nodes = 2**depth - 1
    codes = np.zeros((n_nodes, n_nodes), dtype=np.uint8)
    for i in range(n_nodes):
        j = i
        while True:
            codes[i, j] = 1
            if j == 0:
                break
            j = (j - 1) // 2
    return codes


def node_depths(depth):
    """Depth of each heap-ordered node, root = 1."""
    idx = np.arange(2**depth - 1)
    return np.floor(np.log2(idx + 1)).astype(int) + 1


def sbt_dataset(spec):
    """Noisy binary-tree samples: each node code with iid bit flips."""
    codes = sbt_codes(spec.depth)
    n_nodes, dim = codes.shape
    rng = np.random.default_rng(spec.seed)
    rows = np.repeat(codes, spec.samples_per_node, axis=0)
    flips = rng.random(rows.shape) < spec.flip_prob
    Y = np.where(flips, 1 - rows, rows).astype(float)
    labels = np.repeat(np.arange(n_nodes), spec.samples_per_node)
    return Dataset(Y=Y, labels=labels, node_codes=codes, depth_of_node=node_depths(spec.depth))


def spiral_dataset(n_spirals=10, points_per_spiral=80, ambient_dim=20, seed=0, angular_rate=3 * np.pi):
    """Planar spirals with norm-proportional noise, mapped linearly to R^D.

    Spiral s at step t: radius r = t / points_per_spiral, angle
    theta = 2 pi s / n_spirals + angular_rate * r, point r [cos, sin] + r eps
    with eps ~ N(0, 0.05^2 I); stacked and multiplied by a random (2, D)
    standard-normal matrix.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(points_per_spiral) / points_per_spiral
    planar = np.zeros((n_spirals * points_per_spiral, 2))
    labels = np.zeros(n_spirals * points_per_spiral, dtype=int)
    for s in range(n_spirals):
        theta = 2 * np.pi * s / n_spirals + angular_rate * t
        block = slice(s * points_per_spiral, (s + 1) * points_per_spiral)
        pts = t[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        noise = t[:, None] * rng.normal(scale=0.05, size=(points_per_spiral, 2))
        planar[block] = pts + noise
        labels[block] = s
    transform = rng.normal(size=(2, ambient_dim))
    return Dataset(Y=planar @ transform, labels=labels)
