"""Flat key=value run configuration with dotted section prefixes.

Lines look like ``train.max_iter = 250``; ``#`` starts a comment. Keys are
typed against a fixed schema; unknown or missing required keys are
reported by name.
"""

from __future__ import annotations

from typing import Dict

REQUIRED = object()

# key -> (type, default); REQUIRED means the key must be present
SCHEMA = {
    "dataset.kind": (str, REQUIRED),
    "dataset.depth": (int, 4),
    "dataset.samples_per_node": (int, 20),
    "dataset.flip_prob": (float, 0.1),
    "dataset.seed": (int, 0),
    "dataset.n_spirals": (int, 10),
    "dataset.points_per_spiral": (int, 80),
    "dataset.ambient_dim": (int, 20),
    "model.variant": (str, REQUIRED),
    "model.q": (int, 2),
    "model.m": (int, 50),
    "model.h": (int, 3),
    "model.kappa": (float, 100.0),
    "model.sigma0": (float, 1.0),
    "model.beta0": (float, 1.0),
    "train.max_iter": (int, REQUIRED),
    "train.lr_latent": (float, 0.05),
    "train.lr_hyper": (float, 0.005),
    "train.resample_every": (int, 10),
    "train.variance_freeze_epochs": (int, 100),
    "train.init_scale": (float, 0.001),
    "train.warmup_epochs": (int, 10),
    "metrics.k": (int, 3),
    "metrics.knn_k": (int, 5),
    "output.dir": (str, REQUIRED),
}


class ConfigError(ValueError):
    """Configuration problem; the message names the offending field."""


def parse_config_text(text, overrides=None):
    """Parse config text plus optional ``key=value`` override strings."""
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        raw[key] = value
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        raw[key] = value

    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config field {key!r}")

    config = {}
    for key, (typ, default) in SCHEMA.items():
        if key in raw:
            try:
                config[key] = typ(raw[key])
            except ValueError as exc:
                raise ConfigError(f"field {key!r}: cannot parse {raw[key]!r} as {typ.__name__}") from exc
        elif default is REQUIRED:
            raise ConfigError(f"missing required config field {key!r}")
        else:
            config[key] = default

    if config["dataset.kind"] not in ("sbt", "spiral"):
        raise ConfigError("field 'dataset.kind': expected 'sbt' or 'spiral'")
    if config["model.variant"] not in ("full", "sparse", "bayesian"):
        raise ConfigError("field 'model.variant': expected 'full', 'sparse' or 'bayesian'")
    return config


def load_config(path, overrides=None):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), overrides)
