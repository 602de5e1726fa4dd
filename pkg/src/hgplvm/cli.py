"""Command-line experiment runner.

Subcommands: ``run`` (train a model on a generated dataset and write
embedding/trace/manifest/plot artifacts), ``render`` (Poincare SVG from an
embedding CSV), ``metrics`` (score an embedding CSV against its dataset
config), ``gen-data`` (write the dataset itself as CSV files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, geometry, metrics
from .datasets import SbtSpec, sbt_dataset, spiral_dataset
from .kernels import HEKernelParams
from .objectives import ModelConfig
from .runconfig import ConfigError, load_config
from .svgplot import render_poincare_svg
from .training import TrainConfig, TrainingError, train
from .wrapped import VariationalState

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def build_dataset(config):
    if config["dataset.kind"] == "sbt":
        spec = SbtSpec(
            depth=config["dataset.depth"],
            samples_per_node=config["dataset.samples_per_node"],
            flip_prob=config["dataset.flip_prob"],
            seed=config["dataset.seed"],
        )
        return sbt_dataset(spec)
    return spiral_dataset(
        n_spirals=config["dataset.n_spirals"],
        points_per_spiral=config["dataset.points_per_spiral"],
        ambient_dim=config["dataset.ambient_dim"],
        seed=config["dataset.seed"],
    )


def build_model_config(config):
    return ModelConfig(
        variant=config["model.variant"],
        q=config["model.q"],
        kernel=HEKernelParams(sigma=config["model.sigma0"], kappa=config["model.kappa"]),
        beta=config["model.beta0"],
        m=config["model.m"],
        h=config["model.h"],
    )


def build_train_config(config):
    return TrainConfig(
        max_iter=config["train.max_iter"],
        lr_latent=config["train.lr_latent"],
        lr_hyper=config["train.lr_hyper"],
        resample_every=config["train.resample_every"],
        variance_freeze_epochs=config["train.variance_freeze_epochs"],
        init_scale=config["train.init_scale"],
        warmup_epochs=config["train.warmup_epochs"],
    )


def export_embedding(latent, labels, path):
    """Write the embedding CSV: Lorentz coords, Poincare coords, and the
    variational variances when present. 17 significant digits round-trip
    float64 exactly."""
    if isinstance(latent, VariationalState):
        X, s = latent.mu, latent.s
    else:
        X, s = np.asarray(latent), None
    P = geometry.to_poincare(X)
    q = X.shape[1] - 1
    cols = ["index", "label"]
    cols += [f"x{i}" for i in range(q + 1)]
    cols += [f"p{i}" for i in range(1, q + 1)]
    if s is not None:
        cols += [f"s{i}" for i in range(1, q + 1)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(X.shape[0]):
            row = [str(i), str(int(labels[i]))]
            row += [f"{v:.17g}" for v in X[i]]
            row += [f"{v:.17g}" for v in P[i]]
            if s is not None:
                row += [f"{v:.17g}" for v in s[i]]
            fh.write(",".join(row) + "\n")
    return path


def read_embedding(path):
    """Load an embedding CSV back into arrays (lorentz, poincare, labels, s)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    x_cols = [i for i, c in enumerate(header) if c.startswith("x")]
    p_cols = [i for i, c in enumerate(header) if c.startswith("p")]
    s_cols = [i for i, c in enumerate(header) if c.startswith("s")]
    lab_col = header.index("label")
    X = np.array([[float(r[i]) for i in x_cols] for r in rows])
    P = np.array([[float(r[i]) for i in p_cols] for r in rows])
    labels = np.array([int(r[lab_col]) for r in rows])
    S = np.array([[float(r[i]) for i in s_cols] for r in rows]) if s_cols else None
    return X, P, labels, S


def compute_scores(config, dataset, X, labels):
    """Embedding-quality scores; the distance-correlation reference is the
    node-code hamming distance for tree data, observed rows otherwise."""
    d_lat = metrics.pairwise_distances(X, "hyperbolic")
    if dataset.node_codes is not None:
        ref = metrics.pairwise_distances(dataset.node_codes[labels], "hamming")
    else:
        ref = metrics.pairwise_distances(dataset.Y, "euclidean")
    k = config["metrics.k"]
    return {
        "distance_correlation": metrics.distance_correlation(d_lat, ref),
        "trustworthiness": metrics.trustworthiness(dataset.Y, X, k=k),
        "continuity": metrics.continuity(dataset.Y, X, k=k),
        "shepard_goodness": metrics.shepard_goodness(dataset.Y, X),
        "knn_accuracy": metrics.knn_accuracy(X, labels, k=config["metrics.knn_k"]),
    }


def write_manifest(path, config, seed, status, duration, final_objective, scores, warnings):
    manifest = {
        "config": {k: config[k] for k in sorted(config)},
        "seed": seed,
        "status": status,
        "duration_seconds": duration,
        "final_objective": final_objective,
        "metrics": scores,
        "warnings": list(warnings),
        "version": __version__,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_trace(path, trace):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,objective,log_sigma,log_beta\n")
        for epoch, objective, log_sigma, log_beta in trace:
            fh.write(f"{int(epoch)},{objective:.17g},{log_sigma:.17g},{log_beta:.17g}\n")


class _OutputLock:
    """Guards an output directory against concurrent runs."""

    def __init__(self, outdir):
        self.path = os.path.join(outdir, "run.lock")
        self.fd = None

    def __enter__(self):
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise TrainingError(f"output directory is locked by another run: {self.path}")
        return self

    def __exit__(self, *exc):
        if self.fd is not None:
            os.close(self.fd)
            os.unlink(self.path)
        return False


def cmd_run(args):
    config = load_config(args.config, args.set)
    dataset = build_dataset(config)
    outdir = config["output.dir"]
    os.makedirs(outdir, exist_ok=True)
    started = time.time()
    with _OutputLock(outdir):
        try:
            result = train(dataset.Y, build_model_config(config), build_train_config(config), args.seed)
        except TrainingError as exc:
            write_manifest(
                os.path.join(outdir, "manifest.json"),
                config,
                args.seed,
                status=f"failed: {exc}",
                duration=time.time() - started,
                final_objective=None,
                scores={},
                warnings=[],
            )
            print(f"training aborted: {exc}", file=sys.stderr)
            return EXIT_FAILURE

        emb_path = os.path.join(outdir, "embedding.csv")
        export_embedding(result.state.latent, dataset.labels, emb_path)
        write_trace(os.path.join(outdir, "trace.csv"), result.trace)
        scores = compute_scores(config, dataset, result.state.positions, dataset.labels)
        if config["model.q"] == 2:
            _, P, labels, _ = read_embedding(emb_path)
            render_poincare_svg(P, labels, os.path.join(outdir, "plot.svg"))
        write_manifest(
            os.path.join(outdir, "manifest.json"),
            config,
            args.seed,
            status="ok",
            duration=time.time() - started,
            final_objective=float(result.trace[-1, 1]),
            scores=scores,
            warnings=result.warnings,
        )
    print(f"run complete: {outdir} (distance_correlation={scores['distance_correlation']:.4f})")
    return EXIT_OK


def cmd_render(args):
    colors = None
    if args.colors:
        with open(args.colors, "r", encoding="utf-8") as fh:
            colors = json.load(fh)
    _, P, labels, _ = read_embedding(args.embedding)
    render_poincare_svg(P, labels, args.out, colors=colors)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_metrics(args):
    config = load_config(args.config, args.set)
    dataset = build_dataset(config)
    X, _, labels, _ = read_embedding(args.embedding)
    if X.shape[0] != dataset.n:
        raise ConfigError(
            f"embedding has {X.shape[0]} rows but the configured dataset has {dataset.n}"
        )
    scores = compute_scores(config, dataset, X, labels)
    payload = json.dumps(scores, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(payload + "\n")
    print(payload)
    return EXIT_OK


def cmd_gen_data(args):
    config = load_config(args.config, args.set)
    dataset = build_dataset(config)
    os.makedirs(args.out, exist_ok=True)
    np.savetxt(os.path.join(args.out, "Y.csv"), dataset.Y, delimiter=",", fmt="%.17g")
    np.savetxt(os.path.join(args.out, "labels.csv"), dataset.labels, delimiter=",", fmt="%d")
    if dataset.node_codes is not None:
        np.savetxt(os.path.join(args.out, "codes.csv"), dataset.node_codes, delimiter=",", fmt="%d")
    print(f"wrote dataset ({dataset.n} x {dataset.d}) to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="hgplvm", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train a model and write artifacts")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", required=True, type=int)
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_run.set_defaults(func=cmd_run)

    p_render = sub.add_parser("render", help="render an embedding CSV to SVG")
    p_render.add_argument("--embedding", required=True)
    p_render.add_argument("--out", required=True)
    p_render.add_argument("--colors", help="JSON file mapping label to colour")
    p_render.set_defaults(func=cmd_render)

    p_metrics = sub.add_parser("metrics", help="score an embedding CSV")
    p_metrics.add_argument("--embedding", required=True)
    p_metrics.add_argument("--config", required=True)
    p_metrics.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_metrics.add_argument("--out")
    p_metrics.set_defaults(func=cmd_metrics)

    p_gen = sub.add_parser("gen-data", help="write the configured dataset as CSV")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
