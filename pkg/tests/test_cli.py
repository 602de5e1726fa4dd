import json
import os

import numpy as np
import pytest

from hgplvm import geometry
from hgplvm.cli import export_embedding, main, read_embedding
from hgplvm.runconfig import ConfigError, parse_config_text
from hgplvm.svgplot import render_poincare_svg
from hgplvm.wrapped import VariationalState

BASE_CONFIG = """
# smoke-test configuration
dataset.kind = sbt
dataset.depth = 3
dataset.samples_per_node = 5
dataset.seed = 1
model.variant = full
model.kappa = 100.0
train.max_iter = 8
output.dir = {outdir}
"""


def write_config(tmp_path, outdir, extra=""):
    path = tmp_path / "run.cfg"
    path.write_text(BASE_CONFIG.format(outdir=outdir) + extra, encoding="utf-8")
    return str(path)


class TestConfigParsing:
    def test_defaults_and_comments(self):
        cfg = parse_config_text(
            "dataset.kind = sbt  # tree data\nmodel.variant=full\n\n"
            "train.max_iter = 5\noutput.dir = out\n"
        )
        assert cfg["dataset.depth"] == 4
        assert cfg["train.lr_latent"] == 0.05
        assert cfg["train.max_iter"] == 5

    def test_missing_required_field_named(self):
        with pytest.raises(ConfigError, match="output.dir"):
            parse_config_text("dataset.kind = sbt\nmodel.variant = full\ntrain.max_iter = 5\n")

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="model.gamma"):
            parse_config_text("model.gamma = 2\n")

    def test_type_errors_named(self):
        with pytest.raises(ConfigError, match="train.max_iter"):
            parse_config_text(
                "dataset.kind = sbt\nmodel.variant = full\ntrain.max_iter = soon\noutput.dir = o\n"
            )

    def test_overrides_win(self):
        cfg = parse_config_text(
            "dataset.kind = sbt\nmodel.variant = full\ntrain.max_iter = 5\noutput.dir = o\n",
            overrides=["train.max_iter=9", "model.kappa=10"],
        )
        assert cfg["train.max_iter"] == 9
        assert cfg["model.kappa"] == 10.0


class TestEmbeddingRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        X = geometry.lift(rng.normal(size=(20, 2)))
        labels = rng.integers(0, 4, size=20)
        path = str(tmp_path / "emb.csv")
        export_embedding(X, labels, path)
        X2, P2, labels2, S2 = read_embedding(path)
        np.testing.assert_array_equal(X, X2)
        np.testing.assert_array_equal(labels, labels2)
        assert S2 is None
        assert np.all(np.linalg.norm(P2, axis=1) < 1.0)

    def test_variational_state_adds_s_columns(self, tmp_path):
        rng = np.random.default_rng(1)
        state = VariationalState(
            mu=geometry.lift(rng.normal(size=(6, 2))), s=rng.uniform(0.1, 1.0, size=(6, 2))
        )
        path = str(tmp_path / "emb.csv")
        export_embedding(state, np.zeros(6, dtype=int), path)
        header = open(path, encoding="utf-8").readline().strip().split(",")
        assert header == ["index", "label", "x0", "x1", "x2", "p1", "p2", "s1", "s2"]
        X2, _, _, S2 = read_embedding(path)
        np.testing.assert_array_equal(S2, state.s)

    def test_origin_row_has_zero_poincare(self, tmp_path):
        X = geometry.origin(2)[None, :]
        path = str(tmp_path / "emb.csv")
        export_embedding(X, [0], path)
        _, P, _, _ = read_embedding(path)
        np.testing.assert_array_equal(P, [[0.0, 0.0]])


class TestSvgRendering:
    def test_element_count_and_containment(self, tmp_path):
        pts = np.array([[0.0, 0.0], [0.5, 0.1], [-0.2, -0.6]])
        path = str(tmp_path / "plot.svg")
        render_poincare_svg(pts, [0, 1, 1], path)
        text = open(path, encoding="utf-8").read()
        assert text.count('class="pt"') == 3
        assert text.count("<circle") == 4  # boundary + three marks

    def test_identical_bytes(self, tmp_path):
        pts = np.array([[0.1, 0.2], [0.3, -0.4]])
        a = str(tmp_path / "a.svg")
        b = str(tmp_path / "b.svg")
        render_poincare_svg(pts, [0, 1], a)
        render_poincare_svg(pts, [0, 1], b)
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_rejects_higher_dimensions(self, tmp_path):
        with pytest.raises(ValueError):
            render_poincare_svg(np.zeros((3, 3)), [0, 1, 2], str(tmp_path / "x.svg"))

    def test_rejects_points_outside_disk(self, tmp_path):
        with pytest.raises(ValueError):
            render_poincare_svg(np.array([[1.2, 0.0]]), [0], str(tmp_path / "x.svg"))


class TestRunCommand:
    def test_artifacts_and_row_count(self, tmp_path):
        outdir = str(tmp_path / "out")
        cfg = write_config(tmp_path, outdir)
        assert main(["run", "--config", cfg, "--seed", "7"]) == 0
        for name in ("embedding.csv", "trace.csv", "manifest.json", "plot.svg"):
            assert os.path.exists(os.path.join(outdir, name)), name
        X, _, labels, _ = read_embedding(os.path.join(outdir, "embedding.csv"))
        assert X.shape == (35, 3)  # 7 nodes x 5 samples, Q+1 coords
        manifest = json.load(open(os.path.join(outdir, "manifest.json"), encoding="utf-8"))
        assert manifest["status"] == "ok"
        assert manifest["seed"] == 7
        assert set(manifest["metrics"]) >= {"distance_correlation", "trustworthiness"}
        trace = open(os.path.join(outdir, "trace.csv"), encoding="utf-8").read().splitlines()
        assert trace[0] == "epoch,objective,log_sigma,log_beta"
        assert len(trace) == 1 + 8

    def test_byte_identical_reruns(self, tmp_path):
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        cfg_a = write_config(tmp_path, out_a)
        assert main(["run", "--config", cfg_a, "--seed", "3"]) == 0
        cfg_b = write_config(tmp_path, out_b)
        assert main(["run", "--config", cfg_b, "--seed", "3"]) == 0
        for name in ("embedding.csv", "trace.csv", "plot.svg"):
            a = open(os.path.join(out_a, name), "rb").read()
            b = open(os.path.join(out_b, name), "rb").read()
            assert a == b, name

    def test_missing_field_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("dataset.kind = sbt\nmodel.variant = full\noutput.dir = o\n")
        assert main(["run", "--config", str(path), "--seed", "1"]) == 2
        assert "train.max_iter" in capsys.readouterr().err

    def test_bayesian_run_exports_s(self, tmp_path):
        outdir = str(tmp_path / "bayes")
        cfg = write_config(
            tmp_path,
            outdir,
            extra="model.variant = bayesian\nmodel.m = 6\nmodel.h = 2\n",
        )
        assert main(["run", "--config", cfg, "--seed", "1", "--set", "model.variant=bayesian"]) == 0
        header = open(os.path.join(outdir, "embedding.csv"), encoding="utf-8").readline()
        assert ",s1,s2" in header


class TestOtherCommands:
    def test_render_and_metrics(self, tmp_path):
        outdir = str(tmp_path / "out")
        cfg = write_config(tmp_path, outdir)
        assert main(["run", "--config", cfg, "--seed", "2"]) == 0
        emb = os.path.join(outdir, "embedding.csv")

        svg = str(tmp_path / "re.svg")
        assert main(["render", "--embedding", emb, "--out", svg]) == 0
        assert open(svg, encoding="utf-8").read().count('class="pt"') == 35

        out_json = str(tmp_path / "scores.json")
        assert main(["metrics", "--embedding", emb, "--config", cfg, "--out", out_json]) == 0
        scores = json.load(open(out_json, encoding="utf-8"))
        manifest = json.load(open(os.path.join(outdir, "manifest.json"), encoding="utf-8"))
        assert scores == pytest.approx(manifest["metrics"])

    def test_gen_data(self, tmp_path):
        outdir = str(tmp_path / "data")
        cfg = write_config(tmp_path, str(tmp_path / "unused"))
        assert main(["gen-data", "--config", cfg, "--out", outdir]) == 0
        Y = np.loadtxt(os.path.join(outdir, "Y.csv"), delimiter=",")
        codes = np.loadtxt(os.path.join(outdir, "codes.csv"), delimiter=",")
        assert Y.shape == (35, 7)
        assert codes.shape == (7, 7)

    def test_render_rejects_q3(self, tmp_path):
        # build a 3-d embedding file by hand
        rng = np.random.default_rng(0)
        X = geometry.lift(rng.normal(size=(4, 3)))
        path = str(tmp_path / "emb3.csv")
        export_embedding(X, [0, 1, 2, 3], path)
        assert main(["render", "--embedding", path, "--out", str(tmp_path / "x.svg")]) == 1
