"""End-to-end command-line pipeline."""

import json

import numpy as np
import pytest

from anomspec.cli import main
from anomspec.io import read_labels_csv, read_points_csv


def run(*argv):
    return main(list(argv))


@pytest.fixture()
def pipeline(tmp_path):
    """gen + train once for reuse; returns resolved paths."""
    paths = {
        "data": str(tmp_path / "data.csv"),
        "model": str(tmp_path / "model.txt"),
        "spec": str(tmp_path / "spec.txt"),
        "labels": str(tmp_path / "labels.csv"),
        "depths": str(tmp_path / "depths.csv"),
    }
    assert run("gen", "--exp", "1", "--n", "2000", "--rate", "0.01", "--seed", "7",
               "--out", paths["data"]) == 0
    assert run("train", "--in", paths["data"], "--trees", "40", "--sample", "128",
               "--seed", "3", "--model", paths["model"]) == 0
    return paths


class TestPipeline:
    def test_full_run_and_agreement(self, pipeline, capsys):
        assert run("estimate", "--model", pipeline["model"], "--in", pipeline["data"],
                   "--runs", "1") == 0
        out = capsys.readouterr().out
        fields = dict(l.split("=", 1) for l in out.strip().splitlines())
        cutoff = int(fields["cutoff"])
        assert int(fields["anomaly_count"]) >= 1
        assert fields["confidence"] in ("low", "high")

        assert run("specify", "--model", pipeline["model"], "--cutoff", str(cutoff),
                   "--out", pipeline["spec"]) == 0
        assert run("detect", "--spec", pipeline["spec"], "--in", pipeline["data"],
                   "--out", pipeline["labels"]) == 0
        detect_out = capsys.readouterr().out
        assert "points_per_sec=" in detect_out

        assert run("score", "--model", pipeline["model"], "--in", pipeline["data"],
                   "--out", pipeline["depths"]) == 0
        labels = read_labels_csv(pipeline["labels"])
        depths = np.array(
            [int(l) for l in open(pipeline["depths"]).read().splitlines()[1:]]
        )
        assert np.array_equal(labels, depths <= cutoff)

    def test_eval_against_self_is_perfect(self, pipeline, capsys):
        assert run("eval", "--pred", pipeline["data"], "--truth", pipeline["data"]) == 0
        out = dict(
            l.split("=", 1) for l in capsys.readouterr().out.strip().splitlines()
        )
        assert float(out["precision"]) == 1.0
        assert float(out["recall"]) == 1.0
        assert float(out["f_measure"]) == 1.0

    def test_detect_with_empty_spec_all_zeros(self, pipeline, tmp_path, capsys):
        spec = tmp_path / "empty_spec.txt"
        spec.write_text("dims 1\ncutoff 0\nseed 0\ntrees 1\nsample 2\n")
        out_path = tmp_path / "zeros.csv"
        assert run("detect", "--spec", str(spec), "--in", pipeline["data"],
                   "--out", str(out_path)) == 0
        assert not read_labels_csv(out_path).any()

    def test_estimate_repeated_runs(self, pipeline, capsys):
        assert run("estimate", "--model", pipeline["model"], "--in", pipeline["data"],
                   "--runs", "3") == 0
        out = dict(l.split("=", 1) for l in capsys.readouterr().out.strip().splitlines())
        assert out["runs"] == "3"
        assert len(out["run_counts"].split(",")) == 3

    def test_specify_without_cutoff_uses_range_profile(self, pipeline, capsys):
        assert run("specify", "--model", pipeline["model"], "--out", pipeline["spec"]) == 0
        out = dict(l.split("=", 1) for l in capsys.readouterr().out.strip().splitlines())
        assert int(out["regions"]) >= 0

    def test_manifest_written(self, pipeline, tmp_path, capsys):
        manifest = tmp_path / "manifest.json"
        assert run("score", "--model", pipeline["model"], "--in", pipeline["data"],
                   "--out", pipeline["depths"], "--manifest", str(manifest)) == 0
        data = json.loads(manifest.read_text())
        assert data["subcommand"] == "score"
        assert "score" in data["timings"]
        assert "read" in data["timings"]

    def test_manifest_on_stderr(self, pipeline, capsys):
        assert run("score", "--model", pipeline["model"], "--in", pipeline["data"],
                   "--out", pipeline["depths"]) == 0
        err = capsys.readouterr().err
        assert "manifest: " in err


class TestRangeShape:
    def test_exp1_pipeline_yields_few_ranges(self, tmp_path, capsys):
        # seeded end-to-end run: band data compiles to a handful of ranges
        data, model, spec = (
            str(tmp_path / "d.csv"), str(tmp_path / "m.txt"), str(tmp_path / "s.txt")
        )
        assert run("gen", "--exp", "1", "--n", "5000", "--rate", "0.01",
                   "--seed", "7", "--out", data) == 0
        assert run("train", "--in", data, "--trees", "100", "--sample", "512",
                   "--seed", "7", "--model", model) == 0
        assert run("estimate", "--model", model, "--in", data, "--runs", "1") == 0
        fields = dict(
            l.split("=", 1)
            for l in capsys.readouterr().out.strip().splitlines()
            if "=" in l
        )
        assert run("specify", "--model", model, "--cutoff", fields["cutoff"],
                   "--out", spec) == 0
        region_lines = [
            l for l in open(spec).read().splitlines()
            if l and not l.startswith(("dims", "cutoff", "seed", "trees", "sample", "meta"))
        ]
        assert 2 <= len(region_lines) <= 5


class TestDeterminism:
    def test_reruns_byte_identical(self, tmp_path):
        outputs = []
        for tag in ("one", "two"):
            d = tmp_path / tag
            d.mkdir()
            data, model, spec, labels = (
                str(d / "data.csv"), str(d / "model.txt"),
                str(d / "spec.txt"), str(d / "labels.csv"),
            )
            assert run("gen", "--exp", "3", "--n", "600", "--rate", "0.02",
                       "--seed", "11", "--out", data) == 0
            assert run("train", "--in", data, "--trees", "20", "--sample", "64",
                       "--seed", "5", "--model", model) == 0
            assert run("specify", "--model", model, "--cutoff", "200",
                       "--out", spec) == 0
            assert run("detect", "--spec", spec, "--in", data, "--out", labels) == 0
            outputs.append([open(p, "rb").read() for p in (data, model, spec, labels)])
        assert outputs[0] == outputs[1]


class TestExitCodes:
    def test_usage_error(self):
        assert run("gen", "--exp", "1") == 1  # missing --out
        assert run("nonsense") == 1

    def test_missing_file(self, tmp_path):
        assert run("train", "--in", str(tmp_path / "nope.csv"),
                   "--model", str(tmp_path / "m.txt")) == 2

    def test_malformed_points(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("not a header\n")
        assert run("train", "--in", str(bad), "--model", str(tmp_path / "m.txt")) == 2

    def test_intractable_dims_refused(self, tmp_path):
        data = tmp_path / "d4.csv"
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 1, (80, 4))
        with open(data, "w") as fh:
            fh.write("dims=4\n")
            for row in pts:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        model = str(tmp_path / "m.txt")
        assert run("train", "--in", str(data), "--trees", "2", "--sample", "8",
                   "--model", model) == 0
        assert run("specify", "--model", model, "--cutoff", "5",
                   "--out", str(tmp_path / "s.txt")) == 3
        assert run("specify", "--model", model, "--cutoff", "5", "--force",
                   "--out", str(tmp_path / "s.txt")) == 0

    def test_dims_mismatch_is_data_error(self, pipeline, tmp_path):
        other = tmp_path / "d2.csv"
        other.write_text("dims=2\n0.0,0.0\n1.0,1.0\n")
        assert run("score", "--model", pipeline["model"], "--in", str(other),
                   "--out", str(tmp_path / "x.csv")) == 2


class TestAuxCommands:
    def test_contour_csv_and_pgm(self, tmp_path, capsys):
        data, model = str(tmp_path / "d.csv"), str(tmp_path / "m.txt")
        assert run("gen", "--exp", "3", "--n", "500", "--rate", "0.02",
                   "--seed", "2", "--out", data) == 0
        assert run("train", "--in", data, "--trees", "10", "--sample", "64",
                   "--seed", "2", "--model", model) == 0
        csv_out = tmp_path / "c.csv"
        pgm_out = tmp_path / "c.pgm"
        assert run("contour", "--model", model, "--in", data, "--w", "30",
                   "--h", "20", "--out", str(csv_out)) == 0
        rows = csv_out.read_text().splitlines()
        assert len(rows) == 20
        assert all(len(r.split(",")) == 30 for r in rows)
        assert run("contour", "--model", model, "--in", data, "--w", "30",
                   "--h", "20", "--out", str(pgm_out)) == 0
        assert pgm_out.read_bytes().startswith(b"P5\n30 20\n255\n")

    def test_knn_output(self, tmp_path, capsys):
        data = str(tmp_path / "d.csv")
        assert run("gen", "--exp", "3", "--n", "300", "--rate", "0.02",
                   "--seed", "4", "--out", data) == 0
        out = tmp_path / "knn.csv"
        assert run("knn", "--in", data, "--max-k", "20", "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "score,argmax_k"
        assert len(lines) == 301
        score, argmax_k = lines[1].split(",")
        assert float(score) >= 0.0  # plain decimal, full precision
        assert 1 <= int(argmax_k) <= 20

    def test_selfcheck(self, tmp_path, capsys):
        data = str(tmp_path / "d.csv")
        assert run("gen", "--exp", "1", "--n", "800", "--rate", "0.02",
                   "--seed", "5", "--out", data) == 0
        capsys.readouterr()
        assert run("selfcheck", "--in", data, "--seeds", "1,2",
                   "--trees", "20", "--sample", "64") == 0
        out = dict(
            l.split("=", 1)
            for l in capsys.readouterr().out.strip().splitlines()
            if "=" in l
        )
        assert "spearman_rho" in out
        assert "precision" in out

    def test_ppm_input_to_train_and_score(self, tmp_path):
        rng = np.random.default_rng(6)
        img = rng.integers(0, 256, (20, 20, 3)).astype(np.uint8)
        ppm = tmp_path / "img.ppm"
        ppm.write_bytes(b"P6\n20 20\n255\n" + img.tobytes())
        model = str(tmp_path / "m.txt")
        assert run("train", "--in", str(ppm), "--trees", "5", "--sample", "32",
                   "--seed", "1", "--model", model) == 0
        assert run("score", "--model", model, "--in", str(ppm),
                   "--out", str(tmp_path / "s.csv")) == 0
