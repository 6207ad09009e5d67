import json
import subprocess
import sys

import numpy as np
import pytest

from helmholtzian.cli import main
from helmholtzian.fileio import read_matrix, write_matrix, write_trajectories
from helmholtzian.datasets import strip_trajectories


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def circle(tmp_path_factory):
    d = tmp_path_factory.mktemp("circle")
    assert run("generate", "--kind", "circle", "--n", 200, "--output-dir", d) == 0
    return d


@pytest.fixture(scope="module")
def strip(tmp_path_factory):
    d = tmp_path_factory.mktemp("strip")
    assert run("generate", "--kind", "strip", "--n", 225, "--sampling", "grid", "--output-dir", d) == 0
    return d


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_generate_writes_points_and_manifest(circle):
    X = read_matrix(circle / "points.csv")
    assert X.shape == (200, 2)
    m = manifest(circle)
    assert m["status"] == "ok" and m["config"]["seed"] == 0
    assert set(m["versions"]) >= {"helmholtzian", "numpy", "scipy", "python"}


def test_betti_on_circle(circle, tmp_path):
    assert run("betti", "--input", circle / "points.csv", "--k", 6, "--output-dir", tmp_path) == 0
    res = manifest(tmp_path)["results"]
    assert res["beta1"] == 1 and res["confident"]
    assert len(manifest(tmp_path)["inputs_sha256"]["input"]) == 64


def test_spectrum_and_build(circle, tmp_path):
    assert run("spectrum", "--input", circle / "points.csv", "--k", 4, "--output-dir", tmp_path) == 0
    lines = (tmp_path / "eigenvalues.csv").read_text().splitlines()
    assert lines[0] == "index,eigenvalue,class,residual" and len(lines) == 5
    assert lines[1].split(",")[2] == "harmonic"
    out = tmp_path / "b"
    assert run("build", "--input", circle / "points.csv", "--export-operators", "--output-dir", out) == 0
    for name in ("edges.csv", "triangles.csv", "w0.csv", "w1.csv", "w2.csv", "l1_sym_triplets.csv"):
        assert (out / name).exists()


def test_decompose_and_smooth(strip, tmp_path):
    args = ["--input", strip / "points.csv", "--field", strip / "field.csv", "--output-dir", tmp_path]
    assert run("decompose", *args) == 0
    res = manifest(tmp_path)["results"]
    total = sum(res[f"{n}_energy_fraction"] for n in ("gradient", "curl", "harmonic"))
    assert total == pytest.approx(1.0, abs=1e-8)
    assert run("smooth", *args, "--alpha", 5) == 0
    res = manifest(tmp_path)["results"]
    assert res["norm_out"] < res["norm_in"]


def test_smooth_alpha_zero_reproduces_input(strip, tmp_path):
    a = tmp_path / "a"
    run("decompose", "--input", strip / "points.csv", "--field", strip / "field.csv", "--output-dir", a)
    src = a / "gradient.csv"
    b = tmp_path / "b"
    assert run("smooth", "--input", strip / "points.csv", "--cochain", src, "--alpha", 0, "--output-dir", b) == 0
    assert (b / "smoothed.csv").read_bytes() == src.read_bytes()


def test_ssl_with_fixed_hyperparameters(strip, tmp_path):
    assert run("ssl", "--input", strip / "points.csv", "--field", strip / "field.csv", "--lambda1", 1e-3,
               "--lambda2", 10, "--splits", 3, "--output-dir", tmp_path) == 0
    met = json.loads((tmp_path / "metrics.json").read_text())
    assert set(met) == {"train_ratio", "r2_median", "r2_p5", "r2_p95", "seed"}
    assert met["r2_p5"] <= met["r2_median"] <= met["r2_p95"]


def test_trajectory_without_interpolation(strip, tmp_path):
    T = strip_trajectories(n_traj=3, n_steps=30, seed=0)
    write_trajectories(tmp_path / "t.csv", T)
    assert run("trajectory", "--input", strip / "points.csv", "--trajectories", tmp_path / "t.csv",
               "--no-interpolate", "--output-dir", tmp_path) == 0
    res = manifest(tmp_path)["results"]
    assert res["n_observed"] > 0 and res["n_steps"] + res["n_skipped"] > 0
    assert run("trajectory", "--input", strip / "points.csv", "--trajectories", tmp_path / "t.csv",
               "--lambda1", 1e-3, "--lambda2", 1, "--output-dir", tmp_path / "full") == 0
    assert (tmp_path / "full" / "interpolated.csv").exists()


def test_config_file_and_flag_precedence(circle, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"k": 3, "seed": 7}))
    assert run("spectrum", "--input", circle / "points.csv", "--config", cfg, "--k", 2, "--output-dir", tmp_path) == 0
    c = manifest(tmp_path)["config"]
    assert c["k"] == 2 and c["seed"] == 7
    kv = tmp_path / "c.txt"
    kv.write_text("# comment\nk = 3\n")
    assert run("spectrum", "--input", circle / "points.csv", "--config", kv, "--output-dir", tmp_path) == 0
    assert manifest(tmp_path)["config"]["k"] == 3


@pytest.mark.parametrize("argv, code", [
    (["--k", 0], 2),
    (["--delta", -1], 2),
    (["--a", 0, "--b", 0], 2),
    (["--tol", 0], 2),
])
def test_invalid_options_exit_2(circle, tmp_path, argv, code):
    assert run("spectrum", "--input", circle / "points.csv", *argv, "--output-dir", tmp_path) == code
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["exit_code"] == code and err["error"] == "InputError"


def test_missing_and_malformed_files(tmp_path):
    assert run("betti", "--input", tmp_path / "none.csv", "--output-dir", tmp_path) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,x\n")
    assert run("betti", "--input", bad, "--output-dir", tmp_path) == 4
    cfg = tmp_path / "c.txt"
    cfg.write_text("not a pair\n")
    assert run("betti", "--input", bad, "--config", cfg, "--output-dir", tmp_path) == 4


def test_field_row_mismatch(circle, tmp_path):
    write_matrix(tmp_path / "f.csv", np.zeros((3, 2)))
    assert run("decompose", "--input", circle / "points.csv", "--field", tmp_path / "f.csv",
               "--output-dir", tmp_path) == 2


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "helmholtzian.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()
