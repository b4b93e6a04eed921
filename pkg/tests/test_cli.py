"""Command-line interface: exit codes, file formats, reproducibility."""
import csv
import json

import numpy as np
import pytest

from scoregof.cli import main, read_sample
from scoregof.exceptions import DomainError


@pytest.fixture
def data(tmp_path):
    path = tmp_path / "data.csv"
    np.savetxt(path, np.random.default_rng(1).normal(size=60))
    return path


def run(argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


TEST_ARGS = ["test", "--null", "gaussian", "--stat", "cvm", "--boot", "parametric", "--B", "499", "--alpha", "0.05",
             "--seed", "7"]


def test_test_subcommand(data, tmp_path):
    out = tmp_path / "result.json"
    assert run(TEST_ARGS + ["--in", data, "--out", out]) == 0
    result = json.loads(out.read_text())
    assert list(result) == ["statistic", "p_value", "critical_value", "alpha", "B", "scheme", "n", "seed", "null",
                            "family", "diagnostics"]
    assert result["seed"] == 7 and result["B"] == 499 and result["n"] == 60


def test_byte_identical(data, tmp_path):
    run(TEST_ARGS + ["--in", data, "--out", tmp_path / "a.json"])
    run(TEST_ARGS + ["--in", data, "--out", tmp_path / "b.json"])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_constant_column(tmp_path, capsys):
    path = tmp_path / "constant.csv"
    path.write_text("x\n3\n3\n3\n3\n")
    assert run(TEST_ARGS + ["--in", path, "--out", tmp_path / "r.json"]) == 3
    assert "sigma_hat" in capsys.readouterr().err


def test_missing_seed(data, tmp_path):
    assert run(["test", "--null", "gaussian", "--stat", "cvm", "--in", data, "--out", tmp_path / "r.json"]) == 2


def test_unknown_flag(data, tmp_path):
    assert run(TEST_ARGS + ["--in", data, "--out", tmp_path / "r.json", "--colour", "red"]) == 2


def test_malformed_csv(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1.0\n2.0\nabc\n")
    assert run(TEST_ARGS + ["--in", path, "--out", tmp_path / "r.json"]) == 3
    assert "line 3 field 1" in capsys.readouterr().err


def test_read_sample_formats(tmp_path):
    p = tmp_path / "pairs.csv"
    p.write_text("u,v\n0.1,0.2\n0.3,0.4\n")
    assert read_sample(p).shape == (2, 2)
    p.write_text("0.1,0.2\n0.3\n")
    with pytest.raises(DomainError, match="line 2"):
        read_sample(p)
    p.write_text("header\n")
    with pytest.raises(DomainError, match="no data"):
        read_sample(p)


def test_bivariate_and_family_flags(tmp_path):
    path = tmp_path / "pairs.csv"
    np.savetxt(path, np.random.default_rng(2).uniform(size=(40, 2)), delimiter=",")
    out = tmp_path / "r.json"
    argv = ["test", "--null", "independence", "--stat", "sup", "--family", "rank-indicator", "--family-param", "m=4",
            "--boot", "m-out-of-n", "--B", "99", "--seed", "3", "--in", path, "--out", out]
    assert run(argv) == 0
    result = json.loads(out.read_text())
    assert result["family"]["kind"] == "rank-indicator"
    assert result["diagnostics"]["m"] == 12


def test_calibrate(data, tmp_path):
    out, reps = tmp_path / "cal.json", tmp_path / "reps.csv"
    argv = ["calibrate", "--null", "gaussian", "--stat", "ks", "--B", "99", "--seed", "4", "--in", data,
            "--out", out, "--replicates", reps]
    assert run(argv) == 0
    result = json.loads(out.read_text())
    assert len(result["replicates"]) == 99
    assert reps.read_text().startswith("# statistic=ks")


SIZE_TOML = """
n = 30
R = 100
alpha = 0.05
null = {name = "gaussian"}
statistic = {name = "cvm"}
scheme = {name = "parametric", B = 19}
"""


def test_size_and_power(tmp_path):
    cfg = tmp_path / "study.toml"
    cfg.write_text(SIZE_TOML)
    out = tmp_path / "size.csv"
    assert run(["size", "--config", cfg, "--seed", "5", "--out", out]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["n", "t", "stat", "rate", "se", "seed"]
    assert len(rows) == 2 and rows[1][5] == "5"
    cfg.write_text(SIZE_TOML + 't_grid = [0, 1]\nalternative = {name = "local", base = {name = "gaussian-mixture", '
                                'eps = 0.0, delta = 1.0}}\n')
    assert run(["power", "--config", cfg, "--seed", "5", "--out", tmp_path / "p.json", "--format", "json"]) == 0
    report = json.loads((tmp_path / "p.json").read_text())
    assert report["config"]["seed"] == 5
    assert len(report["rows"]) == 2
    assert report["rows"][0][3] == float(rows[1][3])


def test_drift_and_equivalence(tmp_path):
    cfg = tmp_path / "drift.toml"
    cfg.write_text('n = 100\nR = 100\nnull = {name = "gaussian"}\nfamily = {kind = "exp-mixture", grid = [1.0]}\n'
                   'alternative = {name = "local", base = {name = "gaussian-mixture", eps = 0.0, delta = 1.0}}\n')
    assert run(["drift", "--config", cfg, "--seed", "1", "--out", tmp_path / "d.csv"]) == 0
    assert (tmp_path / "d.csv").read_text().startswith("n,t,gamma,predicted,mean,se,within,seed")
    cfg = tmp_path / "eq.json"
    cfg.write_text(json.dumps({"null": {"name": "gaussian"}, "n": [20, 40], "R": 100}))
    assert run(["equivalence", "--config", cfg, "--seed", "1", "--out", tmp_path / "e.csv"]) == 0
    assert len((tmp_path / "e.csv").read_text().splitlines()) == 3


def test_bad_config(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("n = [\n")
    assert run(["size", "--config", cfg, "--seed", "1", "--out", tmp_path / "x.csv"]) == 2
    cfg.write_text('R = 100\nnull = {name = "gaussian"}\nstatistic = {name = "cvm"}\nbogus = 1\n')
    assert run(["size", "--config", cfg, "--seed", "1", "--out", tmp_path / "x.csv"]) == 2
    cfg.write_text('R = 50\nnull = {name = "gaussian"}\nstatistic = {name = "cvm"}\n')
    assert run(["size", "--config", cfg, "--seed", "1", "--out", tmp_path / "x.csv"]) == 3
