import json
from pathlib import Path

import numpy as np
import pytest

from maxent import cli, harness
from maxent.oracles import ORACLES, compute, oracle_freeze, render
from maxent.qmc import SURROGATE_VECTOR, default_vector_path

FIXTURES = Path(__file__).parent / "fixtures"

SMALL = """
[model]
kind = "deconvolution"

[sampling]
sampler = ["mc", "lattice_plain"]
m_grid = [4, 8]
realizations = 2
seed = 1

[entropy]
method = "gauss_lattice"
n_rule = "fixed"
n = 512
"""


def test_run_writes_per_sampler(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL)
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    for s in ("mc", "lattice_plain"):
        lines = (tmp_path / "o" / s / "convergence.csv").read_text().splitlines()
        assert len(lines) == 3
        summary = json.loads((tmp_path / "o" / s / "summary.json").read_text())
        assert summary["config"]["sampler"] == s
    assert "slope" in capsys.readouterr().out


@pytest.mark.parametrize("text", ["[model]\nkind = 'heat'\n",
                                  "[sampling]\nrealizations = 1\n",
                                  "[sampling]\nm_grid = [4, 12]\n"])
def test_run_bad_config_exit_2(tmp_path, text):
    cfg = tmp_path / "c.toml"
    cfg.write_text(text)
    assert cli.main(["run", "--config", str(cfg)]) == 2


def test_run_missing_config_exit_2(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "missing.toml")]) == 2


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL)

    def boom(c, m, p):
        raise FloatingPointError("surrogate entropy diverged")

    monkeypatch.setattr(harness, "realization", boom)
    monkeypatch.setenv("MAXENT_THREADS", "1")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_entropy_json(capsys):
    assert cli.main(["entropy", "--model", "deconv", "--sampler", "mc", "-M", "16",
                     "-N", "1024", "--seed", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"value", "std_error", "M", "N", "method"}
    assert out["M"] == 16 and out["N"] == 1024 and out["method"] == "gauss_lattice"
    assert 35 < out["value"] < 50


def test_entropy_mc_method(capsys):
    assert cli.main(["entropy", "--model", "elliptic", "--mesh", "8", "--kl-terms", "6",
                     "--sampler", "tent", "-M", "8", "-N", "256", "--seed", "0",
                     "--method", "mc"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["std_error"] > 0


def test_entropy_bad_counts():
    assert cli.main(["entropy", "--model", "deconv", "--sampler", "mc", "-M", "0",
                     "-N", "16", "--seed", "0"]) == 2


def test_vectors_check(tmp_path, capsys):
    assert cli.main(["vectors", "check", str(default_vector_path(SURROGATE_VECTOR)), "--dim", "8"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["dim"] == 8 and info["all_odd"]
    even = tmp_path / "even.txt"
    even.write_text("1\n4\n7\n")
    assert cli.main(["vectors", "check", str(even)]) == 2


def test_unknown_oracle():
    assert cli.main(["oracle", "--name", "nope"]) == 2
    with pytest.raises(KeyError):
        compute("nope")


@pytest.mark.parametrize("name", sorted(set(ORACLES) - {"elliptic_ref_n256"}))
def test_fixtures_regenerate_bitwise(name, tmp_path):
    path = oracle_freeze(name, tmp_path)
    assert path.read_bytes() == (FIXTURES / f"{name}.txt").read_bytes()


@pytest.mark.slow
def test_fine_mesh_fixture_regenerates():
    values, config = compute("elliptic_ref_n256")
    assert render("elliptic_ref_n256", values, config) == \
        (FIXTURES / "elliptic_ref_n256.txt").read_text()


def test_fixture_format():
    text = (FIXTURES / "mobius_gauss_norm.txt").read_text().splitlines()
    assert text[0] == "# oracle: mobius_gauss_norm"
    assert text[-1] == "1.00000000000"
    assert np.isclose(float(text[-1]), 1.0)
