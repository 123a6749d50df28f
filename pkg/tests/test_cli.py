import csv

import pytest

from stlw.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_OK, bundled_configs, main

SMALL = """[experiment]
name = small
T = 0.25
x_lo = -1
x_hi = 2
window = -0.5 1.5

[grid]
family = uniform
h = 0.1 0.05 0.025

[model]
name = burgers

[initial]
type = riemann
left = 1
right = 0

[scheme]
name = lax_friedrichs

[reference]
type = burgers_shock

[verify]
battery = default
entropy_a = 0 0.5

[assert]
max_balance = 1e-12
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


@pytest.fixture(scope="module")
def shock_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("shock")
    code = main(["run", "lax_friedrichs_shock", "--out", str(out), "--assert"])
    return code, out


def test_list_names_bundled_configs(capsys):
    assert main(["list"]) == EXIT_OK
    names = capsys.readouterr().out.split()
    assert names == bundled_configs()
    assert {"lax_friedrichs_shock", "counterexample", "broken_flux"} <= set(names)


def test_shock_run_writes_three_rows(shock_run):
    code, out = shock_run
    assert code == EXIT_OK
    with open(out / "lax_friedrichs_shock_convergence.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["h"]) for r in rows] == [0.04, 0.02, 0.01]
    assert list(rows[0]) == ["experiment", "h", "phi_id", "weak_residual", "entropy_a",
                             "entropy_residual", "l1_error", "mass_drift", "rate"]
    l1 = [float(r["l1_error"]) for r in rows]
    assert l1[0] > l1[1] > l1[2]
    for name in ("manifest.txt", "lax_friedrichs_shock_profile.svg",
                 "lax_friedrichs_shock_convergence.svg", "lax_friedrichs_shock_flux_properties.csv"):
        assert (out / name).exists()


def test_counterexample_discriminator(tmp_path, capsys):
    assert main(["run", "counterexample", "--out", str(tmp_path), "--assert"]) == EXIT_OK
    with open(tmp_path / "counterexample_discriminator.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    smooth = [float(r["l1_to_smoothed"]) for r in rows]
    true = [float(r["l1_to_true"]) for r in rows]
    assert all(s < 0.1 for s in smooth) and all(t > 0.5 for t in true)
    assert "PASS" in capsys.readouterr().out


def test_broken_flux_fails_assertions(tmp_path, capsys):
    assert main(["run", "broken_flux", "--out", str(tmp_path), "--assert"]) == EXIT_ASSERT
    out = capsys.readouterr().out
    assert "FAIL max_balance" in out
    assert main(["run", "broken_flux", "--out", str(tmp_path / "b")]) == EXIT_OK


def test_verify_flux_reports_each_condition(tmp_path, capsys):
    assert main(["verify-flux", "lax_friedrichs_shock", "--out", str(tmp_path), "--assert"]) == 0
    out = capsys.readouterr().out
    for k in ("consistency", "conservativeness", "stencil_radius", "boundedness"):
        assert f"PASS {k}" in out
    assert main(["verify-flux", "broken_flux", "--out", str(tmp_path), "--assert"]) == EXIT_ASSERT


def test_grid_dump_and_load(tmp_path, capsys, small_cfg):
    path = tmp_path / "g.stg"
    assert main(["grid", "dump", str(small_cfg), str(path), "--h", "0.1"]) == EXIT_OK
    first = capsys.readouterr().out.splitlines()[0]
    assert main(["grid", "load", str(path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == first
    path.write_text(path.read_text()[:200])
    assert main(["grid", "load", str(path)]) == EXIT_CONFIG
    assert "line" in capsys.readouterr().err


def test_config_error_names_line(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text(SMALL.replace("h = 0.1 0.05 0.025", "h = 0.1 fast"))
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    line = SMALL.splitlines().index("h = 0.1 0.05 0.025") + 1
    assert f"bad.ini:{line}" in err


def test_unknown_config_and_threads(tmp_path, capsys, monkeypatch):
    assert main(["run", "no_such_config"]) == EXIT_CONFIG
    monkeypatch.setenv("STLW_THREADS", "zero")
    assert main(["list"]) == EXIT_CONFIG
    assert "STLW_THREADS" in capsys.readouterr().err


def test_reruns_are_byte_identical(tmp_path, small_cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(small_cfg), "--out", str(a), "--assert"]) == EXIT_OK
    assert main(["run", str(small_cfg), "--out", str(b), "--assert"]) == EXIT_OK
    assert (a / "manifest.txt").read_text() == (b / "manifest.txt").read_text()
    assert len((a / "manifest.txt").read_text().splitlines()) >= 5


def test_unknown_key_names_line(tmp_path, capsys):
    p = tmp_path / "typo.ini"
    p.write_text(SMALL.replace("[model]\n", "[model]\nnmae = x\n"))
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    line = SMALL.splitlines().index("[model]") + 2
    assert f"typo.ini:{line}:1: model.nmae: unknown key" in capsys.readouterr().err
