"""Command-line contracts: subcommands, artifacts, exit codes."""

import csv
import json

import numpy as np
import pytest

from robust_scatter.cli import (
    SCENARIO_SCHEMA,
    load_scenario_file,
    run_cli,
)
from robust_scatter.exceptions import ConfigError

SMALL_SCENARIO = {
    "schema": SCENARIO_SCHEMA,
    "name": "small",
    "N": 20,
    "n": 100,
    "u": {"kind": "student", "t": 0.1},
    "cov": {"kind": "toeplitz", "rho": 0.5},
    "outliers": {"kind": "gaussian", "cov": {"kind": "identity"}},
    "eps_n": 0.05,
    "seed": 0,
    "trials": 4,
}


def write_scenario(tmp_path, doc=None, name="scen.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc if doc is not None else SMALL_SCENARIO))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------------------
# scenario parsing
# ---------------------------------------------------------------------------

def test_scenario_file_round_trip(tmp_path):
    spec = load_scenario_file(write_scenario(tmp_path))
    assert (spec.N, spec.n, spec.eps_n) == (20, 100, 0.05)
    assert spec.u.kind == "student"


def test_scenario_rejects_unknown_keys(tmp_path):
    doc = dict(SMALL_SCENARIO, extra_knob=1)
    with pytest.raises(ConfigError):
        load_scenario_file(write_scenario(tmp_path, doc))


def test_scenario_rejects_wrong_schema(tmp_path):
    doc = dict(SMALL_SCENARIO, schema="robust-scatter/scenario-v999")
    with pytest.raises(ConfigError):
        load_scenario_file(write_scenario(tmp_path, doc))


def test_scenario_rejects_missing_keys(tmp_path):
    doc = {k: v for k, v in SMALL_SCENARIO.items() if k != "cov"}
    with pytest.raises(ConfigError):
        load_scenario_file(write_scenario(tmp_path, doc))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def test_weights_fig4_prints_expected_values(capsys):
    assert run_cli(["weights", "--scenario", "fig4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["v_gamma"] == pytest.approx(1.00, abs=0.01)
    assert doc["v_alphas"][0] == pytest.approx(0.1219, abs=0.002)
    assert doc["epsilon_zero_limit"]["v_alpha"] == pytest.approx(0.1179,
                                                                 abs=0.002)


def test_weights_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "w"
    assert run_cli(["weights", "--scenario", "fig4",
                    "--out", str(out)]) == 0
    capsys.readouterr()
    assert (out / "weights.json").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["subcommand"] == "weights"
    assert summary["scenario"]["name"] == "fig4"
    assert summary["scenario"]["N"] == 100     # defaults fully resolved


def test_estimate_emits_eigenvalue_csv(tmp_path, capsys):
    scen = write_scenario(tmp_path)
    out = tmp_path / "e"
    assert run_cli(["estimate", "--scenario", scen, "--out", str(out)]) == 0
    capsys.readouterr()
    rows = read_csv(out / "eigenvalues.csv")
    assert rows[0] == ["estimator", "index", "eigenvalue"]
    names = {r[0] for r in rows[1:]}
    assert names == {"scm", "nscm", "oracle", "maronna"}
    assert len(rows) == 1 + 4 * 20
    # locale independence: every value parses with '.' decimals
    for r in rows[1:]:
        float(r[2])


def test_estimate_reads_dataset_file(tmp_path, capsys):
    from robust_scatter.estimators import Dataset, save_dataset_csv
    rng = np.random.default_rng(0)
    d = Dataset(rng.standard_normal((10, 60)), 2)
    data = tmp_path / "data.csv"
    save_dataset_csv(d, data)
    scen = write_scenario(tmp_path)
    out = tmp_path / "e2"
    assert run_cli(["estimate", "--scenario", scen, "--data", str(data),
                    "--out", str(out)]) == 0
    capsys.readouterr()
    rows = read_csv(out / "eigenvalues.csv")
    assert len(rows) == 1 + 4 * 10


def test_density_artifacts(tmp_path, capsys):
    out = tmp_path / "d"
    assert run_cli(["density", "--scenario", "fig4", "--out", str(out),
                    "--grid-points", "80"]) == 0
    capsys.readouterr()
    rows = read_csv(out / "density.csv")
    assert rows[0] == ["x", "density"]
    assert len(rows) == 81
    svg = (out / "density.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg
    summary = json.loads((out / "summary.json").read_text())
    assert summary["grid_points"] == 80


def test_moments_matches_table(tmp_path, capsys):
    out = tmp_path / "m"
    assert run_cli(["moments", "--scenario", "fig5", "--out", str(out)]) == 0
    capsys.readouterr()
    rows = read_csv(out / "moments.csv")
    header, first = rows[0], rows[1]
    assert header[0] == "order"
    robust = float(first[header.index("robust")])
    assert robust == pytest.approx(9.18, rel=0.01)


def test_experiment_fig3_overridden_small(tmp_path, capsys):
    out = tmp_path / "x"
    assert run_cli(["experiment", "--scenario", "fig3", "--N", "20",
                    "--trials", "3", "--out", str(out)]) == 0
    capsys.readouterr()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario"]["trials"] == 3
    assert "ratio_20_80" in summary


def test_override_preserves_aspect_ratio(capsys):
    assert run_cli(["weights", "--scenario", "fig4", "--N", "40"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["v_gamma"] == pytest.approx(1.0, abs=0.01)


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_unknown_scenario_exits_2(capsys):
    assert run_cli(["weights", "--scenario", "nothere"]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_scenario_file_exits_2(tmp_path, capsys):
    doc = dict(SMALL_SCENARIO, bogus=True)
    scen = write_scenario(tmp_path, doc)
    assert run_cli(["weights", "--scenario", scen]) == 2
    capsys.readouterr()


def test_inadmissible_config_exits_2(capsys):
    # t so large that phi_inf >= 1/c
    assert run_cli(["weights", "--scenario", "fig4", "--t", "8.0"]) == 2
    capsys.readouterr()


def test_non_convergence_exits_3(tmp_path, capsys):
    scen = write_scenario(tmp_path)
    assert run_cli(["estimate", "--scenario", scen, "--max-iter", "1"]) == 3
    assert "error:" in capsys.readouterr().err
