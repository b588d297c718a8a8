"""End-to-end CLI: config validation, exit codes, outputs, determinism."""

import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gapeig import cli

GOLDEN_1D = os.path.join(os.path.dirname(__file__), "..", "configs", "benchmark1d.json")

SMALL_CFG = {
    "lattice": {"d": 1, "b": 6.283185307179586},
    "potential": [
        {"amplitude": 1.0, "kind": "cos", "wavevector": 1},
        {"amplitude": 3.0, "kind": "sin", "wavevector": 2, "phase": 1.0},
    ],
    "perturbation": [
        {"coefficient": -1.0, "factors": [[2.0, 2]], "center": [0.0], "sigma": 1.0}
    ],
    "gap": {"J": 1, "M_pw": 16, "M_q": 32},
    "bands": {"M_pw": 8, "M_q": 8, "J_max": 3},
    "supercell": {"window": "gap.json", "L": 5, "ratio": 16},
    "galerkin": {
        "window": "gap.json",
        "n_c": 50,
        "n_half": 5,
        "t": 0.5,
        "reference": [-1.0451627964356383, -0.6541194618386763],
    },
    "pollution-scan": {
        "window": "gap.json",
        "n_c": 50,
        "n_half": [5, 6],
        "t": 0.5,
        "reference": [-1.0451627964356383, -0.6541194618386763],
    },
    "dislocation": {"window": "gap.json", "kind": "halfline+", "t": 0.5, "n_periods": 20, "n_c": 50},
    "augment": {
        "window": "gap.json",
        "n_c": 40,
        "M_q": 16,
        "L": [8],
        "t": [0.0],
        "reference": [-1.0451627964356383, -0.6541194618386763],
    },
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def read_summary(out):
    with open(os.path.join(str(out), "summary.json")) as f:
        return json.load(f)


def test_gap_and_dependents(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_CFG)
    out = str(tmp_path / "out")
    assert cli.main(["gap", "--config", cfg, "--out", out]) == 0
    with open(os.path.join(out, "gap.json")) as f:
        gap = json.load(f)
    assert gap["alpha"] == pytest.approx(-1.1442549, abs=1e-3)
    assert gap["beta"] == pytest.approx(-0.6450826, abs=1e-3)
    s = read_summary(out)
    assert s["method"] == "gap"
    assert "wall_time_s" in s

    # supercell resolves its window from the gap file just written
    assert cli.main(["supercell", "--config", cfg, "--out", out]) == 0
    with open(os.path.join(out, "supercell.csv")) as f:
        rows = list(csv.DictReader(f))
    assert rows and set(rows[0]) == {"L", "N", "t", "eigenvalue", "class"}
    interior = [float(r["eigenvalue"]) for r in rows if r["class"] == "interior"]
    assert len(interior) == 2

    assert cli.main(["galerkin", "--config", cfg, "--out", out]) == 0
    with open(os.path.join(out, "galerkin.csv")) as f:
        rows = list(csv.DictReader(f))
    classes = {r["class"] for r in rows}
    assert "true" in classes and "spurious" in classes

    assert cli.main(["dislocation", "--config", cfg, "--out", out]) == 0
    s = read_summary(out)
    assert s["results"]["runs"][0]["kind"] == "halfline+"

    assert cli.main(["augment", "--config", cfg, "--out", out]) == 0
    with open(os.path.join(out, "augment_report.json")) as f:
        rep = json.load(f)
    assert rep["idempotency_residual"] <= 1e-6
    assert rep["a2_estimate"] > 0

    assert cli.main(["pollution-scan", "--config", cfg, "--out", out]) == 0
    s = read_summary(out)
    assert s["results"]["n_runs"] == 2
    assert s["results"]["runs_with_spurious"] == 2


def test_bands_csv(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_CFG)
    out = str(tmp_path / "out")
    assert cli.main(["bands", "--config", cfg, "--out", out]) == 0
    with open(os.path.join(out, "bands.csv")) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 8 * 3
    assert set(rows[0]) == {"q1", "band", "epsilon"}


def test_golden_1d_gap(tmp_path):
    out = str(tmp_path / "out")
    assert cli.main(["gap", "--config", GOLDEN_1D, "--out", out]) == 0
    with open(os.path.join(out, "gap.json")) as f:
        gap = json.load(f)
    assert gap["alpha"] == pytest.approx(-1.15, abs=0.02)
    assert gap["beta"] == pytest.approx(-0.65, abs=0.02)
    assert gap["M_pw"] == 32 and gap["M_q"] == 64


def test_determinism(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_CFG)
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert cli.main(["gap", "--config", cfg, "--out", out]) == 0
        assert cli.main(["supercell", "--config", cfg, "--out", out]) == 0
        outs.append(out)
    for fname in ("gap.json", "supercell.csv"):
        a = open(os.path.join(outs[0], fname), "rb").read()
        b = open(os.path.join(outs[1], fname), "rb").read()
        assert a == b
    sa = read_summary(outs[0])
    sb = read_summary(outs[1])
    sa.pop("wall_time_s")
    sb.pop("wall_time_s")
    assert sa == sb


def test_threads_flag_same_output(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_CFG)
    outs = []
    for name, threads in (("t1", "1"), ("t2", "2")):
        out = str(tmp_path / name)
        assert cli.main(["gap", "--config", cfg, "--out", out, "--threads", threads]) == 0
        outs.append(out)
    a = open(os.path.join(outs[0], "gap.json"), "rb").read()
    b = open(os.path.join(outs[1], "gap.json"), "rb").read()
    assert a == b


def test_malformed_json_exit2_no_outputs(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"lattice": {')
    out = str(tmp_path / "out")
    assert cli.main(["gap", "--config", str(p), "--out", out]) == 2
    assert not os.path.exists(out)
    assert "config error" in capsys.readouterr().err


def test_unknown_key_exit2(tmp_path):
    cfg = dict(SMALL_CFG)
    cfg["surprise"] = 1
    p = write_cfg(tmp_path, cfg)
    assert cli.main(["gap", "--config", p, "--out", str(tmp_path / "out")]) == 2


def test_unknown_section_key_exit2(tmp_path):
    cfg = json.loads(json.dumps(SMALL_CFG))
    cfg["gap"]["M_quux"] = 3
    p = write_cfg(tmp_path, cfg)
    assert cli.main(["gap", "--config", p, "--out", str(tmp_path / "out")]) == 2


def test_missing_section_exit2(tmp_path):
    cfg = {"lattice": {"d": 1, "b": 6.28}}
    p = write_cfg(tmp_path, cfg)
    assert cli.main(["supercell", "--config", p, "--out", str(tmp_path / "out")]) == 2


def test_missing_window_file_exit2(tmp_path):
    cfg = json.loads(json.dumps(SMALL_CFG))
    p = write_cfg(tmp_path, cfg)
    out = str(tmp_path / "out")
    # no gap run first: the referenced window file does not exist
    assert cli.main(["supercell", "--config", p, "--out", out]) == 2
    assert not os.path.exists(os.path.join(out, "supercell.csv"))


def test_numerical_error_exit3_with_name(tmp_path):
    cfg = {"lattice": {"d": 1, "b": 6.283185307179586}}
    p = write_cfg(tmp_path, cfg)
    out = str(tmp_path / "out")
    assert cli.main(["gap", "--config", p, "--out", out]) == 3
    s = read_summary(out)
    assert s["error"] == "NoGap"
    assert "results" not in s


def test_budget_error_exit3(tmp_path):
    cfg = json.loads(json.dumps(SMALL_CFG))
    cfg["supercell"]["window"] = [-1.144, -0.645]
    cfg["supercell"]["max_planewaves"] = 10
    p = write_cfg(tmp_path, cfg)
    out = str(tmp_path / "out")
    assert cli.main(["supercell", "--config", p, "--out", out]) == 3
    assert read_summary(out)["error"] == "BasisTooLarge"


def test_explicit_window_accepted(tmp_path):
    cfg = json.loads(json.dumps(SMALL_CFG))
    cfg["supercell"]["window"] = [-1.1442549263927626, -0.6450826051490102]
    p = write_cfg(tmp_path, cfg)
    out = str(tmp_path / "out")
    assert cli.main(["supercell", "--config", p, "--out", out]) == 0
    s = read_summary(out)
    assert len(s["results"]["runs"][0]["interior"]) == 2


def test_bad_window_order_exit2(tmp_path):
    cfg = json.loads(json.dumps(SMALL_CFG))
    cfg["supercell"]["window"] = [1.0, -1.0]
    p = write_cfg(tmp_path, cfg)
    assert cli.main(["supercell", "--config", p, "--out", str(tmp_path / "out")]) == 2


def test_console_entry_point(tmp_path):
    # exit code and stderr flow through the installed script path
    cfg = write_cfg(tmp_path, {"lattice": {"d": 1, "b": 6.283185307179586}})
    proc = subprocess.run(
        [sys.executable, "-m", "gapeig.cli", "gap", "--config", cfg, "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 3
    assert "NoGap" in proc.stderr


def test_csv_floats_roundtrip(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_CFG)
    out = str(tmp_path / "out")
    assert cli.main(["gap", "--config", cfg, "--out", out]) == 0
    assert cli.main(["supercell", "--config", cfg, "--out", out]) == 0
    with open(os.path.join(out, "supercell.csv")) as f:
        rows = list(csv.DictReader(f))
    s = read_summary(out)
    got = sorted(float(r["eigenvalue"]) for r in rows)
    want = sorted(s["results"]["runs"][0]["eigenvalues"])
    assert got == want  # repr round-trips exactly
