import json
import os

import pytest

from confinement_lab.cli import main

UNIT_FIELD = {"kind": "constant", "two_form": [[0.0, 1.0], [-1.0, 0.0]]}
DISK = {"kind": "disk2d", "radius": 1.0}
BOX = {
    "kind": "polytope",
    "functionals": [
        {"normal": [1.0, 0.0], "offset": -2.0},
        {"normal": [-1.0, 0.0], "offset": -2.0},
        {"normal": [0.0, 1.0], "offset": -2.0},
        {"normal": [0.0, -1.0], "offset": -2.0},
    ],
}
FORM_CONSTANT = 0.0884431530


def write_spec(tmp_path, spec, name="job.json"):
    path = tmp_path / name
    path.write_text(json.dumps(spec))
    return str(path)


def run(tmp_path, spec, *extra):
    spec_path = write_spec(tmp_path, spec)
    outdir = tmp_path / "out"
    rc = main(["run", spec_path, "--out", str(outdir), *extra])
    return rc, outdir


def test_validate_ok(tmp_path, capsys):
    spec = {
        "schema": 1,
        "task": "spherical-table",
        "params": {"m": 1, "k_max": 5},
        "output": "tbl",
    }
    rc = main(["validate", write_spec(tmp_path, spec)])
    assert rc == 0
    assert "spec OK" in capsys.readouterr().out


def test_run_spherical_table(tmp_path, capsys):
    spec = {
        "schema": 1,
        "task": "spherical-table",
        "params": {"m": 1, "k_max": 5},
        "output": "tbl",
    }
    rc, outdir = run(tmp_path, spec)
    assert rc == 0
    out = capsys.readouterr().out
    assert str(outdir / "tbl.report.json") in out

    report = json.loads((outdir / "tbl.report.json").read_text())
    assert report["schema"] == 1
    assert report["task"] == "spherical-table"
    assert report["payload"]["ground"]["value"] == 0.5
    assert report["payload"]["counting_check"] is True

    lines = (outdir / "tbl.csv").read_text().splitlines()
    assert lines[0] == "k,numerator,denominator,lambda,multiplicity"
    assert lines[1] == "1,1,2,0.5,2"


def test_malformed_spec_writes_nothing(tmp_path, capsys):
    spec = {
        "schema": 1,
        "task": "scan-criterion",
        "field": {"kind": "disk_counterexample", "alpha": -1.0},
        "params": {},
        "output": "scan",
    }
    rc, outdir = run(tmp_path, spec)
    assert rc == 2
    assert "alpha" in capsys.readouterr().err
    assert not outdir.exists() or not os.listdir(outdir)


def test_unknown_top_level_key(tmp_path):
    spec = {
        "schema": 1,
        "task": "spherical-table",
        "params": {"m": 1, "k_max": 5},
        "output": "tbl",
        "extra": 1,
    }
    rc, outdir = run(tmp_path, spec)
    assert rc == 2
    assert not outdir.exists() or not os.listdir(outdir)


def test_unknown_param_rejected(tmp_path, capsys):
    spec = {
        "schema": 1,
        "task": "spherical-table",
        "params": {"m": 1, "k_max": 5, "bogus": 3},
        "output": "tbl",
    }
    rc, _ = run(tmp_path, spec)
    assert rc == 2
    assert "bogus" in capsys.readouterr().err


def test_bad_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad), "--out", str(tmp_path / "o1")]) == 2
    missing = str(tmp_path / "nope.json")
    assert main(["run", missing, "--out", str(tmp_path / "o2")]) == 2


def test_output_name_rejected(tmp_path):
    spec = {
        "schema": 1,
        "task": "spherical-table",
        "params": {"m": 1, "k_max": 5},
        "output": "../escape",
    }
    rc, _ = run(tmp_path, spec)
    assert rc == 2


def test_sweep_alpha_flip_and_bisect(tmp_path):
    spec = {
        "schema": 1,
        "task": "sweep-alpha",
        "params": {"range": [0.8, 0.9], "step": 0.1, "bisect": True},
        "output": "sweep",
    }
    rc, outdir = run(tmp_path, spec)
    assert rc == 0
    report = json.loads((outdir / "sweep.report.json").read_text())
    kinds = {row["alpha"]: row["kind"] for row in report["payload"]["rows"]}
    assert kinds[0.8] == "LimitCircle"
    assert kinds[0.9] == "LimitPoint"
    assert abs(report["payload"]["threshold_estimate"] - 0.8660254) < 0.05


def test_csv_byte_determinism_and_seed(tmp_path):
    spec = {
        "schema": 1,
        "task": "lemma-slack",
        "field": UNIT_FIELD,
        "domain": BOX,
        "params": {"h": 0.4, "K": FORM_CONSTANT, "n_random": 4},
        "seed": 7,
        "output": "slack",
    }
    spec_path = write_spec(tmp_path, spec)
    for d in ("a", "b"):
        assert main(["run", spec_path, "--out", str(tmp_path / d)]) == 0
    first = (tmp_path / "a" / "slack.csv").read_bytes()
    second = (tmp_path / "b" / "slack.csv").read_bytes()
    assert first == second

    assert main(["run", spec_path, "--out", str(tmp_path / "c"), "--seed", "99"]) == 0
    assert (tmp_path / "c" / "slack.csv").read_bytes() != first
    report = json.loads((tmp_path / "c" / "slack.report.json").read_text())
    assert report["spec"]["seed"] == 99


def test_dump_matrix(tmp_path):
    spec = {
        "schema": 1,
        "task": "eig",
        "field": UNIT_FIELD,
        "domain": DISK,
        "params": {"h": 0.2, "k": 2},
        "output": "eig",
    }
    rc, outdir = run(tmp_path, spec, "--dump-matrix")
    assert rc == 0
    mtx = (outdir / "eig.mtx").read_text()
    assert mtx.startswith("%%MatrixMarket")
    report = json.loads((outdir / "eig.report.json").read_text())
    eigs = report["payload"]["eigenvalues"]
    assert len(eigs) == 2
    assert eigs[0] <= eigs[1]


def test_reproduce_negative_control(capsys):
    rc = main(["reproduce", "--thresholds", '{"spherical-ground": {"value": 0.75}}'])
    assert rc == 1
    out = capsys.readouterr().out
    assert "FAIL  spherical-ground" in out
    assert out.count("PASS") == 7


def test_reproduce_threshold_validation(capsys):
    assert main(["reproduce", "--thresholds", '{"bogus-check": {}}']) == 2
    assert main(["reproduce", "--thresholds", '{"spherical-ground": {"bogus": 1}}']) == 2
    err = capsys.readouterr().err
    assert "bogus-check" in err


def test_schema_version_enforced(tmp_path):
    spec = {
        "schema": 2,
        "task": "spherical-table",
        "params": {"m": 1, "k_max": 5},
        "output": "tbl",
    }
    rc, _ = run(tmp_path, spec)
    assert rc == 2


def test_unknown_task(tmp_path):
    spec = {"schema": 1, "task": "no-such-task", "params": {}, "output": "x"}
    rc, _ = run(tmp_path, spec)
    assert rc == 2
