from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parents[1] / "src"


def run_cli(*argv: str, stdin: str | None = None):
    env = os.environ.copy()
    env["PYTHONPATH"] = os.pathsep.join(filter(None, [str(SRC), env.get("PYTHONPATH", "")]))
    return subprocess.run(
        [sys.executable, "-m", "crackgrid.cli", *argv],
        input=stdin, capture_output=True, text=True, env=env)


def test_fixture_pipe_energy():
    fx = run_cli("fixture", "staircase", "--n", "16")
    assert fx.returncode == 0
    en = run_cli("energy", "-", stdin=fx.stdout)
    assert en.returncode == 0
    payload = json.loads(en.stdout)
    assert payload["jump"] == 2.9375
    assert payload["bulk"] == 0.0


def test_runaway_energy_flags():
    fx = run_cli("fixture", "runaway", "--n", "1000000.0")
    en = run_cli("energy", "-", "--p", "3.5", stdin=fx.stdout)
    payload = json.loads(en.stdout)
    assert payload["jump"] == 1.0
    assert payload["p"] == 3.5


def test_round_trip_bit_identical(tmp_path: Path):
    out = tmp_path / "u.json"
    run_cli("fixture", "staircase", "--n", "4", "--out", str(out))
    first = out.read_text()
    # read back through the profile command and regenerate: identical fixture
    again = run_cli("fixture", "staircase", "--n", "4")
    assert again.stdout == first


def test_reports_are_deterministic(tmp_path: Path):
    fx = run_cli("fixture", "staircase", "--n", "8")
    a = run_cli("decompose", "-", "--eps", "0.1", stdin=fx.stdout)
    b = run_cli("decompose", "-", "--eps", "0.1", stdin=fx.stdout)
    assert a.stdout == b.stdout
    assert a.returncode == 0
    doc = json.loads(a.stdout)
    assert len(doc["bubbles"]) == 2
    assert doc["violations"] == []


def test_profile_csv_and_svg(tmp_path: Path):
    fx = run_cli("fixture", "runaway", "--n", "5")
    svg_path = tmp_path / "profile.svg"
    pr = run_cli("profile", "-", "--format", "csv", "--svg", str(svg_path),
                 stdin=fx.stdout)
    assert pr.returncode == 0
    assert pr.stdout.splitlines()[0] == "t,value"
    assert svg_path.read_text().startswith("<svg")


def test_malformed_json_exits_1(tmp_path: Path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    out = tmp_path / "report.json"
    res = run_cli("energy", str(bad), "--out", str(out))
    assert res.returncode == 1
    assert not out.exists()  # no partial artifacts
    assert "error" in res.stderr


def test_missing_file_exits_1():
    res = run_cli("energy", "/nonexistent/u.json")
    assert res.returncode == 1


def test_duplicate_cracks_exit_1(tmp_path: Path):
    fx = run_cli("fixture", "staircase", "--n", "2")
    doc = json.loads(fx.stdout)
    doc["cracks"].append(doc["cracks"][0])
    res = run_cli("energy", "-", stdin=json.dumps(doc))
    assert res.returncode == 1


def test_partition_and_renormalize(tmp_path: Path):
    fx = run_cli("fixture", "runaway", "--n", "50")
    svg_path = tmp_path / "labels.svg"
    pa = run_cli("partition", "-", "--eps", "0.1", "--svg", str(svg_path),
                 stdin=fx.stdout)
    assert pa.returncode == 0
    doc = json.loads(pa.stdout)
    assert doc["volumes"]["main"] == 2.0
    assert doc["volumes"]["vanishing"] == 0.0
    assert svg_path.exists()
    re = run_cli("renormalize", "-", "--eps", "0.1", stdin=fx.stdout)
    assert re.returncode == 0
    w = json.loads(re.stdout)
    assert all(v == 0.0 for v in w["values"])


def test_vanishing_certificate_cli(tmp_path: Path):
    fx = run_cli("fixture", "staircase", "--n", "16")
    doc = json.loads(fx.stdout)
    u_path = tmp_path / "u.json"
    u_path.write_text(fx.stdout)
    mask = [1 if 0.0 < v < 17.0 else 0 for v in doc["values"]]
    region = {k: doc[k] for k in ("version", "dim", "origin", "spacing", "shape")}
    region["mask"] = mask
    region_path = tmp_path / "region.json"
    region_path.write_text(json.dumps(region))
    res = run_cli("vanishing", str(u_path), "--region", str(region_path),
                  "--eps", "1.0")
    assert res.returncode == 0
    cert = json.loads(res.stdout)
    assert cert["certified"]
    assert cert["measured_volume"] == pytest.approx(1 / 16)


def test_vanishing_hypothesis_violation_exits_2(tmp_path: Path):
    fx = run_cli("fixture", "staircase", "--n", "16")
    doc = json.loads(fx.stdout)
    u_path = tmp_path / "u.json"
    u_path.write_text(fx.stdout)
    region = {k: doc[k] for k in ("version", "dim", "origin", "spacing", "shape")}
    region["mask"] = [1] * len(doc["values"])
    region_path = tmp_path / "region.json"
    region_path.write_text(json.dumps(region))
    res = run_cli("vanishing", str(u_path), "--region", str(region_path),
                  "--eps", "0.001")
    assert res.returncode == 2
    assert json.loads(res.stdout)["violations"]


def write_manifest(tmp_path: Path, n_values, eps_ladder, limit=None) -> Path:
    paths = []
    for k, n in enumerate(n_values):
        fx = run_cli("fixture", "runaway", "--n", str(n))
        p = tmp_path / f"u{k}.json"
        p.write_text(fx.stdout)
        paths.append(p.name)
    manifest = {
        "functions": paths,
        "p": 2.0,
        "eps_ladder": eps_ladder,
        "window": 1.0,
        "ref_radius": 1.0,
        "gap_delta": 2.0,
    }
    if limit is not None:
        manifest["limit"] = limit
    mp = tmp_path / "manifest.json"
    mp.write_text(json.dumps(manifest))
    return mp


def test_verify_runaway_manifest(tmp_path: Path):
    mp = write_manifest(tmp_path, [10.0, 100.0, 1000.0], [0.1])
    svg_path = tmp_path / "trends.svg"
    res = run_cli("verify", str(mp), "--svg", str(svg_path))
    assert res.returncode == 0, res.stderr
    rep = json.loads(res.stdout)
    assert rep["ok"]
    block = rep["per_eps"]["0.1"]
    assert block["conclusion5_bubble_tracks"]["separations"]["0-1"] == [10.0, 100.0, 1000.0]
    assert svg_path.read_text().startswith("<svg")
    again = run_cli("verify", str(mp))
    assert again.stdout == res.stdout  # byte-identical report


def test_slice_lsc_manifest(tmp_path: Path):
    mp = write_manifest(tmp_path, [10.0, 100.0], [0.1])
    res = run_cli("slice-lsc", str(mp))
    assert res.returncode == 0
    rep = json.loads(res.stdout)
    assert rep["lsc_holds"]


def test_help_documents_flags():
    res = run_cli("decompose", "--help")
    assert res.returncode == 0
    for flag in ("--window", "--eps", "--ref-radius", "--gap-delta", "--out"):
        assert flag in res.stdout


def test_partition_csv_raster():
    fx = run_cli("fixture", "runaway", "--n", "9", "--resolution", "8")
    pa = run_cli("partition", "-", "--eps", "0.1", "--format", "csv", stdin=fx.stdout)
    assert pa.returncode == 0
    rows = pa.stdout.strip().splitlines()
    assert len(rows) == 8  # one per column of the 8x4 grid
    cells = rows[0].split(",")
    assert len(cells) == 4
    assert all(c.startswith("main:") for c in cells)


def test_verify_csv_trends(tmp_path: Path):
    mp = write_manifest(tmp_path, [10.0, 100.0], [0.1])
    res = run_cli("verify", str(mp), "--format", "csv")
    assert res.returncode == 0
    header, *rows = res.stdout.strip().splitlines()
    assert header.split(",")[0] == "n_index"
    assert len(rows) == 2


def test_bad_eps_ladder_exits_1(tmp_path: Path):
    mp = write_manifest(tmp_path, [10.0], [0.1, 0.2])
    res = run_cli("verify", str(mp))
    assert res.returncode == 1
    assert "ladder" in res.stderr


def test_lsc_violation_exits_2(tmp_path: Path):
    # sequence of crack-free plates against a jumped limit: LSC fails
    flat = run_cli("fixture", "runaway", "--n", "0")
    jumped = run_cli("fixture", "runaway", "--n", "3")
    for name, payload in (("u0.json", flat.stdout), ("lim.json", jumped.stdout)):
        (tmp_path / name).write_text(payload)
    mp = tmp_path / "manifest.json"
    mp.write_text(json.dumps({"functions": ["u0.json"], "limit": "lim.json",
                              "eps_ladder": [0.1]}))
    res = run_cli("slice-lsc", str(mp))
    assert res.returncode == 2
    assert not json.loads(res.stdout)["lsc_holds"]


def test_json_write_read_write_is_byte_stable(tmp_path: Path):
    fx = run_cli("fixture", "staircase", "--n", "4")
    doc = json.loads(fx.stdout)
    from crackgrid.grid import grid_function_from_dict, grid_function_to_dict

    u = grid_function_from_dict(doc)
    again = grid_function_to_dict(u)
    assert json.dumps(again, sort_keys=True) == json.dumps(doc, sort_keys=True)
