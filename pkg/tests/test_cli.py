from __future__ import annotations

import json

import numpy as np
import pytest

from distortion_lab import io
from distortion_lab.cli import run
from distortion_lab.ifs_core import ternary_pair


@pytest.fixture()
def files(tmp_path):
    pair = ternary_pair().to_json()
    (tmp_path / "ternary.json").write_text(json.dumps(pair))
    pair["phi1"]["coeffs"][0] += 0.05
    (tmp_path / "bad.json").write_text(json.dumps(pair))
    (tmp_path / "A.csv").write_text("x\n0\n1\n")
    (tmp_path / "B.csv").write_text("x\n0\n0.4\n1\n")
    (tmp_path / "mu.json").write_text(json.dumps({"atoms": [{"x": [0.0], "w": "1"}]}))
    (tmp_path / "nu.json").write_text(
        json.dumps({"atoms": [{"x": [0.0], "w": "1/2"}, {"x": [1.0], "w": "1/2"}]})
    )
    return tmp_path


def test_ifs_approx(files):
    out = files / "approx"
    assert run(["ifs", "approx", "--pair", str(files / "ternary.json"), "--eps", "1e-3", "--out", str(out)]) == 0
    cert = io.read_json(out / "certificate.json")
    assert cert["certified"] and cert["depth"] == 7
    assert io.read_csv(out / "points.csv").size == 256
    assert run(["ifs", "approx", "--recheck", "--out", str(out)]) == 0


def test_ifs_validate_bad(files, capsys):
    code = run(["ifs", "validate", "--pair", str(files / "bad.json"), "--out", str(files / "v")])
    assert code == 3
    assert "phi1_fixed_point" in capsys.readouterr().err


def test_ifs_endpoints_and_cover(files):
    out = files / "e"
    assert run(["ifs", "endpoints", "--pair", str(files / "ternary.json"), "--depth", "2", "--out", str(out)]) == 0
    assert io.read_csv(out / "endpoints.csv").size == 8
    assert run(["ifs", "cover", "--depth", "2", "--out", str(files / "c")]) == 0
    assert io.read_csv(files / "c" / "cover.csv").shape == (4, 2)


def test_dist(files):
    out = files / "d"
    assert run(["dist", "hausdorff", "--a", str(files / "A.csv"), "--b", str(files / "B.csv"), "--out", str(out)]) == 0
    assert io.read_json(out / "distance.json")["value"] == pytest.approx(0.4)
    out2 = files / "w"
    assert run(["dist", "w1", "--a", str(files / "mu.json"), "--b", str(files / "nu.json"), "--out", str(out2)]) == 0
    assert io.read_json(out2 / "distance.json")["value"] == 0.5
    assert run(["dist", "w1", "--recheck", "--out", str(out2)]) == 0


def test_config_overrides(files):
    cfg = files / "cfg.json"
    cfg.write_text(json.dumps({"depth": 3}))
    out = files / "cfg_out"
    assert run(["ifs", "endpoints", "--config", str(cfg), "--out", str(out)]) == 0
    assert io.read_csv(out / "endpoints.csv").size == 16
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(["ifs", "endpoints", "--config", str(cfg), "--out", str(out)]) == 2


def test_missing_input_is_config_error(files):
    assert run(["ifs", "approx", "--pair", str(files / "none.json"), "--out", str(files / "x")]) == 2


def test_family(files):
    out = files / "fam"
    args = ["family", "--N", "3", "--count", "6", "--seed", "1", "--out", str(out)]
    assert run(args) == 0
    assert io.read_json(out / "packing.json")["capacity_estimate"] == 6
    assert run(["family", "--recheck", "--out", str(out)]) == 0
    assert run(["family", "--count", "4", "--out", str(files / "gap")]) == 5


def test_complexity(files):
    out = files / "cx"
    assert run(["complexity", "--encoder", "comb", "--eps", "2:8", "--out", str(out)]) == 0
    fits = io.read_json(out / "fits.json")
    assert fits["fits"]["linear"]["r2"] > 0.99
    assert run(["complexity", "--recheck", "--out", str(out)]) == 0
    assert run(["complexity", "--eps", "0.1,0.2", "--out", str(files / "bad")]) == 2


def test_hyper_and_budget(files):
    out = files / "hy"
    assert run(["hyper", "--eps", "4:5", "--samples", "20000", "--out", str(out)]) == 0
    certs = io.read_json(out / "certificates.json")
    assert all(r["certified"] for r in certs["runs"])
    assert run(["hyper", "--recheck", "--out", str(out)]) == 0
    code = run(["hyper", "--eps", "2^-6", "--samples", "20000", "--lattice-cap", "100", "--out", str(files / "b")])
    assert code == 4


def test_recheck_detects_tampering(files):
    out = files / "t"
    assert run(["ifs", "approx", "--eps", "1e-2", "--out", str(out)]) == 0
    pts = io.read_csv(out / "points.csv")
    io.write_cloud(out / "points.csv", pts[: pts.size // 2])
    assert run(["ifs", "approx", "--recheck", "--out", str(out)]) == 6


def test_reproducible_bytes(files):
    a, b = files / "r1", files / "r2"
    for out in (a, b):
        assert run(["complexity", "--encoder", "ifs_poly", "--eps", "4:9", "--out", str(out)]) == 0
    for name in ("growth.csv", "descriptions.json", "fits.json", "pair.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma, mb = io.read_json(a / "manifest.json"), io.read_json(b / "manifest.json")
    ma.pop("timestamp"), mb.pop("timestamp")
    assert ma == mb


def test_csv_precision(tmp_path):
    io.write_csv(tmp_path / "x.csv", np.array([[1 / 3]]), ["x"])
    assert (tmp_path / "x.csv").read_text() == "x\n0.33333333333333331\n"


def test_bad_eps_is_config_error(files):
    assert run(["hyper", "--eps", "6", "--samples", "20000", "--out", str(files / "e6")]) == 2
