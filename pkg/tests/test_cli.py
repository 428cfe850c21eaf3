import json
import struct

import numpy as np
import pytest

from stfwm import ttfio
from stfwm.cli import main

SMALL_CONFIG = """
n_pulses = 50000
p1 = 0.1
p2 = 0.1
visibility = 0.71
sigma_tau_ps = 4.25
ch1_efficiency = 0.5
ch2_efficiency = 0.5
ch3_efficiency = 0.5
ch4_efficiency = 0.5
seed = 11
"""


@pytest.fixture
def config_path(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(SMALL_CONFIG)
    return p


def test_simulate_deterministic(tmp_path, config_path):
    out1 = tmp_path / "a.tt4f"
    out2 = tmp_path / "b.tt4f"
    assert main(["simulate", str(config_path), "--out", str(out1), "--seed", "42"]) == 0
    assert main(["simulate", str(config_path), "--out", str(out2), "--seed", "42"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    meta = (tmp_path / "a.tt4f.meta").read_text()
    assert "seed=42" in meta
    assert "config_hash=" in meta


def test_simulate_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("p1 = 2.0\n")
    out = tmp_path / "x.tt4f"
    assert main(["simulate", str(cfg), "--out", str(out)]) == 2


def test_simulate_unwritable_output_exit_3(config_path, tmp_path):
    out = tmp_path / "no_such_dir" / "x.tt4f"
    assert main(["simulate", str(config_path), "--out", str(out)]) == 3


def test_count_handcrafted_adjacent_pair(tmp_path):
    T = 3125
    tags = tmp_path / "tags.csv"
    tags.write_text(f"channel,timestamp_ps\n1,0\n3,0\n2,{T}\n4,{T}\n")
    out = tmp_path / "res"
    assert main(["count", str(tags), "--out", str(out)]) == 0
    plane = (tmp_path / "res.plane.csv").read_text().splitlines()
    assert plane[0] == "n14,n24,count"
    assert "-1,0,1" in plane
    report = json.loads((tmp_path / "res.car.json").read_text())
    assert report["acc_bars"]["(-1, 0, -1)"] == 1
    assert report["gating"] == "peak-centered"


def test_count_empty_file(tmp_path):
    tags = tmp_path / "empty.csv"
    tags.write_text("channel,timestamp_ps\n")
    out = tmp_path / "res"
    assert main(["count", str(tags), "--out", str(out)]) == 0
    report = json.loads((tmp_path / "res.car.json").read_text())
    assert report["cc"] == 0
    assert report["ratio"] is None
    assert report["ratio_defined"] is False


def test_count_corrupt_magic_exit_4(tmp_path):
    bad = tmp_path / "bad.tt4f"
    bad.write_bytes(b"TTXX" + struct.pack("<HHQQ", 1, 0, 3125, 0))
    assert main(["count", str(bad), "--out", str(tmp_path / "r")]) == 4


def test_count_tt4f_and_csv_agree(tmp_path, config_path):
    tt4f = tmp_path / "run.tt4f"
    assert main(["simulate", str(config_path), "--out", str(tt4f)]) == 0
    streams, period = ttfio.read_tt4f(tt4f)
    csv = tmp_path / "run.csv"
    ttfio.write_csv_tags(csv, streams)
    assert main(["count", str(tt4f), "--out", str(tmp_path / "a")]) == 0
    assert main(["count", str(csv), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a.hist.csv").read_text()
    b = (tmp_path / "b.hist.csv").read_text()
    assert a == b


def test_scan_single_tau(tmp_path, config_path):
    out = tmp_path / "scan.csv"
    assert main(["scan", str(config_path), "--tau-list", "0.0", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "tau_ps,cc,acc"
    assert len(lines) == 2
    meta = (tmp_path / "scan.csv.meta").read_text()
    assert "derived_seeds=" in meta


def test_scan_deterministic(tmp_path, config_path):
    out1 = tmp_path / "s1.csv"
    out2 = tmp_path / "s2.csv"
    args = ["--tau-list=-10,0,10"]
    assert main(["scan", str(config_path), *args, "--out", str(out1)]) == 0
    assert main(["scan", str(config_path), *args, "--out", str(out2)]) == 0
    assert out1.read_text() == out2.read_text()


def test_scan_bad_tau_list(tmp_path, config_path):
    assert main(
        ["scan", str(config_path), "--tau-list", "a,b", "--out", str(tmp_path / "s.csv")]
    ) == 2


def test_report_synthetic_scan(tmp_path):
    rng = np.random.default_rng(60)
    taus = np.linspace(-25, 25, 21)
    base = 400.0
    cc = rng.poisson(base * (1 + 0.66 * np.exp(-(taus**2) / (2 * 4.25**2))))
    acc = rng.poisson(base / 1.71, 21)
    scan = tmp_path / "scan.csv"
    scan.write_text(
        "tau_ps,cc,acc\n"
        + "".join(f"{t},{c},{a}\n" for t, c, a in zip(taus, cc, acc))
    )
    out = tmp_path / "rep"
    assert main(["report", str(scan), "--out", str(out)]) == 0
    report = json.loads((tmp_path / "rep.report.json").read_text())
    assert report["r_prime"] == pytest.approx(1.66, abs=0.15)
    assert report["fidelity"] == pytest.approx(0.812, abs=0.02)
    assert report["fit"]["converged"] is True
    curve = (tmp_path / "rep.curve.csv").read_text().splitlines()
    assert curve[0] == "tau_ps,fit,band_lo,band_hi"
    assert len(curve) == 202


def test_report_flat_scan(tmp_path):
    scan = tmp_path / "flat.csv"
    scan.write_text(
        "tau_ps,cc,acc\n" + "".join(f"{t},200,100\n" for t in range(-10, 11, 2))
    )
    out = tmp_path / "rep"
    assert main(["report", str(scan), "--out", str(out)]) == 0
    report = json.loads((tmp_path / "rep.report.json").read_text())
    assert report["r_prime"] == pytest.approx(1.0, abs=1e-3)
    assert report["fidelity"] == pytest.approx(0.75, abs=1e-3)


def test_report_malformed_csv_exit_4(tmp_path):
    scan = tmp_path / "bad.csv"
    scan.write_text("tau_ps,cc,acc\n1,2,x\n")
    assert main(["report", str(scan), "--out", str(tmp_path / "r")]) == 4


def test_report_too_few_rows_exit_2(tmp_path):
    scan = tmp_path / "short.csv"
    scan.write_text("tau_ps,cc,acc\n0,1,1\n1,1,1\n")
    assert main(["report", str(scan), "--out", str(tmp_path / "r")]) == 2
