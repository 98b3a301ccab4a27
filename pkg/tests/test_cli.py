"""Command-line interface: formats, exit codes, determinism."""
import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ris_stats.cli import main


def _csv_rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(body))))


def _meta(text):
    return {l[2:].split(": ", 1)[0]: json.loads(l.split(": ", 1)[1]) for l in text.splitlines() if l.startswith("# ")}


def test_pdf_real_auto_grid(tmp_path):
    out = tmp_path / "real.csv"
    rc = main(["pdf", "--which", "real", "--m1", "2", "--m2", "3", "--n", "10", "--grid", "auto", "--out", str(out)])
    assert rc == 0
    rows = _csv_rows(out.read_text())
    assert rows[0] == ["abscissa", "value", "terms_used", "tail_estimate"]
    assert len(rows) == 501
    vals = np.array([float(r[1]) for r in rows[1:]])
    assert np.all(np.isfinite(vals)) and np.all(vals >= 0)
    meta = _meta(out.read_text())
    assert meta["params"]["m1"] == 2 and meta["params"]["n_elements"] == 10
    assert meta["seed"] == 0 and "version" in meta and "config" in meta


def test_pdf_imag_at_origin(tmp_path):
    out = tmp_path / "imag.csv"
    assert main(["pdf", "--which", "imag", "--sigma-h-sq", "1", "--grid", "-4:4:9", "--out", str(out)]) == 0
    rows = {float(r[0]): float(r[1]) for r in _csv_rows(out.read_text())[1:]}
    assert len(rows) == 9
    assert rows[0.0] == pytest.approx(0.564190, abs=1e-6)


def test_pdf_rejects_fractional_shape(capsys):
    assert main(["pdf", "--which", "real", "--m1", "1.5", "--grid", "0:1:3"]) == 1
    assert "m1 must be a positive integer" in capsys.readouterr().err


@pytest.mark.parametrize("flag, value", [("--n", "0"), ("--omega1", "-1"), ("--sigma-h-sq", "0")])
def test_pdf_rejects_invalid_parameters(flag, value):
    assert main(["pdf", "--which", "real", flag, value, "--grid", "0:1:3"]) == 1


def test_pdf_rejects_bad_grid():
    assert main(["pdf", "--which", "real", "--grid", "1:0:5"]) == 1
    assert main(["pdf", "--which", "real", "--grid", "nonsense"]) == 1


def test_unknown_flag_is_an_error():
    assert main(["pdf", "--which", "real", "--frobnicate"]) == 1


def test_help_lists_every_flag(capsys):
    assert main(["pdf", "--help"]) == 0
    text = capsys.readouterr().out
    for flag in ("--which", "--params", "--n", "--m1", "--m2", "--omega1", "--omega2", "--sigma-h-sq",
                 "--grid", "--rel-tol", "--out", "--format", "--threads", "--gamma-reading", "--weight-reading"):
        assert flag in text


def test_pdf_series_non_convergence_exit_code(tmp_path):
    out = tmp_path / "r.json"
    rc = main(["pdf", "--which", "real", "--method", "series", "--grid", "1:2:3", "--format", "json", "--out", str(out)])
    assert rc == 2
    data = json.loads(out.read_text())
    assert data["paths"] == ["failed"] * 3
    assert all("CancellationAlarm" in n for n in data["notes"])


def test_pdf_json_with_params_file(tmp_path):
    pfile = tmp_path / "p.json"
    pfile.write_text(json.dumps({"n_elements": 2, "m1": 1, "m2": 1, "omega1": 0.1, "omega2": 0.1, "sigma_h_sq": 1.0}))
    out = tmp_path / "e.json"
    assert main(["pdf", "--which", "envelope", "--params", str(pfile), "--grid", "0.5:1.5:3",
                 "--format", "json", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["params"]["omega1"] == 0.1
    assert data["paths"] == ["series"] * 3
    assert all(t <= 1e-6 for t in data["tail_estimate"])


def test_pdf_polar_grid(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["pdf", "--which", "polar", "--grid", "0:2:3", "--theta-grid", "-1:1:2", "--out", str(out)]) == 0
    rows = _csv_rows(out.read_text())
    assert rows[0] == ["abscissa", "abscissa2", "value", "terms_used", "tail_estimate"]
    assert len(rows) == 7


def test_pdf_phase_auto_grid_avoids_endpoints(tmp_path):
    out = tmp_path / "ph.csv"
    assert main(["pdf", "--which", "phase", "--method", "quadrature", "--out", str(out)]) == 0
    grid = [float(r[0]) for r in _csv_rows(out.read_text())[1:]]
    assert len(grid) == 500
    assert -math.pi < grid[0] and grid[-1] < math.pi


# -- simulate ---------------------------------------------------------------------


def test_simulate_is_deterministic(tmp_path):
    args = ["simulate", "--n", "5", "--m1", "1", "--m2", "1", "--count", "1000000", "--seed", "42", "--threads", "4"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_phase_bins_and_mass(tmp_path):
    out = tmp_path / "ph.json"
    assert main(["simulate", "--count", "200000", "--seed", "1", "--projection", "phase", "--format", "json",
                 "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    edges = np.array(data["bin_edges"])
    assert edges[0] > -math.pi and edges[-1] <= math.pi
    mass = math.fsum(np.array(data["densities"]) * np.diff(edges))
    assert abs(mass - 1.0) <= 1e-12
    assert data["seed"] == 1 and data["count"] == 200000 and data["rng"]


def test_simulate_csv_header(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["simulate", "--count", "10000", "--bins", "20", "--out", str(out)]) == 0
    rows = _csv_rows(out.read_text())
    assert rows[0] == ["bin_left", "bin_right", "density", "std_error"]
    assert len(rows) == 21


def test_simulate_memory_budget(tmp_path):
    args = ["simulate", "--count", "100000", "--memory-budget", "1000", "--threads", "2"]
    assert main(args + ["--out", str(tmp_path / "x.csv")]) == 1
    raw = tmp_path / "s.bin"
    assert main(args + ["--raw-out", str(raw), "--out", str(tmp_path / "y.csv")]) == 0
    assert raw.read_bytes()[:8] == b"RISMC1\0\0"
    assert raw.stat().st_size == 16 + 100000 * 16


def test_threads_env_and_flag(tmp_path, monkeypatch):
    monkeypatch.setenv("RIS_STATS_THREADS", "2")
    out = tmp_path / "s.json"
    assert main(["simulate", "--count", "1000", "--format", "json", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["workers"] == 2
    assert main(["simulate", "--count", "1000", "--threads", "3", "--format", "json", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["workers"] == 3
    monkeypatch.setenv("RIS_STATS_THREADS", "zero")
    assert main(["simulate", "--count", "1000", "--out", str(out)]) == 1


# -- validate --------------------------------------------------------------------


def test_validate_low_count_warns(tmp_path, capsys):
    out = tmp_path / "v.json"
    main(["validate", "--grid-spec", "5:1:1", "--count", "1000", "--law", "exact", "--out", str(out)])
    report = json.loads(out.read_text())
    assert report["warnings"] and "too wide" in report["warnings"][0]
    assert "warning" in capsys.readouterr().err


def test_validate_exact_law_positive_control(tmp_path):
    out = tmp_path / "v.json"
    rc = main(["validate", "--grid-spec", "5:1:1", "--count", "200000", "--law", "exact", "--out", str(out)])
    report = json.loads(out.read_text())
    assert rc == 0, report
    assert report["passed"] and not report["failures"]
    assert set(report["points"][0]["checks"]) == {"real", "envelope", "phase"}


def test_validate_per_element_gamma_negative_control(tmp_path):
    out = tmp_path / "v.json"
    rc = main(["validate", "--grid-spec", "5:1:2", "--count", "200000", "--gamma-reading", "per_element",
               "--out", str(out)])
    report = json.loads(out.read_text())
    assert rc == 3
    assert report["failures"] == [report["points"][0]["params"]]


def test_validate_bad_grid_spec():
    assert main(["validate", "--grid-spec", "a:b:c", "--count", "10"]) == 1


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ris_stats.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("ris-stats")
