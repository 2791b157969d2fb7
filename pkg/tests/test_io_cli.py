import io
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ballpack.cli import main
from ballpack.curvature import curvature, extended_curvature
from ballpack.flow import FlowTrace
from ballpack.io import (
    RadiiParseError, format_manifest, format_report, format_vector, parse_manifest, parse_record,
    parse_vector, read_radii, write_radii,
)
from ballpack.tet_geometry import ALPHA_BAR, critical_radius
from ballpack.triangulation import generate_boundary_4simplex
from helpers import DATA, random_real_packing

T5 = str(DATA / "5cell.tri")
T16 = str(DATA / "16cell.tri")
K5 = 4 * math.pi - 4 * ALPHA_BAR


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, name, values):
    path = tmp_path / name
    path.write_text(format_vector(values))
    return path


# --- file formats -------------------------------------------------------------------------

def test_parse_vector():
    assert np.array_equal(parse_vector("# radii\n1.5\n\n2  # second\n"), [1.5, 2.0])
    assert np.array_equal(parse_vector("-1\n0\n", positive=False), [-1.0, 0.0])
    for bad, line in (("1\nabc\n", 2), ("1\n-2\n", 2), ("0\n", 1), ("nan\n", 1), ("\n\ninf\n", 3)):
        with pytest.raises(RadiiParseError) as exc:
            parse_vector(bad)
        assert exc.value.line == line


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(min_value=1e-300, max_value=1e300), min_size=1, max_size=20))
def test_vector_round_trip_is_lossless(values):
    assert np.array_equal(parse_vector(format_vector(values)), values)


def test_radii_file_round_trip(tmp_path, rng):
    r = rng.uniform(0.1, 10, 7)
    write_radii(tmp_path / "r.txt", r)
    assert np.array_equal(read_radii(tmp_path / "r.txt"), r)


def test_report_record_round_trip(t5):
    rep = extended_curvature(t5, [0.01, 1, 1, 1, 1])
    back = parse_record(format_report(rep))
    assert np.array_equal(back["r"], rep.r) and np.array_equal(back["K"], rep.k)
    assert back["S"] == rep.s and back["lambda"] == rep.lam and back["minQ"] == rep.min_q
    assert back["is_real"] is False and back["mode"] == "extended"
    assert back["virtual_tets"] == rep.virtual_tets


def test_manifest_round_trip():
    entries = {"command": "flow", "seed": 3, "config.dt": 0.1, "list": [1.0, 2]}
    back = parse_manifest(format_manifest(entries))
    assert back == {"command": "flow", "seed": "3", "config.dt": "0.10000000000000001", "list": "1 2"}
    with pytest.raises(ValueError):
        parse_manifest("no separator\n")


# --- validate ------------------------------------------------------------------------------

def test_validate_ok():
    code, out, err = cli("validate", T5)
    assert code == 0 and "passed" in out
    assert "input_sha256" in err


def test_validate_single_tet(tmp_path):
    path = tmp_path / "one.tri"
    path.write_text("vertices 4\ntet 0 1 2 3\n")
    code, out, _ = cli("validate", path)
    assert code == 1
    assert "face" in out.lower()


def test_validate_parse_error(tmp_path):
    path = tmp_path / "bad.tri"
    path.write_text("vertices 5\ntet 0 1 2 x\n")
    code, _, err = cli("validate", path)
    assert code == 2
    assert "line 2" in err and "column" in err


@pytest.mark.parametrize("argv", [
    ["validate"], ["frobnicate", T5], ["curvature", T5, "--uniform", "-1"],
    ["curvature", T5, "--uniform", "1", "--bogus"], ["flow", T5, "--uniform", "1", "--dt-init", "0"],
    ["flow", T5, "--uniform", "1", "--record-every", "0"], ["invariant", T5, "--seed", "-3"],
    ["curvature", "/nonexistent/file.tri", "--uniform", "1"], ["curvature", T5],
    ["flow", T5, "--uniform", "1", "--dt-min", "1", "--dt-init", "0.1"],
    ["flow", T5, "--uniform", "1", "--mode", "prescribed"],
    ["minimize", T5, "--shrink", "2"],
])
def test_usage_errors(argv):
    assert cli(*argv)[0] == 2


def test_radii_count_mismatch(tmp_path):
    path = write(tmp_path, "r.txt", [1, 1, 1])
    code, _, err = cli("curvature", T5, "--radii", path)
    assert code == 2 and "3 radii for 5 vertices" in err


# --- curvature -----------------------------------------------------------------------------

def test_curvature_uniform():
    code, out, _ = cli("curvature", T5, "--uniform", 1)
    assert code == 0
    rec = parse_record(out)
    assert rec["lambda"] == pytest.approx(K5, abs=1e-12)
    assert f"lambda {K5:.12g}"[:19] in out


def test_curvature_virtual(tmp_path):
    path = write(tmp_path, "r.txt", [0.01, 1, 1, 1, 1])
    code, _, err = cli("curvature", T5, "--radii", path)
    assert code == 3 and "tetrahedron" in err
    code, out, _ = cli("curvature", T5, "--radii", path, "--extended")
    assert code == 0
    assert parse_record(out)["K"][0] == pytest.approx(-4 * math.pi, abs=1e-12)


def test_curvature_csv(tmp_path):
    path = write(tmp_path, "r.txt", [1, 2, 1, 1, 1])
    code, out, _ = cli("curvature", T5, "--radii", path, "--format", "csv")
    assert code == 0
    rows = [line.split(",") for line in out.splitlines()]
    assert rows[0] == ["vertex", "r", "K", "K_r"]
    k = curvature(generate_boundary_4simplex(), [1, 2, 1, 1, 1]).k
    assert np.array_equal([float(row[2]) for row in rows[1:6]], k)


# --- flow ----------------------------------------------------------------------------------

def test_flow_converges_and_writes_manifest(tmp_path):
    radii = write(tmp_path, "r.txt", [1.2, 0.9, 1.0, 1.05, 0.95])
    out_path = tmp_path / "trace.csv"
    code, out, _ = cli("flow", T5, "--radii", radii, "--extended", "--out", out_path)
    assert code == 0
    assert "outcome Converged" in out
    trace = FlowTrace.from_csv(out_path.read_text())
    final = trace.records[-1]
    assert np.max(np.abs(final.k - final.lam)) <= 1e-8
    manifest = parse_manifest((tmp_path / "trace.csv.manifest").read_text())
    assert manifest["command"] == "flow" and manifest["exit_code"] == "0"
    assert manifest["outcome"] == "Converged"
    assert manifest["config.mode"] == "None" and manifest["config.extended"] == "True"
    assert len(manifest["radii_sha256"]) == 64
    # spot rows recomputed by the curvature module
    t = generate_boundary_4simplex()
    for rec in trace.records[:: max(1, len(trace) // 5)]:
        rep = extended_curvature(t, rec.r)
        assert np.allclose(rep.k, rec.k, atol=1e-9)
        assert rec.lam == pytest.approx(rep.lam, abs=1e-9)


def test_flow_constant_start_one_record(tmp_path):
    out_path = tmp_path / "trace.csv"
    code, _, _ = cli("flow", T16, "--uniform", 2, "--extended", "--out", out_path)
    assert code == 0
    assert len(FlowTrace.from_csv(out_path.read_text())) == 1


def test_flow_real_mode_collapse(tmp_path):
    f = critical_radius(1, 1, 1)
    radii = write(tmp_path, "r.txt", [f * 1.05, 1, 1, 1, 1])
    target = np.full(5, K5)
    target[0] = -5 * math.pi
    tpath = write(tmp_path, "k.txt", target)
    code, out, _ = cli("flow", T5, "--radii", radii, "--mode", "prescribed",
                       "--target-curvature", tpath, "--out", tmp_path / "trace.csv")
    assert code == 4
    assert "QCollapse(tet=" in out


def test_flow_virtual_start_in_real_mode(tmp_path):
    radii = write(tmp_path, "r.txt", [0.01, 1, 1, 1, 1])
    assert cli("flow", T5, "--radii", radii)[0] == 3


def test_flow_time_limit(tmp_path):
    radii = write(tmp_path, "r.txt", [3, 1, 1, 1, 1])
    code, _, err = cli("flow", T5, "--radii", radii, "--extended", "--t-max", "0.01")
    assert code == 5 and "outcome TimeLimit" in err


def test_flow_is_deterministic(tmp_path):
    radii = write(tmp_path, "r.txt", [0.3, 1.7, 1.0, 2.2, 0.6])
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli("flow", T5, "--radii", radii, "--extended", "--out", a)[0] == 0
    assert cli("flow", T5, "--radii", radii, "--extended", "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    ma = parse_manifest((tmp_path / "a.csv.manifest").read_text())
    mb = parse_manifest((tmp_path / "b.csv.manifest").read_text())
    for m in (ma, mb):
        del m["started"], m["finished"]
    assert ma == mb


# --- optimizer commands -------------------------------------------------------------------

def test_minimize():
    code, out, _ = cli("minimize", T5, "--uniform", 1)
    assert code == 0
    assert parse_record(out)["lambda"] == pytest.approx(K5, abs=1e-9)


def test_minimize_not_converged(tmp_path):
    radii = write(tmp_path, "r.txt", [0.3, 1.7, 1.0, 2.2, 0.6])
    code, out, _ = cli("minimize", T5, "--radii", radii, "--max-iters", 1, "--no-newton")
    assert code == 6 and "converged false" in out


def test_invariant():
    code, out, err = cli("invariant", T5, "--starts", 4, "--seed", 11)
    assert code == 0
    value = float(out.split()[1])
    assert value == pytest.approx(K5, abs=1e-8)
    assert parse_manifest(err)["seed"] == "11"


def test_prescribed_round_trip(tmp_path, rng, t5):
    r_bar = random_real_packing(rng, t5)
    target = write(tmp_path, "k.txt", curvature(t5, r_bar).k)
    start = write(tmp_path, "r.txt", r_bar * np.exp(rng.uniform(-0.2, 0.2, 5)))
    code, out, _ = cli("prescribed", T5, "--radii", start, "--target-curvature", target)
    assert code == 0
    rec = parse_record(out)
    assert rec["curvature_error"] <= 1e-6
    assert np.allclose(rec["r"] / rec["r"].sum(), r_bar / r_bar.sum(), rtol=1e-5)


def test_chi_estimate_cli():
    code, out, _ = cli("chi-estimate", T5, "--rays", 5, "--samples", 20, "--seed", 2)
    assert code == 0
    vals = dict(line.split(" ", 1) for line in out.splitlines())
    assert float(vals["chi_estimate"]) >= float(vals["lambda_hat"])
    assert float(vals["lambda_hat"]) == pytest.approx(K5, abs=1e-8)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ballpack", "curvature", T5, "--uniform", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "lambda" in proc.stdout
    assert "command = curvature" in proc.stderr
