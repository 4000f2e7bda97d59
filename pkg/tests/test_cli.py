import json
import subprocess
import sys

import pytest

from kintraj.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from kintraj.documents import pair_to_archive, save_json
from kintraj.trajectory import CoefficientRecord


def run(args, capsys):
    code = main(args)
    return code, capsys.readouterr()


def test_build_then_verify_archive(tmp_path, capsys):
    archive = tmp_path / "k1.json"
    assert main(["build", "--k", "1", "--out", str(archive)]) == EXIT_OK
    doc = json.loads(archive.read_text())
    assert doc["k"] == 1 and doc["kappa_list"] == ["3/2"]
    code, out = run(["verify", "--archive", str(archive), "--checks", "structural,det,inverse,closed_form"], capsys)
    assert code == EXIT_OK
    report = json.loads(out.out)
    assert report["passed"] and report["constants"]["p_k"] == "9/2"
    archive2 = tmp_path / "again.json"
    main(["build", "--k", "1", "--out", str(archive2)])
    assert archive.read_bytes() == archive2.read_bytes()


def test_verify_k1_all_default_checks(capsys):
    code, out = run(["verify", "--k", "1"], capsys)
    assert code == EXIT_OK
    report = json.loads(out.out)
    assert all(c["status"] == "pass" for c in report["checks"])
    assert 1 <= report["constants"]["R0"]["R0"] <= 7


def test_verify_k2_det_inverse_text(capsys):
    code, out = run(["verify", "--k", "2", "--checks", "det,inverse", "--format", "text"], capsys)
    assert code == EXIT_OK
    assert "p_k = 59/6" in out.out
    assert "inverse_last_column_decay" in out.out


def test_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["verify", "--k", "1", "--checks", "det_b,r0", "--out", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_tampered_archive_is_a_usage_error(tmp_path, capsys):
    archive = tmp_path / "k1.json"
    main(["build", "--k", "1", "--out", str(archive)])
    doc = json.loads(archive.read_text())
    doc["alpha"][0][0]["coeff"] = "1/1"
    archive.write_text(json.dumps(doc))
    code, out = run(["verify", "--archive", str(archive)], capsys)
    assert code == EXIT_USAGE
    assert "hash" in out.err


@pytest.mark.parametrize(
    "args",
    [
        ["build", "--k", "0"],
        ["build", "--k", "13"],
        ["verify", "--k", "1", "--checks", "bogus"],
        ["constants", "--kappa", "0"],
        ["probe", "--eps", "0.5,1.0"],
        ["probe", "--resolution", "8"],
        ["probe", "--family", "cubic"],
        ["plot-data", "--present", "0,1"],
        ["frobnicate"],
        ["build", "--k", "one"],
    ],
)
def test_usage_errors(args, capsys):
    assert main(args) == EXIT_USAGE


def test_check_failure_exit_code(tmp_path, capsys, pair1):
    # a self-consistent archive of a wrong pair loads fine and then fails its checks
    alpha = [list(row) for row in pair1.alpha]
    alpha[0][1] = CoefficientRecord(alpha[0][1].coeff + 1, alpha[0][1].sigma_exp)
    archive = tmp_path / "broken.json"
    save_json(pair_to_archive(pair1.with_coefficients(alpha=alpha)), archive)
    code, out = run(["verify", "--archive", str(archive), "--checks", "structural,det", "--format", "text"], capsys)
    assert code == EXIT_FAIL
    assert "fail" in out.out


def test_constants_table(capsys):
    code, out = run(["constants", "--k", "1", "--kappa", "0.5,1", "--format", "text"], capsys)
    assert code == EXIT_OK
    lines = out.out.strip().splitlines()
    assert lines[0].split() == ["kappa", "C0", "C1", "R0", "R0_geometric"]
    assert len(lines) == 3


def test_probe_structured(capsys):
    code, out = run(["probe", "--eps", "0.3,0.6", "--resolution", "32"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out.out)
    assert doc["passed"]
    assert {row["spec"] for row in doc["rows"]} == {"constant", "affine", "v_heat"}
    assert len(doc["rows"]) == 6


def test_plot_data_columns(capsys):
    code, out = run(["plot-data", "--k", "2", "--samples", "3", "--format", "text"], capsys)
    assert code == EXIT_OK
    lines = out.out.strip().splitlines()
    assert lines[0] == "r,t,x1,x2,v"
    first = [float(x) for x in lines[1].split(",")]
    last = [float(x) for x in lines[-1].split(",")]
    assert first == [0.0, 0.0, 0.0, 0.0, 1.0]
    assert last[1] == pytest.approx(-2.0) and last[-1] == pytest.approx(-1.0)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kintraj", "build", "--k", "0"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
