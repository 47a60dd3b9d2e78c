import json
import os

from thetamm.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def _write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_selftest_passes(capsys):
    assert main(["selftest"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out


def test_selftest_fault_injection(capsys):
    assert main(["selftest", "--inject-fault", "weights"]) == EXIT_NUMERICAL
    assert "FAIL" in capsys.readouterr().out


def test_selftest_low_precision_skips(capsys):
    assert main(["selftest", "--prec", "64"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "SKIP" in out and "FAIL" not in out


def test_holan_check(capsys):
    assert main(["holan-check", os.path.join(CONFIGS, "holan.json")]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["structure"]["ok"]
    assert {tuple(p["ranks"]): p["total"] for p in out["pairings"]}[(3, 3)] == 15


def test_theta(capsys):
    assert main(["theta", os.path.join(CONFIGS, "theta_genus2.json")]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert float(out["tail_bound"]) < 1e-30
    assert out["value"][0].startswith("1.2034890935243")


def test_zero_path_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, {"potential": [0, -1.5, 0, 0.25], "path": {"2": 0, "3": 0},
                            "eps_star": [0.5], "N": [16]})
    assert main(["compare", cfg]) == EXIT_VALIDATION
    assert "validation error" in capsys.readouterr().err


def test_non_integral_filling_rejected(tmp_path):
    cfg = _write(tmp_path, {"potential": [0, -1.5, 0, 0.25], "path": {"2": 1, "3": 1},
                            "eps_star": [0.4], "N": [16]})
    assert main(["expand", cfg]) == EXIT_VALIDATION


def test_resummation_order_rejected(tmp_path):
    cfg = _write(tmp_path, {"potential": [0, -1.5, 0, 0.25], "path": {"2": 1, "3": 1},
                            "eps_star": [0.5], "N": [16], "p_max": 3, "q_max": 1})
    assert main(["resum", cfg]) == EXIT_VALIDATION


def test_missing_file():
    assert main(["curve", "does-not-exist.json"]) == EXIT_VALIDATION


def test_compare_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    cfg = _write(tmp_path, {"potential": [0, -1.5, 0, 0.25], "path": {"2": 1, "3": 1},
                            "eps_star": [0.5], "N": [8, 12], "p_max": 1, "output": str(out)})
    assert main(["compare", cfg]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert "S_0" in summary["slopes"]
    rows = (out / "compare.csv").read_text().splitlines()
    assert rows[0].startswith("N,R_re,R_im") and len(rows) == 3
    assert (out / "error_S0.dat").exists()
