import argparse
import json
import subprocess
import sys

import pytest

from fracsad.cli import DEFAULTS, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, WICK_ASSUMPTION, build_parser, main, resolve
from fracsad.io import read_csv, sha256_file


def run(tmp_path, *args):
    return main([*args, "--out-dir", str(tmp_path)])


def manifest(tmp_path):
    return json.loads((tmp_path / "manifest.json").read_text())


def test_simulate_writes_csvs_and_manifest(tmp_path):
    assert run(tmp_path, "simulate", "--paths", "3", "--steps", "8", "--d", "2") == EXIT_OK
    m = manifest(tmp_path)
    assert m["command"] == "simulate" and m["seed"] == 0
    files = {o["file"]: o["sha256"] for o in m["outputs"]}
    assert set(files) == {"paths.csv", "moments_dim0.csv", "moments_dim1.csv"}
    assert files["paths.csv"] == sha256_file(tmp_path / "paths.csv")
    header, rows = read_csv(tmp_path / "paths.csv")
    assert header == ["path_index", "dim", "t", "value"] and len(rows) == 3 * 2 * 9


def test_a_zero_methods_write_identical_paths(tmp_path):
    out = {}
    for method in ("euler", "representation"):
        d = tmp_path / method
        assert main(["simulate", "--method", method, "--a", "0", "--z", "0.3", "--paths", "4", "--steps", "32",
                     "--out-dir", str(d)]) == EXIT_OK
        out[method] = (d / "paths.csv").read_bytes()
    assert out["euler"] == out["representation"]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[fracsad]\nhurst = 0.7\nT = 2\nsteps = 4\nout-dir = ignored\neps = 0.3, 0.2\n")
    args = build_parser().parse_args(["simulate", "--config", str(cfg), "--steps", "6"])
    c = resolve(args)
    assert c["hurst"] == 0.7 and c["T"] == 2.0 and c["steps"] == 6 and c["eps"] == [0.3, 0.2]
    assert c["a"] == DEFAULTS["a"]


@pytest.mark.parametrize("text", ["[fracsad]\nbogus = 1\n", "[other]\na = 1\n", "[fracsad]\nsteps = many\n"])
def test_bad_config_is_usage_error(tmp_path, text):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    assert run(tmp_path, "covariance", "--config", str(cfg)) == EXIT_USAGE


@pytest.mark.parametrize("args", [
    ["localtime", "--nu", "1"],
    ["simulate", "--hurst", "0.3"],
    ["simulate", "--a", "-1"],
    ["simulate", "--method", "milstein"],
    ["frobnicate"],
    ["silt", "--eps", "1e-9", "--paths", "2", "--steps", "16"],
])
def test_usage_errors(tmp_path, args):
    assert run(tmp_path, *args) == EXIT_USAGE


def test_numeric_failure_exit_code(tmp_path):
    # Euler stability guard: dt * a * T = 50 / 8 > 1
    assert run(tmp_path, "simulate", "--method", "euler", "--a", "50", "--steps", "8", "--paths", "2") == EXIT_NUMERIC


def test_covariance_command(tmp_path):
    assert run(tmp_path, "covariance", "--steps", "4") == EXIT_OK
    header, rows = read_csv(tmp_path / "covariance.csv")
    assert header == ["t", "s", "sigma2_t", "sigma2_incr", "cross_cov"] and len(rows) == 15


def test_tanaka_records_assumption(tmp_path, capsys):
    assert run(tmp_path, "tanaka", "--t", "0.5", "--x", "0") == EXIT_OK
    assert "residual" in capsys.readouterr().out
    assert manifest(tmp_path)["assumptions"] == [WICK_ASSUMPTION]
    _, rows = read_csv(tmp_path / "tanaka.csv")
    assert len(rows) == 1


def test_localtime_command(tmp_path):
    assert run(tmp_path, "localtime", "--paths", "50", "--steps", "64", "--eps", "0.2", "--x", "0,0.3") == EXIT_OK
    _, rows = read_csv(tmp_path / "localtime.csv")
    _, wrows = read_csv(tmp_path / "weighted_localtime.csv")
    assert len(rows) == len(wrows) == 2


def test_silt_commands(tmp_path):
    assert run(tmp_path, "silt", "--paths", "20", "--steps", "64", "--eps", "0.5") == EXIT_OK
    _, rows = read_csv(tmp_path / "silt.csv")
    assert len(rows) == 1
    assert run(tmp_path, "silt-converge", "--eps", "0.4,0.2") == EXIT_OK
    header, rows = read_csv(tmp_path / "silt_converge.csv")
    assert header == ["epsilon", "analytic_var", "delta_prev"] and len(rows) == 2


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "fracsad.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify" in res.stdout
