import json
import math
import subprocess
import sys

import numpy as np
import pytest

from fdcpath.cli import RunReport, main, parse_floats
from fdcpath.errors import ValidationError


def run(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def run_json(argv, capsys):
    code, out, _ = run(argv + ["--json"], capsys)
    return code, json.loads(out)


class TestSlem:
    def test_default_weights(self, capsys):
        code, rep = run_json(["slem", "--n", "3"], capsys)
        assert code == 0
        assert rep["outputs"]["slem"] == pytest.approx(0.5, abs=1e-11)
        assert rep["inputs"]["weights"] == [0.5, 0.5]

    def test_given_weights(self, capsys):
        code, rep = run_json(["slem", "--n", "3", "--weights", "0.3,0.4"], capsys)
        assert code == 0
        assert rep["outputs"]["slem"] == pytest.approx(0.66056, abs=1e-5)
        np.testing.assert_allclose(rep["outputs"]["spectrum"], [1, 0.66056, -0.06056], atol=1e-5)

    @pytest.mark.parametrize(
        "argv",
        [["slem", "--n", "1"], ["slem", "--n", "3", "--weights", "0.3,abc"],
         ["slem", "--n", "3", "--weights", "0.3,0.4,0.5"], ["slem", "--n", "3", "--weights", "nan,0.2"],
         ["slem", "--n", "x"], ["slem"], ["bogus", "--n", "3"], []],
    )
    def test_invalid(self, argv, capsys):
        code, out, err = run(argv, capsys)
        assert code == 1
        assert out == ""
        assert err

    def test_text_report(self, capsys):
        code, out, _ = run(["slem", "--n", "3"], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "command = slem"
        assert "inputs.n = 3" in lines
        assert any(line.startswith("outputs.slem = ") for line in lines)


class TestOptimize:
    def test_five(self, capsys):
        code, rep = run_json(["optimize", "--n", "5"], capsys)
        assert code == 0
        assert rep["outputs"]["max_weight_deviation"] <= 1e-4
        assert rep["outputs"]["slem_deviation"] <= 1e-6
        assert rep["inputs"]["init"] == [0.3] * 4

    def test_two_from_high_start(self, capsys):
        code, rep = run_json(["optimize", "--n", "2", "--init", "0.9"], capsys)
        assert code == 0
        assert rep["outputs"]["weights"][0] == pytest.approx(0.5, abs=1e-4)

    def test_one_iteration(self, capsys):
        code, rep = run_json(["optimize", "--n", "3", "--max-iters", "1"], capsys)
        assert code == 0
        assert rep["outputs"]["subgradient_iterations"] == 1

    def test_bad_budget(self, capsys):
        assert run(["optimize", "--n", "3", "--max-iters", "0"], capsys)[0] == 1

    def test_history_csv(self, tmp_path, capsys):
        path = tmp_path / "hist.csv"
        code, _ = run_json(["optimize", "--n", "4", "--csv", str(path)], capsys)
        assert code == 0
        raw = path.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == "iteration,slem"
        vals = [float(line.split(",")[1]) for line in lines[1:]]
        assert all(b <= a for a, b in zip(vals, vals[1:]))


class TestCertify:
    def test_hundred(self, capsys):
        code, rep = run_json(["certify", "--n", "100"], capsys)
        assert code == 0
        assert rep["pass"] is True
        assert max(rep["residuals"].values()) <= 1e-8

    def test_two(self, capsys):
        code, rep = run_json(["certify", "--n", "2"], capsys)
        assert code == 0
        assert max(rep["residuals"].values()) <= 1e-14

    def test_unattainable_tolerance(self, capsys):
        code, rep = run_json(["certify", "--n", "3", "--tol", "1e-300"], capsys)
        assert code == 2
        assert rep["pass"] is False

    def test_non_optimal_weights(self, capsys):
        code, rep = run_json(["certify", "--n", "5", "--weights", "0.3,0.4,0.3,0.4"], capsys)
        assert code == 2
        assert rep["residuals"]["slack_upper"] > 1e-3
        assert "slack_upper" in rep["outputs"]["failures"]

    def test_negative_tolerance(self, capsys):
        assert run(["certify", "--n", "3", "--tol", "-1"], capsys)[0] == 1


class TestSimulate:
    def test_three(self, capsys):
        code, rep = run_json(["simulate", "--n", "3", "--steps", "200"], capsys)
        assert code == 0
        assert rep["outputs"]["rate_estimate"] == pytest.approx(0.5, abs=0.005)
        assert rep["outputs"]["theory_slem"] == pytest.approx(0.5)

    def test_two_one_step(self, capsys):
        code, out, _ = run(["simulate", "--n", "2", "--steps", "5", "--csv", "-"], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "t,error_norm,rate_estimate"
        rows = [line.split(",") for line in lines[1:7]]
        assert [int(r[0]) for r in rows] == list(range(6))
        assert float(rows[0][1]) > 0
        assert float(rows[1][1]) <= 1e-16

    def test_zero_steps(self, capsys):
        assert run(["simulate", "--n", "3", "--steps", "0"], capsys)[0] == 1

    def test_bad_burn_in(self, capsys):
        assert run(["simulate", "--n", "3", "--steps", "10", "--burn-in", "10"], capsys)[0] == 1

    def test_no_theory_for_other_weights(self, capsys):
        code, rep = run_json(["simulate", "--n", "3", "--weights", "0.3,0.4", "--steps", "100"], capsys)
        assert code == 0
        assert rep["outputs"]["theory_slem"] is None
        assert rep["outputs"]["rate_estimate"] == pytest.approx(rep["outputs"]["slem"], rel=0.01)

    def test_csv_round_trip(self, tmp_path, capsys):
        path = tmp_path / "sim.csv"
        assert run(["simulate", "--n", "6", "--steps", "50", "--csv", str(path)], capsys)[0] == 0
        raw = path.read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")
        lines = raw.decode().splitlines()
        assert len(lines) == 52
        for line in lines[2:]:
            for field in line.split(",")[1:]:
                # shortest repr survives a round trip
                assert repr(float(field)) == field

    def test_unwritable_csv(self, tmp_path, capsys):
        target = tmp_path / "missing" / "x.csv"
        assert run(["simulate", "--n", "3", "--steps", "5", "--csv", str(target)], capsys)[0] == 1


class TestOracle:
    def test_three(self, capsys):
        code, rep = run_json(["oracle", "--n", "3", "--resolution", "0.01"], capsys)
        assert code == 0
        assert rep["outputs"]["argmin"] == [0.5, 0.5]

    def test_two(self, capsys):
        code, rep = run_json(["oracle", "--n", "2", "--resolution", "0.05"], capsys)
        assert code == 0
        assert rep["outputs"]["argmin"] == [0.5]
        assert rep["outputs"]["within_one_cell"] is True

    def test_too_large(self, capsys):
        assert run(["oracle", "--n", "5"], capsys)[0] == 1

    def test_bad_resolution(self, capsys):
        assert run(["oracle", "--n", "3", "--resolution", "0.003"], capsys)[0] == 1


class TestReport:
    @pytest.mark.parametrize(
        "argv",
        [["slem", "--n", "7"], ["optimize", "--n", "6", "--seed", "3"], ["certify", "--n", "9"],
         ["simulate", "--n", "5", "--seed", "11"], ["oracle", "--n", "2"]],
    )
    def test_byte_identical_repeats(self, argv, capsys):
        first = run(argv, capsys)
        second = run(argv, capsys)
        assert first == second
        assert run(argv + ["--json"], capsys) == run(argv + ["--json"], capsys)

    def test_key_order(self, capsys):
        _, out, _ = run(["certify", "--n", "4", "--json"], capsys)
        assert list(json.loads(out)) == ["command", "inputs", "outputs", "residuals", "pass"]
        _, out, _ = run(["slem", "--n", "4", "--json"], capsys)
        assert list(json.loads(out)) == ["command", "inputs", "outputs"]

    def test_nan_becomes_null(self):
        rep = RunReport("x", {"a": 1}, {"rate": math.nan, "vals": np.array([1.0, math.inf])})
        assert json.loads(rep.to_json()) == {"command": "x", "inputs": {"a": 1}, "outputs": {"rate": None, "vals": [1.0, None]}}

    def test_degenerate_rate_is_null(self, capsys):
        code, rep = run_json(["simulate", "--n", "2", "--steps", "5"], capsys)
        assert code == 0
        assert rep["outputs"]["rate_estimate"] is None
        assert rep["outputs"]["rate_degenerate"] is True

    def test_parse_floats(self):
        assert parse_floats("0.1, 2e-3,5") == [0.1, 0.002, 5.0]
        for bad in ("", "1,,2", "a", "1;2"):
            with pytest.raises(ValidationError):
                parse_floats(bad)

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "fdcpath", "certify", "--n", "3", "--tol", "1e-300"],
                              capture_output=True, text=True)
        assert proc.returncode == 2
        proc = subprocess.run([sys.executable, "-m", "fdcpath", "slem", "--n", "1"], capture_output=True, text=True)
        assert proc.returncode == 1
