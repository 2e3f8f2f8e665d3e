import csv
import json
import os

import numpy as np
import pytest

from uccert.cli import main, parse_config_file, parse_metric
from uccert.errors import ContractViolation


def read_report(out_dir):
    with open(os.path.join(out_dir, "report.json")) as f:
        return json.load(f)


class TestConfigParsing:
    def test_sections_and_comments(self, tmp_path):
        p = tmp_path / "c.conf"
        p.write_text("# header comment\n[geometry]\ndim = 2  # trailing\nmetric = diag(-1, 1)\n"
                     "\n[run]\ncommand = check\n")
        sections = parse_config_file(str(p))
        assert sections["geometry"]["dim"] == "2"
        assert sections["run"]["command"] == "check"

    def test_key_outside_section_rejected(self, tmp_path):
        p = tmp_path / "c.conf"
        p.write_text("dim = 2\n")
        with pytest.raises(ContractViolation):
            parse_config_file(str(p))

    def test_metric_forms(self):
        q = parse_metric("diag(-1, 1, 1)", 3)
        assert q([0, 0, 0])[0, 0] == -1.0
        q2 = parse_metric("wave(2)", 3)
        assert np.allclose(q2([0, 0, 0]), np.diag([-1.0, 1.0, 1.0]))
        q3 = parse_metric("[[-1.0, 0.0], [0.0, 1.0]]", 2)
        assert q3([0, 0])[1, 1] == 1.0
        q4 = parse_metric("bumpy_wave(2, 0.05)", 3)
        assert q4.analytic
        with pytest.raises(ContractViolation):
            parse_metric("diag(1)", 3)
        with pytest.raises(ContractViolation):
            parse_metric("hyperbolic(3)", 3)


class TestExitCodes:
    def test_check_model_pass(self, tmp_path):
        out = str(tmp_path / "r")
        assert main(["check", "--model", "ik2", "--out", out]) == 0
        rep = read_report(out)
        assert rep["passed"] and rep["schema"] == "ucp-report/1"

    def test_check_control_fails_with_named_culprit(self, tmp_path):
        for name, failure in (("ctrl-a", "characteristic_minus"),
                              ("ctrl-b", "transversality"),
                              ("ctrl-c", "sign_condition")):
            out = str(tmp_path / name)
            assert main(["check", "--model", name, "--out", out]) == 1
            rep = read_report(out)
            assert rep["hypotheses"]["failed"] == [failure]

    def test_unknown_model_is_usage_error(self, tmp_path):
        assert main(["check", "--model", "ik1x", "--out", str(tmp_path / "x")]) == 2

    def test_missing_geometry_is_usage_error(self, tmp_path):
        assert main(["certify", "--out", str(tmp_path / "x")]) == 2

    def test_bad_flag_is_usage_error(self, capsys, tmp_path):
        assert main(["check", "--frobnicate"]) == 2
        capsys.readouterr()


class TestCertifyCommand:
    def test_constants_and_csv(self, tmp_path):
        out = str(tmp_path / "c")
        assert main(["certify", "--model", "ik2", "--lambda", "2", "--out", out]) == 0
        rep = read_report(out)["certificate"]
        assert rep["m0"] == pytest.approx(np.sqrt(2.0), abs=1e-6)
        assert rep["lambda0"] == pytest.approx(1.0, abs=1e-3)
        assert rep["worst_margin"] == pytest.approx(-6.0, abs=1e-3)
        with open(os.path.join(out, "constraint_samples.csv")) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == rep["n_samples"]
        for row in rows:
            assert abs(float(row["margin"]) + 6.0) < 1e-3

    def test_failed_certification_exit_one(self, tmp_path):
        out = str(tmp_path / "f")
        assert main(["certify", "--model", "ik2", "--lambda", "0.5", "--out", out]) == 1

    def test_inline_geometry_reproduces_model(self, tmp_path):
        conf = tmp_path / "geo.conf"
        conf.write_text(
            "[geometry]\n"
            "dim = 3\n"
            "metric = diag(-1, 1, 1)\n"
            "phi_plus = norm(x2, x3) - 1 - x1\n"
            "phi_minus = norm(x2, x3) - 1 + x1\n"
            "box = -0.4:0.4, 0.6:1.4, -0.4:0.4\n"
            "x0 = 0, 1, 0\n")
        out = str(tmp_path / "g")
        assert main(["certify", "--config", str(conf), "--lambda", "2", "--out", out]) == 0
        rep = read_report(out)["certificate"]
        assert rep["m0"] == pytest.approx(np.sqrt(2.0), abs=1e-6)


class TestRunCommand:
    def test_command_from_config(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text(
            "[geometry]\n"
            "dim = 3\n"
            "metric = wave(2)\n"
            "phi_plus = norm(x2, x3) - 1 - x1\n"
            "phi_minus = norm(x2, x3) - 1 + x1\n"
            "box = -0.4:0.4, 0.6:1.4, -0.4:0.4\n"
            "x0 = 0, 1, 0\n"
            "\n[run]\n"
            "command = certify\n"
            "lambda = 2\n"
            "seed = 9\n")
        out = str(tmp_path / "o")
        assert main(["run", "--config", str(conf), "--out", out]) == 0
        rep = read_report(out)
        assert rep["command"] == "certify"
        assert rep["seed"] == 9
        assert rep["certificate"]["lambda_used"] == 2.0

    def test_cli_flag_overrides_config(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("[run]\ncommand = certify\nmodel = ik2\nlambda = 2\n")
        out = str(tmp_path / "o")
        assert main(["run", "--config", str(conf), "--lambda", "1.5", "--out", out]) == 0
        assert read_report(out)["certificate"]["lambda_used"] == 1.5

    def test_run_without_section_rejected(self, tmp_path):
        conf = tmp_path / "r.conf"
        conf.write_text("[geometry]\ndim = 2\n")
        assert main(["run", "--config", str(conf), "--out", str(tmp_path / "o")]) == 2

    def test_nonpositive_tolerance_rejected(self, tmp_path):
        assert main(["check", "--model", "ik2", "--tol-pos", "0",
                     "--out", str(tmp_path / "o")]) == 2


class TestDeterminism:
    def test_reports_byte_identical(self, tmp_path):
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        for out in (a, b):
            assert main(["certify", "--model", "ik2", "--lambda", "2",
                         "--seed", "5", "--out", out]) == 0
        with open(os.path.join(a, "report.json"), "rb") as f1, \
                open(os.path.join(b, "report.json"), "rb") as f2:
            assert f1.read() == f2.read()


class TestAllPipeline:
    def test_full_pipeline_ik2(self, tmp_path):
        import time
        out = str(tmp_path / "all")
        t0 = time.monotonic()
        rc = main(["all", "--model", "ik2", "--lambda", "2", "--grid", "128",
                   "--corpus", "16", "--out", out])
        elapsed = time.monotonic() - t0
        assert rc == 0
        rep = read_report(out)
        assert rep["passed"]
        assert set(rep["stage_exit_codes"]) == {"check", "certify", "rays",
                                                "corner", "carleman"}
        assert all(v == 0 for v in rep["stage_exit_codes"].values())
        assert elapsed < 180.0
        for stage in rep["stage_exit_codes"]:
            assert os.path.exists(os.path.join(out, stage, "report.json"))

    def test_geometry_missing_surface_is_usage_error(self, tmp_path):
        conf = tmp_path / "bad.conf"
        conf.write_text(
            "[geometry]\n"
            "dim = 3\n"
            "metric = wave(2)\n"
            "phi_plus = norm(x2, x3) - 1 - x1\n"
            "phi_minus = norm(x2, x3) - 1 + x1\n"
            "box = 5:6, 5:6, 5:6\n"
            "x0 = 0, 1, 0\n")
        assert main(["check", "--config", str(conf),
                     "--out", str(tmp_path / "o")]) == 2


class TestRaysCommand:
    def test_contacts_and_csv(self, tmp_path):
        out = str(tmp_path / "r")
        assert main(["rays", "--model", "ik2", "--lambda", "2", "--out", out]) == 0
        rep = read_report(out)
        assert rep["passed"]
        sides = {(c["field"], c["side"]) for c in rep["contacts"]}
        assert sides == {("bent", "below"), ("surface", "above")}
        with open(os.path.join(out, "rays.csv")) as f:
            header = f.readline().strip().split(",")
        assert header == ["ray", "field", "s", "x1", "x2", "x3",
                          "xi1", "xi2", "xi3", "p", "psi"]
