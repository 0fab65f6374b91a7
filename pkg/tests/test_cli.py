import csv
import json

import numpy as np
import pytest

from lqgid import cli


def k4_doc(beta=-0.5, rho=0.0, name="k4"):
    return {
        "schema_version": 1,
        "name": name,
        "environment": {"network": {"kind": "complete", "n": 4, "beta": beta}},
        "state": {"kind": "equicorrelated", "rho": rho},
        "objective": {"welfare_weights": [1.0, 1.0, 1.0, 1.0]},
        "analysis": {"metrics": True, "symmetrize": True},
    }


def explicit_doc(name="explicit"):
    return {
        "schema_version": 1,
        "name": name,
        "environment": {"Q": [[1.0, 0.2], [0.1, 1.0]], "R": [[1.0, 0.0], [0.0, 1.0]]},
        "state": {"kind": "explicit", "Z": [[1.0, 0.3], [0.3, 2.0]]},
        "objective": {"V": [[1.0, 0.0], [0.0, 1.0]]},
    }


class TestParseScenario:
    def test_network_scenario(self):
        name, env, analysis, tols, ctx = cli.parse_scenario(k4_doc())
        assert name == "k4"
        assert env.n == env.m == 4
        assert ctx["beta"] == -0.5
        assert ctx["rho"] == 0.0
        assert np.allclose(env.V, np.eye(4))

    def test_explicit_scenario(self):
        _, env, _, _, ctx = cli.parse_scenario(explicit_doc())
        assert env.n == 2
        assert ctx["beta"] is None
        assert env.Z[0, 1] == 0.3

    def test_common_state(self):
        doc = k4_doc()
        doc["state"] = {"kind": "common"}
        _, env, _, _, ctx = cli.parse_scenario(doc)
        assert np.allclose(env.Z, 1.0)
        assert ctx["rho"] == 1.0

    def test_schema_version_required(self):
        doc = k4_doc()
        doc["schema_version"] = 99
        with pytest.raises(cli.ScenarioError):
            cli.parse_scenario(doc)

    def test_missing_objective(self):
        doc = k4_doc()
        del doc["objective"]
        with pytest.raises(cli.ScenarioError):
            cli.parse_scenario(doc)

    def test_bad_network_kind(self):
        doc = k4_doc()
        doc["environment"]["network"]["kind"] = "torus"
        with pytest.raises(cli.ScenarioError):
            cli.parse_scenario(doc)


class TestRunSolve:
    def test_k4_report(self):
        rep = cli.run_solve(k4_doc())
        assert rep["ok"] and rep["certified"]
        assert rep["regime"] == "Partial"
        assert rep["gap"] <= 1e-6 * (1 + abs(rep["v_p"]))

    def test_k4_common_value_metrics(self):
        doc = k4_doc()
        doc["state"] = {"kind": "common"}
        rep = cli.run_solve(doc)
        assert rep["ok"] and rep["certified"]
        assert np.allclose(rep["s"], 0.25, atol=1e-5)
        assert np.allclose(rep["S"], 1.0, atol=1e-5)

    def test_symmetrize_flattens(self):
        rep = cli.run_solve(k4_doc())
        lam = rep["lambda"]
        assert np.allclose(lam, lam[0], atol=1e-9)
        X = np.asarray(rep["X"])
        assert np.allclose(np.diag(X), X[0, 0], atol=1e-9)

    def test_no_disclosure_regime(self):
        doc = explicit_doc()
        doc["objective"]["V"] = [[-1.0, 0.0], [0.0, -1.0]]
        rep = cli.run_solve(doc)
        assert rep["regime"] == "NoDisclosure"
        assert rep["v_p"] == pytest.approx(0.0, abs=1e-7)

    def test_full_disclosure_regime(self):
        doc = explicit_doc()
        doc["environment"]["Q"] = [[1.0, 0.0], [0.0, 1.0]]
        rep = cli.run_solve(doc)
        assert rep["regime"] == "FullDisclosure"

    def test_public_and_mc_blocks(self):
        doc = explicit_doc()
        doc["analysis"] = {"public": True,
                           "monte_carlo": {"count": 50_000, "seed": 3}}
        rep = cli.run_solve(doc)
        assert "public" in rep and "monte_carlo" in rep
        assert rep["monte_carlo"]["ok"]
        assert rep["public"]["value"] <= rep["v_p"] + 1e-6


class TestSweep:
    def _spec(self, grid):
        return {
            "template": k4_doc(),
            "axes": [{"path": "environment.network.beta", "grid": grid}],
        }

    def test_rows_and_fields(self):
        rows, fields = cli.run_sweep(self._spec([-0.5, -0.1]))
        assert len(rows) == 2
        assert fields[:5] == ["scenario", "beta", "rho", "v_p", "gap"]
        assert "s_1" in fields and "N_4" in fields
        assert rows[0]["beta"] == -0.5
        assert all(r["error"] == "" for r in rows)

    def test_parallel_matches_serial(self):
        spec = self._spec([-0.5, -0.3, -0.1])
        serial, _ = cli.run_sweep(spec)
        parallel, _ = cli.run_sweep(spec, jobs=3)
        for a, b in zip(serial, parallel):
            assert a["beta"] == b["beta"]
            assert a["v_p"] == pytest.approx(b["v_p"], abs=1e-9)

    def test_error_row_captured(self):
        rows, fields = cli.run_sweep(self._spec([-0.5, 5.0]))
        assert rows[0]["error"] == ""
        assert rows[1]["error"] != ""
        assert "error" in fields


class TestMain:
    def _write(self, tmp_path, doc, fname="scn.json"):
        p = tmp_path / fname
        p.write_text(json.dumps(doc))
        return str(p)

    def test_solve_roundtrip_deterministic(self, tmp_path):
        scn = self._write(tmp_path, k4_doc())
        code = cli.main(["solve", "--scenario", scn, "--out", str(tmp_path)])
        assert code == 0
        out = tmp_path / "k4.report.json"
        first = out.read_text()
        assert cli.main(["solve", "--scenario", scn, "--out", str(tmp_path)]) == 0
        assert out.read_text() == first
        rep = json.loads(first)
        assert rep["certified"]

    def test_certify_stored_report(self, tmp_path):
        scn = self._write(tmp_path, k4_doc())
        assert cli.main(["solve", "--scenario", scn, "--out", str(tmp_path)]) == 0
        report = str(tmp_path / "k4.report.json")
        assert cli.main(["certify", "--scenario", report,
                         "--out", str(tmp_path)]) == 0
        res = json.loads((tmp_path / "k4.certify.json").read_text())
        assert res["verdict"]

    def test_certify_rejects_corrupted(self, tmp_path):
        scn = self._write(tmp_path, k4_doc())
        cli.main(["solve", "--scenario", scn, "--out", str(tmp_path)])
        rep = json.loads((tmp_path / "k4.report.json").read_text())
        rep["lambda"] = [v + 0.5 for v in rep["lambda"]]
        bad = self._write(tmp_path, rep, "bad.json")
        assert cli.main(["certify", "--scenario", bad,
                         "--out", str(tmp_path)]) == 1

    def test_sweep_csv(self, tmp_path):
        template = k4_doc()
        template["state"] = {"kind": "common"}
        spec = {"template": template,
                "axes": [{"path": "environment.network.beta",
                          "grid": [-0.5, -0.1]}]}
        scn = self._write(tmp_path, spec)
        assert cli.main(["sweep", "--scenario", scn, "--out", str(tmp_path),
                         "--jobs", "2"]) == 0
        with open(tmp_path / "k4.sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert rows[0]["regime"] == "Partial"
        assert float(rows[0]["s_1"]) == pytest.approx(0.25, abs=1e-5)
        assert rows[1]["regime"] == "FullDisclosure"

    def test_public_subcommand(self, tmp_path):
        scn = self._write(tmp_path, explicit_doc())
        assert cli.main(["public", "--scenario", scn,
                         "--out", str(tmp_path)]) == 0
        res = json.loads((tmp_path / "explicit.public.json").read_text())
        assert res["k_star"] >= 1

    def test_closedform_subcommand(self, tmp_path):
        doc = k4_doc()
        doc["state"] = {"kind": "common"}
        scn = self._write(tmp_path, doc)
        assert cli.main(["closedform", "--scenario", scn,
                         "--out", str(tmp_path)]) == 0
        res = json.loads((tmp_path / "k4.closedform.json").read_text())
        assert res["ok"]
        assert res["closed_form"]["s_i"] == pytest.approx(0.25)

    def test_sample_subcommand(self, tmp_path):
        doc = explicit_doc()
        doc["analysis"] = {"monte_carlo": {"count": 100_000}}
        scn = self._write(tmp_path, doc)
        assert cli.main(["sample", "--scenario", scn, "--out", str(tmp_path),
                         "--seed", "7"]) == 0
        res = json.loads((tmp_path / "explicit.sample.json").read_text())
        assert res["ok"]

    def test_bad_scenario_exit_2(self, tmp_path):
        doc = k4_doc()
        doc["schema_version"] = 2
        scn = self._write(tmp_path, doc)
        assert cli.main(["solve", "--scenario", scn,
                         "--out", str(tmp_path)]) == 2

    def test_console_script_installed(self):
        import shutil
        import subprocess
        exe = shutil.which("lqgid")
        assert exe is not None
        out = subprocess.run([exe, "--help"], capture_output=True, text=True)
        assert out.returncode == 0
        assert "solve" in out.stdout and "sweep" in out.stdout
