import hashlib
import json
import pathlib
import subprocess
import sys

import numpy as np
import pytest

CONFIGS_DIR = pathlib.Path(__file__).resolve().parent.parent / "configs"

from tetraform.cli import (
    ConfigError,
    cmd_simulate,
    cmd_sweep,
    cmd_verify,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
    main,
    recompute_summary_from_csv,
)

FAST_DOC = {
    "topology": {"type": "complete", "n": 4},
    "gain": {"type": "affine_cosine", "a": 1.0},
    "integrator": "euler",
    "dt": 1e-3,
    "T": 1.0,
    "stride": 100,
    "seed": 1,
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def file_sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


class TestConfigParsing:
    def test_round_trip(self, tmp_path):
        cfg = load_config(write_config(tmp_path, FAST_DOC))
        assert cfg.dt == 1e-3 and cfg.horizon == 1.0 and cfg.seed == 1
        assert config_to_dict(cfg) == FAST_DOC

    def test_string_gain_accepted(self, tmp_path):
        doc = dict(FAST_DOC, gain="affine_cosine a=1")
        cfg = load_config(write_config(tmp_path, doc))
        assert cfg.gain.a == 1.0

    def test_explicit_initial_state(self, tmp_path):
        from tetraform.control_laws import polar_tetrahedron

        doc = dict(FAST_DOC)
        doc.pop("seed")
        doc["initial_state"] = polar_tetrahedron().tolist()
        cfg = load_config(write_config(tmp_path, doc))
        assert cfg.seed is None and cfg.initial_state.shape == (4, 3)

    def test_malformed_json_diagnostic(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"topology": {,}')
        with pytest.raises(ConfigError, match="line 1"):
            load_config(str(path))

    def test_field_diagnostics(self):
        with pytest.raises(ConfigError, match="'dt'"):
            config_from_dict(dict(FAST_DOC, dt=-1.0))
        with pytest.raises(ConfigError, match="'gain'"):
            config_from_dict(dict(FAST_DOC, gain={"type": "nope"}))
        with pytest.raises(ConfigError, match="'stride'"):
            config_from_dict(dict(FAST_DOC, stride=0))
        with pytest.raises(ConfigError, match="unknown"):
            config_from_dict(dict(FAST_DOC, extra=1))
        missing = dict(FAST_DOC)
        missing.pop("topology")
        with pytest.raises(ConfigError, match="'topology'"):
            config_from_dict(missing)

    def test_hash_stability(self):
        h1 = config_hash(FAST_DOC)
        h2 = config_hash(json.loads(json.dumps(FAST_DOC)))
        assert h1 == h2 and len(h1) == 64


class TestSimulateCommand:
    def test_outputs_and_manifest(self, tmp_path):
        cfg_path = write_config(tmp_path, FAST_DOC)
        out = tmp_path / "out"
        manifest = cmd_simulate(cfg_path, str(out))
        assert (out / "trajectory.csv").exists()
        assert (out / "xi_trace.csv").exists()
        assert (out / "manifest.json").exists()
        on_disk = json.loads((out / "manifest.json").read_text())
        assert on_disk["config_hash"] == config_hash(FAST_DOC)
        assert on_disk["summary"] == manifest.summary

    def test_deterministic_byte_identical(self, tmp_path):
        cfg_path = write_config(tmp_path, FAST_DOC)
        cmd_simulate(cfg_path, str(tmp_path / "a"))
        cmd_simulate(cfg_path, str(tmp_path / "b"))
        assert file_sha(tmp_path / "a" / "trajectory.csv") == file_sha(
            tmp_path / "b" / "trajectory.csv"
        )
        assert file_sha(tmp_path / "a" / "xi_trace.csv") == file_sha(
            tmp_path / "b" / "xi_trace.csv"
        )

    def test_manifest_recomputable_from_csv(self, tmp_path):
        doc = dict(FAST_DOC, T=30.0)
        manifest = cmd_simulate(write_config(tmp_path, doc), str(tmp_path / "out"))
        redo = recompute_summary_from_csv(tmp_path / "out" / "trajectory.csv", doc)
        assert redo["final_formation_error"] == pytest.approx(
            manifest.summary["final_formation_error"], abs=1e-12
        )
        assert redo["converged"] == manifest.summary["converged"]
        assert manifest.summary["converged"]

    def test_rotating_manifest_reports_rate(self, tmp_path):
        doc = {
            "topology": {"type": "rotating_tetrahedron", "k": 1, "p": 1},
            "gain": {"type": "affine_cosine", "a": 1.0},
            "integrator": "rk4",
            "dt": 1e-3,
            "T": 50.0,
            "stride": 20,
            "seed": 1,
        }
        manifest = cmd_simulate(write_config(tmp_path, doc), str(tmp_path / "rot"))
        rate = manifest.summary["rotation_rate"]
        assert rate is not None
        assert abs(rate) == pytest.approx(np.sqrt(3.0) / 3.0, rel=1e-4)
        redo = recompute_summary_from_csv(tmp_path / "rot" / "trajectory.csv", doc)
        assert redo["rotation_rate"] == pytest.approx(rate, abs=1e-12)


class TestBundledConfigs:
    def test_stationary_cos_converges(self, tmp_path):
        manifest = cmd_simulate(str(CONFIGS_DIR / "stationary_cos.json"), str(tmp_path / "s"))
        assert manifest.summary["converged"]
        assert manifest.summary["final_formation_error"] < 1e-6

    def test_rotating_cos_rate_within_one_percent(self, tmp_path):
        manifest = cmd_simulate(str(CONFIGS_DIR / "rotating_cos.json"), str(tmp_path / "r"))
        rate = manifest.summary["rotation_rate"]
        assert rate is not None
        assert abs(abs(rate) - np.sqrt(3.0) / 3.0) / (np.sqrt(3.0) / 3.0) < 0.01

    def test_sweep_100_stationary_all_converge(self, tmp_path):
        summary = cmd_sweep(str(CONFIGS_DIR / "stationary_cos.json"), 100, str(tmp_path / "sw"))
        assert summary["convergence_fraction"] == 1.0
        assert summary["max_final_error"] < 1e-6
        assert summary["not_converged_seeds"] == []

    def test_sweep_100_exponential_all_converge(self, tmp_path):
        summary = cmd_sweep(str(CONFIGS_DIR / "stationary_exp.json"), 100, str(tmp_path / "swe"))
        assert summary["convergence_fraction"] == 1.0
        assert summary["max_final_error"] < 1e-6


class TestSweepCommand:
    def test_small_sweep(self, tmp_path):
        doc = dict(FAST_DOC, T=30.0)
        summary = cmd_sweep(write_config(tmp_path, doc), 3, str(tmp_path / "sweep"))
        assert summary["seeds"] == 3
        assert summary["converged"] == 3
        assert summary["convergence_fraction"] == 1.0
        assert summary["max_final_error"] < 1e-6
        assert (tmp_path / "sweep" / "sweep_summary.json").exists()
        for s in (1, 2, 3):
            assert (tmp_path / "sweep" / f"run_seed{s}.json").exists()

    def test_single_seed_matches_simulate(self, tmp_path):
        doc = dict(FAST_DOC, T=30.0)
        cfg_path = write_config(tmp_path, doc)
        manifest = cmd_simulate(cfg_path, str(tmp_path / "one"))
        summary = cmd_sweep(cfg_path, 1, str(tmp_path / "sw"))
        run0 = summary["runs"][0]
        assert run0["seed"] == 1
        assert run0["final_formation_error"] == manifest.summary["final_formation_error"]
        assert run0["converged"] == manifest.summary["converged"]

    def test_rejects_bad_seed_count(self, tmp_path):
        with pytest.raises(ConfigError):
            cmd_sweep(write_config(tmp_path, FAST_DOC), 0, str(tmp_path / "x"))


class TestVerifyCommand:
    def test_lambda_selector(self, tmp_path):
        report, code = cmd_verify("lambda", str(tmp_path / "report.json"))
        assert code == 0
        assert all(e["pass"] for e in report)
        loaded = json.loads((tmp_path / "report.json").read_text())
        assert loaded == report

    def test_report_entry_schema(self):
        report, code = cmd_verify("kkt", None)
        assert code == 0
        for e in report:
            assert set(e) == {"name", "analytic", "numeric", "error", "pass"}

    def test_failing_check_gives_exit_three(self, tmp_path, monkeypatch):
        from tetraform import analysis

        def doomed():
            return [{"name": "doomed", "analytic": 0.0, "numeric": 1.0, "error": 1.0, "pass": False}]

        monkeypatch.setitem(analysis.VERIFY_SUITES, "kkt", doomed)
        report, code = cmd_verify("kkt", None)
        assert code == 3
        assert [e["name"] for e in report if not e["pass"]] == ["doomed"]
        assert main(["verify", "--selector", "kkt"]) == 3

    def test_all_selector_aggregates_suites(self, tmp_path):
        report, code = cmd_verify("all", str(tmp_path / "all.json"))
        assert code == 0
        names = {e["name"] for e in report}
        assert {"lambda_spectrum_n6", "identity_random_ensembles", "kkt_global_minimum",
                "zeta_spectrum_affine_a1", "tetrahedron_invariance_weighted"} <= names


class TestMainEntry:
    def test_simulate_exit_zero(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, FAST_DOC)
        assert main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "o")]) == 0
        assert "final_error" in capsys.readouterr().out

    def test_malformed_config_exit_one(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
        assert "config error" in capsys.readouterr().err

    def test_nonpositive_dt_exit_one(self, tmp_path):
        cfg_path = write_config(tmp_path, dict(FAST_DOC, dt=0.0))
        assert main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "o")]) == 1

    def test_verify_exit_zero(self, tmp_path, capsys):
        assert main(["verify", "--selector", "identity"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "checks passed" in out

    def test_module_invocation(self, tmp_path):
        cfg_path = write_config(tmp_path, FAST_DOC)
        proc = subprocess.run(
            [sys.executable, "-m", "tetraform", "simulate", "--config", cfg_path,
             "--out", str(tmp_path / "mod")],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr

    def test_thread_cap_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TETRAFORM_THREADS", "1")
        doc = dict(FAST_DOC, T=2.0)
        summary = cmd_sweep(write_config(tmp_path, doc), 2, str(tmp_path / "tsw"))
        assert summary["seeds"] == 2
