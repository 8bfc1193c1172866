import json

import numpy as np
import pytest

import geopath.density as density_mod
import geopath.geometry as geometry_mod
from geopath.cli import main as cli_main
from geopath.experiments import (
    ConfigError,
    ExperimentConfig,
    report_to_json,
    run_convergence,
    run_ui_diagnostic,
    run_verify,
)
from geopath.geometry import ManifoldSpec


def small_cfg(**kw):
    base = dict(
        manifold=ManifoldSpec("sphere", 2, 6.0),
        n_list=[4, 8],
        n_fine=32,
        samples=64,
        seed=5,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_curvature_gate(self):
        cfg = small_cfg(manifold=ManifoldSpec("sphere", 2, 1.0))  # kappa = 1 too big
        with pytest.raises(ConfigError):
            run_convergence(cfg)

    def test_divisibility_gate(self):
        cfg = small_cfg(n_list=[5])
        with pytest.raises(ConfigError):
            run_convergence(cfg)

    def test_flat_dict_roundtrip(self):
        flat = {
            "manifold.kind": "sphere",
            "manifold.dim": 2,
            "manifold.radius": 6.0,
            "experiment.n_list": "4,8",
            "sampling.samples": 10,
            "sampling.seed": 3,
        }
        cfg = ExperimentConfig.from_flat_dict(flat)
        assert cfg.n_list == [4, 8] and cfg.seed == 3
        echo = cfg.echo()
        assert echo["manifold.radius"] == 6.0


class TestConvergence:
    def test_determinism(self):
        r1 = run_convergence(small_cfg())
        r2 = run_convergence(small_cfg())
        j1 = json.loads(report_to_json(r1))
        j2 = json.loads(report_to_json(r2))
        j1.pop("elapsed_seconds"), j2.pop("elapsed_seconds")
        assert json.dumps(j1, sort_keys=True) == json.dumps(j2, sort_keys=True)
        assert r1.to_csv() == r2.to_csv()

    def test_seed_changes_output(self):
        r1 = run_convergence(small_cfg())
        r2 = run_convergence(small_cfg(seed=6))
        assert r1.rows[0].lhs != r2.rows[0].lhs

    def test_flat_identically_zero_diffs(self):
        cfg = small_cfg(manifold=ManifoldSpec("euclidean", 2))
        report = run_convergence(cfg)
        for row in report.rows:
            assert abs(row.diff) <= 1e-12
            assert row.diff_se <= 1e-12
            assert row.guard_fail_frac == 0.0

    def test_guard_fraction_reported(self):
        report = run_convergence(small_cfg(samples=256))
        fracs = [row.guard_fail_frac for row in report.rows]
        assert fracs[0] >= fracs[-1]  # coarser grids fail more often
        assert all(0.0 <= f < 1.0 for f in fracs)

    def test_other_test_functions(self):
        for name in ("constant_one", "endpoint_coordinate"):
            rep = run_convergence(small_cfg(test_function=name, samples=64))
            assert all(np.isfinite(r.lhs) and np.isfinite(r.diff) for r in rep.rows)
        rep_one = run_convergence(small_cfg(test_function="constant_one", samples=64))
        # with f == 1 the coupled difference reduces to the density gap
        assert abs(rep_one.rows[-1].diff) < 5e-3


class TestUiDiagnostic:
    def test_flat_moments_one(self):
        cfg = small_cfg(manifold=ManifoldSpec("euclidean", 2), n_list=[4, 8, 16])
        rep = run_ui_diagnostic(cfg)
        for row in rep.rows:
            assert row.moment == pytest.approx(1.0, abs=1e-12)
            assert row.bound_violations == 0
        assert rep.plateau_stat == pytest.approx(0.0, abs=1e-12)

    def test_sphere_moments(self):
        cfg = small_cfg(n_list=[4, 8, 16], samples=128)
        rep = run_ui_diagnostic(cfg)
        for row in rep.rows:
            assert np.isfinite(row.moment)
            assert row.bound_violations == 0
        assert rep.thresholds["theorem_bound"] == pytest.approx(3.0 / 34.0)

    def test_p_gate(self):
        with pytest.raises(ConfigError):
            run_ui_diagnostic(small_cfg(p=1.0))

    def test_batched_envelope_matches_library(self):
        from geopath.density import segments_for_driver, ui_bound
        from geopath.development import DrivingPath, PartitionGrid
        from geopath.experiments import _envelope_log_bound

        rng = np.random.default_rng(7)
        m = ManifoldSpec("sphere", 2, 2.0)
        incr = rng.standard_normal((3, 6, 2)) * 0.4
        batched = _envelope_log_bound(np.linalg.norm(incr, axis=2), m.sectional_bound, m.dim)
        for j in range(3):
            omega = DrivingPath(PartitionGrid(6), incr[j])
            rep = ui_bound(segments_for_driver(m, omega), omega, m.sectional_bound)
            assert batched[j] == pytest.approx(rep.log_bound, abs=1e-12)


class TestVerify:
    def test_all_pass(self):
        summary = run_verify()
        failed = [c.name for c in summary.checks if not c.ok]
        assert summary.ok, f"failed: {failed}"

    def test_sign_flip_mutation_caught(self, monkeypatch):
        orig = geometry_mod.tidal_operator
        monkeypatch.setattr(geometry_mod, "tidal_operator", lambda c, v: -orig(c, v))
        summary = run_verify(names=["tidal_sign_and_margins"])
        assert not summary.ok

    def test_wrong_cov_coefficient_caught(self, monkeypatch):
        monkeypatch.setattr(density_mod, "C_DIAG_COEF", 1.0 / 44.0)
        summary = run_verify(names=["factorization_identity"])
        assert not summary.ok


class TestCli:
    def test_verify_exit_code(self, tmp_path):
        assert cli_main(["verify", "--out", str(tmp_path)]) == 0
        payload = json.loads((tmp_path / "verify.json").read_text())
        assert payload["ok"] and len(payload["checks"]) >= 10

    def test_rho_jsonl(self, tmp_path, capsys):
        rc = cli_main([
            "rho", "--manifold", "sphere:2:6.0", "--n", "4", "--n-fine", "16",
            "--samples", "3", "--seed", "1", "--out", str(tmp_path),
        ])
        assert rc == 0
        lines = (tmp_path / "rho.jsonl").read_text().strip().splitlines()
        assert len(lines) == 3
        rec = json.loads(lines[0])
        assert {"log_rho_f", "log_rho_q", "log_detV2", "log_detIU", "log_detIX"} <= rec.keys()

    def test_fredholm_json(self, tmp_path):
        rc = cli_main([
            "fredholm", "--gamma-const", "1.2", "--dim", "2", "--nodes", "32",
            "--kmax", "10", "--out", str(tmp_path),
        ])
        assert rc == 0
        payload = json.loads((tmp_path / "fredholm.json").read_text())
        assert abs(payload["log_det"] - payload["diagnostics"]["constant_oracle"]) < 1e-8

    def test_converge_outputs(self, tmp_path):
        cfg = {
            "manifold.kind": "sphere",
            "manifold.dim": 2,
            "manifold.radius": 6.0,
            "experiment.n_list": "4,8",
            "sampling.n_fine": 32,
            "sampling.samples": 16,
            "sampling.seed": 2,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        rc = cli_main(["converge", "--config", str(cfg_path), "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "report.json").exists()
        csv = (tmp_path / "convergence.csv").read_text()
        assert csv.startswith("n,lhs,lhs_se,diff,diff_se,guard_fail_frac")

    def test_ui_diag_output(self, tmp_path):
        cfg = {
            "manifold.kind": "sphere",
            "manifold.dim": 2,
            "manifold.radius": 6.0,
            "experiment.n_list": "4,8,16",
            "sampling.n_fine": 32,
            "sampling.samples": 16,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        assert cli_main(["ui-diag", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
        payload = json.loads((tmp_path / "report.json").read_text())
        assert len(payload["rows"]) == 3
