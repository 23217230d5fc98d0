import json

import numpy as np
import pytest

from oqn import harness
from oqn.cli import main as cli_main
from oqn.driver import compute_hyperparams
from oqn.errors import DimTooLarge, UnknownLevel
from oqn.problems import catalog, quadratic_from_matrix

from conftest import random_symmetric

CONFIG = """
# sample experiment
problem=cosine_mixture
dim=4
method=oqn
budget=60
seed=7
p_fail=0.01
audit=full
"""


class TestConfig:
    def test_parse_defaults_and_overrides(self):
        cfg = harness.parse_config(CONFIG)
        assert cfg.problem == "cosine_mixture"
        assert cfg.dim == 4
        assert cfg.budget == 60
        assert cfg.audit == "full"

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            harness.parse_config("problem=quadratic\nwhatever=3\n")

    def test_manual_params_block(self):
        text = ("problem=quadratic\ndim=4\nparams=manual\nd_radius=0.5\n"
                "eta=0.2\nt_len=4\nk_eps=3\ndelta_tr=1e-5\n")
        cfg = harness.parse_config(text)
        assert cfg.manual.m_total == 12
        assert cfg.manual.d_radius == 0.5

    def test_manual_params_missing_key(self):
        with pytest.raises(ValueError, match="params=manual needs"):
            harness.parse_config("params=manual\nd_radius=0.5\n")

    def test_env_seed_override(self, monkeypatch):
        cfg = harness.parse_config("seed=3\n")
        monkeypatch.setenv("OQN_SEED", "99")
        assert harness.effective_seed(cfg) == 99
        monkeypatch.delenv("OQN_SEED")
        assert harness.effective_seed(cfg) == 3


class TestDeterminism:
    def test_identical_config_gives_identical_outputs(self, tmp_path):
        cfg = harness.parse_config(CONFIG)
        outputs = []
        for tag in ("a", "b"):
            cfg.out_csv = str(tmp_path / f"{tag}.csv")
            cfg.out_report = str(tmp_path / f"{tag}.json")
            exp = harness.run_experiment(cfg)
            harness.write_outputs(exp)
            outputs.append((open(cfg.out_csv, "rb").read(),
                            open(cfg.out_report, "rb").read()))
        assert outputs[0] == outputs[1]

    def test_csv_row_count_equals_episodes(self):
        cfg = harness.parse_config(CONFIG)
        exp = harness.run_experiment(cfg)
        assert len(exp.csv_rows) == exp.report.params.k_eps
        assert len(exp.csv_rows) == len(exp.report.episodes)


class TestBaselineGd:
    def test_full_step_solves_identity_quadratic(self):
        spec = quadratic_from_matrix(np.eye(1), x0=np.array([1.0]))
        out = harness.baseline_gd(spec, 1, step_size=1.0)
        assert out.x_final[0] == pytest.approx(0.0)

    def test_half_step_geometric_decay(self):
        spec = quadratic_from_matrix(np.eye(1), x0=np.array([1.0]))
        out = harness.baseline_gd(spec, 10, step_size=0.5)
        assert out.x_final[0] == pytest.approx(2.0**-10)
        np.testing.assert_allclose(out.grad_norms, [2.0**-k for k in range(10)])

    def test_descent_on_cosine(self):
        spec = catalog("cosine_mixture", 5)
        out = harness.baseline_gd(spec, 60)
        norms = out.grad_norms
        assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))
        assert out.gradients == 60


class TestBruteTr:
    def test_trivial(self):
        np.testing.assert_allclose(brute := harness.brute_tr(np.eye(2), np.zeros(2), 1.0), 0.0)

    def test_negative_curvature_matches_grid_search(self):
        # oracle: dense grid over the disk at resolution 1e-3
        a = np.diag([-1.0, 1.0])
        b = np.zeros(2)
        x = harness.brute_tr(a, b, 1.0)
        assert harness.tr_objective(a, b, x) == pytest.approx(-0.5, abs=1e-10)
        grid = np.linspace(-1, 1, 2001)
        best = min(
            harness.tr_objective(a, b, np.array([u, v]))
            for u in grid for v in (0.0, 1.0, -1.0)
            if u * u + v * v <= 1.0 + 1e-12
        )
        assert harness.tr_objective(a, b, x) <= best + 1e-6

    def test_boundary_kkt_instance(self):
        x = harness.brute_tr(np.diag([2.0, 1.0]), np.array([-4.0, 0.0]), 1.0)
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-10)

    def test_interior_instance(self, np_rng):
        m = random_symmetric(np_rng, 5)
        a = m @ m.T + np.eye(5)
        b = 0.1 * np_rng.standard_normal(5)
        x = harness.brute_tr(a, b, 10.0)
        np.testing.assert_allclose(x, np.linalg.solve(a, -b), atol=1e-9)

    def test_hard_case(self):
        # b orthogonal to the bottom eigenspace: solution needs the extra
        # minimum-eigenvector component to reach the boundary
        a = np.diag([-2.0, 1.0])
        b = np.array([0.0, 0.5])
        x = harness.brute_tr(a, b, 1.0)
        assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-9)
        grid = np.linspace(-1, 1, 4001)
        best = min(
            harness.tr_objective(a, b, np.array([u, np.sqrt(max(0, 1 - u * u)) * sgn]))
            for u in grid for sgn in (1.0, -1.0)
        )
        assert harness.tr_objective(a, b, x) <= best + 1e-6

    def test_dim_cap(self):
        with pytest.raises(DimTooLarge):
            harness.brute_tr(np.eye(25), np.zeros(25), 1.0)


class TestVerifySuite:
    def test_unknown_level(self):
        with pytest.raises(UnknownLevel):
            harness.verify_suite("bogus")

    def test_quick_level_all_pass(self):
        checks = harness.verify_suite("quick")
        failed = [c.name for c in checks if not c.passed]
        assert not failed, failed
        assert len(checks) >= 25


class TestDebugDump:
    def test_lower_triangle_row_major(self):
        from oqn.linops import SymOperator

        mat = np.array([[1.0, 2.0], [2.0, 5.0]])
        doc = harness.debug_dump_operator(SymOperator(mat))
        assert doc["dim"] == 2
        assert doc["lower_triangle_row_major"] == [1.0, 2.0, 5.0]


class TestCli:
    def test_dump_params_matches_library(self, capsys):
        rc = cli_main(["dump-params", "cosine_mixture:d=4", "1000"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        params = compute_hyperparams(catalog("cosine_mixture", 4), 1000)
        assert doc["d_radius"] == pytest.approx(params.d_radius, rel=1e-15)
        assert doc["t_len"] == params.t_len
        assert doc["k_eps"] == params.k_eps

    def test_unknown_subcommand_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli_main(["frobnicate"])
        assert exc.value.code == 1
        assert "usage" in capsys.readouterr().err

    def test_no_subcommand_is_usage_error(self):
        assert cli_main([]) == 1

    @pytest.mark.parametrize("problem,dim", [("coupled_trig", 6), ("rosenbrock_local", 4)])
    def test_run_report_serializes_for_every_family(self, problem, dim, tmp_path, capsys):
        # regression: numpy scalar constants must not leak into the report
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text(
            f"problem={problem}\ndim={dim}\nbudget=40\nseed=1\naudit=full\n"
            f"out_report={tmp_path/'r.json'}\n")
        rc = cli_main(["run", str(cfg_path)])
        capsys.readouterr()
        assert rc in (0, 2)  # parses, runs, serializes; audits decide the code
        doc = json.loads((tmp_path / "r.json").read_text())
        assert isinstance(doc["audits"]["all_ok"], bool)

    def test_run_roundtrip(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text(CONFIG + f"out_csv={tmp_path/'o.csv'}\n"
                            f"out_report={tmp_path/'o.json'}\n")
        rc = cli_main(["run", str(cfg_path)])
        assert rc == 0
        csv_lines = (tmp_path / "o.csv").read_text().splitlines()
        assert csv_lines[0] == harness.CSV_HEADER
        doc = json.loads((tmp_path / "o.json").read_text())
        assert doc["audits"]["all_ok"] is True
        assert "wall_time_s" not in json.dumps(doc)

    def test_certificate_failure_maps_to_exit_2(self, monkeypatch, tmp_path):
        from oqn.errors import CertificateFailure

        def boom(cfg):
            raise CertificateFailure("synthetic")

        monkeypatch.setattr(harness, "run_experiment", boom)
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text(CONFIG)
        assert cli_main(["run", str(cfg_path)]) == 2

    def test_bench_smoke(self, tmp_path, capsys):
        cfg_path = tmp_path / "bench.txt"
        cfg_path.write_text(
            "problem=cosine_mixture\ndim=4\nbudgets=40,80\nseeds=0\n"
            "methods=oqn\naudit=off\n")
        rc = cli_main(["bench", str(cfg_path)])
        assert rc == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("method,budget,seed")
        assert len(out) == 3
