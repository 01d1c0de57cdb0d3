"""End-to-end CLI behavior: configs, outputs, determinism, exit codes."""

import csv
import textwrap

import numpy as np
import pytest

from redlab import save_pgm, synthetic_scene
from redlab.cli import main


@pytest.fixture(autouse=True)
def isolated_output_env(monkeypatch):
    monkeypatch.delenv("REDLAB_OUT", raising=False)


def write_config(directory, text, name="exp.ini"):
    path = directory / name
    path.write_text(textwrap.dedent(text))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestListAndValidate:
    def test_list_experiments_prints_the_registry(self, capsys):
        assert main(["list-experiments"]) == 0
        out = capsys.readouterr().out
        for name in ["jacobian-report", "gradient-report", "lh-report",
                     "trajectory", "cost-slice", "deblur", "tweedie-check",
                     "equilibrium-check"]:
            assert name in out

    def test_validate_accepts_a_good_config_without_writing(self, tmp_path, capsys):
        out_dir = tmp_path / "results"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = trajectory
            seed = 1
            output = {out_dir}

            [problem]
            size = 16
            blur = 3

            [solver]
            method = fp
            iterations = 10
        """)
        assert main(["validate", config]) == 0
        assert "config ok: experiment 'trajectory'" in capsys.readouterr().out
        assert not out_dir.exists()

    def test_unknown_experiment_lists_the_registry(self, tmp_path, capsys):
        config = write_config(tmp_path, """\
            [experiment]
            name = warp-drive
            seed = 1
        """)
        assert main(["validate", config]) == 2
        err = capsys.readouterr().err
        assert "warp-drive" in err
        assert "tweedie-check" in err

    def test_missing_seed_is_rejected(self, tmp_path, capsys):
        config = write_config(tmp_path, """\
            [experiment]
            name = tweedie-check
        """)
        assert main(["validate", config]) == 2
        assert "seed" in capsys.readouterr().err

    def test_unknown_key_is_rejected(self, tmp_path, capsys):
        config = write_config(tmp_path, """\
            [experiment]
            name = tweedie-check
            seed = 1

            [solver]
            steps = 5
        """)
        assert main(["validate", config]) == 2

    def test_unknown_section_is_rejected(self, tmp_path):
        config = write_config(tmp_path, """\
            [experiment]
            name = tweedie-check
            seed = 1

            [extras]
            x = 1
        """)
        assert main(["validate", config]) == 2

    def test_default_section_is_rejected(self, tmp_path):
        config = write_config(tmp_path, """\
            [DEFAULT]
            seed = 1

            [experiment]
            name = tweedie-check
            seed = 1
        """)
        assert main(["validate", config]) == 2

    def test_malformed_syntax_is_a_config_error(self, tmp_path):
        config = write_config(tmp_path, """\
            [experiment
            name = tweedie-check
        """)
        assert main(["validate", config]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.ini")]) == 2

    def test_both_patch_sources_rejected(self, tmp_path):
        config = write_config(tmp_path, """\
            [experiment]
            name = jacobian-report
            seed = 1
            patches = 2
            images = a.pgm
        """)
        assert main(["validate", config]) == 2


class TestJacobianReport:
    def run_report(self, tmp_path, out_name):
        out_dir = tmp_path / out_name
        config = write_config(tmp_path, f"""\
            [experiment]
            name = jacobian-report
            seed = 7
            patches = 2
            denoisers = tdt, median
            output = {out_dir}
        """, name=f"{out_name}.ini")
        assert main(["run", config]) == 0
        return out_dir

    def test_outputs_and_example_bounds(self, tmp_path, capsys):
        """The wavelet denoiser is numerically symmetric; the median filter
        is far from it."""
        out_dir = self.run_report(tmp_path, "ja")
        out = capsys.readouterr().out
        assert "wrote" in out
        rows_tdt = read_csv(out_dir / "jacobian-report_tdt.csv")
        rows_med = read_csv(out_dir / "jacobian-report_median.csv")
        header = ["image", "denoiser", "e_J", "e_grad_romano", "e_grad_lh",
                  "e_grad_true", "e_LH1", "e_LH2"]
        assert rows_tdt[0] == header
        assert len(rows_tdt) == 3
        assert rows_tdt[1][0] == "patch00"
        assert rows_tdt[1][1] == "tdt"
        for row in rows_tdt[1:]:
            assert float(row[2]) <= 1e-9
            assert row[3] == ""  # metrics outside this report stay empty
        for row in rows_med[1:]:
            assert float(row[2]) >= 0.5
        assert (out_dir / "jacobian-report_summary.txt").exists()

    def test_reruns_are_byte_identical(self, tmp_path):
        a = self.run_report(tmp_path, "first")
        b = self.run_report(tmp_path, "second")
        for name in ["jacobian-report_tdt.csv", "jacobian-report_median.csv",
                     "jacobian-report_summary.txt"]:
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_pgm_input_uses_the_file_stem(self, tmp_path):
        save_pgm(synthetic_scene(0, size=16), str(tmp_path / "camera.pgm"))
        out_dir = tmp_path / "img_out"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = jacobian-report
            seed = 3
            images = camera.pgm
            patch_size = 8
            denoisers = median
            output = {out_dir}
        """)
        assert main(["run", config]) == 0
        rows = read_csv(out_dir / "jacobian-report_median.csv")
        assert rows[1][0] == "camera"


class TestOtherReports:
    def test_gradient_report_fills_gradient_columns(self, tmp_path):
        out_dir = tmp_path / "grad"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = gradient-report
            seed = 5
            patches = 1
            denoisers = tdt
            output = {out_dir}
        """)
        assert main(["run", config]) == 0
        rows = read_csv(out_dir / "gradient-report_tdt.csv")
        row = rows[1]
        assert row[2] == ""  # e_J not part of this report
        assert float(row[3]) > 1e-3    # residual rule misses for tdt
        assert float(row[5]) <= 1e-8   # product rule tracks the probe
        assert row[6] == row[7] == ""

    def test_lh_report_separates_median_from_tdt(self, tmp_path):
        out_dir = tmp_path / "lh"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = lh-report
            seed = 5
            patches = 1
            noise_variance = 625
            denoisers = tdt, median
            output = {out_dir}

            [tdt]
            threshold = 25
        """)
        assert main(["run", config]) == 0
        tdt = read_csv(out_dir / "lh-report_tdt.csv")[1]
        med = read_csv(out_dir / "lh-report_median.csv")[1]
        assert float(med[6]) == 0.0
        assert float(med[7]) <= 1e-12
        assert float(tdt[7]) >= 1e-4


class TestTrajectory:
    def test_csv_log_with_psnr(self, tmp_path):
        out_dir = tmp_path / "traj"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = trajectory
            seed = 2
            output = {out_dir}

            [problem]
            size = 16
            blur = 3

            [denoiser]
            kind = median

            [solver]
            method = sd
            iterations = 25
        """)
        assert main(["run", config]) == 0
        rows = read_csv(out_dir / "trajectory_median.csv")
        assert rows[0] == ["iter", "psnr_db", "cost_red", "fp_residual",
                           "update_dist", "time_s"]
        assert len(rows) == 26
        assert rows[1][0] == "1"
        assert float(rows[1][1]) > 0.0  # synthetic truth enables psnr
        assert float(rows[-1][3]) < float(rows[1][3])

    def test_divergent_run_exits_three_without_outputs(self, tmp_path, capsys):
        out_dir = tmp_path / "boom"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = trajectory
            seed = 2
            output = {out_dir}

            [problem]
            size = 16
            blur = 1

            [solver]
            method = sd
            iterations = 50
            sd_step = 100000
        """)
        assert main(["run", config]) == 3
        assert "error" in capsys.readouterr().err
        assert not out_dir.exists()


class TestDeblur:
    def test_seven_solver_logs_with_oracle_gap(self, tmp_path):
        out_dir = tmp_path / "deb"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = deblur
            seed = 4
            output = {out_dir}

            [problem]
            size = 16
            blur = 3

            [solver]
            iterations = 40
        """)
        assert main(["run", config]) == 0
        solvers = ["sd", "admm", "admm_i1", "fp", "pg", "dpg", "apg"]
        for name in solvers:
            rows = read_csv(out_dir / f"deblur_linear_{name}.csv")
            assert rows[0] == ["iter", "psnr_db", "cost_red", "fp_residual",
                               "update_dist", "time_s", "oracle_gap"]
            assert len(rows) == 41
        fp_rows = read_csv(out_dir / "deblur_linear_fp.csv")
        assert float(fp_rows[-1][6]) < float(fp_rows[1][6])
        assert float(fp_rows[-1][6]) < 1e-6

    def test_nonlinear_denoiser_is_rejected_at_plan_time(self, tmp_path, capsys):
        out_dir = tmp_path / "never"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = deblur
            seed = 4
            output = {out_dir}

            [denoiser]
            kind = tdt
        """)
        assert main(["run", config]) == 2
        assert "linear" in capsys.readouterr().err
        assert not out_dir.exists()


class TestTweedieCheck:
    def test_all_instances_within_tolerance(self, tmp_path):
        out_dir = tmp_path / "tw"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = tweedie-check
            seed = 6
            instances = 5
            output = {out_dir}
        """)
        assert main(["run", config]) == 0
        rows = read_csv(out_dir / "tweedie-check_gmm.csv")
        assert rows[0] == ["instance", "relative_error"]
        assert len(rows) == 6
        assert all(float(r[1]) <= 1e-6 for r in rows[1:])


class TestEquilibriumCheck:
    def test_reports_consensus_and_mirror_quantities(self, tmp_path):
        out_dir = tmp_path / "eq"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = equilibrium-check
            seed = 9
            denoising_variance = 100
            output = {out_dir}

            [problem]
            size = 16
            blur = 3

            [denoiser]
            kind = tdt
            threshold = 5.0

            [solver]
            iterations = 400
        """)
        assert main(["run", config]) == 0
        rows = read_csv(out_dir / "equilibrium-check_tdt.csv")
        values = {name: value for name, value in rows[1:]}
        assert set(values) == {"consensus_residual_f", "consensus_residual_g",
                               "denoising_mirror_gap",
                               "pnp_matches_denoiser_output"}
        assert values["pnp_matches_denoiser_output"] == "1"
        assert float(values["consensus_residual_g"]) <= 1e-8
        assert float(values["denoising_mirror_gap"]) <= 1e-8


class TestCostSlice:
    def test_grid_csv_around_a_fixed_point(self, tmp_path):
        out_dir = tmp_path / "slice"
        config = write_config(tmp_path, f"""\
            [experiment]
            name = cost-slice
            seed = 8
            output = {out_dir}

            [problem]
            size = 8
            blur = 1

            [denoiser]
            kind = tdt
            threshold = 1.0

            [solver]
            method = fp
            iterations = 60

            [slice]
            radius = 1.0
            points = 3
        """)
        assert main(["run", config]) == 0
        rows = read_csv(out_dir / "cost-slice_tdt.csv")
        assert rows[0] == ["alpha", "beta", "cost_red", "grad_e1", "grad_e2"]
        assert len(rows) == 10
        alphas = sorted({float(r[0]) for r in rows[1:]})
        betas = sorted({float(r[1]) for r in rows[1:]})
        assert alphas == [-1.0, 0.0, 1.0]
        assert betas == [-1.0, 0.0, 1.0]
        costs = [float(r[2]) for r in rows[1:]]
        assert all(np.isfinite(c) and c > 0.0 for c in costs)


class TestOutputRouting:
    def test_env_override_wins_over_config_output(self, tmp_path, monkeypatch):
        config_dir = tmp_path / "cfg_out"
        env_dir = tmp_path / "env_out"
        monkeypatch.setenv("REDLAB_OUT", str(env_dir))
        config = write_config(tmp_path, f"""\
            [experiment]
            name = tweedie-check
            seed = 1
            instances = 2
            output = {config_dir}
        """)
        assert main(["run", config]) == 0
        assert env_dir.is_dir()
        assert (env_dir / "tweedie-check_gmm.csv").exists()
        assert not config_dir.exists()

    def test_relative_output_resolves_against_the_working_directory(
            self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        config = write_config(tmp_path, """\
            [experiment]
            name = tweedie-check
            seed = 1
            instances = 2
            output = rel_results
        """)
        assert main(["run", config]) == 0
        assert (tmp_path / "rel_results" / "tweedie-check_summary.txt").exists()
