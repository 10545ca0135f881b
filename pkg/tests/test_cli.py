"""Command-line interface: flags, exit codes, reproducible output."""

import json
import shlex

import numpy as np
import pytest

from gradsmooth.cli import EXIT_NONFINITE, EXIT_OK, EXIT_USAGE, main


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


ESTIMATE_ARGS = [
    "estimate", "--function", "heaviside", "--n", "1", "--x", "0",
    "--dist", "gaussian", "--gamma", "1", "--samples", "65536",
    "--strategy", "rqmc-cartesian", "--covariate", "loo", "--seed", "7",
]


class TestEstimate:
    def test_heaviside_gradient(self, capsys):
        code, out, _ = run_cli(capsys, ESTIMATE_ARGS)
        assert code == EXIT_OK
        payload = json.loads(out)
        assert payload["report"]["jacobian"][0][0] == pytest.approx(0.3989, abs=0.01)
        assert payload["report"]["dgamma"][0] == pytest.approx(0.0, abs=0.01)
        assert payload["config"]["seed"] == 7

    def test_cartesian_count_validation(self, capsys):
        argv = [
            "estimate", "--function", "argsort", "--n", "3", "--x", "0.1,0.2,0.3",
            "--dist", "gaussian", "--gamma", "1", "--samples", "1000",
            "--strategy", "qmc-cartesian", "--seed", "0",
        ]
        code, out, _ = run_cli(capsys, argv)
        assert code == EXIT_OK  # 1000 = 10^3
        bad = [a if a != "1000" else "1001" for a in argv]
        code, _, err = run_cli(capsys, bad)
        assert code == EXIT_USAGE
        assert "k^n" in err

    def test_invalid_distribution_listed(self, capsys):
        argv = [a if a != "gaussian" else "uniform" for a in ESTIMATE_ARGS]
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == EXIT_USAGE
        assert "gaussian" in capsys.readouterr().err

    def test_nonfinite_exit_code(self, capsys):
        argv = [
            "estimate", "--function", "staircase", "--x", "1e400",
            "--dist", "gaussian", "--gamma", "1", "--samples", "16",
            "--strategy", "mc", "--seed", "0",
        ]
        code, _, err = run_cli(capsys, argv)
        assert code == EXIT_NONFINITE
        assert "non-finite" in err

    def test_byte_identical_reruns(self, capsys):
        _, first, _ = run_cli(capsys, ESTIMATE_ARGS)
        _, second, _ = run_cli(capsys, ESTIMATE_ARGS)
        assert first == second

    def test_header_command_reproduces_output(self, capsys):
        _, out, _ = run_cli(capsys, ESTIMATE_ARGS)
        command = json.loads(out)["command"]
        assert command.startswith("gradsmooth estimate")
        _, replay, _ = run_cli(capsys, shlex.split(command)[1:])
        assert replay == out

    def test_csv_output(self, capsys):
        code, out, _ = run_cli(capsys, ESTIMATE_ARGS + ["--out", "csv"])
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0].startswith("#")
        data = [l for l in lines if not l.startswith("#")]
        assert data[0] == "quantity,index,value"
        assert any(l.startswith("jacobian,0_0,") for l in data)

    def test_median_and_covariance_blocks(self, capsys):
        argv = ESTIMATE_ARGS + ["--median-k", "5", "--with-cov"]
        _, out, _ = run_cli(capsys, argv)
        report = json.loads(out)["report"]
        assert "median_value" in report and report["median_k"] == 5
        assert "out_cov" in report and "d_out_cov_dscale" in report

    def test_scale_matrix_file(self, capsys, tmp_path):
        mat = tmp_path / "L.csv"
        mat.write_text("2.0,0.0\n0.5,1.0\n")
        argv = [
            "estimate", "--function", "heaviside", "--n", "2", "--x", "1,0",
            "--dist", "gaussian", "--scale-matrix", str(mat), "--samples", "4096",
            "--strategy", "mc", "--seed", "3",
        ]
        code, out, _ = run_cli(capsys, argv)
        assert code == EXIT_OK
        report = json.loads(out)["report"]
        assert "dscale" in report and "dgamma" not in report
        assert np.shape(report["dscale"]) == (1, 2, 2)

    def test_bad_scale_matrix(self, capsys, tmp_path):
        mat = tmp_path / "L.csv"
        mat.write_text("1.0,0.5\n0.0,1.0\n")
        argv = [
            "estimate", "--function", "heaviside", "--n", "2", "--x", "1,0",
            "--dist", "gaussian", "--scale-matrix", str(mat), "--samples", "64",
            "--strategy", "mc", "--seed", "3",
        ]
        code, _, err = run_cli(capsys, argv)
        assert code == EXIT_USAGE and "triangular" in err

    def test_grid_input(self, capsys, tmp_path):
        grid = tmp_path / "grid.csv"
        grid.write_text("0.5,0.9\n0.4,0.7\n")
        argv = [
            "estimate", "--function", "shortest-path", "--grid", str(grid),
            "--dist", "gaussian", "--gamma", "0.1", "--samples", "256",
            "--strategy", "mc", "--covariate", "fx", "--seed", "1",
        ]
        code, out, _ = run_cli(capsys, argv)
        assert code == EXIT_OK
        assert np.shape(json.loads(out)["report"]["jacobian"]) == (4, 4)


SPEC_TEXT = """
function = argsort
n = 2
distributions = gaussian, gumbel
strategies = mc
covariates = none
antithetic = false, true
samples = 64
trials = 2
gamma = 1.0
master_seed = 3
oracle_factor = 8
"""


class TestBench:
    def test_writes_csv(self, capsys, tmp_path):
        spec = tmp_path / "spec.txt"
        spec.write_text(SPEC_TEXT)
        out_csv = tmp_path / "results.csv"
        code, _, err = run_cli(capsys, ["bench", str(spec), "--out", str(out_csv)])
        assert code == EXIT_OK
        lines = out_csv.read_text().splitlines()
        data = [l for l in lines if not l.startswith("#")]
        assert len(data) == 1 + 4  # header + 2 dists x 2 antithetic
        assert any("—" in l for l in data)  # gumbel antithetic dashes
        assert "mean_l2" in err or "wrote" in err

    def test_deterministic_files(self, capsys, tmp_path):
        spec = tmp_path / "spec.txt"
        spec.write_text(SPEC_TEXT)
        out_csv = tmp_path / "results.csv"
        run_cli(capsys, ["bench", str(spec), "--out", str(out_csv), "--quiet"])
        first = out_csv.read_bytes()
        run_cli(capsys, ["bench", str(spec), "--out", str(out_csv), "--quiet"])
        assert out_csv.read_bytes() == first

    def test_malformed_spec(self, capsys, tmp_path):
        spec = tmp_path / "spec.txt"
        spec.write_text("function = argsort\nn = 2\ndistributions =\nstrategies = mc\n")
        code, _, err = run_cli(capsys, ["bench", str(spec)])
        assert code == EXIT_USAGE and "distribution" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, ["bench", str(tmp_path / "nope.txt")])
        assert code == EXIT_USAGE


class TestOptimize:
    BASE = [
        "optimize", "--function", "staircase-abs", "--x0", "5.3",
        "--dist", "gaussian", "--gamma", "1", "--samples", "64",
        "--strategy", "rqmc-cartesian", "--covariate", "loo",
        "--steps", "5", "--lr", "0.5", "--seed", "4",
    ]

    def test_zero_steps(self, capsys):
        argv = [a if a != "5" else "0" for a in self.BASE]
        code, out, _ = run_cli(capsys, argv)
        assert code == EXIT_OK
        data = [l for l in out.splitlines() if not l.startswith("#")]
        assert len(data) == 2  # header + x0 row
        assert data[1].startswith("0,5.3")

    def test_trajectory_file_and_replay(self, capsys, tmp_path):
        out_csv = tmp_path / "traj.csv"
        code, _, _ = run_cli(capsys, self.BASE + ["--out", str(out_csv)])
        assert code == EXIT_OK
        text = out_csv.read_text()
        command = next(l for l in text.splitlines() if l.startswith("# command:"))
        replay_args = shlex.split(command.removeprefix("# command:"))[1:]
        code, out, _ = run_cli(capsys, replay_args)
        assert code == EXIT_OK
        assert out == text

    def test_vector_function_rejected(self, capsys):
        argv = [a if a != "staircase-abs" else "argsort" for a in self.BASE]
        argv[argv.index("--x0") + 1] = "0.1,0.2"
        code, _, err = run_cli(capsys, argv)
        assert code == EXIT_USAGE and "scalar objective" in err


class TestReport:
    def test_bench_figure(self, capsys, tmp_path):
        spec = tmp_path / "spec.txt"
        spec.write_text(SPEC_TEXT)
        out_csv = tmp_path / "results.csv"
        run_cli(capsys, ["bench", str(spec), "--out", str(out_csv), "--quiet"])
        code, _, err = run_cli(capsys, ["report", str(out_csv)])
        assert code == EXIT_OK
        assert (tmp_path / "results.png").exists()

    def test_trajectory_figure(self, capsys, tmp_path):
        out_csv = tmp_path / "traj.csv"
        run_cli(capsys, TestOptimize.BASE + ["--out", str(out_csv)])
        fig = tmp_path / "fig.png"
        code, _, _ = run_cli(capsys, ["report", str(out_csv), "--out", str(fig)])
        assert code == EXIT_OK and fig.exists()

    def test_bench_figures_flag(self, capsys, tmp_path):
        spec = tmp_path / "spec.txt"
        spec.write_text(SPEC_TEXT)
        out_csv = tmp_path / "results.csv"
        fig = tmp_path / "hm.png"
        code, _, _ = run_cli(
            capsys, ["bench", str(spec), "--out", str(out_csv), "--figures", str(fig), "--quiet"]
        )
        assert code == EXIT_OK and fig.exists()
