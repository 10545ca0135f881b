"""Benchmark harness: reproducibility, invalid cells, spec parsing, CSV."""

import pytest

from gradsmooth.bench import (
    CSV_COLUMNS,
    INVALID_CELL,
    BenchSpec,
    format_csv,
    parse_spec,
    read_csv,
    run_bench,
    write_csv,
)


def tiny_spec(**overrides):
    base = dict(
        function="argsort",
        n=2,
        distributions=("gaussian",),
        strategies=("mc",),
        covariates=("none",),
        antithetic=(False,),
        samples=64,
        trials=3,
        gamma=1.0,
        master_seed=7,
        oracle_factor=8,
    )
    base.update(overrides)
    return BenchSpec(**base)


class TestRunBench:
    def test_bit_reproducible(self):
        a = run_bench(tiny_spec())
        b = run_bench(tiny_spec())
        assert a.rows == b.rows
        assert format_csv(a) == format_csv(b)

    def test_seed_changes_results(self):
        a = run_bench(tiny_spec())
        b = run_bench(tiny_spec(master_seed=8))
        assert a.rows != b.rows

    def test_gumbel_antithetic_dashes(self):
        spec = tiny_spec(distributions=("gumbel",), antithetic=(False, True))
        rows = run_bench(spec).rows
        by_anti = {r["antithetic"]: r for r in rows}
        assert by_anti["true"]["mean_l2"] == INVALID_CELL
        assert by_anti["false"]["mean_l2"] != INVALID_CELL

    def test_cartesian_count_dashes(self):
        spec = tiny_spec(strategies=("rqmc-cartesian",), samples=63)
        rows = run_bench(spec).rows
        assert rows[0]["mean_l2"] == INVALID_CELL

    def test_constant_fx_zero_error(self):
        spec = tiny_spec(function="constant", strategies=("mc",),
                         covariates=("fx",), samples=1, trials=1)
        rows = run_bench(spec).rows
        assert rows[0]["mean_l2"] == 0.0

    def test_error_shrinks_with_samples(self):
        # Exact oracle for the step function keeps this cheap.
        small = tiny_spec(function="heaviside", n=1, samples=64, trials=200,
                          covariates=("loo",))
        big = tiny_spec(function="heaviside", n=1, samples=4096, trials=200,
                        covariates=("loo",))
        err_small = run_bench(small).rows[0]["mean_l2"]
        err_big = run_bench(big).rows[0]["mean_l2"]
        assert err_big < err_small

    def test_row_enumeration_order(self):
        spec = tiny_spec(distributions=("gaussian", "laplace"),
                         strategies=("mc", "qmc-latin"),
                         covariates=("none", "fx"), antithetic=(False,))
        rows = run_bench(spec).rows
        assert len(rows) == 2 * 2 * 2
        assert [r["distribution"] for r in rows[:4]] == ["gaussian"] * 4
        assert [r["covariate"] for r in rows[:4]] == ["none", "fx", "none", "fx"]

    def test_header_records_provenance(self):
        result = run_bench(tiny_spec())
        assert result.header["base_point_rule"] == "iid standard normal"
        assert result.header["gamma"] == 1.0
        assert result.header["master_seed"] == 7

    def test_full_strategy_covariate_grid(self):
        # 4 strategies x 3 covariates x antithetic on/off = 24 cells; with a
        # symmetric distribution and s = k^n every cell is populated, and an
        # asymmetric one dashes exactly the antithetic half.
        spec = tiny_spec(
            n=3,
            strategies=("mc", "qmc-latin", "rqmc-latin", "rqmc-cartesian"),
            covariates=("none", "fx", "loo"),
            antithetic=(False, True),
            samples=64,  # 4^3, valid for the cartesian cells
            trials=1,
            oracle_factor=4,
        )
        rows = run_bench(spec).rows
        assert len(rows) == 24
        assert all(r["mean_l2"] != INVALID_CELL for r in rows)
        gumbel = run_bench(
            tiny_spec(n=3, distributions=("gumbel",),
                      strategies=("mc", "qmc-latin", "rqmc-latin", "rqmc-cartesian"),
                      covariates=("none", "fx", "loo"), antithetic=(False, True),
                      samples=64, trials=1, oracle_factor=4)
        ).rows
        dashed = [r for r in gumbel if r["mean_l2"] == INVALID_CELL]
        assert len(dashed) == 12
        assert all(r["antithetic"] == "true" for r in dashed)


class TestCsv:
    def test_roundtrip(self, tmp_path):
        result = run_bench(tiny_spec(distributions=("gaussian", "gumbel"),
                                     antithetic=(False, True)))
        path = tmp_path / "bench.csv"
        write_csv(result, path, command="gradsmooth bench spec.txt")
        header, rows = read_csv(path)
        assert header["function"] == "argsort"
        assert len(rows) == len(result.rows)
        for parsed, original in zip(rows, result.rows):
            if original["mean_l2"] == INVALID_CELL:
                assert parsed["mean_l2"] == INVALID_CELL
            else:
                assert parsed["mean_l2"] == pytest.approx(original["mean_l2"], rel=1e-15)

    def test_columns_exact(self, tmp_path):
        path = tmp_path / "bench.csv"
        write_csv(run_bench(tiny_spec()), path)
        lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == ",".join(CSV_COLUMNS)


class TestParseSpec:
    def test_full_spec(self):
        spec = parse_spec(
            """
            # weekly variance sweep
            function = argsort
            n = 3
            distributions = gaussian, laplace
            strategies = mc, rqmc-cartesian
            covariates = none, loo
            antithetic = false, true
            samples = 1000
            trials = 5
            gamma = 0.3
            master_seed = 11
            """
        )
        assert spec.function == "argsort" and spec.n == 3
        assert spec.distributions == ("gaussian", "laplace")
        assert spec.antithetic == (False, True)
        assert spec.gamma == 0.3

    def test_missing_keys(self):
        with pytest.raises(ValueError, match="missing required"):
            parse_spec("function = argsort\nn = 3\n")

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown key"):
            parse_spec("function = argsort\nn = 3\ndistributions = gaussian\n"
                       "strategies = mc\ncolor = red\n")

    def test_bad_boolean(self):
        with pytest.raises(ValueError, match="true/false"):
            parse_spec("function = argsort\nn = 2\ndistributions = gaussian\n"
                       "strategies = mc\nantithetic = yes\n")

    def test_empty_distribution_list(self):
        with pytest.raises(ValueError, match="at least one distribution"):
            parse_spec("function = argsort\nn = 2\ndistributions =\nstrategies = mc\n")

    def test_bad_line(self):
        with pytest.raises(ValueError, match="key=value"):
            parse_spec("function argsort\n")
