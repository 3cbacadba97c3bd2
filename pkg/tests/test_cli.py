import json

import pytest

from feegame import (
    ConfigError,
    FeeProfile,
    Market,
    Pool,
    SweepKind,
    SweepSpec,
    default_grid,
    find_equilibrium,
    pool_utility,
    run_sweep,
    solve_otp,
)
from feegame.cli import main

POOLS_JSON = """[
  {"reserve_source": 1000000, "reserve_target": 1000000, "fee": 0.003},
  {"reserve_source": 2000000, "reserve_target": 2000000, "fee": 0.003}
]
"""

ONE_TRADE_CSV = "block,side,amount_in\n12000000,s2t,1000\n"


@pytest.fixture
def pools_file(tmp_path):
    path = tmp_path / "pools.json"
    path.write_text(POOLS_JSON)
    return str(path)


@pytest.fixture
def trades_file(tmp_path):
    path = tmp_path / "trades.csv"
    path.write_text(ONE_TRADE_CSV)
    return str(path)


class TestSweepSpec:
    def test_default_grid_has_200_points(self):
        grid = default_grid(SweepKind.SPLIT_VS_FEE)
        assert len(grid) == 200
        assert grid[0] == 0.0

    def test_grid_must_increase(self, example_market):
        with pytest.raises(ConfigError, match=r"grid\[1\]"):
            SweepSpec(
                kind=SweepKind.SPLIT_VS_FEE,
                grid=(0.003, 0.001),
                trade=1000.0,
                pools=example_market.pools,
            )

    def test_share_domain_is_open(self):
        with pytest.raises(ConfigError, match="share"):
            SweepSpec(kind=SweepKind.TWO_POOL_SHARE, grid=(0.0, 0.5), trade=1000.0)

    def test_fee_domain_check_names_the_entry(self, example_market):
        with pytest.raises(ConfigError, match=r"grid\[2\]"):
            SweepSpec(
                kind=SweepKind.UTILITY_VS_FEE,
                grid=(0.001, 0.002, 1.0),
                trade=1000.0,
                pools=example_market.pools,
            )

    def test_market_kinds_require_pools(self):
        with pytest.raises(ConfigError, match="pools"):
            SweepSpec(kind=SweepKind.SPLIT_VS_FEE, grid=(0.001,), trade=1000.0)

    def test_share_kinds_reject_pools(self, example_market):
        with pytest.raises(ConfigError, match="pools"):
            SweepSpec(
                kind=SweepKind.TWO_POOL_SHARE,
                grid=(0.5,),
                trade=1000.0,
                pools=example_market.pools,
            )


class TestRunSweep:
    def test_split_vs_fee_row_is_recomputable(self, example_market):
        spec = SweepSpec(
            kind=SweepKind.SPLIT_VS_FEE,
            grid=(0.001, 0.003, 0.005),
            trade=1000.0,
            pools=example_market.pools,
        )
        table = run_sweep(spec)
        assert table.columns == ("fee", "fraction")
        assert table.rows[1][1] == pytest.approx(1.0 / 3.0, abs=1e-3)
        # every row reproducible by a single-shot solve
        for fee, fraction in table.rows:
            single = solve_otp(example_market.with_fees([fee, 0.003]), 1000.0)
            assert fraction == pytest.approx(
                single.allocation.amounts[0] / 1000.0, abs=1e-9
            )

    def test_trade_split_maximum_sits_at_the_proportional_point(self, example_market):
        spec = SweepSpec(
            kind=SweepKind.TRADE_SPLIT,
            grid=tuple(k / 100.0 for k in range(101)),
            trade=1000.0,
            pools=example_market.pools,
        )
        table = run_sweep(spec)
        fractions = table.column("fraction")
        outputs = table.column("output")
        best = fractions[outputs.index(max(outputs))]
        assert best == pytest.approx(1.0 / 3.0, abs=0.01)

    def test_utility_row_matches_pool_utility(self, example_market):
        spec = SweepSpec(
            kind=SweepKind.UTILITY_VS_FEE,
            grid=(0.002, 0.003),
            trade=1000.0,
            pools=example_market.pools,
        )
        table = run_sweep(spec)
        u = pool_utility(example_market, FeeProfile([0.002, 0.003]), 0, 1000.0)
        assert table.rows[0][1] == pytest.approx(u, rel=1e-12)

    def test_equal_share_point_is_symmetric(self):
        spec = SweepSpec(kind=SweepKind.TWO_POOL_SHARE, grid=(0.5,), trade=1000.0)
        table = run_sweep(spec)
        row = dict(zip(table.columns, table.rows[0]))
        assert row["fee_pool1"] == pytest.approx(row["fee_pool2"], abs=1e-6)
        # a fee asymmetry of eps moves the split by ~eps/fee, so revenue
        # equality holds only up to that amplification
        assert row["relfee_pool1"] == pytest.approx(row["relfee_pool2"], rel=1e-4)

    def test_three_pool_share_row_matches_direct_equilibrium(self):
        spec = SweepSpec(kind=SweepKind.THREE_POOL_SHARE, grid=(0.4,), trade=1000.0)
        table = run_sweep(spec)
        row = dict(zip(table.columns, table.rows[0]))
        market = Market([Pool(0.4 * 1.5e6, 0.003), Pool(0.6 * 1.5e6, 0.003), Pool(1.5e6, 0.003)])
        eq = find_equilibrium(market, FeeProfile.uniform(3, 0.003), 1000.0)
        assert row["fee_pool1"] == pytest.approx(eq.fees.fees[0], abs=1e-9)
        wavg = (eq.utilities[0] + eq.utilities[1]) / (market.pools[0].size + market.pools[1].size)
        assert row["relfee_weighted_avg"] == pytest.approx(wavg, rel=1e-9)

    def test_parallel_jobs_preserve_order_and_values(self, example_market):
        spec = SweepSpec(
            kind=SweepKind.SPLIT_VS_FEE,
            grid=(0.001, 0.002, 0.003, 0.004),
            trade=1000.0,
            pools=example_market.pools,
        )
        assert run_sweep(spec, jobs=2).rows == run_sweep(spec, jobs=1).rows


class TestCliCommands:
    def test_route_prints_json(self, pools_file, capsys):
        assert main(["route", "--pools", pools_file, "--amount", "1000"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["allocation"][0] == pytest.approx(333.33, abs=0.5)
        assert payload["allocation"][1] == pytest.approx(666.67, abs=0.5)
        assert payload["interior"] is True

    def test_route_writes_file_with_out(self, pools_file, tmp_path, capsys):
        out = tmp_path / "results"
        assert main(["route", "--pools", pools_file, "--amount", "1000", "--out", str(out)]) == 0
        payload = json.loads((out / "route.json").read_text())
        assert payload["output"] == pytest.approx(996.6687737441923, rel=1e-9)
        assert "route:" in capsys.readouterr().out

    def test_equilibrium_exit_code_on_iteration_cap(self, pools_file, tmp_path, capsys):
        out = tmp_path / "eq"
        code = main([
            "equilibrium", "--pools", pools_file, "--trade", "1000",
            "--start", "0.003", "--max-iters", "1", "--out", str(out),
        ])
        assert code == 3
        payload = json.loads((out / "equilibrium.json").read_text())
        assert payload["converged"] is False

    def test_equilibrium_converges_by_default(self, pools_file, capsys):
        code = main(["equilibrium", "--pools", pools_file, "--trade", "1000"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["converged"] is True
        assert payload["fees"][1] > payload["fees"][0]

    def test_replay_single_trade(self, pools_file, trades_file, capsys):
        code = main([
            "replay", "--pools", pools_file, "--trades", trades_file,
            "--fees", "0.003,0.003",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["per_pool_fees_collected"][0] == pytest.approx(1.0, rel=1e-9)
        assert payload["per_pool_fees_collected"][1] == pytest.approx(2.0, rel=1e-9)

    def test_best_response_command(self, pools_file, capsys):
        code = main(["best-response", "--pools", pools_file, "--trade", "1000", "--pool", "0"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert 0.0018 <= payload["fee"] <= 0.0022

    def test_expected_fees_command(self, pools_file, trades_file, capsys):
        code = main([
            "expected-fees", "--pools", pools_file, "--trades", trades_file,
            "--fees", "0.003",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["mean_size"] == 1000.0
        assert payload["expected_fees"][0] == pytest.approx(1.0, rel=1e-6)
        assert "at_mean_constrained" in payload and "at_mean_unconstrained" in payload

    def test_sweep_writes_deterministic_csv(self, pools_file, tmp_path):
        args = [
            "sweep", "--kind", "split_vs_fee", "--pools", pools_file,
            "--trade", "1000", "--grid-min", "0.001", "--grid-max", "0.005",
            "--points", "5",
        ]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        csv1 = (out1 / "split_vs_fee.csv").read_bytes()
        csv2 = (out2 / "split_vs_fee.csv").read_bytes()
        assert csv1 == csv2
        header = csv1.decode().splitlines()[0]
        assert header == "fee,fraction"

    def test_sweep_job_file_with_flag_override(self, pools_file, tmp_path, capsys):
        job = tmp_path / "job.json"
        job.write_text(json.dumps({
            "kind": "split_vs_fee",
            "pools": pools_file,
            "trade": 500.0,
            "grid": [0.001, 0.003],
        }))
        code = main(["sweep", "--job", str(job), "--trade", "1000"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "fee,fraction"
        assert len(lines) == 3

    def test_missing_pools_file_is_a_config_error(self, capsys):
        assert main(["route", "--pools", "/does/not/exist.json", "--amount", "10"]) == 2

    def test_bad_sweep_kind_is_a_config_error(self, pools_file, capsys):
        code = main(["sweep", "--kind", "two_pool_share",
                     "--grid-min", "0", "--grid-max", "1", "--points", "3"])
        assert code == 2

    def test_imbalanced_pools_are_a_config_error(self, tmp_path, capsys):
        path = tmp_path / "pools.json"
        path.write_text(
            '[{"reserve_source": 1e6, "reserve_target": 1e6, "fee": 0.003},'
            ' {"reserve_source": 1.05e6, "reserve_target": 1e6, "fee": 0.003}]'
        )
        assert main(["route", "--pools", str(path), "--amount", "10"]) == 2
