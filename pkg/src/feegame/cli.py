"""Command-line front end.

Exit codes: 0 success, 2 configuration/input error, 3 numerical
non-convergence. Single results are emitted as JSON, sweeps as CSV; with
--out they are written into that directory, otherwise they go to stdout
(the one-line human summary then moves to stderr so stdout stays parseable).
All floats are fixed to 12 significant digits so identical inputs produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .core import DomainError, Market
from .flow import (
    ImbalanceError,
    TradeDataError,
    build_distribution,
    expected_utility,
    mean_size_reduction,
    normalize_snapshots,
    read_snapshots_json,
    read_trades_csv,
    replay,
)
from .game import FeeProfile, best_response, find_equilibrium
from .routing import closed_form_allocation, solve_otp
from .sweeps import (
    ConfigError,
    SweepKind,
    SweepSpec,
    default_grid,
    run_sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _rounded(obj: Any) -> Any:
    """Round every float to 12 significant digits for deterministic output."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return float(_fmt(obj))
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def _emit_json(payload: dict, out_dir: str | None, filename: str, summary: str) -> None:
    text = json.dumps(_rounded(payload), indent=2, sort_keys=True) + "\n"
    if out_dir:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / filename).write_text(text, encoding="utf-8")
        print(summary)
    else:
        print(summary, file=sys.stderr)
        sys.stdout.write(text)


def _load_market(path: str) -> Market:
    return normalize_snapshots(read_snapshots_json(path))


def _parse_fees(text: str, n: int) -> list[float]:
    parts = [p for p in text.split(",") if p != ""]
    fees = [float(p) for p in parts]
    if len(fees) == 1:
        fees = fees * n
    if len(fees) != n:
        raise ConfigError(f"--fees/--start: expected 1 or {n} values, got {len(fees)}")
    return fees


def _add_common(parser: argparse.ArgumentParser, *, pools_required: bool = True) -> None:
    parser.add_argument("--pools", required=pools_required, help="pool snapshot JSON file")
    parser.add_argument("--out", help="output directory (default: print to stdout)")
    parser.add_argument("--tol", type=float, default=1e-9, help="solver tolerance")
    parser.add_argument("--jobs", type=int, default=1, help="parallel evaluations cap")
    parser.add_argument(
        "--seed", type=int, default=None,
        help="seed for randomized fixtures (unused by the built-in commands)",
    )


def _cmd_route(args: argparse.Namespace) -> int:
    market = _load_market(args.pools)
    result = solve_otp(market, args.amount, args.tol)
    payload = {
        "allocation": list(result.allocation.amounts),
        "output": result.output,
        "lambda": result.lam,
        "interior": result.interior,
        "trade": args.amount,
    }
    alloc = ", ".join(_fmt(x) for x in result.allocation.amounts)
    _emit_json(payload, args.out, "route.json",
               f"route: output={_fmt(result.output)} allocation=[{alloc}]")
    return EXIT_OK


def _cmd_best_response(args: argparse.Namespace) -> int:
    market = _load_market(args.pools)
    fees = market.fees() if args.fees is None else _parse_fees(args.fees, market.n)
    result = best_response(market, FeeProfile(fees), args.pool, args.trade, args.tol)
    payload = {
        "pool": args.pool,
        "fee": result.fee,
        "utility": result.utility,
        "evaluations": result.evaluations,
        "opponent_fees": [f for i, f in enumerate(fees) if i != args.pool],
    }
    _emit_json(payload, args.out, "best_response.json",
               f"best-response: pool {args.pool} fee={_fmt(result.fee)} utility={_fmt(result.utility)}")
    return EXIT_OK


def _cmd_equilibrium(args: argparse.Namespace) -> int:
    market = _load_market(args.pools)
    start = FeeProfile(_parse_fees(args.start, market.n))
    result = find_equilibrium(
        market, start, args.trade, tol=args.tol if args.tol != 1e-9 else 1e-7,
        max_iters=args.max_iters,
    )
    payload = {
        "fees": list(result.fees.fees),
        "utilities": list(result.utilities),
        "iterations": result.iterations,
        "converged": result.converged,
        "max_gain": result.max_gain,
    }
    fees = ", ".join(_fmt(f) for f in result.fees.fees)
    _emit_json(payload, args.out, "equilibrium.json",
               f"equilibrium: converged={result.converged} fees=[{fees}] iterations={result.iterations}")
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def _cmd_replay(args: argparse.Namespace) -> int:
    market = _load_market(args.pools)
    records = read_trades_csv(args.trades)
    fees = market.fees() if args.fees is None else _parse_fees(args.fees, market.n)
    report = replay(market, FeeProfile(fees), records)
    payload = {
        "per_pool_fees_collected": list(report.per_pool_fees_collected),
        "fees": list(report.fee_profile.fees),
        "trade_count": report.trade_count,
    }
    collected = ", ".join(_fmt(v) for v in report.per_pool_fees_collected)
    _emit_json(payload, args.out, "replay.json",
               f"replay: {report.trade_count} trades, fees collected=[{collected}]")
    return EXIT_OK


def _cmd_expected_fees(args: argparse.Namespace) -> int:
    market = _load_market(args.pools)
    records = read_trades_csv(args.trades)
    fees = market.fees() if args.fees is None else _parse_fees(args.fees, market.n)
    profile = FeeProfile(fees)
    dist = build_distribution(records, market)
    expected = [expected_utility(market, profile, i, dist) for i in range(market.n)]
    mean = mean_size_reduction(dist)
    at_mean = solve_otp(market.with_fees(fees), mean, args.tol).allocation.amounts
    analytic = closed_form_allocation(market.with_fees(fees), mean)
    payload = {
        "expected_fees": expected,
        "mean_size": mean,
        "at_mean_constrained": [f * x for f, x in zip(fees, at_mean)],
        "at_mean_unconstrained": [f * x for f, x in zip(fees, analytic)],
        "fees": list(fees),
        "trade_count": len(records),
    }
    exp = ", ".join(_fmt(v) for v in expected)
    _emit_json(payload, args.out, "expected_fees.json",
               f"expected-fees: mean size={_fmt(mean)} expected=[{exp}]")
    return EXIT_OK


def _spec_from_args(args: argparse.Namespace) -> SweepSpec:
    cfg: dict[str, Any] = {}
    if args.job:
        with open(args.job, encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ConfigError(f"{args.job}: job file must hold a JSON object")
    # flags win over job-file keys
    if args.kind is not None:
        cfg["kind"] = args.kind
    if args.trade is not None:
        cfg["trade"] = args.trade
    if args.pools is not None:
        cfg["pools"] = args.pools
    if args.pool_index is not None:
        cfg["pool_index"] = args.pool_index
    if args.grid_min is not None:
        cfg["grid_min"] = args.grid_min
    if args.grid_max is not None:
        cfg["grid_max"] = args.grid_max
    if args.points is not None:
        cfg["points"] = args.points
    for name in ("total_size", "pair_size", "fixed_size", "start_fee"):
        value = getattr(args, name)
        if value is not None:
            cfg[name] = value

    try:
        kind = SweepKind(cfg["kind"])
    except KeyError:
        raise ConfigError("kind: required (one of "
                          + ", ".join(k.value for k in SweepKind) + ")") from None
    except ValueError:
        raise ConfigError(f"kind: unknown sweep kind {cfg['kind']!r}") from None

    if "grid" in cfg:
        grid = tuple(float(v) for v in cfg["grid"])
    elif "grid_min" in cfg or "grid_max" in cfg or "points" in cfg:
        lo_def, hi_def = (
            default_grid(kind)[0],
            default_grid(kind)[-1],
        )
        lo = float(cfg.get("grid_min", lo_def))
        hi = float(cfg.get("grid_max", hi_def))
        points = int(cfg.get("points", 200))
        if points < 2 or hi <= lo:
            raise ConfigError(f"grid: need points >= 2 and grid_max > grid_min, got {points}, [{lo}, {hi}]")
        step = (hi - lo) / (points - 1)
        grid = tuple(lo + k * step for k in range(points))
    else:
        grid = default_grid(kind)

    pools = None
    if "pools" in cfg and cfg["pools"] is not None:
        source = cfg["pools"]
        if isinstance(source, str):
            pools = _load_market(source).pools
        else:
            pools = normalize_snapshots(
                [_snapshot_from_obj(obj, idx) for idx, obj in enumerate(source)]
            ).pools

    kwargs: dict[str, Any] = {}
    for name in ("pool_index", "total_size", "pair_size", "fixed_size", "start_fee", "tol"):
        if name in cfg:
            kwargs[name] = cfg[name]
    return SweepSpec(kind=kind, grid=grid, trade=float(cfg.get("trade", 1000.0)),
                     pools=pools, **kwargs)


def _snapshot_from_obj(obj: dict, idx: int):
    from .flow import PoolSnapshot

    try:
        return PoolSnapshot(
            reserve_source=float(obj["reserve_source"]),
            reserve_target=float(obj["reserve_target"]),
            fee=float(obj["fee"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"pools[{idx}]: {exc}") from None


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    table = run_sweep(spec, jobs=args.jobs)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{spec.kind.value}.csv"
        table.write_csv(path)
        print(f"sweep: {spec.kind.value} with {len(table.rows)} rows -> {path}")
    else:
        print(f"sweep: {spec.kind.value} with {len(table.rows)} rows", file=sys.stderr)
        sys.stdout.write(",".join(table.columns) + "\n")
        for row in table.rows:
            sys.stdout.write(",".join(_fmt(v) for v in row) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feegame",
        description="Optimal trade routing across constant-product pools and fee-competition equilibria.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("route", help="optimally split one trade across the pools")
    _add_common(p)
    p.add_argument("--amount", type=float, required=True, help="trade size in source tokens")
    p.set_defaults(func=_cmd_route)

    p = sub.add_parser("sweep", help="evaluate a figure-style grid sweep to CSV")
    _add_common(p, pools_required=False)
    p.add_argument("--job", help="JSON job file (flags override its keys)")
    p.add_argument("--kind", choices=[k.value for k in SweepKind])
    p.add_argument("--trade", type=float)
    p.add_argument("--pool-index", dest="pool_index", type=int)
    p.add_argument("--grid-min", dest="grid_min", type=float)
    p.add_argument("--grid-max", dest="grid_max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--total-size", dest="total_size", type=float)
    p.add_argument("--pair-size", dest="pair_size", type=float)
    p.add_argument("--fixed-size", dest="fixed_size", type=float)
    p.add_argument("--start-fee", dest="start_fee", type=float)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("best-response", help="revenue-maximizing fee for one pool")
    _add_common(p)
    p.add_argument("--trade", type=float, required=True)
    p.add_argument("--pool", type=int, default=0, help="index of the responding pool")
    p.add_argument("--fees", help="comma-separated fee profile (default: snapshot fees)")
    p.set_defaults(func=_cmd_best_response)

    p = sub.add_parser("equilibrium", help="pure equilibrium via iterated best response")
    _add_common(p)
    p.add_argument("--trade", type=float, required=True)
    p.add_argument("--start", default="0.003", help="starting fee(s), single value or comma list")
    p.add_argument("--max-iters", dest="max_iters", type=int, default=10_000)
    p.set_defaults(func=_cmd_equilibrium)

    p = sub.add_parser("replay", help="replay a trade CSV against the balanced market")
    _add_common(p)
    p.add_argument("--trades", required=True, help="trade CSV (block,side,amount_in)")
    p.add_argument("--fees", help="comma-separated fee profile (default: snapshot fees)")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("expected-fees", help="expected fees over the empirical size distribution")
    _add_common(p)
    p.add_argument("--trades", required=True, help="trade CSV (block,side,amount_in)")
    p.add_argument("--fees", help="comma-separated fee profile (default: snapshot fees)")
    p.set_defaults(func=_cmd_expected_fees)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, ImbalanceError, TradeDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
