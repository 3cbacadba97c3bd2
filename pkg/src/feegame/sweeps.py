"""Grid sweeps behind the CLI: one row of derived quantities per grid point.

Five sweep kinds cover the standard experiment set: the return curve of a
two-pool split, the optimal fraction and the fee revenue as one pool's fee
varies, and equilibrium panels for two- and three-pool markets as the size
shares vary.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core import Market, Pool, trade_output
from .game import FeeProfile, find_equilibrium, pool_utility
from .routing import solve_otp


class ConfigError(ValueError):
    """Invalid sweep configuration; message carries the offending field."""


class SweepKind(str, enum.Enum):
    TRADE_SPLIT = "trade_split"
    SPLIT_VS_FEE = "split_vs_fee"
    UTILITY_VS_FEE = "utility_vs_fee"
    TWO_POOL_SHARE = "two_pool_share"
    THREE_POOL_SHARE = "three_pool_share"


COLUMNS: dict[SweepKind, tuple[str, ...]] = {
    SweepKind.TRADE_SPLIT: ("fraction", "output"),
    SweepKind.SPLIT_VS_FEE: ("fee", "fraction"),
    SweepKind.UTILITY_VS_FEE: ("fee", "utility"),
    SweepKind.TWO_POOL_SHARE: (
        "share",
        "fee_pool1",
        "fee_pool2",
        "relfee_pool1",
        "relfee_pool2",
    ),
    SweepKind.THREE_POOL_SHARE: (
        "share",
        "fee_pool1",
        "fee_pool2",
        "fee_pool3",
        "relfee_pool1",
        "relfee_pool2",
        "relfee_pool3",
        "relfee_weighted_avg",
    ),
}

DEFAULT_GRID_POINTS = 200
DEFAULT_GRID_RANGE: dict[SweepKind, tuple[float, float]] = {
    SweepKind.TRADE_SPLIT: (0.0, 1.0),
    SweepKind.SPLIT_VS_FEE: (0.0, 0.01),
    SweepKind.UTILITY_VS_FEE: (0.0, 0.01),
    SweepKind.TWO_POOL_SHARE: (0.005, 0.995),
    SweepKind.THREE_POOL_SHARE: (0.005, 0.995),
}


def default_grid(kind: SweepKind, points: int = DEFAULT_GRID_POINTS) -> tuple[float, ...]:
    lo, hi = DEFAULT_GRID_RANGE[kind]
    step = (hi - lo) / (points - 1)
    return tuple(lo + k * step for k in range(points))


@dataclass(frozen=True)
class SweepSpec:
    """One sweep job: what to vary, over which grid, against which market."""

    kind: SweepKind
    grid: tuple[float, ...]
    trade: float
    pools: tuple[Pool, ...] | None = None  # market kinds only
    pool_index: int = 0
    total_size: float = 6_000_000.0  # two_pool_share: combined size of both pools
    pair_size: float = 3_000_000.0  # three_pool_share: combined size of pools 1+2
    fixed_size: float = 3_000_000.0  # three_pool_share: size of pool 3
    start_fee: float = 0.003  # equilibrium iteration start
    tol: float = 1e-9
    eq_tol: float = 1e-7

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        if self.pools is not None:
            object.__setattr__(self, "pools", tuple(self.pools))
        self.validate()

    def validate(self) -> None:
        if not self.grid:
            raise ConfigError("grid: must not be empty")
        if not self.trade > 0:
            raise ConfigError(f"trade: must be positive, got {self.trade}")
        for k in range(1, len(self.grid)):
            if self.grid[k] <= self.grid[k - 1]:
                raise ConfigError(
                    f"grid[{k}]: {self.grid[k]} is not greater than grid[{k - 1}]={self.grid[k - 1]}"
                )
        fee_kinds = (SweepKind.SPLIT_VS_FEE, SweepKind.UTILITY_VS_FEE)
        share_kinds = (SweepKind.TWO_POOL_SHARE, SweepKind.THREE_POOL_SHARE)
        for k, v in enumerate(self.grid):
            if self.kind in fee_kinds and not 0.0 <= v < 1.0:
                raise ConfigError(f"grid[{k}]: fee {v} outside [0, 1) for kind {self.kind.value}")
            if self.kind in share_kinds and not 0.0 < v < 1.0:
                raise ConfigError(f"grid[{k}]: share {v} outside (0, 1) for kind {self.kind.value}")
            if self.kind is SweepKind.TRADE_SPLIT and not 0.0 <= v <= 1.0:
                raise ConfigError(f"grid[{k}]: fraction {v} outside [0, 1]")
        if self.kind in (SweepKind.TRADE_SPLIT, *fee_kinds):
            if self.pools is None:
                raise ConfigError(f"pools: required for kind {self.kind.value}")
            if self.kind is SweepKind.TRADE_SPLIT and len(self.pools) != 2:
                raise ConfigError(
                    f"pools: kind trade_split needs exactly 2 pools, got {len(self.pools)}"
                )
            if not 0 <= self.pool_index < len(self.pools):
                raise ConfigError(
                    f"pool_index: {self.pool_index} out of range for {len(self.pools)} pools"
                )
        elif self.pools is not None:
            raise ConfigError(f"pools: not used by kind {self.kind.value} (market is built from shares)")
        if not 0.0 <= self.start_fee < 1.0:
            raise ConfigError(f"start_fee: {self.start_fee} outside [0, 1)")
        for name in ("total_size", "pair_size", "fixed_size"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive")


@dataclass(frozen=True)
class SweepTable:
    kind: SweepKind
    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]

    def column(self, name: str) -> list[float]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


def _equilibrium_row(market: Market, spec: SweepSpec) -> tuple[tuple[float, ...], tuple[float, ...]]:
    start = FeeProfile.uniform(market.n, spec.start_fee)
    result = find_equilibrium(market, start, spec.trade, tol=spec.eq_tol)
    rel = tuple(u / p.size for u, p in zip(result.utilities, market.pools))
    return result.fees.fees, rel


def sweep_point(spec: SweepSpec, value: float) -> tuple[float, ...]:
    """Compute one output row for ``value``; rows are independent of each other."""
    if spec.kind is SweepKind.TRADE_SPLIT:
        assert spec.pools is not None
        p1, p2 = spec.pools
        out = trade_output(p1, value * spec.trade) + trade_output(p2, (1.0 - value) * spec.trade)
        return (value, out)
    if spec.kind is SweepKind.SPLIT_VS_FEE:
        assert spec.pools is not None
        market = Market(spec.pools)
        fees = list(market.fees())
        fees[spec.pool_index] = value
        result = solve_otp(market.with_fees(fees), spec.trade, spec.tol)
        return (value, result.allocation.amounts[spec.pool_index] / spec.trade)
    if spec.kind is SweepKind.UTILITY_VS_FEE:
        assert spec.pools is not None
        market = Market(spec.pools)
        profile = FeeProfile(market.fees()).replace(spec.pool_index, value)
        return (value, pool_utility(market, profile, spec.pool_index, spec.trade))
    if spec.kind is SweepKind.TWO_POOL_SHARE:
        market = Market(
            [
                Pool(value * spec.total_size / 2.0, spec.start_fee),
                Pool((1.0 - value) * spec.total_size / 2.0, spec.start_fee),
            ]
        )
        fees, rel = _equilibrium_row(market, spec)
        return (value, fees[0], fees[1], rel[0], rel[1])
    if spec.kind is SweepKind.THREE_POOL_SHARE:
        market = Market(
            [
                Pool(value * spec.pair_size / 2.0, spec.start_fee),
                Pool((1.0 - value) * spec.pair_size / 2.0, spec.start_fee),
                Pool(spec.fixed_size / 2.0, spec.start_fee),
            ]
        )
        fees, rel = _equilibrium_row(market, spec)
        sizes = [p.size for p in market.pools]
        wavg = (rel[0] * sizes[0] + rel[1] * sizes[1]) / (sizes[0] + sizes[1])
        return (value, fees[0], fees[1], fees[2], rel[0], rel[1], rel[2], wavg)
    raise ConfigError(f"kind: unknown sweep kind {spec.kind}")


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepTable:
    """Evaluate the sweep over its grid; rows come back in grid order."""
    if jobs < 1:
        raise ConfigError(f"jobs: must be at least 1, got {jobs}")
    if jobs == 1 or len(spec.grid) == 1:
        rows = [sweep_point(spec, v) for v in spec.grid]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(sweep_point, [spec] * len(spec.grid), spec.grid))
    return SweepTable(kind=spec.kind, columns=COLUMNS[spec.kind], rows=tuple(rows))
