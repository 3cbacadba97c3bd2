"""Trade-size distributions, pool ingestion, and historical replay.

Raw pool snapshots carry both reserves; :func:`normalize_snapshots` picks the
target-token unit that makes every pool's reserves equal (refusing inputs
whose price ratios disagree beyond a tolerance) so the rest of the package
can work with single-reserve pools. Trades replay against the balanced
market - state never carries across trades, since arbitrage is assumed to
restore balance between them.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import DomainError, Market, Pool
from .game import BestResponseResult, EquilibriumResult, FeeProfile, _argmax_fee
from .routing import allocate_many

DEFAULT_BALANCE_TOL = 0.01


class ImbalanceError(ValueError):
    """Pool snapshots whose price ratios disagree beyond the tolerance."""


class TradeDataError(ValueError):
    """Malformed trade records or trade CSV input."""


class Side(str, enum.Enum):
    SOURCE_TO_TARGET = "s2t"
    TARGET_TO_SOURCE = "t2s"


@dataclass(frozen=True)
class TradeRecord:
    block: int
    side: Side
    amount_in: float

    def __post_init__(self) -> None:
        if not self.amount_in > 0:
            raise TradeDataError(f"trade amount must be positive, got {self.amount_in}")


@dataclass(frozen=True)
class PoolSnapshot:
    """A pool as observed on-chain: both reserves, before unit normalization."""

    reserve_source: float
    reserve_target: float
    fee: float

    def __post_init__(self) -> None:
        if not self.reserve_source > 0 or not self.reserve_target > 0:
            raise DomainError(
                f"snapshot reserves must be positive: "
                f"({self.reserve_source}, {self.reserve_target})"
            )
        if not 0.0 <= self.fee < 1.0:
            raise DomainError(f"snapshot fee must be in [0, 1), got {self.fee}")


@dataclass(frozen=True)
class TradeSizeDistribution:
    """Discrete distribution of trade sizes; weights normalize to 1 on construction."""

    entries: tuple[tuple[float, float], ...]

    def __init__(self, entries: Sequence[tuple[float, float]]) -> None:
        if not entries:
            raise DomainError("distribution needs at least one entry")
        if any(not size > 0 for size, _ in entries):
            raise DomainError("all trade sizes must be positive")
        if any(not weight > 0 for _, weight in entries):
            raise DomainError("all weights must be positive")
        total = sum(weight for _, weight in entries)
        object.__setattr__(
            self,
            "entries",
            tuple((float(size), float(weight) / total) for size, weight in entries),
        )

    def sizes(self) -> np.ndarray:
        return np.array([size for size, _ in self.entries])

    def weights(self) -> np.ndarray:
        return np.array([weight for _, weight in self.entries])


@dataclass(frozen=True)
class ReplayReport:
    per_pool_fees_collected: tuple[float, ...]
    fee_profile: FeeProfile
    trade_count: int


def expected_utility(
    market: Market, profile: FeeProfile, i: int, dist: TradeSizeDistribution
) -> float:
    """Expected fees for pool ``i``: the size-weighted sum of optimal-routing fees."""
    if len(profile) != market.n:
        raise DomainError(f"profile has {len(profile)} fees for {market.n} pools")
    if not 0 <= i < market.n:
        raise DomainError(f"pool index {i} out of range for n={market.n}")
    amounts = allocate_many(market.with_fees(profile.fees), dist.sizes())
    return profile.fees[i] * float(dist.weights() @ amounts[:, i])


def mean_size_reduction(dist: TradeSizeDistribution) -> float:
    """Mean trade size of the distribution.

    Routing through a single utility evaluation at this mean reproduces the
    full expectation exactly only while every pool stays interior at every
    size in the distribution (the split is affine in the size there); with
    priced-out pools the two can differ.
    """
    return float(dist.weights() @ dist.sizes())


def normalize_snapshots(
    snapshots: Sequence[PoolSnapshot], tolerance: float = DEFAULT_BALANCE_TOL
) -> Market:
    """Convert raw snapshots to a normalized market of balanced pools.

    All snapshots must price the pair alike: each pool's reserve ratio may
    deviate from the pool-aggregate ratio by at most ``tolerance`` (relative).
    Beyond that the inputs violate the balancedness assumption and an
    :class:`ImbalanceError` names the offenders.
    """
    if not snapshots:
        raise DomainError("at least one snapshot is required")
    aggregate = sum(s.reserve_source for s in snapshots) / sum(
        s.reserve_target for s in snapshots
    )
    offenders = [
        idx
        for idx, s in enumerate(snapshots)
        if abs(s.reserve_source / s.reserve_target / aggregate - 1.0) > tolerance
    ]
    if offenders:
        details = ", ".join(
            f"pool {idx}: ratio {snapshots[idx].reserve_source / snapshots[idx].reserve_target:.6g}"
            for idx in offenders
        )
        raise ImbalanceError(
            f"pool price ratios deviate more than {tolerance:.2%} from the "
            f"aggregate {aggregate:.6g}: {details}"
        )
    return Market([Pool(s.reserve_source, s.fee) for s in snapshots])


def build_distribution(records: Sequence[TradeRecord], market: Market) -> TradeSizeDistribution:
    """Empirical trade-size distribution: one equal-weight atom per record.

    Amounts are interpreted in post-normalization units, where the balanced
    price is 1, so target-denominated inputs convert to source sizes one to
    one. The market argument anchors the unit convention (non-unit prices
    would need it) and must be non-degenerate.
    """
    if market.n < 1:  # unreachable via Market, kept for signature clarity
        raise DomainError("market must contain pools")
    if not records:
        raise DomainError("at least one trade record is required")
    weight = 1.0 / len(records)
    return TradeSizeDistribution([(r.amount_in, weight) for r in records])


def replay(
    market: Market, profile: FeeProfile, records: Sequence[TradeRecord]
) -> ReplayReport:
    """Route each historical trade optimally and sum per-pool collected fees.

    Every trade sees the same balanced market: reserves reset between trades.
    """
    if len(profile) != market.n:
        raise DomainError(f"profile has {len(profile)} fees for {market.n} pools")
    if not records:
        raise DomainError("at least one trade record is required")
    sizes = np.array([r.amount_in for r in records])
    amounts = allocate_many(market.with_fees(profile.fees), sizes)
    totals = amounts.sum(axis=0)
    collected = tuple(fee * float(tot) for fee, tot in zip(profile.fees, totals))
    return ReplayReport(
        per_pool_fees_collected=collected,
        fee_profile=profile,
        trade_count=len(records),
    )


def best_response_expected(
    market: Market,
    profile: FeeProfile,
    i: int,
    dist: TradeSizeDistribution,
    tol: float = 1e-9,
) -> BestResponseResult:
    """Fee maximizing pool ``i``'s expected fees over a size distribution.

    Heuristic beyond a single trade size: quasiconcavity of the expected
    payoff is not guaranteed, so the unimodal search may settle on a local
    optimum in pathological cases.
    """
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")

    def evaluate(fee: float) -> float:
        return expected_utility(market, profile.replace(i, fee), i, dist)

    fee, utility, evals = _argmax_fee(evaluate, tol)
    return BestResponseResult(fee=fee, utility=utility, evaluations=evals)


def find_equilibrium_expected(
    market: Market,
    start: FeeProfile,
    dist: TradeSizeDistribution,
    tol: float = 1e-7,
    max_iters: int = 10_000,
    deviation_tol: float = 1e-4,
    audit_points: int = 1001,
) -> EquilibriumResult:
    """Cyclic best responses under expected fees over a size distribution.

    Heuristic: with more than one trade size a pure equilibrium need not
    exist; whatever fixed point the iteration reaches is audited the same
    way as the single-size search.
    """
    fees = list(start.fees)
    br_tol = min(tol * 0.1, 1e-8)
    fee_converged = False
    rounds = 0
    for rounds in range(1, max_iters + 1):
        delta = 0.0
        for i in range(market.n):
            result = best_response_expected(market, FeeProfile(fees), i, dist, br_tol)
            delta = max(delta, abs(result.fee - fees[i]))
            fees[i] = result.fee
        if delta < tol:
            fee_converged = True
            break

    profile = FeeProfile(fees)
    utilities = tuple(
        expected_utility(market, profile, i, dist) for i in range(market.n)
    )
    max_gain = 0.0
    grid = np.linspace(0.0, 1.0 - 1e-9, audit_points)
    for i in range(market.n):
        best_alt = max(
            expected_utility(market, profile.replace(i, fee), i, dist) for fee in grid
        )
        gain = best_alt - utilities[i]
        if gain <= 0.0:
            continue
        rel = gain / utilities[i] if utilities[i] > 0 else math.inf
        max_gain = max(max_gain, rel)
    return EquilibriumResult(
        fees=profile,
        utilities=utilities,
        iterations=rounds,
        converged=fee_converged and max_gain <= deviation_tol,
        max_gain=max_gain,
    )


# --- file formats -----------------------------------------------------------

TRADES_HEADER = ["block", "side", "amount_in"]


def read_trades_csv(path: str | Path) -> list[TradeRecord]:
    """Read trades from CSV with header ``block,side,amount_in``; side s2t/t2s."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != TRADES_HEADER:
            raise TradeDataError(
                f"expected header {','.join(TRADES_HEADER)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                side = Side(row["side"].strip())
            except ValueError:
                raise TradeDataError(
                    f"line {lineno}: unknown side {row['side']!r} (expected s2t or t2s)"
                ) from None
            try:
                amount = float(row["amount_in"])
                block = int(row["block"])
            except (TypeError, ValueError) as exc:
                raise TradeDataError(f"line {lineno}: {exc}") from None
            if not amount > 0:
                raise TradeDataError(f"line {lineno}: amount_in must be positive, got {amount}")
            records.append(TradeRecord(block=block, side=side, amount_in=amount))
    if not records:
        raise TradeDataError(f"no trade rows in {path}")
    return records


def write_trades_csv(path: str | Path, records: Sequence[TradeRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRADES_HEADER)
        for r in records:
            writer.writerow([r.block, r.side.value, f"{r.amount_in:.12g}"])


def read_snapshots_json(path: str | Path) -> list[PoolSnapshot]:
    """Read pool snapshots from a JSON array of reserve/fee objects."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise DomainError(f"{path}: expected a non-empty JSON array of pool objects")
    snapshots = []
    for idx, obj in enumerate(data):
        try:
            snapshots.append(
                PoolSnapshot(
                    reserve_source=float(obj["reserve_source"]),
                    reserve_target=float(obj["reserve_target"]),
                    fee=float(obj["fee"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"{path}: pool {idx}: {exc}") from None
    return snapshots


def synthetic_trade_records(
    count: int,
    seed: int,
    median_size: float = 500.0,
    sigma: float = 1.0,
    start_block: int = 12_000_000,
) -> list[TradeRecord]:
    """Deterministic lognormal trade fixture (stdlib RNG, stable across versions)."""
    if count < 1:
        raise DomainError("count must be at least 1")
    rng = random.Random(seed)
    mu = math.log(median_size)
    records = []
    for k in range(count):
        records.append(
            TradeRecord(
                block=start_block + k,
                side=Side.SOURCE_TO_TARGET if rng.random() < 0.5 else Side.TARGET_TO_SOURCE,
                amount_in=rng.lognormvariate(mu, sigma),
            )
        )
    return records
