"""Domain types and the constant-product trade function.

Pools are stored post-normalization: the unit of the target token is chosen
so that both reserves are equal, hence a pool is fully described by a single
reserve (in source tokens) and its fee. Raw two-reserve snapshots are
converted at ingestion (see :mod:`feegame.flow`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence


class DomainError(ValueError):
    """Raised when an argument is outside an operation's domain."""


SUM_RTOL = 1e-9  # relative tolerance for allocation sum checks


@dataclass(frozen=True)
class Pool:
    """A balanced constant-product pool: normalized reserve and fee fraction."""

    reserve: float
    fee: float

    def __post_init__(self) -> None:
        if not self.reserve > 0:
            raise DomainError(f"pool reserve must be positive, got {self.reserve}")
        if not 0.0 <= self.fee < 1.0:
            raise DomainError(f"pool fee must be in [0, 1), got {self.fee}")

    @property
    def size(self) -> float:
        """Pool size in source tokens (both reserves counted at the unit price)."""
        return 2.0 * self.reserve


@dataclass(frozen=True)
class Market:
    """An ordered collection of balanced pools sharing one token pair."""

    pools: tuple[Pool, ...]

    def __init__(self, pools: Sequence[Pool]) -> None:
        if len(pools) < 1:
            raise DomainError("a market needs at least one pool")
        object.__setattr__(self, "pools", tuple(pools))

    @property
    def n(self) -> int:
        return len(self.pools)

    def reserves(self) -> tuple[float, ...]:
        return tuple(p.reserve for p in self.pools)

    def fees(self) -> tuple[float, ...]:
        return tuple(p.fee for p in self.pools)

    def with_fees(self, fees: Sequence[float]) -> "Market":
        """A copy of this market with every pool's fee replaced."""
        if len(fees) != self.n:
            raise DomainError(f"expected {self.n} fees, got {len(fees)}")
        return Market([Pool(p.reserve, f) for p, f in zip(self.pools, fees)])


@dataclass(frozen=True)
class Allocation:
    """A nonnegative split of a trade across the pools of a market."""

    amounts: tuple[float, ...]
    total: float

    def __init__(self, amounts: Sequence[float], total: float) -> None:
        if not total > 0:
            raise DomainError(f"allocation total must be positive, got {total}")
        amounts = tuple(float(x) for x in amounts)
        if any(x < 0 for x in amounts):
            raise DomainError(f"allocation amounts must be nonnegative: {amounts}")
        if abs(sum(amounts) - total) > SUM_RTOL * total:
            raise DomainError(
                f"allocation amounts sum to {sum(amounts)}, expected {total}"
            )
        object.__setattr__(self, "amounts", amounts)
        object.__setattr__(self, "total", float(total))


class TradeFunction(Protocol):
    """Contract for a pool's swap curve; lets other curve families plug in."""

    def output(self, x: float) -> float:
        """Target tokens received for ``x`` source tokens."""
        ...

    def marginal_price(self, x: float) -> float:
        """Instantaneous exchange rate after ``x`` source tokens went in."""
        ...


@dataclass(frozen=True)
class ConstantProduct:
    """The constant-product curve of a balanced pool, fee charged on input."""

    reserve: float
    fee: float

    @classmethod
    def for_pool(cls, pool: Pool) -> "ConstantProduct":
        return cls(pool.reserve, pool.fee)

    def output(self, x: float) -> float:
        return _output(self.reserve, 1.0 - self.fee, x)

    def marginal_price(self, x: float) -> float:
        return _marginal(self.reserve, 1.0 - self.fee, x)


def _output(reserve: float, keep: float, x: float) -> float:
    # reserve - reserve^2/(reserve + keep*x), rearranged so nothing cancels
    # when x << reserve (the naive difference loses ~8 digits at reserve=1e8).
    e = keep * x
    return reserve * e / (reserve + e)


def _marginal(reserve: float, keep: float, x: float) -> float:
    q = reserve / (reserve + keep * x)
    return keep * q * q


def trade_output(pool: Pool, x: float) -> float:
    """Target tokens received when swapping ``x`` source tokens in ``pool``.

    Zero at x = 0, strictly increasing, concave, and bounded above by the
    pool reserve.
    """
    if x < 0:
        raise DomainError(f"trade amount must be nonnegative, got {x}")
    return _output(pool.reserve, 1.0 - pool.fee, x)


def marginal_price(pool: Pool, x: float) -> float:
    """Derivative of :func:`trade_output` at ``x``; strictly decreasing."""
    if x < 0:
        raise DomainError(f"trade amount must be nonnegative, got {x}")
    return _marginal(pool.reserve, 1.0 - pool.fee, x)
