"""The fee-competition game between pools.

Each pool picks a fee; a trade of fixed size is then routed optimally across
all pools, and a pool's payoff is fee times the amount routed to it. Best
responses are found by unimodal search (the payoff is quasiconcave in the own
fee, which the cubic level-set machinery below makes testable), and pure
equilibria by cyclic best-response iteration with a post-hoc audit that no
pool can profitably deviate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import DomainError, Market
from .routing import _kkt_core

FEE_CEILING = 1.0 - 1e-9  # stand-in for the (strictly dominated) fee of 1

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FeeProfile:
    """One strategy vector of the game: a fee per pool."""

    fees: tuple[float, ...]

    def __init__(self, fees: Sequence[float]) -> None:
        fees = tuple(float(f) for f in fees)
        if any(not 0.0 <= f < 1.0 for f in fees):
            raise DomainError(f"fees must lie in [0, 1): {fees}")
        object.__setattr__(self, "fees", fees)

    def __len__(self) -> int:
        return len(self.fees)

    def replace(self, i: int, fee: float) -> "FeeProfile":
        fees = list(self.fees)
        fees[i] = fee
        return FeeProfile(fees)

    @classmethod
    def uniform(cls, n: int, fee: float) -> "FeeProfile":
        return cls([fee] * n)


@dataclass(frozen=True)
class BestResponseResult:
    fee: float
    utility: float
    evaluations: int


@dataclass(frozen=True)
class EquilibriumResult:
    """Outcome of best-response iteration plus the no-deviation audit."""

    fees: FeeProfile
    utilities: tuple[float, ...]
    iterations: int
    converged: bool
    max_gain: float  # largest relative utility gain any pool's deviation found


def _check_player(market: Market, profile: FeeProfile, i: int) -> None:
    if len(profile) != market.n:
        raise DomainError(f"profile has {len(profile)} fees for {market.n} pools")
    if not 0 <= i < market.n:
        raise DomainError(f"player index {i} out of range for n={market.n}")


def pool_utility(market: Market, profile: FeeProfile, i: int, t: float) -> float:
    """Fees pool ``i`` collects (in source tokens) when the trade routes optimally."""
    _check_player(market, profile, i)
    if not t > 0:
        raise DomainError(f"trade size must be positive, got {t}")
    reserves = [p.reserve for p in market.pools]
    keeps = [1.0 - f for f in profile.fees]
    xs, _ = _kkt_core(reserves, keeps, t)
    return profile.fees[i] * xs[i]


def _argmax_fee(evaluate: Callable[[float], float], tol: float) -> tuple[float, float, int]:
    """Golden-section argmax of a quasiconcave payoff over [0, FEE_CEILING].

    Ties move the upper end of the bracket, so flat stretches (e.g. the
    zero-payoff plateau where a pool is priced out) resolve toward the
    smallest maximizing fee.
    """
    evals = 0

    def f(fee: float) -> float:
        nonlocal evals
        evals += 1
        return evaluate(fee)

    a, b = 0.0, FEE_CEILING
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    fee = 0.5 * (a + b)
    return fee, f(fee), evals


def best_response(
    market: Market, profile: FeeProfile, i: int, t: float, tol: float = 1e-9
) -> BestResponseResult:
    """The fee maximizing pool ``i``'s collected fees, all other fees fixed."""
    _check_player(market, profile, i)
    if not t > 0:
        raise DomainError(f"trade size must be positive, got {t}")
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    reserves = [p.reserve for p in market.pools]
    keeps = [1.0 - f for f in profile.fees]

    def evaluate(fee: float) -> float:
        keeps[i] = 1.0 - fee
        xs, _ = _kkt_core(reserves, keeps, t)
        return fee * xs[i]

    fee, utility, evals = _argmax_fee(evaluate, tol)
    return BestResponseResult(fee=fee, utility=utility, evaluations=evals)


def find_equilibrium(
    market: Market,
    start: FeeProfile,
    t: float,
    tol: float = 1e-7,
    max_iters: int = 10_000,
    deviation_tol: float = 1e-4,
    audit_points: int = 1001,
) -> EquilibriumResult:
    """Cyclic best-response iteration to a fixed point, then a deviation audit.

    One iteration updates every pool's fee in order 1..n (Gauss-Seidel).
    Fees count as converged when no fee moved more than ``tol`` across a full
    round. The audit then scans a dense fee grid per pool; ``converged`` is
    only reported when no grid deviation improves a pool's payoff by more
    than ``deviation_tol`` (relative). Non-convergence is reported in the
    result, not raised.
    """
    _check_player(market, start, 0)
    if not t > 0:
        raise DomainError(f"trade size must be positive, got {t}")
    fees = list(start.fees)
    br_tol = min(tol * 0.1, 1e-8)
    fee_converged = False
    rounds = 0
    for rounds in range(1, max_iters + 1):
        delta = 0.0
        for i in range(market.n):
            result = best_response(market, FeeProfile(fees), i, t, br_tol)
            delta = max(delta, abs(result.fee - fees[i]))
            fees[i] = result.fee
        if delta < tol:
            fee_converged = True
            break

    profile = FeeProfile(fees)
    utilities = tuple(pool_utility(market, profile, i, t) for i in range(market.n))

    max_gain = 0.0
    grid = np.linspace(0.0, FEE_CEILING, audit_points)
    for i in range(market.n):
        best_alt = 0.0
        for fee in grid:
            best_alt = max(best_alt, pool_utility(market, profile.replace(i, fee), i, t))
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


@dataclass(frozen=True)
class CubicLevelSet:
    """Coefficients of the cubic whose nonpositive set is a payoff level set.

    After substituting t_i = sqrt(1 - s_i), the own-fee payoff of a pool is
    at least ``alpha`` exactly where the cubic below is nonpositive; payoff
    quasiconcavity is equivalent to that set being a single interval.
    """

    alpha: float
    c_prime: float
    d_prime: float

    def __post_init__(self) -> None:
        if not self.c_prime > 0:
            raise DomainError(f"c_prime must be positive, got {self.c_prime}")
        if not self.d_prime > 0:
            raise DomainError(f"d_prime must be positive, got {self.d_prime}")

    @classmethod
    def from_market(
        cls, market: Market, profile: FeeProfile, i: int, t: float, alpha: float
    ) -> "CubicLevelSet":
        """Level-set cubic of pool ``i``'s payoff (scaled by 1/A_i) at level alpha."""
        _check_player(market, profile, i)
        if market.n < 2:
            raise DomainError("the level-set cubic needs at least one competitor")
        if not t > 0:
            raise DomainError(f"trade size must be positive, got {t}")
        c = t + sum(
            p.reserve / (1.0 - f)
            for j, (p, f) in enumerate(zip(market.pools, profile.fees))
            if j != i
        )
        d = sum(
            p.reserve / math.sqrt(1.0 - f)
            for j, (p, f) in enumerate(zip(market.pools, profile.fees))
            if j != i
        )
        return cls(alpha=alpha, c_prime=c / d, d_prime=market.pools[i].reserve / d)


def quasiconcavity_cubic(level: CubicLevelSet, t_i: float) -> float:
    """Evaluate the level-set cubic at t_i (meaningful on [0, 1]); f(0) = 1."""
    a, cp, dp = level.alpha, level.c_prime, level.d_prime
    return cp * t_i**3 + (a - 1.0) * t_i**2 + (a * dp - cp) * t_i + 1.0


def cubic_nonpositive_set_is_interval(level: CubicLevelSet, samples: int = 10_001) -> bool:
    """Dense-sampling check that {t in [0,1] : cubic(t) <= 0} is contiguous."""
    ts = np.linspace(0.0, 1.0, samples)
    f = (
        level.c_prime * ts**3
        + (level.alpha - 1.0) * ts**2
        + (level.alpha * level.d_prime - level.c_prime) * ts
        + 1.0
    )
    mask = f <= 0.0
    switches = np.abs(np.diff(mask.astype(np.int8)))
    return int(switches.sum()) <= 2  # at most one 0->1 and one 1->0 transition


def unconstrained_utility_curve(
    market: Market, profile: FeeProfile, i: int, t: float, fee_grid: np.ndarray
) -> np.ndarray:
    """Pool ``i``'s payoff over a fee grid using the interior analytic split.

    Only meaningful in the interior regime (every pool attracting positive
    flow); values may go negative where the pool would actually be priced
    out, which is exactly what the level-set analysis covers.
    """
    _check_player(market, profile, i)
    s = np.asarray(fee_grid, dtype=float)
    if market.n == 1:
        return s * t  # the single pool always receives the whole trade
    c = t + sum(
        p.reserve / (1.0 - f)
        for j, (p, f) in enumerate(zip(market.pools, profile.fees))
        if j != i
    )
    d = sum(
        p.reserve / math.sqrt(1.0 - f)
        for j, (p, f) in enumerate(zip(market.pools, profile.fees))
        if j != i
    )
    root = np.sqrt(1.0 - s)
    a_i = market.pools[i].reserve
    return a_i * s * (c / d - 1.0 / root) / (a_i / d + root)


def utility_level_sets_are_intervals(
    market: Market, profile: FeeProfile, i: int, t: float, samples: int = 10_001
) -> bool:
    """Sampled check that every superlevel set of the own-fee payoff is an interval.

    Equivalent to the sampled sequence being unimodal: nondecreasing up to its
    argmax and nonincreasing after, within a small noise allowance. Returns
    the verdict instead of raising.
    """
    grid = np.linspace(0.0, FEE_CEILING, samples)
    u = unconstrained_utility_curve(market, profile, i, t, grid)
    m = int(np.argmax(u))
    noise = 1e-9 * max(1.0, float(np.max(np.abs(u))))
    rising = np.all(np.diff(u[: m + 1]) >= -noise)
    falling = np.all(np.diff(u[m:]) <= noise)
    return bool(rising and falling)
