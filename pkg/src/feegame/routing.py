"""Solvers for splitting one trade across competing pools.

Three routes to the same optimum, deliberately different in structure so they
can cross-validate each other:

* :func:`closed_form_allocation` — the analytic stationarity solution,
  ignoring nonnegativity (entries may be negative).
* :func:`solve_otp` — derivative-free nested ternary/golden-section search
  over the simplex; needs nothing but the concavity of the trade functions.
* :func:`solve_otp_waterfill` — inverts each pool's marginal price and
  bisects the shared multiplier until the budget is met.

:func:`kkt_allocation` is the exact non-iterative form of the water-filling
solution (active set found by prefix scan); the game and flow modules use it
as their allocation engine because it is exactly affine in the trade size on
interior regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Allocation, DomainError, Market

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RouteResult:
    """An optimal (or tol-optimal) routing of one trade."""

    allocation: Allocation
    output: float
    lam: float | None  # shared marginal price, when the solver produced one
    interior: bool  # every pool received a strictly positive amount


def _output_one(reserve: float, keep: float, x: float) -> float:
    e = keep * x
    return reserve * e / (reserve + e)


def _total_output(reserves: Sequence[float], keeps: Sequence[float], xs: Sequence[float]) -> float:
    return sum(_output_one(a, k, x) for a, k, x in zip(reserves, keeps, xs))


def closed_form_allocation(market: Market, t: float) -> list[float]:
    """Unconstrained stationarity solution; entries may be negative.

    Evaluated as x_i = (A_i g_i / Σ A_j g_j) · (t + Σ_j A_j g_j (g_j − g_i))
    with g_i = 1/sqrt(1 − s_i), which is the same solution rearranged so the
    equal-fee case is exactly proportional and the sum stays t even when the
    reserves dwarf the trade.
    """
    if not t > 0:
        raise DomainError(f"trade size must be positive, got {t}")
    g = [1.0 / math.sqrt(1.0 - p.fee) for p in market.pools]
    ag = [p.reserve * gi for p, gi in zip(market.pools, g)]
    denom = sum(ag)
    xs = []
    for i in range(market.n):
        corr = sum(ag[j] * (g[j] - g[i]) for j in range(market.n))
        xs.append(ag[i] * (t + corr) / denom)
    return xs


def _sorted_pool_arrays(market: Market) -> tuple[list[int], list[float], list[float]]:
    """Pool indices sorted by keep-fraction descending, with reserves/keeps."""
    keeps = [1.0 - p.fee for p in market.pools]
    order = sorted(range(market.n), key=lambda i: -keeps[i])
    return order, [market.pools[i].reserve for i in order], [keeps[i] for i in order]


def _kkt_core(reserves: Sequence[float], keeps: Sequence[float], t: float) -> tuple[list[float], float]:
    """Exact water-filling on raw arrays; shared hot path for the whole package."""
    n = len(reserves)
    order = sorted(range(n), key=lambda i: -keeps[i])
    pa = 0.0  # sum of A_i / sqrt(keep_i) over the prefix
    pc = 0.0  # sum of A_i / keep_i over the prefix
    for k in range(n):
        i = order[k]
        pa += reserves[i] / math.sqrt(keeps[i])
        pc += reserves[i] / keeps[i]
        ratio = pa / (t + pc)
        lam = ratio * ratio
        next_keep = keeps[order[k + 1]] if k + 1 < n else 0.0
        if lam < keeps[i] * (1.0 + 1e-12) and lam >= next_keep * (1.0 - 1e-12):
            inv_sqrt_lam = (t + pc) / pa
            xs = [0.0] * n
            for j in order[: k + 1]:
                amt = reserves[j] * (math.sqrt(keeps[j]) * inv_sqrt_lam - 1.0) / keeps[j]
                xs[j] = max(0.0, amt)
            return xs, lam
    raise AssertionError("no valid active set found; unreachable for t > 0")


def kkt_allocation(market: Market, t: float) -> tuple[list[float], float]:
    """Exact constrained optimum via the stationarity system.

    Pools are sorted by 1 − s_i descending; the active set is always a prefix
    of that order, so scanning prefixes and solving the interior system on
    each finds the multiplier in closed form. Returns (amounts, lambda).
    """
    if not t > 0:
        raise DomainError(f"trade size must be positive, got {t}")
    return _kkt_core([p.reserve for p in market.pools], [1.0 - p.fee for p in market.pools], t)


def allocate_many(market: Market, sizes: np.ndarray) -> np.ndarray:
    """Vectorized :func:`kkt_allocation` amounts for a batch of trade sizes.

    Returns an array of shape (len(sizes), n). Used by the flow module to
    price whole trade distributions in one shot.
    """
    sizes = np.asarray(sizes, dtype=float)
    if sizes.ndim != 1 or sizes.size == 0:
        raise DomainError("sizes must be a non-empty 1-d array")
    if np.any(sizes <= 0):
        raise DomainError("all trade sizes must be positive")
    order, res, keeps = _sorted_pool_arrays(market)
    res_a = np.array(res)
    keeps_a = np.array(keeps)
    pa = np.cumsum(res_a / np.sqrt(keeps_a))
    pc = np.cumsum(res_a / keeps_a)
    # lam[j, k]: multiplier if the active prefix for size j has length k+1
    lam = (pa[None, :] / (sizes[:, None] + pc[None, :])) ** 2
    next_keep = np.append(keeps_a[1:], 0.0)
    valid = (lam < keeps_a[None, :] * (1.0 + 1e-12)) & (
        lam >= next_keep[None, :] * (1.0 - 1e-12)
    )
    k_star = np.argmax(valid, axis=1)
    inv_sqrt_lam = (sizes + pc[k_star]) / pa[k_star]
    amounts_sorted = (
        res_a[None, :]
        * (np.sqrt(keeps_a)[None, :] * inv_sqrt_lam[:, None] - 1.0)
        / keeps_a[None, :]
    )
    active = np.arange(market.n)[None, :] <= k_star[:, None]
    amounts_sorted = np.where(active, np.maximum(amounts_sorted, 0.0), 0.0)
    out = np.empty_like(amounts_sorted)
    out[:, order] = amounts_sorted
    return out


def solve_otp(market: Market, t: float, tol: float = 1e-9) -> RouteResult:
    """Derivative-free optimal routing by nested unimodal search.

    The pool list is split into halves; the budget assigned to the first half
    is found by golden-section search (valid because the optimal value of a
    concave program is concave in its budget), recursing within each half.
    Each one-dimensional search stops when its bracket is narrower than
    ``tol * t``. Coordinates left with less than four bracket widths are
    snapped to zero and their mass value-checked into the best other pool,
    which removes the first-order loss at priced-out pools.
    """
    if not t > 0:
        raise DomainError(f"trade size must be positive, got {t}")
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    reserves = [p.reserve for p in market.pools]
    keeps = [1.0 - p.fee for p in market.pools]
    width = tol * t

    def solve(lo: int, hi: int, budget: float) -> tuple[float, list[float]]:
        if hi - lo == 1:
            return _output_one(reserves[lo], keeps[lo], budget), [budget]
        mid = (lo + hi) // 2

        def f(y: float) -> float:
            return solve(lo, mid, y)[0] + solve(mid, hi, budget - y)[0]

        a, b = 0.0, budget
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc, fd = f(c), f(d)
        while b - a > width:
            if fc >= fd:  # ties shrink rightward: plateaus resolve to smaller y
                b, d, fd = d, c, fc
                c = b - _INVPHI * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + _INVPHI * (b - a)
                fd = f(d)
        y = 0.5 * (a + b)
        vl, xl = solve(lo, mid, y)
        vr, xr = solve(mid, hi, budget - y)
        return vl + vr, xl + xr

    value, xs = solve(0, market.n, t)

    thresh = 4.0 * width
    tiny = [i for i, x in enumerate(xs) if x <= thresh]
    if tiny and len(tiny) < market.n:
        mass = sum(xs[i] for i in tiny)
        base = [0.0 if i in tiny else x for i, x in enumerate(xs)]
        for j in range(market.n):
            if j in tiny:
                continue
            cand = list(base)
            cand[j] += mass
            v = _total_output(reserves, keeps, cand)
            if v > value:
                value, xs = v, cand

    return RouteResult(
        allocation=Allocation(xs, t),
        output=value,
        lam=None,
        interior=all(x > 0 for x in xs),
    )


def solve_otp_waterfill(market: Market, t: float, tol: float = 1e-9) -> RouteResult:
    """Optimal routing by bisecting the shared marginal price.

    Inverting each pool's marginal price at level lam gives
    x_i(lam) = max(0, A_i (sqrt((1-s_i)/lam) - 1) / (1-s_i)); the sum is
    strictly decreasing in lam, so bisection on lam until the allocations
    absorb the budget (|sum - t| <= tol*t) solves the constrained problem.
    """
    if not t > 0:
        raise DomainError(f"trade size must be positive, got {t}")
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    reserves = [p.reserve for p in market.pools]
    keeps = [1.0 - p.fee for p in market.pools]

    def fill(lam: float) -> list[float]:
        out = []
        for a, k in zip(reserves, keeps):
            q = math.sqrt(k / lam)
            out.append(a * (q - 1.0) / k if q > 1.0 else 0.0)
        return out

    hi = max(keeps)  # at lam >= max marginal price at 0, nothing is allocated
    lo = hi
    while sum(fill(lo)) < t:
        lo *= 0.5
        if lo < 1e-300:
            raise AssertionError("bisection bracket collapsed; unreachable")
    target_err = max(tol * t, 4.0 * math.ulp(t))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        total = sum(fill(mid))
        if total > t:
            lo = mid
        else:
            hi = mid
        if abs(total - t) <= target_err:
            lam = mid
            break
        if (hi - lo) <= 1e-15 * hi:
            lam = 0.5 * (lo + hi)
            break
    else:
        lam = 0.5 * (lo + hi)

    xs = fill(lam)
    # absorb the leftover bisection residual so the sum constraint is exact
    total = sum(xs)
    if total > 0 and total != t:
        scale = t / total
        xs = [x * scale for x in xs]
    return RouteResult(
        allocation=Allocation(xs, t),
        output=_total_output(reserves, keeps, xs),
        lam=lam,
        interior=all(x > 0 for x in xs),
    )


def split_fraction_curve(
    market: Market,
    t: float,
    pool_index: int,
    fee_grid: Sequence[float],
    tol: float = 1e-9,
) -> list[tuple[float, float]]:
    """Optimal fraction routed to one pool as that pool's fee varies."""
    if not 0 <= pool_index < market.n:
        raise DomainError(f"pool index {pool_index} out of range for n={market.n}")
    if any(not 0.0 <= f < 1.0 for f in fee_grid):
        raise DomainError("fee grid values must lie in [0, 1)")
    points = []
    fees = list(market.fees())
    for fee in fee_grid:
        fees[pool_index] = fee
        result = solve_otp(market.with_fees(fees), t, tol)
        points.append((fee, result.allocation.amounts[pool_index] / t))
    return points
