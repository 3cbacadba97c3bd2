import random

import pytest

from feegame import Market, Pool


@pytest.fixture
def example_market() -> Market:
    """Two pools of sizes 2,000,000 and 4,000,000, both charging 0.3%."""
    return Market([Pool(1e6, 0.003), Pool(2e6, 0.003)])


def random_market(rng: random.Random, n: int, fee_max: float = 0.05,
                  log_min: float = 4.0, log_max: float = 8.0) -> Market:
    return Market(
        [Pool(10 ** rng.uniform(log_min, log_max), rng.uniform(0.0, fee_max)) for _ in range(n)]
    )


def random_trade(rng: random.Random, market: Market,
                 lo: float = 1e-4, hi: float = 1e-2) -> float:
    return rng.uniform(lo, hi) * min(p.reserve for p in market.pools)
