"""Optimal trade routing across constant-product pools and fee competition."""

from .core import (
    Allocation,
    ConstantProduct,
    DomainError,
    Market,
    Pool,
    TradeFunction,
    marginal_price,
    trade_output,
)
from .flow import (
    ImbalanceError,
    PoolSnapshot,
    ReplayReport,
    Side,
    TradeDataError,
    TradeRecord,
    TradeSizeDistribution,
    best_response_expected,
    build_distribution,
    expected_utility,
    find_equilibrium_expected,
    mean_size_reduction,
    normalize_snapshots,
    read_snapshots_json,
    read_trades_csv,
    replay,
    synthetic_trade_records,
    write_trades_csv,
)
from .game import (
    BestResponseResult,
    CubicLevelSet,
    EquilibriumResult,
    FeeProfile,
    best_response,
    cubic_nonpositive_set_is_interval,
    find_equilibrium,
    pool_utility,
    quasiconcavity_cubic,
    unconstrained_utility_curve,
    utility_level_sets_are_intervals,
)
from .routing import (
    RouteResult,
    allocate_many,
    closed_form_allocation,
    kkt_allocation,
    solve_otp,
    solve_otp_waterfill,
    split_fraction_curve,
)
from .sweeps import ConfigError, SweepKind, SweepSpec, SweepTable, default_grid, run_sweep

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "BestResponseResult",
    "ConfigError",
    "ConstantProduct",
    "CubicLevelSet",
    "DomainError",
    "EquilibriumResult",
    "FeeProfile",
    "ImbalanceError",
    "Market",
    "Pool",
    "PoolSnapshot",
    "ReplayReport",
    "RouteResult",
    "Side",
    "SweepKind",
    "SweepSpec",
    "SweepTable",
    "TradeDataError",
    "TradeFunction",
    "TradeRecord",
    "TradeSizeDistribution",
    "allocate_many",
    "best_response",
    "best_response_expected",
    "build_distribution",
    "closed_form_allocation",
    "cubic_nonpositive_set_is_interval",
    "default_grid",
    "expected_utility",
    "find_equilibrium",
    "find_equilibrium_expected",
    "kkt_allocation",
    "marginal_price",
    "mean_size_reduction",
    "normalize_snapshots",
    "pool_utility",
    "quasiconcavity_cubic",
    "read_snapshots_json",
    "read_trades_csv",
    "replay",
    "run_sweep",
    "solve_otp",
    "solve_otp_waterfill",
    "split_fraction_curve",
    "synthetic_trade_records",
    "trade_output",
    "unconstrained_utility_curve",
    "utility_level_sets_are_intervals",
    "write_trades_csv",
]
