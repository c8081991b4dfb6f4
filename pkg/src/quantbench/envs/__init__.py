from .portfolio import PortfolioEnv, PortfolioState, WeightVector
from .prompt import render_prompt
from .trading import (
    Action,
    StepRecord,
    TradingEnv,
    TradingEnvConfig,
    TradingState,
    episode_return,
    parse_ledger_csv,
    records_to_csv,
    run_actions,
)

__all__ = [
    "Action",
    "TradingEnvConfig",
    "TradingState",
    "StepRecord",
    "TradingEnv",
    "run_actions",
    "episode_return",
    "records_to_csv",
    "parse_ledger_csv",
    "WeightVector",
    "PortfolioState",
    "PortfolioEnv",
    "render_prompt",
]
