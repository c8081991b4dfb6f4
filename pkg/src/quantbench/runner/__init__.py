from .backtest import RunReport, run_backtest
from .config import ConfigError, RunConfig, load_config
from .report import emit_report

__all__ = ["RunConfig", "ConfigError", "load_config", "run_backtest", "RunReport", "emit_report"]
