"""quantbench: backtesting engine, factor library, market environments and reward math.

Subpackages / modules:
    core        bars, series, panels, calendars, splits, relative returns
    ingest      file parsers, provider HTTP client, calendar alignment, scaling
    factors     the 145-column technical indicator matrix
    metrics     trading / forecasting / scoring metric suite
    envs        single-asset trading and multi-asset portfolio simulators
    strategies  deterministic baseline policies
    rewards     group-normalized advantages, clipped surrogate, format rewards
    runner      TOML-config batch backtests, reports, figures, CLI
"""

__version__ = "0.1.0"
