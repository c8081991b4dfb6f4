"""Walk-forward backtest orchestration.

Pipeline: ingest and validate -> (factors on demand) -> strategy signals
computed strictly causally on data up to each decision bar -> environment
simulation over the test split only -> metric suite over the realized return
stream.  Deterministic for a fixed config and data.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .. import __version__
from ..core import AssetSeries, NewsItem, Panel, validate_bars
from ..envs.portfolio import PortfolioEnv, WeightVector
from ..envs.trading import StepRecord, TradingEnv, TradingEnvConfig, run_actions
from ..ingest.parsers import parse_news_jsonl, parse_ohlcv_csv, parse_timestamp
from ..ingest.provider import RateLimiter, fetch_bars
from ..ingest.transform import align_calendar
from ..metrics import MetricReport, ReturnSeries, evaluate_returns
from ..strategies import MacdParams, TopkParams, buy_and_hold, macd_signals, threshold_rule, topk_dropout
from .config import ConfigError, RunConfig


class StageError(RuntimeError):
    """Pipeline failure annotated with the stage and asset that raised it."""

    def __init__(self, stage: str, symbol: str, cause: Exception):
        super().__init__(f"[{stage}] {symbol}: {cause}")
        self.stage = stage
        self.symbol = symbol
        self.cause = cause


@dataclass(frozen=True)
class RunReport:
    strategy: str
    symbols: tuple[str, ...]
    metrics: MetricReport
    rets: tuple[float, ...]
    equity: tuple[tuple[datetime, float], ...]
    drawdown: tuple[tuple[datetime, float], ...]
    records: tuple[StepRecord, ...]          # empty for portfolio runs
    portfolio_rows: tuple[tuple[datetime, float, float], ...] = ()  # (ts, value, ret)
    provenance: tuple[dict[str, str], ...] = ()
    config_echo: dict[str, Any] = field(default_factory=dict)
    version: str = __version__
    generated_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))


def _load_series(
    cfg: RunConfig, symbol: str, limiter: Optional[RateLimiter] = None
) -> tuple[AssetSeries, dict[str, str]]:
    data = cfg.data
    if data.source == "files":
        path = data.ohlcv_dir / f"{symbol}.csv"
        try:
            blob = path.read_bytes()
        except OSError as exc:
            raise StageError("ingest", symbol, exc) from None
        series = parse_ohlcv_csv(blob, symbol)
        provenance = {
            "provider": "files",
            "version": __version__,
            "source": str(path),
            "request_digest": hashlib.sha256(blob).hexdigest(),
        }
    else:
        series, prov = fetch_bars(
            data.provider, symbol, data.interval, data.start, data.end, limiter=limiter
        )
        provenance = {
            "provider": prov.provider,
            "version": prov.version,
            "retrieved_at": prov.retrieved_at.isoformat(),
            "request_digest": prov.request_digest,
        }
    bars = [b for b in series.bars if data.start <= b.timestamp <= data.end]
    series = AssetSeries(symbol, bars)
    series, _ = validate_bars(series, data.validation)
    if len(series) < 2:
        raise StageError("ingest", symbol, ValueError("fewer than 2 bars in range"))
    return series, provenance


def _shared_limiter(cfg: RunConfig) -> Optional[RateLimiter]:
    if cfg.data.provider is None:
        return None
    return RateLimiter(cfg.data.provider.rate_limit)


def _load_news(cfg: RunConfig, symbol: str) -> tuple[NewsItem, ...]:
    if cfg.data.news_path is None:
        return ()
    items, _ = parse_news_jsonl(cfg.data.news_path.read_bytes(), policy="flag")
    return tuple(n for n in items if n.symbol == symbol)


def _read_prediction_csv(path: Path) -> dict[datetime, float]:
    out: dict[datetime, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "timestamp" not in reader.fieldnames:
            raise ValueError(f"{path}: prediction file needs a timestamp column")
        value_col = [c for c in reader.fieldnames if c != "timestamp"]
        if len(value_col) != 1:
            raise ValueError(f"{path}: expected exactly one value column")
        for row in reader:
            out[parse_timestamp(row["timestamp"])] = float(row[value_col[0]])
    return out


def _read_score_panel(path: Path, symbols: tuple[str, ...]) -> tuple[list[datetime], np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "timestamp" not in reader.fieldnames:
            raise ValueError(f"{path}: score panel needs a timestamp column")
        missing = [s for s in symbols if s not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing score column(s): {', '.join(missing)}")
        calendar, rows, masks = [], [], []
        for row in reader:
            calendar.append(parse_timestamp(row["timestamp"]))
            values, present = [], []
            for s in symbols:
                cell = row[s].strip()
                values.append(float(cell) if cell else np.nan)
                present.append(bool(cell))
            rows.append(values)
            masks.append(present)
    scores = np.array(rows, dtype=float).T          # N x T
    mask = np.array(masks, dtype=bool).T
    return calendar, scores, mask


def _trading_actions(cfg: RunConfig, series: AssetSeries, test_start: int) -> list:
    name, params = cfg.strategy_name, cfg.strategy_params
    n_test = len(series) - test_start
    if name == "buy_and_hold":
        return buy_and_hold(n_test)
    if name == "macd":
        mp = MacdParams(
            fast=int(params.get("fast", 12)),
            slow=int(params.get("slow", 26)),
            signal=int(params.get("signal", 9)),
        )
        closes = [b.close for b in series.bars]
        _, _, actions = macd_signals(closes, mp, active_from=test_start)
        return actions[test_start:]
    if name == "threshold":
        if "predictions" not in params:
            raise ConfigError("strategy.params.predictions is required for threshold")
        pred_path = Path(params["predictions"])
        preds = _read_prediction_csv(pred_path)
        tau = float(params.get("tau", 0.0))
        yhat = []
        for bar in series.bars[test_start:]:
            if bar.timestamp not in preds:
                raise ValueError(f"no prediction for {bar.timestamp.isoformat()}")
            yhat.append(preds[bar.timestamp])
        return threshold_rule(yhat, tau)
    raise ConfigError(f"strategy {name!r} is not a trading strategy")


def _run_trading(cfg: RunConfig) -> RunReport:
    if len(cfg.data.symbols) != 1:
        raise ConfigError(
            f"strategy {cfg.strategy_name!r} is single-asset; configure exactly one symbol"
        )
    symbol = cfg.data.symbols[0]
    series, provenance = _load_series(cfg, symbol, _shared_limiter(cfg))
    timestamps = series.timestamps
    test_start = next(
        (i for i, ts in enumerate(timestamps) if ts >= cfg.split.train_end), None
    )
    if test_start is None or len(series) - test_start < 2:
        raise StageError("split", symbol, ValueError("test split needs at least 2 bars"))

    try:
        actions = _trading_actions(cfg, series, test_start)
    except (ValueError, OSError) as exc:
        raise StageError("signals", symbol, exc) from None

    test_series = AssetSeries(symbol, series.bars[test_start:])
    env = TradingEnv(TradingEnvConfig(
        series=test_series,
        initial_cash=cfg.initial_cash,
        fee_rate=cfg.fee_rate,
        news=_load_news(cfg, symbol),
    ))
    _, records = run_actions(env, actions)
    rets = [r.ret for r in records]

    equity = [(test_series.bars[0].timestamp, records[0].pre_value)]
    equity += [(test_series.bars[i + 1].timestamp, rec.post_value)
               for i, rec in enumerate(records)]
    return _finish_report(cfg, (symbol,), rets, equity, records=tuple(records),
                          provenance=(provenance,))


def _run_portfolio(cfg: RunConfig) -> RunReport:
    params = cfg.strategy_params
    if "k" not in params or "d" not in params:
        raise ConfigError("strategy.params.k and .d are required for topk_dropout")
    if "scores" not in params:
        raise ConfigError("strategy.params.scores is required for topk_dropout")
    tk = TopkParams(k=int(params["k"]), d=int(params["d"]))

    limiter = _shared_limiter(cfg)
    loaded = [_load_series(cfg, s, limiter) for s in cfg.data.symbols]
    panel = align_calendar([series for series, _ in loaded])
    test_idx = [i for i, ts in enumerate(panel.calendar) if ts >= cfg.split.train_end]
    if len(test_idx) < 2:
        raise StageError("split", ",".join(cfg.data.symbols),
                         ValueError("test split needs at least 2 bars"))
    test_calendar = [panel.calendar[i] for i in test_idx]

    scores_path = Path(params["scores"])
    score_calendar, scores, score_mask = _read_score_panel(scores_path, panel.symbols)
    by_ts = {ts: j for j, ts in enumerate(score_calendar)}
    cols = []
    for ts in test_calendar:
        if ts not in by_ts:
            raise StageError("signals", ",".join(cfg.data.symbols),
                             ValueError(f"no scores for {ts.isoformat()}"))
        cols.append(by_ts[ts])
    test_scores = scores[:, cols]
    test_mask = score_mask[:, cols]
    allocations = topk_dropout(test_scores, test_mask, panel.symbols, tk)

    test_panel = Panel.from_series(
        [AssetSeries(s, [b for b in series.bars if b.timestamp >= cfg.split.train_end])
         for (series, _), s in zip(loaded, panel.symbols)],
        test_calendar,
    )
    env = PortfolioEnv(test_panel, initial_cash=cfg.initial_cash, fee_rate=cfg.fee_rate)
    state = env.reset()
    rets: list[float] = []
    rows: list[tuple[datetime, float, float]] = [(test_calendar[0], cfg.initial_cash, 0.0)]
    equity = [(test_calendar[0], cfg.initial_cash)]
    for i in range(len(test_calendar) - 1):
        _, weights = allocations[i]
        state, reward = env.step(state, WeightVector(weights))
        value = env.value(state)
        rets.append(reward)
        rows.append((test_calendar[i + 1], value, reward))
        equity.append((test_calendar[i + 1], value))
    return _finish_report(cfg, panel.symbols, rets, equity, records=(),
                          portfolio_rows=tuple(rows),
                          provenance=tuple(p for _, p in loaded))


def _finish_report(cfg: RunConfig, symbols, rets, equity, records=(),
                   portfolio_rows=(), provenance=()) -> RunReport:
    rs = ReturnSeries(rets, periods_per_year=cfg.periods_per_year, risk_free=cfg.risk_free)
    report = evaluate_returns(rs, cfg.metric_names)
    peak = -np.inf
    drawdown = []
    for ts, value in equity:
        peak = max(peak, value)
        drawdown.append((ts, (peak - value) / peak))
    return RunReport(
        strategy=cfg.strategy_name,
        symbols=tuple(symbols),
        metrics=report,
        rets=tuple(rets),
        equity=tuple(equity),
        drawdown=tuple(drawdown),
        records=tuple(records),
        portfolio_rows=tuple(portfolio_rows),
        provenance=tuple(provenance),
        config_echo=cfg.echo,
    )


def run_backtest(cfg: RunConfig) -> RunReport:
    if cfg.strategy_kind == "trading":
        return _run_trading(cfg)
    return _run_portfolio(cfg)
