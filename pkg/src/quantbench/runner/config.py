"""Declarative TOML run configuration with inheritance.

A config may name a base file in ``extends``; tables merge recursively with
the child winning.  Unknown keys are rejected with their full key path, so
typos fail loudly instead of silently using a default.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..core import SplitSpec, ensure_utc
from ..factors import WindowSet
from ..ingest.provider import ProviderConfig, RateLimit, RetryBackoff
from ..metrics import TRADING_METRICS

# strategy name -> (kind, allowed params)
STRATEGY_REGISTRY: dict[str, tuple[str, tuple[str, ...]]] = {
    "buy_and_hold": ("trading", ()),
    "macd": ("trading", ("fast", "slow", "signal")),
    "threshold": ("trading", ("tau", "predictions")),
    "topk_dropout": ("portfolio", ("k", "d", "scores")),
}

REPORT_FORMATS = ("json", "csv", "plotdata")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    source: str
    interval: str
    symbols: tuple[str, ...]
    start: datetime
    end: datetime
    ohlcv_dir: Optional[Path] = None
    news_path: Optional[Path] = None
    validation: str = "reject"
    provider: Optional[ProviderConfig] = None


@dataclass(frozen=True)
class RunConfig:
    output_dir: Path
    seed: int
    data: DataConfig
    split: SplitSpec
    windows: WindowSet
    strategy_name: str
    strategy_params: dict[str, Any]
    initial_cash: float
    fee_rate: float
    periods_per_year: int
    risk_free: float
    metric_names: tuple[str, ...]
    report_formats: tuple[str, ...]
    figures: bool
    echo: dict[str, Any] = field(default_factory=dict)

    @property
    def strategy_kind(self) -> str:
        return STRATEGY_REGISTRY[self.strategy_name][0]


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _load_toml_chain(path: Path, seen: tuple[Path, ...] = ()) -> dict:
    path = path.resolve()
    if path in seen:
        raise ConfigError(f"extends cycle involving {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base_name = raw.pop("extends", None)
    if base_name is None:
        return raw
    base = _load_toml_chain(path.parent / base_name, seen + (path,))
    return _deep_merge(base, raw)


class _Table:
    """Reads keys out of a TOML table, tracking what is left over."""

    def __init__(self, raw: dict, path: str):
        self.raw = dict(raw)
        self.path = path

    def take(self, key: str, default=None, required: bool = False):
        if key in self.raw:
            return self.raw.pop(key)
        if required:
            raise ConfigError(f"missing required key {self._at(key)}")
        return default

    def table(self, key: str) -> "_Table":
        return _Table(self.take(key, default={}), self._at(key))

    def _at(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def reject_unknown(self) -> None:
        if self.raw:
            key = sorted(self.raw)[0]
            raise ConfigError(f"unknown config key: {self._at(key)}")


def _parse_date(value, where: str) -> datetime:
    if isinstance(value, datetime):
        return ensure_utc(value)
    try:
        import datetime as dt
        if isinstance(value, dt.date):
            return ensure_utc(datetime(value.year, value.month, value.day))
        return ensure_utc(datetime.fromisoformat(str(value)))
    except ValueError:
        raise ConfigError(f"{where}: invalid date {value!r}") from None


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    merged = _load_toml_chain(path)
    root = _Table(merged, "")

    run = root.table("run")
    output_dir = Path(run.take("output_dir", "out"))
    if not output_dir.is_absolute():
        output_dir = path.parent / output_dir
    seed = int(run.take("seed", 0))
    run.reject_unknown()

    data = root.table("data")
    source = data.take("source", "files")
    if source not in ("files", "provider"):
        raise ConfigError(f"data.source must be files or provider, got {source!r}")
    interval = data.take("interval", "daily")
    symbols = tuple(data.take("symbols", required=True))
    if not symbols:
        raise ConfigError("data.symbols must name at least one symbol")
    start = _parse_date(data.take("start", required=True), "data.start")
    end = _parse_date(data.take("end", required=True), "data.end")
    if start > end:
        raise ConfigError("data.start must be <= data.end")
    validation = data.take("validation", "reject")
    if validation not in ("reject", "drop", "flag"):
        raise ConfigError(f"data.validation must be reject|drop|flag, got {validation!r}")

    ohlcv_dir = data.take("ohlcv_dir")
    news_path = data.take("news_path")
    provider_tbl = data.table("provider")
    provider = None
    if source == "provider":
        provider = ProviderConfig(
            base_url=str(provider_tbl.take("base_url", required=True)),
            api_key=str(provider_tbl.take("api_key", "")),
            name=str(provider_tbl.take("name", "")),
            max_retries=int(provider_tbl.take("max_retries", 3)),
            retry_backoff=RetryBackoff(
                base=float(provider_tbl.take("backoff_base", 0.1)),
                factor=float(provider_tbl.take("backoff_factor", 2.0)),
                max_delay=float(provider_tbl.take("backoff_max", 10.0)),
            ),
            rate_limit=RateLimit(
                max_requests=int(provider_tbl.take("rate_limit_requests", 10)),
                window=float(provider_tbl.take("rate_limit_window", 1.0)),
            ),
            timeout=float(provider_tbl.take("timeout", 10.0)),
        )
    provider_tbl.reject_unknown()
    if source == "files":
        if ohlcv_dir is None:
            raise ConfigError("data.ohlcv_dir is required when data.source = files")
        ohlcv_dir = Path(ohlcv_dir)
        if not ohlcv_dir.is_absolute():
            ohlcv_dir = path.parent / ohlcv_dir
    if news_path is not None:
        news_path = Path(news_path)
        if not news_path.is_absolute():
            news_path = path.parent / news_path
    data.reject_unknown()

    split_tbl = root.table("split")
    train_end = _parse_date(split_tbl.take("train_end", required=True), "split.train_end")
    split_tbl.reject_unknown()
    if not (start <= train_end <= end):
        raise ConfigError(
            f"split.train_end {train_end.date()} outside data range "
            f"[{start.date()}, {end.date()}]"
        )

    factors_tbl = root.table("factors")
    windows = WindowSet(tuple(int(w) for w in factors_tbl.take("windows", list(WindowSet().windows))))
    factors_tbl.reject_unknown()

    strategy_tbl = root.table("strategy")
    strategy_name = strategy_tbl.take("name", required=True)
    if strategy_name not in STRATEGY_REGISTRY:
        raise ConfigError(
            f"unknown strategy {strategy_name!r}; known: {', '.join(sorted(STRATEGY_REGISTRY))}"
        )
    params_tbl = strategy_tbl.table("params")
    allowed = STRATEGY_REGISTRY[strategy_name][1]
    strategy_params = {}
    for key in list(params_tbl.raw):
        if key not in allowed:
            raise ConfigError(f"unknown config key: strategy.params.{key}")
        value = params_tbl.take(key)
        if key in ("predictions", "scores"):
            p = Path(value)
            value = p if p.is_absolute() else path.parent / p
        strategy_params[key] = value
    params_tbl.reject_unknown()
    strategy_tbl.reject_unknown()

    env_tbl = root.table("env")
    initial_cash = float(env_tbl.take("initial_cash", 1e5))
    fee_rate = float(env_tbl.take("fee_rate", 1e-4))
    env_tbl.reject_unknown()

    metrics_tbl = root.table("metrics")
    periods_per_year = int(metrics_tbl.take("periods_per_year", 252))
    risk_free = float(metrics_tbl.take("risk_free", 0.0))
    metric_names = tuple(metrics_tbl.take("names", list(TRADING_METRICS)))
    unknown_metrics = [m for m in metric_names if m not in TRADING_METRICS]
    if unknown_metrics:
        raise ConfigError(f"unknown metric(s): {', '.join(unknown_metrics)}")
    metrics_tbl.reject_unknown()

    report_tbl = root.table("report")
    formats = tuple(report_tbl.take("formats", list(REPORT_FORMATS)))
    unknown_formats = [f for f in formats if f not in REPORT_FORMATS]
    if unknown_formats:
        raise ConfigError(f"unknown report format(s): {', '.join(unknown_formats)}")
    figures = bool(report_tbl.take("figures", True))
    report_tbl.reject_unknown()

    root.reject_unknown()

    return RunConfig(
        output_dir=output_dir,
        seed=seed,
        data=DataConfig(
            source=source, interval=interval, symbols=symbols, start=start, end=end,
            ohlcv_dir=ohlcv_dir, news_path=news_path, validation=validation,
            provider=provider,
        ),
        split=SplitSpec(train_end),
        windows=windows,
        strategy_name=strategy_name,
        strategy_params=strategy_params,
        initial_cash=initial_cash,
        fee_rate=fee_rate,
        periods_per_year=periods_per_year,
        risk_free=risk_free,
        metric_names=metric_names,
        report_formats=formats,
        figures=figures,
        echo=merged,
    )
