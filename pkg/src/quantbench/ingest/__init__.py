from .parsers import ParseError, parse_news_jsonl, parse_ohlcv_csv, serialize_ohlcv_csv
from .provider import (
    Provenance,
    ProviderConfig,
    ProviderError,
    RateLimit,
    RateLimiter,
    RetryBackoff,
    fetch_bars,
)
from .transform import ScalerParams, align_calendar, apply_scaler, fit_scaler, temporal_features

__all__ = [
    "ParseError",
    "parse_ohlcv_csv",
    "serialize_ohlcv_csv",
    "parse_news_jsonl",
    "ProviderConfig",
    "ProviderError",
    "Provenance",
    "RateLimit",
    "RateLimiter",
    "RetryBackoff",
    "fetch_bars",
    "align_calendar",
    "fit_scaler",
    "apply_scaler",
    "ScalerParams",
    "temporal_features",
]
