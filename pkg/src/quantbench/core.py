"""Shared domain types: bars, per-asset series, calendar-aligned panels and splits.

Everything here is immutable after construction and safe to share across
threads.  Bars are allowed to hold invalid values (a raw feed row); use
``validate_bars`` to enforce the OHLCV sanity rules under a chosen policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

PANEL_FIELDS = ("open", "high", "low", "close", "volume", "adjusted_close")
CLOSE_FIELD = PANEL_FIELDS.index("close")


class ValidationError(ValueError):
    """A bar violates the OHLCV sanity rules under the reject policy."""


def ensure_utc(ts: datetime) -> datetime:
    """Return ``ts`` as a timezone-aware UTC instant (naive input assumed UTC)."""
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class Bar:
    """One OHLCV observation.

    Construction does not enforce the price/volume sanity rules: raw feed rows
    must be representable so that ``validate_bars`` can report or drop them.
    """

    timestamp: datetime
    open: float
    high: float
    low: float
    close: float
    volume: float
    adjusted_close: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", ensure_utc(self.timestamp))

    @property
    def price(self) -> float:
        """Valuation price: adjusted close when present, else close."""
        return self.close if self.adjusted_close is None else self.adjusted_close


@dataclass(frozen=True)
class AssetSeries:
    """Ordered bars for one asset. Timestamps strictly increasing, no duplicates."""

    symbol: str
    bars: tuple[Bar, ...]

    def __init__(self, symbol: str, bars: Iterable[Bar]):
        object.__setattr__(self, "symbol", symbol)
        object.__setattr__(self, "bars", tuple(bars))
        if not symbol:
            raise ValueError("symbol must be non-empty")
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.timestamp <= prev.timestamp:
                raise ValueError(
                    f"{symbol}: timestamps must be strictly increasing, "
                    f"got {prev.timestamp.isoformat()} then {cur.timestamp.isoformat()}"
                )

    def __len__(self) -> int:
        return len(self.bars)

    @property
    def timestamps(self) -> tuple[datetime, ...]:
        return tuple(b.timestamp for b in self.bars)

    def closes(self) -> np.ndarray:
        return np.array([b.close for b in self.bars], dtype=float)

    def is_daily(self) -> bool:
        """True when every timestamp sits on a UTC midnight (daily granularity)."""
        return all(
            b.timestamp.hour == 0 and b.timestamp.minute == 0
            and b.timestamp.second == 0 and b.timestamp.microsecond == 0
            for b in self.bars
        )


@dataclass(frozen=True)
class NewsItem:
    """One news record attached to an asset."""

    timestamp: datetime
    symbol: str
    title: str
    content: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", ensure_utc(self.timestamp))
        if not self.title:
            raise ValueError("news title must be non-empty")


@dataclass(frozen=True)
class TemporalFeatures:
    """Sparse calendar decomposition of a timestamp (UTC, weekday 0 = Monday)."""

    day: int
    month: int
    weekday: int
    year: int

    def __post_init__(self) -> None:
        if not 1 <= self.day <= 31:
            raise ValueError(f"day out of range: {self.day}")
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if not 0 <= self.weekday <= 6:
            raise ValueError(f"weekday out of range: {self.weekday}")


@dataclass(frozen=True)
class SplitSpec:
    """Temporal split boundary: rows with timestamp < train_end are train, >= are test."""

    train_end: datetime

    def __post_init__(self) -> None:
        object.__setattr__(self, "train_end", ensure_utc(self.train_end))

    def train_mask(self, calendar: Sequence[datetime]) -> np.ndarray:
        return np.array([ts < self.train_end for ts in calendar], dtype=bool)

    def test_mask(self, calendar: Sequence[datetime]) -> np.ndarray:
        return ~self.train_mask(calendar)

    def validate_against(self, calendar: Sequence[datetime]) -> None:
        if not calendar:
            raise ValueError("empty calendar")
        if not (calendar[0] <= self.train_end <= calendar[-1]):
            raise ValueError(
                f"train_end {self.train_end.isoformat()} outside calendar range "
                f"[{calendar[0].isoformat()}, {calendar[-1].isoformat()}]"
            )


@dataclass(frozen=True)
class Panel:
    """Calendar-aligned multi-asset OHLCV collection.

    ``values`` is N x T x D over ``PANEL_FIELDS``; absent cells carry NaN and a
    False ``mask`` entry.  ``adjusted_close`` is NaN inside present cells when
    the source bar did not carry one.
    """

    symbols: tuple[str, ...]
    calendar: tuple[datetime, ...]
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        n, t = len(self.symbols), len(self.calendar)
        if self.values.shape != (n, t, len(PANEL_FIELDS)):
            raise ValueError(f"values shape {self.values.shape} != {(n, t, len(PANEL_FIELDS))}")
        if self.mask.shape != (n, t):
            raise ValueError(f"mask shape {self.mask.shape} != {(n, t)}")
        for prev, cur in zip(self.calendar, self.calendar[1:]):
            if cur <= prev:
                raise ValueError("panel calendar must be strictly increasing")
        self.values.setflags(write=False)
        self.mask.setflags(write=False)

    @property
    def n_assets(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.calendar)

    def close(self) -> np.ndarray:
        """N x T close prices (NaN where masked)."""
        return self.values[:, :, CLOSE_FIELD]

    def symbol_index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise KeyError(f"unknown symbol {symbol!r}") from None

    def get_series(self, symbol: str) -> AssetSeries:
        """Extract the per-asset series back out (present cells only)."""
        i = self.symbol_index(symbol)
        bars = []
        for t, ts in enumerate(self.calendar):
            if not self.mask[i, t]:
                continue
            o, h, lo, c, v, adj = (float(x) for x in self.values[i, t])
            bars.append(Bar(ts, o, h, lo, c, v, None if np.isnan(adj) else adj))
        return AssetSeries(symbol, bars)

    @staticmethod
    def from_series(series: Sequence[AssetSeries], calendar: Sequence[datetime]) -> "Panel":
        calendar = tuple(calendar)
        index = {ts: t for t, ts in enumerate(calendar)}
        n, t = len(series), len(calendar)
        values = np.full((n, t, len(PANEL_FIELDS)), np.nan)
        mask = np.zeros((n, t), dtype=bool)
        for i, s in enumerate(series):
            for bar in s.bars:
                j = index.get(bar.timestamp)
                if j is None:
                    raise ValueError(
                        f"{s.symbol}: bar timestamp {bar.timestamp.isoformat()} not in calendar"
                    )
                adj = np.nan if bar.adjusted_close is None else bar.adjusted_close
                values[i, j] = (bar.open, bar.high, bar.low, bar.close, bar.volume, adj)
                mask[i, j] = True
        return Panel(tuple(s.symbol for s in series), calendar, values, mask)


@dataclass(frozen=True)
class RelativeReturns:
    """N x S relative returns off an anchor index; masked cells are NaN."""

    values: np.ndarray
    mask: np.ndarray
    anchor_index: int

    def __post_init__(self) -> None:
        if self.values.shape != self.mask.shape:
            raise ValueError("values/mask shape mismatch")
        self.values.setflags(write=False)
        self.mask.setflags(write=False)


def compute_relative_returns(panel: Panel, anchor: int, horizon: int) -> RelativeReturns:
    """Relative close returns: values[i][s] = close[i][anchor+s+1] / close[i][anchor] - 1.

    Cells where either the anchor or the target bar is missing propagate as
    masked.  A present anchor close that is zero or negative is an error.
    """
    t_len = len(panel)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not 0 <= anchor or anchor + horizon > t_len - 1:
        raise ValueError(
            f"anchor {anchor} with horizon {horizon} out of range for panel of length {t_len}"
        )
    closes = panel.close()
    values = np.full((panel.n_assets, horizon), np.nan)
    mask = np.zeros((panel.n_assets, horizon), dtype=bool)
    for i in range(panel.n_assets):
        if not panel.mask[i, anchor]:
            continue
        base = closes[i, anchor]
        if base <= 0:
            raise ValueError(
                f"{panel.symbols[i]}: anchor close must be positive, got {base}"
            )
        for s in range(horizon):
            j = anchor + s + 1
            if panel.mask[i, j]:
                values[i, s] = closes[i, j] / base - 1.0
                mask[i, s] = True
    return RelativeReturns(values, mask, anchor)


class BarPolicy(str, Enum):
    REJECT = "reject"
    DROP = "drop"
    FLAG = "flag"


@dataclass(frozen=True)
class BarViolation:
    timestamp: datetime
    field: str
    message: str


def _bar_violations(bar: Bar) -> list[BarViolation]:
    issues = []
    for name in ("open", "high", "low", "close"):
        if getattr(bar, name) <= 0:
            issues.append(BarViolation(bar.timestamp, name, f"{name} must be > 0"))
    if bar.adjusted_close is not None and bar.adjusted_close <= 0:
        issues.append(BarViolation(bar.timestamp, "adjusted_close", "adjusted_close must be > 0"))
    if bar.volume < 0:
        issues.append(BarViolation(bar.timestamp, "volume", "volume must be >= 0"))
    if bar.high < max(bar.open, bar.close):
        issues.append(BarViolation(bar.timestamp, "high", "high below max(open, close)"))
    if bar.low > min(bar.open, bar.close):
        issues.append(BarViolation(bar.timestamp, "low", "low above min(open, close)"))
    return issues


def validate_bars(
    series: AssetSeries, policy: BarPolicy | str = BarPolicy.REJECT
) -> tuple[AssetSeries, list[BarViolation]]:
    """Apply the OHLCV sanity rules under a policy.

    reject: raise on the first violation, naming field and timestamp.
    drop:   return the series without offending bars plus the report.
    flag:   return the series unmodified plus the report.
    """
    policy = BarPolicy(policy)
    report: list[BarViolation] = []
    kept: list[Bar] = []
    for bar in series.bars:
        issues = _bar_violations(bar)
        if issues and policy is BarPolicy.REJECT:
            first = issues[0]
            raise ValidationError(
                f"{series.symbol} @ {first.timestamp.isoformat()}: "
                f"{first.field}: {first.message}"
            )
        report.extend(issues)
        if not issues or policy is BarPolicy.FLAG:
            kept.append(bar)
    if policy is BarPolicy.FLAG:
        return series, report
    return AssetSeries(series.symbol, kept), report
