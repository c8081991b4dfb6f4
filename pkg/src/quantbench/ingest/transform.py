"""Calendar alignment, per-asset standardization, and temporal features.

The scaler is fit on train rows only (leakage-safe) with population standard
deviation; stds below ``epsilon`` are floored so constant features map to 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Mapping, Sequence

import numpy as np

from ..core import AssetSeries, Panel, SplitSpec, TemporalFeatures, ensure_utc

DEFAULT_EPSILON = 1e-8


def align_calendar(series: Sequence[AssetSeries]) -> Panel:
    """Align series onto the sorted union of their timestamps.

    All series must share one granularity (daily vs intraday); the mask is
    False wherever an asset lacks a bar on the union calendar.
    """
    if not series:
        raise ValueError("no series to align")
    granularities = {s.is_daily() for s in series if len(s)}
    if len(granularities) > 1:
        raise ValueError("mixed granularities: cannot align daily and intraday series")
    calendar = sorted({b.timestamp for s in series for b in s.bars})
    return Panel.from_series(series, calendar)


@dataclass(frozen=True)
class ScalerParams:
    """Per-(asset, feature) train-split moments; std floored at epsilon."""

    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]
    epsilon: float

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        for symbol, std in self.std.items():
            if np.any(std < 0):
                raise ValueError(f"{symbol}: negative std")


def fit_scaler(
    features: Mapping[str, np.ndarray],
    calendars: Mapping[str, Sequence[datetime]],
    split: SplitSpec,
    epsilon: float = DEFAULT_EPSILON,
) -> ScalerParams:
    """Fit per-asset mean/std on rows strictly before the split boundary.

    ``features`` maps symbol -> (T, F) array aligned with ``calendars[symbol]``.
    Population (ddof=0) moments; never touches rows at or after train_end.
    """
    mean: dict[str, np.ndarray] = {}
    std: dict[str, np.ndarray] = {}
    for symbol, values in features.items():
        cal = calendars[symbol]
        if len(cal) != values.shape[0]:
            raise ValueError(f"{symbol}: calendar length {len(cal)} != rows {values.shape[0]}")
        train = values[split.train_mask(cal)]
        if train.shape[0] == 0:
            raise ValueError(f"{symbol}: empty train split")
        mean[symbol] = train.mean(axis=0)
        raw_std = train.std(axis=0, ddof=0)
        std[symbol] = np.where(raw_std < epsilon, epsilon, raw_std)
    return ScalerParams(mean, std, epsilon)


def apply_scaler(
    features: Mapping[str, np.ndarray], params: ScalerParams
) -> dict[str, np.ndarray]:
    """Standardize every row as (x - mean) / std; identical on train and test."""
    out: dict[str, np.ndarray] = {}
    for symbol, values in features.items():
        if symbol not in params.mean:
            raise KeyError(f"no scaler params for symbol {symbol!r}")
        if values.shape[1] != params.mean[symbol].shape[0]:
            raise ValueError(
                f"{symbol}: feature count {values.shape[1]} != fitted "
                f"{params.mean[symbol].shape[0]}"
            )
        out[symbol] = (values - params.mean[symbol]) / params.std[symbol]
    return out


def temporal_features(ts: datetime) -> TemporalFeatures:
    """Calendar decomposition in UTC; weekday 0 = Monday."""
    ts = ensure_utc(ts)
    return TemporalFeatures(day=ts.day, month=ts.month, weekday=ts.weekday(), year=ts.year)
