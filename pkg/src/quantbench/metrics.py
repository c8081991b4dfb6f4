"""Evaluation suite: trading metrics (ARR, SR, MDD, CR, SoR, VOL, DD),
forecasting metrics (MAE, MSE, RankIC, RankICIR) and the answer Score.

Conventions: population std (ddof=0) for SR/VOL/DD, sample std (ddof=1) for
the time-dimension std inside RankICIR; the risk-free rate is per period and
defaults to 0.  The library computes fractions; percent formatting belongs to
the report layer.  Undefined metrics (zero variance, zero drawdown, zero
downside deviation, degenerate ranks) raise UndefinedMetricError, which the
report layer renders as "n/a".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class UndefinedMetricError(ValueError):
    """The metric is mathematically undefined for this input."""


@dataclass(frozen=True)
class ReturnSeries:
    """Per-period simple returns with annualization context."""

    rets: tuple[float, ...]
    periods_per_year: int = 252
    risk_free: float = 0.0

    def __init__(self, rets: Sequence[float], periods_per_year: int = 252,
                 risk_free: float = 0.0):
        object.__setattr__(self, "rets", tuple(float(r) for r in rets))
        object.__setattr__(self, "periods_per_year", periods_per_year)
        object.__setattr__(self, "risk_free", risk_free)
        if periods_per_year <= 0:
            raise ValueError("periods_per_year must be > 0")
        if any(r <= -1 for r in self.rets):
            raise ValueError("every return must be > -1")

    def __len__(self) -> int:
        return len(self.rets)

    def values(self) -> np.ndarray:
        return np.array(self.rets, dtype=float)

    def wealth_path(self) -> np.ndarray:
        """Cumulative value path V_t = prod(1 + r_s), prefixed with V_0 = 1."""
        return np.concatenate([[1.0], np.cumprod(1.0 + self.values())])


def arr(rs: ReturnSeries) -> float:
    """Annualized rate of return: (prod(1+r))**(N/T) - 1."""
    if len(rs) == 0:
        raise ValueError("empty return series")
    growth = float(np.prod(1.0 + rs.values()))
    return growth ** (rs.periods_per_year / len(rs)) - 1.0


def sharpe(rs: ReturnSeries) -> float:
    """(mean - r_f) / std * sqrt(N); zero variance (incl. T < 2) is undefined."""
    if len(rs) == 0:
        raise ValueError("empty return series")
    if len(rs) < 2:
        raise UndefinedMetricError("sharpe undefined: single observation")
    r = rs.values()
    sd = float(r.std(ddof=0))
    if sd == 0.0:
        raise UndefinedMetricError("sharpe undefined: zero return variance")
    return float((r.mean() - rs.risk_free) / sd * np.sqrt(rs.periods_per_year))


def mdd(rs: ReturnSeries) -> float:
    """Largest peak-to-trough decline of the cumulative value path."""
    if len(rs) == 0:
        raise ValueError("empty return series")
    path = rs.wealth_path()
    peaks = np.maximum.accumulate(path)
    return float(np.max((peaks - path) / peaks))


def calmar(rs: ReturnSeries) -> float:
    """ARR divided by absolute max drawdown; zero drawdown is undefined."""
    dd = mdd(rs)
    if dd == 0.0:
        raise UndefinedMetricError("calmar undefined: zero max drawdown")
    return arr(rs) / abs(dd)


def downside_dev(rs: ReturnSeries) -> float:
    """Annualized downside deviation: sqrt(mean(min(r - r_f, 0)^2)) * sqrt(N)."""
    if len(rs) == 0:
        raise ValueError("empty return series")
    shortfall = np.minimum(rs.values() - rs.risk_free, 0.0)
    return float(np.sqrt(np.mean(shortfall**2)) * np.sqrt(rs.periods_per_year))


def sortino(rs: ReturnSeries) -> float:
    """(mean - r_f) / per-period downside deviation * sqrt(N).

    Annualization is applied exactly once.  No sub-r_f returns is undefined.
    """
    r = rs.values()
    per_period_dd = float(np.sqrt(np.mean(np.minimum(r - rs.risk_free, 0.0) ** 2)))
    if per_period_dd == 0.0:
        raise UndefinedMetricError("sortino undefined: zero downside deviation")
    return float((r.mean() - rs.risk_free) / per_period_dd * np.sqrt(rs.periods_per_year))


def vol(rs: ReturnSeries) -> float:
    """Annualized volatility: std * sqrt(N)."""
    if len(rs) == 0:
        raise ValueError("empty return series")
    if len(rs) < 2:
        raise UndefinedMetricError("volatility undefined: single observation")
    return float(rs.values().std(ddof=0) * np.sqrt(rs.periods_per_year))


@dataclass(frozen=True)
class PredictionPanel:
    """Aligned prediction/truth arrays (N assets x T steps) with one mask."""

    predictions: np.ndarray
    truths: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        if not (self.predictions.shape == self.truths.shape == self.mask.shape):
            raise ValueError("predictions, truths and mask must share one shape")
        if self.predictions.ndim != 2:
            raise ValueError("panel arrays must be N x T")

    @property
    def n_steps(self) -> int:
        return self.predictions.shape[1]


def mae(p: PredictionPanel) -> float:
    if not p.mask.any():
        raise ValueError("no present cells")
    err = np.abs(p.predictions - p.truths)
    return float(err[p.mask].mean())


def mse(p: PredictionPanel) -> float:
    if not p.mask.any():
        raise ValueError("no present cells")
    err = (p.predictions - p.truths) ** 2
    return float(err[p.mask].mean())


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # average rank, 1-based
        i = j + 1
    return ranks


def rank_ic_t(p: PredictionPanel, t: int) -> float:
    """Cross-sectional Spearman correlation at step t (average ranks on ties)."""
    present = p.mask[:, t]
    if present.sum() < 2:
        raise ValueError(f"step {t}: need at least 2 present assets")
    ra = _average_ranks(p.predictions[present, t])
    rb = _average_ranks(p.truths[present, t])
    da, db = ra - ra.mean(), rb - rb.mean()
    denom = np.sqrt((da**2).sum() * (db**2).sum())
    if denom == 0.0:
        raise UndefinedMetricError(f"step {t}: degenerate ranks (all tied)")
    return float((da * db).sum() / denom)


def rank_ic_series(p: PredictionPanel) -> tuple[list[float], list[int]]:
    """Per-step correlations plus the list of skipped (degenerate) steps."""
    values: list[float] = []
    skipped: list[int] = []
    for t in range(p.n_steps):
        if p.mask[:, t].sum() < 2:
            skipped.append(t)
            continue
        try:
            values.append(rank_ic_t(p, t))
        except UndefinedMetricError:
            skipped.append(t)
    return values, skipped


def rank_ic(p: PredictionPanel) -> float:
    values, _ = rank_ic_series(p)
    if not values:
        raise UndefinedMetricError("rank_ic undefined: every step degenerate")
    return float(np.mean(values))


def rank_icir(p: PredictionPanel) -> float:
    """Mean per-step correlation over its sample std (ddof=1)."""
    values, _ = rank_ic_series(p)
    if len(values) < 2:
        raise UndefinedMetricError("rank_icir undefined: fewer than 2 valid steps")
    sd = float(np.std(values, ddof=1))
    if sd == 0.0:
        raise UndefinedMetricError("rank_icir undefined: zero std of per-step series")
    return float(np.mean(values)) / sd


def score(n_correct: int, n_total: int) -> float:
    """Correct-answer percentage."""
    if n_total <= 0:
        raise ValueError("n_total must be > 0")
    if not 0 <= n_correct <= n_total:
        raise ValueError("n_correct must be within [0, n_total]")
    return n_correct / n_total * 100.0


# --- metric registry and report ------------------------------------------

TRADING_METRICS = {
    "arr": arr,
    "sharpe": sharpe,
    "mdd": mdd,
    "calmar": calmar,
    "sortino": sortino,
    "vol": vol,
    "downside_dev": downside_dev,
}

# CSV label and whether the value is conventionally printed as a percent.
METRIC_FORMATS = {
    "arr": ("ARR", True),
    "sharpe": ("SR", False),
    "mdd": ("MDD", True),
    "calmar": ("CR", False),
    "sortino": ("SoR", False),
    "vol": ("VOL", True),
    "downside_dev": ("DD", True),
    "mae": ("MAE", False),
    "mse": ("MSE", False),
    "rank_ic": ("RankIC", False),
    "rank_icir": ("RankICIR", False),
    "score": ("Score", False),
}


@dataclass(frozen=True)
class MetricReport:
    """Named metric values; None marks a metric undefined on this input."""

    values: dict[str, Optional[float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        unknown = set(self.values) - set(METRIC_FORMATS)
        if unknown:
            raise ValueError(f"unknown metric key(s): {sorted(unknown)}")

    def to_json_dict(self) -> dict[str, Optional[float]]:
        return dict(self.values)

    def to_csv(self) -> str:
        """Percent metrics scaled x100; everything at 4 decimal places."""
        lines = ["metric,value"]
        for key, value in self.values.items():
            label, percent = METRIC_FORMATS[key]
            if value is None:
                lines.append(f"{label},n/a")
            else:
                shown = value * 100.0 if percent else value
                lines.append(f"{label},{shown:.4f}")
        return "\n".join(lines) + "\n"


def evaluate_returns(rs: ReturnSeries, names: Sequence[str] | None = None) -> MetricReport:
    """Run the trading metric suite; undefined metrics become None entries."""
    names = list(names) if names is not None else list(TRADING_METRICS)
    values: dict[str, Optional[float]] = {}
    for name in names:
        if name not in TRADING_METRICS:
            raise KeyError(f"unknown trading metric {name!r}")
        try:
            values[name] = TRADING_METRICS[name](rs)
        except UndefinedMetricError:
            values[name] = None
    return MetricReport(values)
