"""145-column technical indicator matrix: 9 candle-shape ratios, 27 rolling
families over a window set, and log-volume.

Formulas follow the standard catalog conventions:

    kmid   (close - open) / close          kmid2  (close - open) / (high - low)
    klen   (high - low) / open             kup    (high - max(open, close)) / open
    kup2   ... / (high - low)              klow   (min(open, close) - low) / open
    klow2  ... / (high - low)              ksft   (2*close - high - low) / open
    ksft2  ... / (high - low)

    roc_w   close.shift(w) / close         ma_w    mean_w(close) / close
    std_w   std_w(close) / close           beta_w  (close.shift(w) - close) / (w*close)
    max_w   max_w(close) / close           min_w   min_w(close) / close
    qtlu_w  (close - q80_w(close)) / close qtld_w  (close - q20_w(close)) / close
    rank_w  pct_rank_w(close) / w
    imax_w  argmax_w(high) / w             imin_w  argmin_w(low) / w
    imxd_w  imax_w - imin_w
    rsv_w   (close - min_w(low)) / (max_w(high) - min_w(low))
    cntp_w  frac_w(ret1 > 0)               cntn_w  frac_w(ret1 < 0)
    cntd_w  cntp_w - cntn_w
    corr_w  corr_w(close, log(volume+1))
    cord_w  corr_w(close/close(-1), log(volume/volume(-1) + 1))
    sump_w  sum_w(max(ret1,0)) / sum_w(|ret1|)    sumn_w 1 - sump_w
    sumd_w  2*sump_w - 1
    vma_w   mean_w(volume) / volume        vstd_w  std_w(volume) / volume
    wvma_w  std_w(|ret1|) / mean_w(|ret1|)
    vsump_w sum_w(max(vchg1,0)) / sum_w(|vchg1|)  vsumn_w 1 - vsump_w
    vsumd_w 2*vsump_w - 1
    logvol  log(volume + 1)

with ret1 = close/close(-1) - 1 and vchg1 = volume/volume(-1) - 1 (one invalid
leading row each).  Rolling std is population (ddof=0); quantiles interpolate
linearly; rank averages ties; argmax/argmin ties take the earliest index.
Cells with a degenerate denominator or incomplete window are invalid and
filled with 0, never infinities.

Canonical column order: the candle block, then each rolling family crossed
with each window (family-major, windows ascending), then logvol.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
import numpy as np
import pandas as pd

from .core import AssetSeries, validate_bars
from .ingest.parsers import parse_timestamp

DEFAULT_WINDOWS = (5, 10, 20, 30, 60)
KBAR_COLUMNS = ("kmid", "kmid2", "klen", "kup", "kup2", "klow", "klow2", "ksft", "ksft2")
ROLLING_FAMILIES = (
    "roc", "ma", "std", "beta", "max", "min", "qtlu", "qtld", "rank",
    "imax", "imin", "imxd",
    "rsv", "cntp", "cntn", "cntd",
    "corr", "cord",
    "sump", "sumn", "sumd",
    "vma", "vstd", "wvma", "vsump", "vsumn", "vsumd",
)


@dataclass(frozen=True)
class WindowSet:
    windows: tuple[int, ...] = DEFAULT_WINDOWS

    def __post_init__(self) -> None:
        if not self.windows:
            raise ValueError("window set must be non-empty")
        if any(w < 2 for w in self.windows):
            raise ValueError("all windows must be >= 2")
        if any(b <= a for a, b in zip(self.windows, self.windows[1:])):
            raise ValueError("windows must be strictly increasing")

    @property
    def max_window(self) -> int:
        return self.windows[-1]


def column_order(windows: WindowSet = WindowSet()) -> tuple[str, ...]:
    cols = list(KBAR_COLUMNS)
    for family in ROLLING_FAMILIES:
        cols.extend(f"{family}_{w}" for w in windows.windows)
    cols.append("logvol")
    return tuple(cols)


@dataclass(frozen=True)
class FactorMatrix:
    """Per-asset T x C feature table with per-cell validity flags.

    ``validity`` is False during warm-up and on degenerate cells, whose value
    slot is 0.
    """

    symbol: str
    calendar: tuple[datetime, ...]
    columns: tuple[str, ...]
    values: np.ndarray
    validity: np.ndarray

    def __post_init__(self) -> None:
        shape = (len(self.calendar), len(self.columns))
        if self.values.shape != shape or self.validity.shape != shape:
            raise ValueError(f"values/validity must be shaped {shape}")
        if np.any(self.values[~self.validity] != 0.0):
            raise ValueError("invalid cells must be filled with 0")
        self.values.setflags(write=False)
        self.validity.setflags(write=False)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def column_validity(self, name: str) -> np.ndarray:
        return self.validity[:, self.columns.index(name)]

    def to_csv(self) -> str:
        """Timestamp column plus the canonical value columns (validity is
        not serialized; invalid cells appear as their 0 fill)."""
        lines = ["timestamp," + ",".join(self.columns)]
        for t, ts in enumerate(self.calendar):
            lines.append(ts.isoformat() + "," + ",".join(repr(float(v)) for v in self.values[t]))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str, symbol: str) -> "FactorMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split(",")
        if header[0] != "timestamp":
            raise ValueError("first column must be timestamp")
        columns = tuple(header[1:])
        calendar = []
        rows = []
        for ln in lines[1:]:
            cells = ln.split(",")
            calendar.append(parse_timestamp(cells[0]))
            rows.append([float(c) for c in cells[1:]])
        values = np.array(rows, dtype=float)
        validity = np.ones(values.shape, dtype=bool)
        return FactorMatrix(symbol, tuple(calendar), columns, values, validity)


# --- family computations -------------------------------------------------
# Each helper returns name -> raw column with NaN/inf marking invalid cells;
# assembly converts non-finite entries to (0, validity=False).


def kbar_features(series: AssetSeries) -> dict[str, np.ndarray]:
    o = series_field(series, "open")
    h = series_field(series, "high")
    lo = series_field(series, "low")
    c = series_field(series, "close")
    with np.errstate(divide="ignore", invalid="ignore"):
        rng = h - lo
        body_top = np.maximum(o, c)
        body_bot = np.minimum(o, c)
        return {
            "kmid": (c - o) / c,
            "kmid2": (c - o) / rng,
            "klen": rng / o,
            "kup": (h - body_top) / o,
            "kup2": (h - body_top) / rng,
            "klow": (body_bot - lo) / o,
            "klow2": (body_bot - lo) / rng,
            "ksft": (2 * c - h - lo) / o,
            "ksft2": (2 * c - h - lo) / rng,
        }


def rolling_price_features(series: AssetSeries, w: int) -> dict[str, np.ndarray]:
    c = pd.Series(series_field(series, "close"))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = {
            f"roc_{w}": (c.shift(w) / c).to_numpy(),
            f"ma_{w}": (c.rolling(w).mean() / c).to_numpy(),
            f"std_{w}": (c.rolling(w).std(ddof=0) / c).to_numpy(),
            f"beta_{w}": ((c.shift(w) - c) / (w * c)).to_numpy(),
            f"max_{w}": (c.rolling(w).max() / c).to_numpy(),
            f"min_{w}": (c.rolling(w).min() / c).to_numpy(),
            f"qtlu_{w}": ((c - c.rolling(w).quantile(0.8, interpolation="linear")) / c).to_numpy(),
            f"qtld_{w}": ((c - c.rolling(w).quantile(0.2, interpolation="linear")) / c).to_numpy(),
            f"rank_{w}": (c.rolling(w).rank(method="average", pct=True) / w).to_numpy(),
        }
    return out


def position_features(series: AssetSeries, w: int) -> dict[str, np.ndarray]:
    h = series_field(series, "high")
    lo = series_field(series, "low")
    n = len(h)
    imax = np.full(n, np.nan)
    imin = np.full(n, np.nan)
    if n >= w:
        # argmax/argmin take the first occurrence on ties
        hw = np.lib.stride_tricks.sliding_window_view(h, w)
        lw = np.lib.stride_tricks.sliding_window_view(lo, w)
        imax[w - 1:] = hw.argmax(axis=1) / w
        imin[w - 1:] = lw.argmin(axis=1) / w
    return {f"imax_{w}": imax, f"imin_{w}": imin, f"imxd_{w}": imax - imin}


def rsv_count_features(series: AssetSeries, w: int) -> dict[str, np.ndarray]:
    h = pd.Series(series_field(series, "high"))
    lo = pd.Series(series_field(series, "low"))
    c = pd.Series(series_field(series, "close"))
    lmin = lo.rolling(w).min()
    hmax = h.rolling(w).max()
    with np.errstate(divide="ignore", invalid="ignore"):
        rsv = ((c - lmin) / (hmax - lmin)).to_numpy()
    ret1 = c / c.shift(1) - 1
    pos = pd.Series(np.where(ret1.isna(), np.nan, (ret1 > 0).astype(float)))
    neg = pd.Series(np.where(ret1.isna(), np.nan, (ret1 < 0).astype(float)))
    cntp = (pos.rolling(w).sum() / w).to_numpy()
    cntn = (neg.rolling(w).sum() / w).to_numpy()
    return {f"rsv_{w}": rsv, f"cntp_{w}": cntp, f"cntn_{w}": cntn, f"cntd_{w}": cntp - cntn}


def correlation_features(series: AssetSeries, w: int) -> dict[str, np.ndarray]:
    c = pd.Series(series_field(series, "close"))
    v = pd.Series(series_field(series, "volume"))
    logv = np.log(v + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = c.rolling(w).corr(logv).to_numpy()
        price_ratio = c / c.shift(1)
        vol_ratio = pd.Series(
            np.log((v / v.shift(1) + 1).replace([np.inf, -np.inf], np.nan))
        )
        cord = price_ratio.rolling(w).corr(vol_ratio).to_numpy()
    return {f"corr_{w}": corr, f"cord_{w}": cord}


def sum_features(series: AssetSeries, w: int) -> dict[str, np.ndarray]:
    c = pd.Series(series_field(series, "close"))
    ret1 = c / c.shift(1) - 1
    pos_sum = ret1.clip(lower=0).rolling(w).sum()
    abs_sum = ret1.abs().rolling(w).sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        sump = (pos_sum / abs_sum).to_numpy()
    return {f"sump_{w}": sump, f"sumn_{w}": 1 - sump, f"sumd_{w}": 2 * sump - 1}


def volume_features(series: AssetSeries, w: int) -> dict[str, np.ndarray]:
    c = pd.Series(series_field(series, "close"))
    v = pd.Series(series_field(series, "volume"))
    absret = (c / c.shift(1) - 1).abs()
    vchg1 = (v / v.shift(1) - 1).replace([np.inf, -np.inf], np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        vma = (v.rolling(w).mean() / v).to_numpy()
        vstd = (v.rolling(w).std(ddof=0) / v).to_numpy()
        wvma = (absret.rolling(w).std(ddof=0) / absret.rolling(w).mean()).to_numpy()
        vsump = (vchg1.clip(lower=0).rolling(w).sum() / vchg1.abs().rolling(w).sum()).to_numpy()
    return {
        f"vma_{w}": vma,
        f"vstd_{w}": vstd,
        f"wvma_{w}": wvma,
        f"vsump_{w}": vsump,
        f"vsumn_{w}": 1 - vsump,
        f"vsumd_{w}": 2 * vsump - 1,
    }


def logvol_feature(series: AssetSeries) -> np.ndarray:
    return np.log(series_field(series, "volume") + 1)


def series_field(series: AssetSeries, name: str) -> np.ndarray:
    return np.array([getattr(b, name) for b in series.bars], dtype=float)


def compute_alpha158(series: AssetSeries, windows: WindowSet = WindowSet()) -> FactorMatrix:
    """Compute the full dense feature matrix (145 columns for the default
    window set).  The series must pass bar validation and cover at least
    max(window) + 1 bars so the deepest shift-based column has one valid row.
    """
    validate_bars(series, "reject")
    min_len = windows.max_window + 1
    if len(series) < min_len:
        raise ValueError(
            f"{series.symbol}: need at least {min_len} bars for window set "
            f"{windows.windows}, got {len(series)}"
        )
    raw: dict[str, np.ndarray] = {}
    raw.update(kbar_features(series))
    for w in windows.windows:
        raw.update(rolling_price_features(series, w))
        raw.update(position_features(series, w))
        raw.update(rsv_count_features(series, w))
        raw.update(correlation_features(series, w))
        raw.update(sum_features(series, w))
        raw.update(volume_features(series, w))
    raw["logvol"] = logvol_feature(series)

    columns = column_order(windows)
    t_len = len(series)
    values = np.zeros((t_len, len(columns)))
    validity = np.zeros((t_len, len(columns)), dtype=bool)
    for j, name in enumerate(columns):
        col = raw[name]
        ok = np.isfinite(col)
        values[ok, j] = col[ok]
        validity[:, j] = ok
    return FactorMatrix(series.symbol, series.timestamps, columns, values, validity)


class FactorCache:
    """Columnar binary cache keyed by (symbol, bar-data digest, window set).

    Hits return arrays bit-identical to recomputation (exact float64 storage).
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def data_digest(series: AssetSeries) -> str:
        hasher = hashlib.sha256()
        for b in series.bars:
            hasher.update(
                f"{b.timestamp.isoformat()}|{b.open!r}|{b.high!r}|{b.low!r}"
                f"|{b.close!r}|{b.volume!r}|{b.adjusted_close!r}\n".encode()
            )
        return hasher.hexdigest()

    def _path(self, series: AssetSeries, windows: WindowSet) -> Path:
        key = f"{series.symbol}|{self.data_digest(series)}|{windows.windows}"
        return self.root / (hashlib.sha256(key.encode()).hexdigest() + ".npz")

    def get_or_compute(self, series: AssetSeries, windows: WindowSet = WindowSet()) -> FactorMatrix:
        path = self._path(series, windows)
        if path.exists():
            with np.load(path, allow_pickle=False) as blob:
                return FactorMatrix(
                    series.symbol,
                    series.timestamps,
                    tuple(str(c) for c in blob["columns"]),
                    blob["values"].copy(),
                    blob["validity"].copy(),
                )
        matrix = compute_alpha158(series, windows)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, columns=np.array(matrix.columns), values=matrix.values,
                 validity=matrix.validity)
        tmp.replace(path)
        return matrix
