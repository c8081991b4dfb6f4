"""Independent reference implementations used to validate the library.

Everything here is a literal, loop-based evaluation of the documented
formulas: no incremental updates, no numpy vectorization, and no code shared
with the modules under test.  Slow on purpose.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Optional, Sequence

from quantbench.core import AssetSeries, Bar


# --- synthetic fixtures ----------------------------------------------------

@dataclass(frozen=True)
class SyntheticPathSpec:
    kind: str           # constant | linear | tent | geometric-random
    length: int
    seed: int = 0
    start: float = 100.0
    step: float = 1.0
    drift: float = 0.0
    vol: float = 0.02


def make_path(spec: SyntheticPathSpec) -> list[float]:
    if spec.kind == "constant":
        return [spec.start] * spec.length
    if spec.kind == "linear":
        return [spec.start + spec.step * i for i in range(spec.length)]
    if spec.kind == "tent":
        half = spec.length // 2
        up = [spec.start + spec.step * i for i in range(half)]
        down = [up[-1] - spec.step * (i + 1) for i in range(spec.length - half)]
        return up + down
    if spec.kind == "geometric-random":
        rng = random.Random(spec.seed)
        out = [spec.start]
        for _ in range(spec.length - 1):
            out.append(out[-1] * (1.0 + spec.drift + rng.uniform(-spec.vol, spec.vol)))
        return out
    raise ValueError(f"unknown path kind {spec.kind!r}")


def make_bars(length: int, seed: int = 0, start: float = 100.0,
              zero_volume_every: int = 0) -> AssetSeries:
    """Seeded OHLCV series with sane candle geometry for factor tests."""
    rng = random.Random(seed)
    t0 = datetime(2020, 1, 1, tzinfo=timezone.utc)
    bars = []
    close = start
    for i in range(length):
        prev = close
        close = prev * (1.0 + rng.uniform(-0.03, 0.03))
        opn = prev * (1.0 + rng.uniform(-0.005, 0.005))
        high = max(opn, close) * (1.0 + rng.uniform(0.0, 0.01))
        low = min(opn, close) * (1.0 - rng.uniform(0.0, 0.01))
        volume = rng.uniform(5e4, 5e6)
        if zero_volume_every and i % zero_volume_every == 0:
            volume = 0.0
        bars.append(Bar(t0 + timedelta(days=i), opn, high, low, close, volume))
    return AssetSeries("TEST", bars)


# --- scalar helpers --------------------------------------------------------

def mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def pstdev(xs: Sequence[float]) -> float:
    m = mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / len(xs))


def quantile_linear(xs: Sequence[float], q: float) -> float:
    s = sorted(xs)
    pos = q * (len(s) - 1)
    lo = int(math.floor(pos))
    if lo >= len(s) - 1:
        return s[-1]
    frac = pos - lo
    return s[lo] + frac * (s[lo + 1] - s[lo])


def average_rank_of_last(xs: Sequence[float]) -> float:
    last = xs[-1]
    less = sum(1 for x in xs if x < last)
    equal = sum(1 for x in xs if x == last)
    return less + (equal + 1) / 2.0


def brute_pearson(a: Sequence[float], b: Sequence[float]) -> Optional[float]:
    ma, mb = mean(a), mean(b)
    da = [x - ma for x in a]
    db = [y - mb for y in b]
    denom = math.sqrt(sum(x * x for x in da)) * math.sqrt(sum(y * y for y in db))
    if denom == 0.0:
        return None
    return sum(x * y for x, y in zip(da, db)) / denom


def brute_spearman(a: Sequence[float], b: Sequence[float]) -> Optional[float]:
    """Average-rank transform then direct Pearson."""
    def ranks(xs: Sequence[float]) -> list[float]:
        out = []
        for x in xs:
            less = sum(1 for y in xs if y < x)
            equal = sum(1 for y in xs if y == x)
            out.append(less + (equal + 1) / 2.0)
        return out
    return brute_pearson(ranks(a), ranks(b))


def brute_mdd(values: Sequence[float]) -> float:
    """O(T^2) max over all s <= t of (V_s - V_t) / V_s."""
    worst = 0.0
    for t in range(len(values)):
        for s in range(t + 1):
            drop = (values[s] - values[t]) / values[s]
            if drop > worst:
                worst = drop
    return worst


def brute_ema(xs: Sequence[float], span: int) -> list[float]:
    alpha = 2.0 / (span + 1.0)
    out = [xs[0]]
    for x in xs[1:]:
        out.append((1.0 - alpha) * out[-1] + alpha * x)
    return out


def brute_crossings(dif: Sequence[float], dea: Sequence[float],
                    start: int) -> list[tuple[int, str]]:
    """Sign-change scan of dif - dea from ``start`` on, alternating up/down.

    The scan begins flat, so a positive gap on the start bar itself counts as
    an up-cross (flat-baseline convention).
    """
    events = []
    holding = False
    for t in range(start, len(dif)):
        cur = dif[t] - dea[t]
        if t == start:
            up, down = cur > 0, False
        else:
            prev = dif[t - 1] - dea[t - 1]
            up = prev <= 0 and cur > 0
            down = prev >= 0 and cur < 0
        if up and not holding:
            events.append((t, "up"))
            holding = True
        elif down and holding:
            events.append((t, "down"))
            holding = False
    return events


# --- naive per-window factor evaluation ------------------------------------

def _fields(series: AssetSeries):
    o = [b.open for b in series.bars]
    h = [b.high for b in series.bars]
    lo = [b.low for b in series.bars]
    c = [b.close for b in series.bars]
    v = [b.volume for b in series.bars]
    return o, h, lo, c, v


def naive_kbar(series: AssetSeries) -> dict[str, list[Optional[float]]]:
    o, h, lo, c, _ = _fields(series)
    out: dict[str, list[Optional[float]]] = {k: [] for k in (
        "kmid", "kmid2", "klen", "kup", "kup2", "klow", "klow2", "ksft", "ksft2")}
    for i in range(len(c)):
        rng = h[i] - lo[i]
        top, bot = max(o[i], c[i]), min(o[i], c[i])
        out["kmid"].append((c[i] - o[i]) / c[i])
        out["kmid2"].append(None if rng == 0 else (c[i] - o[i]) / rng)
        out["klen"].append(rng / o[i])
        out["kup"].append((h[i] - top) / o[i])
        out["kup2"].append(None if rng == 0 else (h[i] - top) / rng)
        out["klow"].append((bot - lo[i]) / o[i])
        out["klow2"].append(None if rng == 0 else (bot - lo[i]) / rng)
        out["ksft"].append((2 * c[i] - h[i] - lo[i]) / o[i])
        out["ksft2"].append(None if rng == 0 else (2 * c[i] - h[i] - lo[i]) / rng)
    return out


def naive_rolling(series: AssetSeries, family: str, w: int) -> list[Optional[float]]:
    """Literal trailing-window evaluation of one rolling family."""
    o, h, lo, c, v = _fields(series)
    n = len(c)
    out: list[Optional[float]] = [None] * n

    def ret1(i: int) -> float:
        return c[i] / c[i - 1] - 1.0

    def vchg1(i: int) -> Optional[float]:
        if v[i - 1] == 0:
            return None
        return v[i] / v[i - 1] - 1.0

    for t in range(n):
        win = range(t - w + 1, t + 1)          # indices of the trailing window
        if family == "roc":
            if t >= w:
                out[t] = c[t - w] / c[t]
        elif family == "ma":
            if t >= w - 1:
                out[t] = mean([c[i] for i in win]) / c[t]
        elif family == "std":
            if t >= w - 1:
                out[t] = pstdev([c[i] for i in win]) / c[t]
        elif family == "beta":
            if t >= w:
                out[t] = (c[t - w] - c[t]) / (w * c[t])
        elif family == "max":
            if t >= w - 1:
                out[t] = max(c[i] for i in win) / c[t]
        elif family == "min":
            if t >= w - 1:
                out[t] = min(c[i] for i in win) / c[t]
        elif family == "qtlu":
            if t >= w - 1:
                out[t] = (c[t] - quantile_linear([c[i] for i in win], 0.8)) / c[t]
        elif family == "qtld":
            if t >= w - 1:
                out[t] = (c[t] - quantile_linear([c[i] for i in win], 0.2)) / c[t]
        elif family == "rank":
            if t >= w - 1:
                out[t] = average_rank_of_last([c[i] for i in win]) / w / w
        elif family == "imax":
            if t >= w - 1:
                window = [h[i] for i in win]
                out[t] = window.index(max(window)) / w
        elif family == "imin":
            if t >= w - 1:
                window = [lo[i] for i in win]
                out[t] = window.index(min(window)) / w
        elif family == "imxd":
            if t >= w - 1:
                hw = [h[i] for i in win]
                lw = [lo[i] for i in win]
                out[t] = hw.index(max(hw)) / w - lw.index(min(lw)) / w
        elif family == "rsv":
            if t >= w - 1:
                hi = max(h[i] for i in win)
                low = min(lo[i] for i in win)
                if hi != low:
                    out[t] = (c[t] - low) / (hi - low)
        elif family in ("cntp", "cntn", "cntd"):
            if t >= w:
                rets = [ret1(i) for i in win]
                cp = sum(1 for r in rets if r > 0) / w
                cn = sum(1 for r in rets if r < 0) / w
                out[t] = {"cntp": cp, "cntn": cn, "cntd": cp - cn}[family]
        elif family == "corr":
            if t >= w - 1:
                out[t] = brute_pearson([c[i] for i in win],
                                       [math.log(v[i] + 1) for i in win])
        elif family == "cord":
            if t >= w:
                if all(v[i - 1] != 0 for i in win):
                    out[t] = brute_pearson([c[i] / c[i - 1] for i in win],
                                           [math.log(v[i] / v[i - 1] + 1) for i in win])
        elif family in ("sump", "sumn", "sumd"):
            if t >= w:
                rets = [ret1(i) for i in win]
                pos = sum(max(r, 0.0) for r in rets)
                total = sum(abs(r) for r in rets)
                if total != 0:
                    sp = pos / total
                    out[t] = {"sump": sp, "sumn": 1 - sp, "sumd": 2 * sp - 1}[family]
        elif family == "vma":
            if t >= w - 1 and v[t] != 0:
                out[t] = mean([v[i] for i in win]) / v[t]
        elif family == "vstd":
            if t >= w - 1 and v[t] != 0:
                out[t] = pstdev([v[i] for i in win]) / v[t]
        elif family == "wvma":
            if t >= w:
                rets = [abs(ret1(i)) for i in win]
                m = mean(rets)
                if m != 0:
                    out[t] = pstdev(rets) / m
        elif family in ("vsump", "vsumn", "vsumd"):
            if t >= w:
                chg = [vchg1(i) for i in win]
                if all(x is not None for x in chg):
                    pos = sum(max(x, 0.0) for x in chg)
                    total = sum(abs(x) for x in chg)
                    if total != 0:
                        sp = pos / total
                        out[t] = {"vsump": sp, "vsumn": 1 - sp, "vsumd": 2 * sp - 1}[family]
        else:
            raise ValueError(f"unknown family {family!r}")
    return out


def naive_logvol(series: AssetSeries) -> list[float]:
    return [math.log(b.volume + 1) for b in series.bars]
