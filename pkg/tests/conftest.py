import random
from datetime import datetime, timedelta, timezone

import pytest

from quantbench.core import AssetSeries, Bar

T0 = datetime(2022, 1, 3, tzinfo=timezone.utc)


def daily_series(symbol: str, closes, volumes=None, start=T0) -> AssetSeries:
    """Flat-candle series where open = high = low = close (valid bars)."""
    bars = []
    for i, close in enumerate(closes):
        volume = 1000.0 if volumes is None else volumes[i]
        bars.append(Bar(start + timedelta(days=i), close, close, close, close, volume))
    return AssetSeries(symbol, bars)


@pytest.fixture
def rng():
    return random.Random(1234)
