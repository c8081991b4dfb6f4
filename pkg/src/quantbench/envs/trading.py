"""Single-asset trading simulator with discrete BUY/HOLD/SELL actions.

Accounting rules:
  * Orders fill at the decision bar's valuation price (adjusted close when the
    feed carries one, else close); the position is marked at the next bar.
  * BUY is all-in with fractional shares: delta = cash / (price * (1 + fee)),
    so the fee is paid inside the affordability equation and cash lands at
    exactly 0.  SELL is all-out: cash += position * price * (1 - fee).
  * Degenerate orders (BUY with no cash, SELL with no position) execute as
    HOLD; the ledger records the effective action.
  * reward = ret = (post_value - pre_value) / pre_value, values marked before
    the trade at bar t and after it at bar t+1.

An environment instance is read-only after construction; ``step`` maps a state
to a successor without mutating either, so states can be cloned for branching
rollouts and independent instances can run in parallel.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Optional, Sequence

from ..core import AssetSeries, NewsItem
from ..factors import FactorMatrix
from ..ingest.parsers import parse_timestamp


class Action(str, Enum):
    BUY = "BUY"
    HOLD = "HOLD"
    SELL = "SELL"


@dataclass(frozen=True)
class TradingEnvConfig:
    series: AssetSeries
    initial_cash: float = 1e5
    fee_rate: float = 1e-4
    start_index: int = 0
    factors: Optional[FactorMatrix] = None
    news: tuple[NewsItem, ...] = ()

    def __post_init__(self) -> None:
        if self.initial_cash <= 0:
            raise ValueError("initial_cash must be > 0")
        if not 0 <= self.fee_rate < 1:
            raise ValueError("fee_rate must be in [0, 1)")
        if self.start_index < 0:
            raise ValueError("start_index must be >= 0")


@dataclass(frozen=True)
class TradingState:
    t: int
    cash: float
    position: float
    fees: float

    def __post_init__(self) -> None:
        if self.cash < 0 or self.position < 0 or self.fees < 0:
            raise ValueError("cash, position and fees must be >= 0")


LEDGER_COLUMNS = (
    "timestamp", "open", "high", "low", "close", "volume",
    "price", "cash", "position", "pre_value", "action", "post_value", "ret",
)


@dataclass(frozen=True)
class StepRecord:
    """One ledger row; ``ret`` is stored exactly as (post-pre)/pre."""

    timestamp: datetime
    open: float
    high: float
    low: float
    close: float
    volume: float
    price: float
    cash: float
    position: float
    pre_value: float
    action: Action
    post_value: float
    ret: float


class TradingEnv:
    """Owns the immutable data window; all mutation lives in TradingState."""

    def __init__(self, config: TradingEnvConfig):
        if len(config.series) < 2:
            raise ValueError("data window must hold at least 2 bars")
        if config.start_index > len(config.series) - 2:
            raise ValueError("start_index leaves no step to take")
        self.config = config

    def price(self, t: int) -> float:
        return self.config.series.bars[t].price

    @property
    def last_index(self) -> int:
        return len(self.config.series) - 1

    def reset(self) -> TradingState:
        return TradingState(
            t=self.config.start_index,
            cash=self.config.initial_cash,
            position=0.0,
            fees=0.0,
        )

    def value(self, state: TradingState) -> float:
        return state.cash + state.position * self.price(state.t)

    def step(self, state: TradingState, action: Action | str) -> tuple[TradingState, StepRecord, float]:
        action = Action(action)
        if state.t >= self.last_index:
            raise ValueError(f"step past end of data window at t={state.t}")
        bar = self.config.series.bars[state.t]
        price = bar.price
        pre_value = state.cash + state.position * price

        cash, position = state.cash, state.position
        fee = 0.0
        executed = Action.HOLD
        if action is Action.BUY and cash > 0:
            delta = cash / (price * (1.0 + self.config.fee_rate))
            fee = self.config.fee_rate * abs(delta) * price
            position = position + delta
            cash = 0.0
            executed = Action.BUY
        elif action is Action.SELL and position > 0:
            delta = position
            fee = self.config.fee_rate * abs(delta) * price
            cash = cash + position * price * (1.0 - self.config.fee_rate)
            position = 0.0
            executed = Action.SELL

        next_t = state.t + 1
        post_value = cash + position * self.price(next_t)
        ret = (post_value - pre_value) / pre_value
        new_state = TradingState(t=next_t, cash=cash, position=position, fees=state.fees + fee)
        record = StepRecord(
            timestamp=bar.timestamp,
            open=bar.open, high=bar.high, low=bar.low, close=bar.close, volume=bar.volume,
            price=price, cash=cash, position=position,
            pre_value=pre_value, action=executed, post_value=post_value, ret=ret,
        )
        return new_state, record, ret


def run_actions(env: TradingEnv, actions: Sequence[Action | str]) -> tuple[TradingState, list[StepRecord]]:
    """Drive an episode over a fixed action sequence (one action per step)."""
    state = env.reset()
    records: list[StepRecord] = []
    for action in actions:
        if state.t >= env.last_index:
            break
        state, record, _ = env.step(state, action)
        records.append(record)
    return state, records


def episode_return(records: Sequence[StepRecord]) -> float:
    """(final post_value - initial pre_value) / initial pre_value."""
    if not records:
        raise ValueError("empty trajectory")
    first, last = records[0], records[-1]
    return (last.post_value - first.pre_value) / first.pre_value


def records_to_csv(records: Sequence[StepRecord]) -> str:
    """Ledger CSV in the exact record column order, shortest round-trip floats."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(LEDGER_COLUMNS)
    for r in records:
        writer.writerow([
            r.timestamp.isoformat(), repr(r.open), repr(r.high), repr(r.low),
            repr(r.close), repr(r.volume), repr(r.price), repr(r.cash),
            repr(r.position), repr(r.pre_value), r.action.value,
            repr(r.post_value), repr(r.ret),
        ])
    return out.getvalue()


def parse_ledger_csv(text: str) -> list[StepRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != LEDGER_COLUMNS:
        raise ValueError(f"unexpected ledger header: {header}")
    records = []
    for row in reader:
        if not row:
            continue
        records.append(StepRecord(
            timestamp=parse_timestamp(row[0]),
            open=float(row[1]), high=float(row[2]), low=float(row[3]),
            close=float(row[4]), volume=float(row[5]), price=float(row[6]),
            cash=float(row[7]), position=float(row[8]), pre_value=float(row[9]),
            action=Action(row[10]), post_value=float(row[11]), ret=float(row[12]),
        ))
    return records
