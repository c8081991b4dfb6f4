"""Multi-asset portfolio simulator over the cash-inclusive simplex.

Each step rebalances the book to a target weight vector (index 0 = cash) and
charges the turnover cost on the risky legs only; the cash leg trades free.
The cost is solved self-consistently: target values are fractions of the
post-cost book value V', with

    V' = V - fee_rate * sum_i |w_i * V' - holdings_i * price_i|,

so a single-asset all-in rebalance reproduces the trading env's BUY accounting
(cash / (1 + fee)) instead of overcharging on the pre-cost value.  The fixed
point is contracting for fee_rate < 1 and converges in a handful of rounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import Panel

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class WeightVector:
    """N+1 non-negative weights summing to 1; w[0] is the cash weight."""

    w: tuple[float, ...]

    def __init__(self, w: Sequence[float]):
        object.__setattr__(self, "w", tuple(float(x) for x in w))
        if len(self.w) < 1:
            raise ValueError("weight vector must be non-empty")
        if any(x < 0 for x in self.w):
            raise ValueError("weights must be non-negative")
        if abs(sum(self.w) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"weights must sum to 1, got {sum(self.w)}")

    @property
    def cash(self) -> float:
        return self.w[0]

    @property
    def assets(self) -> tuple[float, ...]:
        return self.w[1:]


@dataclass(frozen=True)
class PortfolioState:
    t: int
    cash: float
    holdings: tuple[float, ...]
    fees: float

    def __post_init__(self) -> None:
        if self.cash < 0 or self.fees < 0 or any(h < 0 for h in self.holdings):
            raise ValueError("cash, holdings and fees must be >= 0")


class PortfolioEnv:
    def __init__(self, panel: Panel, initial_cash: float = 1e5, fee_rate: float = 1e-4,
                 start_index: int = 0):
        if initial_cash <= 0:
            raise ValueError("initial_cash must be > 0")
        if not 0 <= fee_rate < 1:
            raise ValueError("fee_rate must be in [0, 1)")
        if len(panel) < 2 or start_index > len(panel) - 2:
            raise ValueError("panel too short for the requested start index")
        self.panel = panel
        self.initial_cash = initial_cash
        self.fee_rate = fee_rate
        self.start_index = start_index

    @property
    def last_index(self) -> int:
        return len(self.panel) - 1

    def reset(self) -> PortfolioState:
        return PortfolioState(
            t=self.start_index,
            cash=self.initial_cash,
            holdings=(0.0,) * self.panel.n_assets,
            fees=0.0,
        )

    def prices(self, t: int) -> np.ndarray:
        if not self.panel.mask[:, t].all():
            missing = [s for s, ok in zip(self.panel.symbols, self.panel.mask[:, t]) if not ok]
            raise ValueError(f"missing price(s) at index {t}: {', '.join(missing)}")
        return self.panel.close()[:, t]

    def value(self, state: PortfolioState) -> float:
        return state.cash + float(np.dot(state.holdings, self.prices(state.t)))

    def step(self, state: PortfolioState, target: WeightVector) -> tuple[PortfolioState, float]:
        if state.t >= self.last_index:
            raise ValueError(f"step past end of panel at t={state.t}")
        if len(target.w) != self.panel.n_assets + 1:
            raise ValueError(
                f"weight vector has {len(target.w)} entries, expected {self.panel.n_assets + 1}"
            )
        prices_now = self.prices(state.t)
        prices_next = self.prices(state.t + 1)
        held_values = np.asarray(state.holdings) * prices_now
        book = state.cash + float(held_values.sum())
        asset_w = np.asarray(target.assets)

        # fixed point: post-cost value whose target fractions price the turnover
        post_cost = book
        for _ in range(100):
            turnover = float(np.abs(asset_w * post_cost - held_values).sum())
            refined = book - self.fee_rate * turnover
            if abs(refined - post_cost) <= 1e-12 * max(1.0, abs(book)):
                post_cost = refined
                break
            post_cost = refined
        cost = book - post_cost
        cash = target.cash * post_cost
        if post_cost <= 0 or cash < 0:
            raise ValueError("infeasible target: turnover cost exceeds available value")

        holdings = tuple(asset_w * post_cost / prices_now)
        next_value = cash + float(np.dot(holdings, prices_next))
        reward = (next_value - post_cost) / post_cost
        new_state = PortfolioState(
            t=state.t + 1, cash=cash, holdings=holdings, fees=state.fees + cost
        )
        return new_state, reward
