"""Deterministic baseline policies.

All functions are pure: identical inputs give byte-identical outputs, and the
crossover automaton never emits SELL while flat or BUY while holding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .envs.trading import Action


@dataclass(frozen=True)
class MacdParams:
    fast: int = 12
    slow: int = 26
    signal: int = 9

    def __post_init__(self) -> None:
        if min(self.fast, self.slow, self.signal) < 1:
            raise ValueError("spans must be >= 1")
        if self.fast >= self.slow:
            raise ValueError("fast span must be shorter than slow span")


@dataclass(frozen=True)
class TopkParams:
    k: int
    d: int

    def __post_init__(self) -> None:
        if not 1 <= self.d <= self.k:
            raise ValueError("need 1 <= d <= k")


def buy_and_hold(length: int) -> list[Action]:
    if length < 1:
        raise ValueError("length must be >= 1")
    return [Action.BUY] + [Action.HOLD] * (length - 1)


def ema(values: Sequence[float], span: int) -> np.ndarray:
    """Recursive EMA with alpha = 2/(span+1), seeded at the first value."""
    if span < 1:
        raise ValueError("span must be >= 1")
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("empty input")
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(x)
    out[0] = x[0]
    for i in range(1, x.size):
        out[i] = (1.0 - alpha) * out[i - 1] + alpha * x[i]
    return out


def macd_signals(
    closes: Sequence[float],
    params: MacdParams = MacdParams(),
    active_from: int | None = None,
) -> tuple[np.ndarray, np.ndarray, list[Action]]:
    """DIF/DEA crossover actions.

    DIF = EMA_fast - EMA_slow, DEA = EMA_signal(DIF).  BUY when DIF crosses
    above DEA while flat, SELL when it crosses below while holding, HOLD
    otherwise.  Indices before ``active_from`` (default: the slow span, i.e.
    the warm-up) are forced HOLD; the automaton starts flat there, so the
    activation bar itself reads as a crossing when DIF already sits above DEA
    (otherwise a trend established during warm-up could never be entered).
    """
    closes = np.asarray(closes, dtype=float)
    if closes.size < params.slow:
        raise ValueError(f"need at least {params.slow} closes, got {closes.size}")
    active_from = params.slow if active_from is None else max(active_from, params.slow)
    dif = ema(closes, params.fast) - ema(closes, params.slow)
    dea = ema(dif, params.signal)

    actions = [Action.HOLD] * closes.size
    holding = False
    for t in range(active_from, closes.size):
        if t == active_from:
            crossed_up = dif[t] > dea[t]
            crossed_down = False
        else:
            crossed_up = dif[t - 1] <= dea[t - 1] and dif[t] > dea[t]
            crossed_down = dif[t - 1] >= dea[t - 1] and dif[t] < dea[t]
        if crossed_up and not holding:
            actions[t] = Action.BUY
            holding = True
        elif crossed_down and holding:
            actions[t] = Action.SELL
            holding = False
    return dif, dea, actions


def threshold_rule(predictions: Sequence[float], tau: float = 0.0) -> list[Action]:
    """BUY above tau, SELL below -tau, HOLD otherwise (strict inequalities)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    out = []
    for y in predictions:
        if y > tau:
            out.append(Action.BUY)
        elif y < -tau:
            out.append(Action.SELL)
        else:
            out.append(Action.HOLD)
    return out


def topk_dropout(
    scores: np.ndarray,
    mask: np.ndarray,
    symbols: Sequence[str],
    params: TopkParams,
) -> list[tuple[frozenset[str], list[float]]]:
    """Top-k holdings with d-swap rotation from an N x T score panel.

    Period 0 holds the k best-scored symbols; afterwards the d worst-scored
    holdings are swapped against the d best-scored outsiders, one pair at a
    time and only when the outsider outranks the holding.  Ranking sorts by
    (score desc, symbol asc); weights are 1/k per holding with zero cash.

    Returns one (holdings, weight vector) pair per period, the weight vector
    being cash-first over ``symbols`` order.
    """
    scores = np.asarray(scores, dtype=float)
    n, t_len = scores.shape
    if len(symbols) != n or mask.shape != scores.shape:
        raise ValueError("scores, mask and symbols must agree on N")
    if params.k > n:
        raise ValueError("k exceeds universe size")

    def ranked(period: int) -> list[str]:
        scorable = [(symbols[i], scores[i, period]) for i in range(n) if mask[i, period]]
        if len(scorable) < params.k:
            raise ValueError(
                f"period {period}: only {len(scorable)} scorable assets, need {params.k}"
            )
        return [s for s, _ in sorted(scorable, key=lambda p: (-p[1], p[0]))]

    out: list[tuple[frozenset[str], list[float]]] = []
    held: list[str] = []
    for period in range(t_len):
        order = ranked(period)
        position = {s: i for i, s in enumerate(order)}
        if period == 0:
            held = order[: params.k]
        else:
            held = [s for s in held if s in position]
            if len(held) < params.k:
                raise ValueError(f"period {period}: held asset became unscorable")
            worst_first = sorted(held, key=lambda s: position[s], reverse=True)
            outsiders = [s for s in order if s not in held]
            for sell, buy in zip(worst_first[: params.d], outsiders[: params.d]):
                if position[buy] < position[sell]:
                    held[held.index(sell)] = buy
        held_set = frozenset(held)
        weights = [0.0] + [1.0 / params.k if s in held_set else 0.0 for s in symbols]
        out.append((held_set, weights))
    return out
