"""Deterministic markdown prompt for LLM trading decisions.

Renders the trailing price window, the news block, the step ledger, the
executed BUY/SELL history and the standing instruction block.  Formatting is
fixed (prices and cash at 2 decimals, volume in scientific notation, returns
at 6 decimals) so identical inputs produce byte-identical prompts.
"""

from __future__ import annotations

from datetime import datetime
from typing import Sequence

from ..core import NewsItem
from .trading import Action, StepRecord, TradingEnvConfig, TradingState

PRICE_ROWS = 7
RECORD_ROWS = 7
MAX_NEWS = 5

PREAMBLE = (
    "You are a highly experienced trader. Your task is to carefully analyze the "
    "provided financial news, current price, and historical trading records. Based "
    "on your professional judgment, provide the single best trading decision for "
    "the current situation."
)

NOTE_LINES = (
    "1. `timestamp`: the timestamp of the record",
    "2. `open`: Open price",
    "3. `high`: High price",
    "4. `low`: Low price",
    "5. `close`: Close price",
    "6. `volume`: Volume of the asset traded",
    "7. `price`: Current price (adj_close price)",
    "8. `cash`: Current cash",
    "9. `position`: Current position",
    "10. `pre_value`: Previous total value, `value = cash + position * price`",
    "11. `action`: Action taken, `BUY`, `SELL`, or `HOLD`",
    "12. `post_value`: Current total value",
    "13. `ret`: Return, `ret = (post_value - pre_value) / pre_value`",
)

INSTRUCTIONS = (
    "You should follow the instructions below in detail when making your decision.\n"
    "\n"
    "1. Your full reasoning process must be enclosed within <think></think> tags.\n"
    "2. Your final answer must be one of the following three options: BUY, HOLD, "
    "or SELL, and be presented only inside a single \\boxed{}.\n"
    "3. Do not output anything else except the reasoning in <think>...</think> "
    "and the final answer in \\boxed{}.\n"
    "\n"
    "Example output:\n"
    "<think>Based on the news indicating strong earnings, a rising price trend, "
    "and positive historical returns, a BUY decision is justified.</think>\n"
    "\\boxed{BUY}"
)


def _fmt_ts(ts: datetime) -> str:
    if ts.hour == ts.minute == ts.second == 0 and ts.microsecond == 0:
        return ts.strftime("%Y-%m-%d")
    return ts.strftime("%Y-%m-%d %H:%M:%S")


def _pipe_table(headers: Sequence[str], rows: Sequence[Sequence[str]],
                align: Sequence[str]) -> str:
    widths = [
        max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
        for i, h in enumerate(headers)
    ]
    def pad(cell: str, i: int) -> str:
        return cell.rjust(widths[i]) if align[i] == "right" else cell.ljust(widths[i])
    lines = ["| " + " | ".join(pad(h, i) for i, h in enumerate(headers)) + " |"]
    lines.append(
        "|" + "|".join(
            ("-" * (widths[i] + 1) + ":") if align[i] == "right" else (":" + "-" * (widths[i] + 1))
            for i in range(len(headers))
        ) + "|"
    )
    for row in rows:
        lines.append("| " + " | ".join(pad(c, i) for i, c in enumerate(row)) + " |")
    return "\n".join(lines)


def _record_row(r: StepRecord) -> list[str]:
    return [
        _fmt_ts(r.timestamp),
        f"{r.open:.2f}", f"{r.high:.2f}", f"{r.low:.2f}", f"{r.close:.2f}",
        f"{r.volume:.5e}", f"{r.price:.2f}", f"{r.cash:.2f}", f"{r.position:.2f}",
        f"{r.pre_value:.2f}", r.action.value, f"{r.post_value:.2f}", f"{r.ret:.6f}",
    ]


RECORD_HEADERS = ["timestamp", "open", "high", "low", "close", "volume", "price",
                  "cash", "position", "pre_value", "action", "post_value", "ret"]
RECORD_ALIGN = ["left"] + ["right"] * 9 + ["left"] + ["right"] * 2


def render_prompt(
    state: TradingState,
    config: TradingEnvConfig,
    history: Sequence[StepRecord],
    valid_actions: Sequence[StepRecord],
    news: Sequence[NewsItem],
    now: datetime,
    name: str | None = None,
) -> str:
    """Build the full decision prompt for the bar at ``state.t``."""
    bars = config.series.bars
    window = bars[max(0, state.t - PRICE_ROWS + 1): state.t + 1]
    price_rows = [
        [f"{b.close:.2f}", f"{b.high:.2f}", f"{b.low:.2f}", f"{b.open:.2f}", f"{b.volume:.5e}"]
        for b in window
    ]
    price_table = _pipe_table(
        ["close", "high", "low", "open", "volume"], price_rows, ["right"] * 5
    )

    news_lines = [
        f"{n.timestamp.strftime('%Y-%m-%d %H:%M:%S')} | {n.title} | {n.content}"
        for n in list(news)[-MAX_NEWS:]
    ]
    history_rows = [_record_row(r) for r in list(history)[-RECORD_ROWS:]]
    valid_rows = [
        _record_row(r) for r in valid_actions if r.action in (Action.BUY, Action.SELL)
    ][-RECORD_ROWS:]

    price_now = bars[state.t].price
    parts = [
        PREAMBLE,
        "",
        "Here is the task:",
        f"# Name: {name or config.series.symbol}, Symbol: ({config.series.symbol})",
        "",
        f"## Price ({PRICE_ROWS} days OHLCV data)",
        price_table,
        "",
        "## News (3-5 news articles)",
        "**Timestamp | Title | Content**",
        *news_lines,
        "",
        "## Record",
        _pipe_table(RECORD_HEADERS, history_rows, RECORD_ALIGN),
        "",
        "## History Valid Action",
        _pipe_table(RECORD_HEADERS, valid_rows, RECORD_ALIGN),
        "",
        "## Note",
        *NOTE_LINES,
        "",
        f"Today is {now.strftime('%Y-%m-%d %H:%M:%S')}, and the current price, cash, "
        f"and position are {price_now:.2f}, {state.cash:.2f}, and {state.position:.2f}.",
        "",
        INSTRUCTIONS,
    ]
    return "\n".join(parts) + "\n"
