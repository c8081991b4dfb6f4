"""File-format parsers: OHLCV CSV and news JSONL.

Both formats are UTF-8.  CSV headers are case- and order-insensitive;
timestamps are ISO-8601 (date or datetime, naive treated as UTC).
"""

from __future__ import annotations

import csv
import io
import json
from datetime import datetime

from ..core import AssetSeries, Bar, NewsItem, ensure_utc

REQUIRED_COLUMNS = ("timestamp", "open", "high", "low", "close", "volume")
OPTIONAL_COLUMNS = ("adjusted_close",)


class ParseError(ValueError):
    """Malformed input file; message carries row/line and column context."""


def _decode(data: bytes | str) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def parse_timestamp(text: str) -> datetime:
    try:
        return ensure_utc(datetime.fromisoformat(text.strip()))
    except ValueError:
        raise ParseError(f"unparseable timestamp {text!r}") from None


def parse_ohlcv_csv(data: bytes | str, symbol: str) -> AssetSeries:
    """Parse an OHLCV CSV into a sorted AssetSeries.

    Duplicate timestamps are rejected; numeric parse failures name the row
    (1-based, header is row 1) and column.
    """
    reader = csv.reader(io.StringIO(_decode(data)))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: missing header row") from None
    names = [h.strip().lower() for h in header]
    missing = [c for c in REQUIRED_COLUMNS if c not in names]
    if missing:
        raise ParseError(f"missing required column(s): {', '.join(missing)}")
    col = {c: names.index(c) for c in REQUIRED_COLUMNS}
    has_adj = "adjusted_close" in names
    if has_adj:
        col["adjusted_close"] = names.index("adjusted_close")

    bars = []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(names):
            raise ParseError(f"row {row_no}: expected {len(names)} fields, got {len(row)}")
        try:
            ts = parse_timestamp(row[col["timestamp"]])
        except ParseError as exc:
            raise ParseError(f"row {row_no}, column timestamp: {exc}") from None

        def number(name: str) -> float:
            text = row[col[name]].strip()
            try:
                return float(text)
            except ValueError:
                raise ParseError(
                    f"row {row_no}, column {name}: unparseable numeric value {text!r}"
                ) from None

        adj = None
        if has_adj and row[col["adjusted_close"]].strip():
            adj = number("adjusted_close")
        bars.append(
            Bar(ts, number("open"), number("high"), number("low"),
                number("close"), number("volume"), adj)
        )

    bars.sort(key=lambda b: b.timestamp)
    for prev, cur in zip(bars, bars[1:]):
        if cur.timestamp == prev.timestamp:
            raise ParseError(f"duplicate timestamp {cur.timestamp.isoformat()}")
    return AssetSeries(symbol, bars)


def serialize_ohlcv_csv(series: AssetSeries) -> str:
    """Inverse of ``parse_ohlcv_csv``; float fields use shortest round-trip repr."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(REQUIRED_COLUMNS) + list(OPTIONAL_COLUMNS))
    for b in series.bars:
        adj = "" if b.adjusted_close is None else repr(b.adjusted_close)
        writer.writerow(
            [b.timestamp.isoformat(), repr(b.open), repr(b.high), repr(b.low),
             repr(b.close), repr(b.volume), adj]
        )
    return out.getvalue()


def parse_news_jsonl(
    data: bytes | str, policy: str = "strict"
) -> tuple[list[NewsItem], list[tuple[int, str]]]:
    """Parse news JSONL into items sorted by timestamp.

    Under ``strict`` a malformed line raises with its line number; under
    ``flag`` malformed lines are collected into the returned report.
    """
    if policy not in ("strict", "flag"):
        raise ValueError(f"unknown policy {policy!r}")
    items: list[NewsItem] = []
    report: list[tuple[int, str]] = []
    for line_no, line in enumerate(_decode(data).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ParseError("record is not an object")
            missing = [k for k in ("timestamp", "symbol", "title", "content") if k not in record]
            if missing:
                raise ParseError(f"missing field(s): {', '.join(missing)}")
            item = NewsItem(
                timestamp=parse_timestamp(str(record["timestamp"])),
                symbol=str(record["symbol"]),
                title=str(record["title"]),
                content=str(record["content"]),
            )
        except (json.JSONDecodeError, ParseError, ValueError) as exc:
            if policy == "strict":
                raise ParseError(f"line {line_no}: {exc}") from None
            report.append((line_no, str(exc)))
            continue
        items.append(item)
    items.sort(key=lambda n: n.timestamp)
    return items, report
