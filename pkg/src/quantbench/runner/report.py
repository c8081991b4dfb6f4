"""Report emission: JSON (fractions, full precision), CSV tables (percent,
4 decimal places), plot-data point series, and rendered figures.

Every number in the emitted report is recomputable from the ledger alone;
``metrics_from_ledger`` is the recomputation path used by the CLI.  All files
are written atomically (temp + rename) in UTF-8.
"""

from __future__ import annotations

import json
import os
import tempfile
from datetime import datetime
from pathlib import Path
from typing import Sequence

from ..envs.trading import LEDGER_COLUMNS, parse_ledger_csv, records_to_csv
from ..metrics import MetricReport, ReturnSeries, evaluate_returns
from .backtest import RunReport
from .config import RunConfig

PORTFOLIO_LEDGER_COLUMNS = ("timestamp", "value", "ret")


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)  # mkstemp defaults to owner-only
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(value):
    if isinstance(value, datetime):
        return value.isoformat()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def report_json_text(report: RunReport) -> str:
    payload = {
        "generated_at": report.generated_at.isoformat(),
        "version": report.version,
        "strategy": report.strategy,
        "symbols": list(report.symbols),
        "metrics": report.metrics.to_json_dict(),
        "rets": list(report.rets),
        "equity": [[ts.isoformat(), v] for ts, v in report.equity],
        "drawdown": [[ts.isoformat(), v] for ts, v in report.drawdown],
        "ledger": "ledger.csv",
        "provenance": _jsonable(list(report.provenance)),
        "config": _jsonable(report.config_echo),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _ledger_text(report: RunReport) -> str:
    if report.records:
        return records_to_csv(report.records)
    lines = [",".join(PORTFOLIO_LEDGER_COLUMNS)]
    for ts, value, ret in report.portfolio_rows:
        lines.append(f"{ts.isoformat()},{value!r},{ret!r}")
    return "\n".join(lines) + "\n"


def _points_csv(points: Sequence[tuple[datetime, float]], value_name: str) -> str:
    lines = [f"timestamp,{value_name}"]
    for ts, v in points:
        lines.append(f"{ts.isoformat()},{v!r}")
    return "\n".join(lines) + "\n"


def emit_report(report: RunReport, cfg: RunConfig) -> dict[str, Path]:
    """Write the requested artifacts into the config's output directory.

    Returns the paths written, keyed by artifact name.  Figures accompany the
    plot-data CSVs when enabled.
    """
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    ledger_path = outdir / "ledger.csv"
    _atomic_write(ledger_path, _ledger_text(report))
    written["ledger"] = ledger_path

    if "json" in cfg.report_formats:
        path = outdir / "report.json"
        _atomic_write(path, report_json_text(report))
        written["report"] = path
    if "csv" in cfg.report_formats:
        path = outdir / "metrics.csv"
        _atomic_write(path, report.metrics.to_csv())
        written["metrics"] = path
    if "plotdata" in cfg.report_formats:
        equity_path = outdir / "equity.csv"
        _atomic_write(equity_path, _points_csv(report.equity, "value"))
        written["equity"] = equity_path
        drawdown_path = outdir / "drawdown.csv"
        _atomic_write(drawdown_path, _points_csv(report.drawdown, "drawdown"))
        written["drawdown"] = drawdown_path
        if cfg.figures:
            from .plots import render_drawdown_figure, render_equity_figure

            written["equity_png"] = render_equity_figure(report, outdir / "equity.png")
            written["drawdown_png"] = render_drawdown_figure(report, outdir / "drawdown.png")
    return written


def metrics_from_ledger(
    path: Path | str,
    periods_per_year: int = 252,
    risk_free: float = 0.0,
    names: Sequence[str] | None = None,
) -> MetricReport:
    """Recompute the metric bundle from an emitted ledger file."""
    text = Path(path).read_text(encoding="utf-8")
    header = tuple(text.splitlines()[0].split(","))
    if header == LEDGER_COLUMNS:
        rets = [r.ret for r in parse_ledger_csv(text)]
    elif header == PORTFOLIO_LEDGER_COLUMNS:
        rows = [ln.split(",") for ln in text.splitlines()[1:] if ln.strip()]
        rets = [float(row[2]) for row in rows[1:]]  # first row is the opening value
    else:
        raise ValueError(f"unrecognized ledger header: {header}")
    rs = ReturnSeries(rets, periods_per_year=periods_per_year, risk_free=risk_free)
    return evaluate_returns(rs, names)
