"""Figure rendering for the report path (file output only, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.dates as mdates
import matplotlib.pyplot as plt

from .backtest import RunReport


def _styled_axes(title: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%Y-%m-%d"))
    fig.autofmt_xdate()
    return fig, ax


def render_equity_figure(report: RunReport, path: Path) -> Path:
    ts = [t for t, _ in report.equity]
    values = [v for _, v in report.equity]
    fig, ax = _styled_axes(
        f"{report.strategy} on {', '.join(report.symbols)}", "portfolio value"
    )
    ax.plot(ts, values, lw=1.2, color="tab:blue")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_drawdown_figure(report: RunReport, path: Path) -> Path:
    ts = [t for t, _ in report.drawdown]
    values = [-v for _, v in report.drawdown]
    fig, ax = _styled_axes(
        f"{report.strategy} on {', '.join(report.symbols)}", "drawdown"
    )
    ax.fill_between(ts, values, 0.0, color="tab:red", alpha=0.4)
    ax.plot(ts, values, lw=0.8, color="tab:red")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
