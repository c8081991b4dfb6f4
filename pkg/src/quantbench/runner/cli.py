"""Batch command line: ingest, factors, backtest, metrics, prompt.

Exit codes: 0 success, 1 usage error, 2 runtime failure (diagnostics on
stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..core import AssetSeries
from ..envs.prompt import render_prompt
from ..envs.trading import TradingEnvConfig, TradingState, parse_ledger_csv
from ..factors import compute_alpha158
from ..ingest.parsers import ParseError, serialize_ohlcv_csv
from ..ingest.provider import ProviderError
from .backtest import StageError, _load_news, _load_series, _shared_limiter, run_backtest
from .config import ConfigError, load_config
from .report import emit_report, metrics_from_ledger

RUNTIME_ERRORS = (
    ConfigError, StageError, ParseError, ProviderError, ValueError, KeyError, OSError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantbench",
        description="walk-forward backtests, factor matrices and reports",
    )
    sub = parser.add_subparsers(dest="command")

    p_ingest = sub.add_parser("ingest", help="fetch or convert OHLCV data")
    p_ingest.add_argument("--config", required=True, type=Path)

    p_factors = sub.add_parser("factors", help="emit factor matrix CSVs")
    p_factors.add_argument("--config", required=True, type=Path)

    p_backtest = sub.add_parser("backtest", help="run a backtest and emit reports")
    p_backtest.add_argument("--config", required=True, type=Path)

    p_metrics = sub.add_parser("metrics", help="recompute metrics from a ledger")
    p_metrics.add_argument("--ledger", required=True, type=Path)
    p_metrics.add_argument("--periods-per-year", type=int, default=252)
    p_metrics.add_argument("--risk-free", type=float, default=0.0)
    p_metrics.add_argument("--output", type=Path, default=None)

    p_prompt = sub.add_parser("prompt", help="render the decision prompt for a ledger row")
    p_prompt.add_argument("--config", required=True, type=Path)
    p_prompt.add_argument("--ledger", required=True, type=Path)
    p_prompt.add_argument("--index", required=True, type=int)
    return parser


def cmd_ingest(args) -> int:
    cfg = load_config(args.config)
    outdir = cfg.output_dir / "ingest"
    outdir.mkdir(parents=True, exist_ok=True)
    limiter = _shared_limiter(cfg)
    provenance = []
    for symbol in cfg.data.symbols:
        series, prov = _load_series(cfg, symbol, limiter)
        (outdir / f"{symbol}.csv").write_text(serialize_ohlcv_csv(series), encoding="utf-8")
        provenance.append(prov)
        print(f"wrote {outdir / f'{symbol}.csv'} ({len(series)} bars)")
    (outdir / "provenance.json").write_text(
        json.dumps(provenance, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return 0


def cmd_factors(args) -> int:
    cfg = load_config(args.config)
    outdir = cfg.output_dir / "factors"
    outdir.mkdir(parents=True, exist_ok=True)
    limiter = _shared_limiter(cfg)
    for symbol in cfg.data.symbols:
        series, _ = _load_series(cfg, symbol, limiter)
        matrix = compute_alpha158(series, cfg.windows)
        (outdir / f"{symbol}.csv").write_text(matrix.to_csv(), encoding="utf-8")
        print(f"wrote {outdir / f'{symbol}.csv'} ({len(matrix.columns)} columns)")
    return 0


def cmd_backtest(args) -> int:
    cfg = load_config(args.config)
    report = run_backtest(cfg)
    written = emit_report(report, cfg)
    for name, path in sorted(written.items()):
        print(f"{name}: {path}")
    return 0


def cmd_metrics(args) -> int:
    report = metrics_from_ledger(
        args.ledger, periods_per_year=args.periods_per_year, risk_free=args.risk_free
    )
    text = json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"
    if args.output is not None:
        args.output.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_prompt(args) -> int:
    cfg = load_config(args.config)
    if len(cfg.data.symbols) != 1:
        raise ConfigError("prompt rendering needs a single-symbol config")
    symbol = cfg.data.symbols[0]
    series, _ = _load_series(cfg, symbol, _shared_limiter(cfg))
    records = parse_ledger_csv(args.ledger.read_text(encoding="utf-8"))
    if not 0 <= args.index < len(records):
        raise ValueError(f"ledger row {args.index} out of range (0..{len(records) - 1})")

    row = records[args.index]
    test_bars = [b for b in series.bars if b.timestamp >= cfg.split.train_end]
    env_config = TradingEnvConfig(
        series=AssetSeries(symbol, test_bars),
        initial_cash=cfg.initial_cash,
        fee_rate=cfg.fee_rate,
        news=_load_news(cfg, symbol),
    )
    t = next(i for i, b in enumerate(test_bars) if b.timestamp == row.timestamp)
    if args.index == 0:
        cash, position, fees = cfg.initial_cash, 0.0, 0.0
    else:
        prev = records[args.index - 1]
        cash, position = prev.cash, prev.position
        fees = 0.0
    state = TradingState(t=t, cash=cash, position=position, fees=fees)
    history = records[: args.index]
    news = [n for n in env_config.news if n.timestamp <= row.timestamp]
    sys.stdout.write(
        render_prompt(state, env_config, history, history, news, row.timestamp)
    )
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "factors": cmd_factors,
    "backtest": cmd_backtest,
    "metrics": cmd_metrics,
    "prompt": cmd_prompt,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage problems; map the latter to 1
        return 0 if exc.code == 0 else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
