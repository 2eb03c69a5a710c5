"""Command-line entry point: ``tailmst {run,simulate,indicators,covar}``.

Exit codes: 0 success, 1 invalid configuration or input, 2 stage failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .pipeline import (FLOAT_FORMAT, WORKERS_ENV, ConfigError, RunConfig, load_config,
                       run_covar, run_indicators, run_pipeline)
from .simulate import DEFAULT_SCENARIO, simulate_panel, simulate_returns

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


def fixture_path() -> Path:
    """Bundled synthetic 10-asset, 300-week price panel (plus an ``INDEX`` column)."""
    return Path(str(resources.files("tailmst") / "data" / "synthetic_panel.csv"))


def _add_run_options(p: argparse.ArgumentParser, covar_flag: bool = True) -> None:
    p.add_argument("--config", help="INI file with [run] and optional [states] sections")
    p.add_argument("--input", help="CSV panel: 'date' column plus one column per ticker "
                                   "(default: bundled synthetic fixture)")
    p.add_argument("--returns", action="store_true", default=None,
                   help="input holds log returns instead of prices")
    p.add_argument("--date-column", help="name of the date column (default: date)")
    p.add_argument("--index-ticker", help="system index column (default: INDEX)")
    p.add_argument("--q", type=float, help="CoVaR tail level in (0, 0.5) (default: 0.05)")
    p.add_argument("--rce-k", type=int, help="rich-club degree threshold (default: 4)")
    p.add_argument("--smoothing", type=int,
                   help="trailing moving-average window for indicator columns (default: 13)")
    p.add_argument("--output", "-o", help="output directory (default: tailmst-out)")
    p.add_argument("--seed", type=int, help="random seed recorded in the report (default: 0)")
    p.add_argument("--workers", "-j", type=int,
                   help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    if covar_flag:
        p.add_argument("--no-covar", dest="covar", action="store_false", default=None,
                       help="skip the deltaCoVaR stage")
    p.add_argument("--dot", dest="dump_dot", action="store_true", default=None,
                   help="also write one Graphviz DOT file per MST")


def _config_from_args(args) -> RunConfig:
    overrides = {
        "input": args.input, "returns": args.returns, "date_column": args.date_column,
        "index_ticker": args.index_ticker, "q": args.q, "rce_k": args.rce_k,
        "smoothing": args.smoothing, "output": args.output, "seed": args.seed,
        "workers": args.workers, "covar": getattr(args, "covar", None),
        "dump_dot": args.dump_dot,
    }
    config = load_config(args.config, overrides)
    if config.input is None:
        config.input = str(fixture_path())
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailmst",
        description="Tail-dependence minimum spanning trees and deltaCoVaR for a panel of assets.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline")
    _add_run_options(p_run)

    p_cov = sub.add_parser("covar", help="deltaCoVaR only (margins + index/insurer copulas)")
    _add_run_options(p_cov, covar_flag=False)

    p_ind = sub.add_parser("indicators", help="graph stage only, from a long lambda table",
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p_ind.add_argument("lambda_csv", help="CSV with columns date, ticker_i, ticker_j, lambda")
    p_ind.add_argument("--config", help="INI file; only the [states] section is used")
    p_ind.add_argument("--output", "-o", default="tailmst-out", help="output directory")
    p_ind.add_argument("--rce-k", type=int, default=4, help="rich-club degree threshold")
    p_ind.add_argument("--smoothing", type=int, default=13, help="moving-average window")
    p_ind.add_argument("--workers", "-j", type=int, default=None,
                       help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    p_ind.add_argument("--dot", action="store_true", help="write DOT files per MST")

    p_sim = sub.add_parser("simulate", help="write a seeded synthetic panel",
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p_sim.add_argument("--scenario", help="JSON scenario file (keys override the default scenario)")
    p_sim.add_argument("--seed", type=int, default=0, help="random seed")
    p_sim.add_argument("--n-assets", type=int, help="number of assets (default scenario: 10)")
    p_sim.add_argument("--n-periods", type=int, help="number of return periods (default: 300)")
    p_sim.add_argument("--index", action="store_true", help="append an equally weighted INDEX")
    p_sim.add_argument("--returns", action="store_true", help="write log returns, not prices")
    p_sim.add_argument("--output", "-o", default="-", help="CSV path, '-' for stdout")
    return parser


def _cmd_simulate(args) -> int:
    scenario = {}
    if args.scenario:
        try:
            scenario = json.loads(Path(args.scenario).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scenario: {exc}") from None
    if args.n_assets is not None:
        scenario["n_assets"] = args.n_assets
    if args.n_periods is not None:
        scenario["n_periods"] = args.n_periods
        if "blocks" not in scenario:
            scenario["blocks"] = [b for b in DEFAULT_SCENARIO["blocks"] if b["end"] < args.n_periods]
    if args.index:
        scenario["index"] = True
    try:
        panel = (simulate_returns if args.returns else simulate_panel)(scenario, args.seed)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None
    frame = panel.to_frame()
    frame.index = frame.index.strftime("%Y-%m-%d")
    frame.index.name = "date"
    target = sys.stdout if args.output == "-" else args.output
    frame.to_csv(target, float_format=FLOAT_FORMAT, lineterminator="\n")
    return EXIT_OK


def _finish(report) -> int:
    stream = sys.stdout if report.exit_code == 0 else sys.stderr
    print(f"status: {report.status}", file=stream)
    if report.error:
        print(f"error: {report.error}", file=stream)
    for stage, info in report.stages.items():
        print(f"  {stage:<8} {info['seconds']:8.2f}s {'ok' if info['ok'] else 'FAILED'}", file=stream)
    if report.warnings:
        print(f"  {len(report.warnings)} warning(s); see run_report.json", file=stream)
    return report.exit_code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "indicators":
            from .pipeline import default_workers
            from .states import DEFAULT_WINDOWS

            windows = DEFAULT_WINDOWS
            if args.config:
                windows = load_config(args.config).windows
            workers = args.workers if args.workers is not None else default_workers()
            return _finish(run_indicators(args.lambda_csv, args.output, args.rce_k,
                                          args.smoothing, windows, workers, args.dot))
        config = _config_from_args(args)
        runner = run_pipeline if args.command == "run" else run_covar
        return _finish(runner(config))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
