"""End-to-end orchestration: ingest -> margins -> depnet -> graph -> covar -> states."""
from __future__ import annotations

import configparser
import itertools
import json
import logging
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .covar import delta_covar
from .depnet import fit_pair_copula, pair_table, tail_dep_tensor
from .graph import edge_table, indicator_series, trees_from_tensor
from .ingest import ReturnPanel, load_price_panel, load_return_panel, log_returns
from .kernels import BACKEND
from .margins import fit_arma_garch, marginal_table
from .states import DEFAULT_WINDOWS, StateWindows, classify, state_summary

logger = logging.getLogger(__name__)

WORKERS_ENV = "TAILMST_WORKERS"
FLOAT_FORMAT = "%.9g"
DATE_FORMAT = "%Y-%m-%d"


class ConfigError(ValueError):
    """Invalid run configuration (detected before any computation)."""


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return n


@dataclass
class RunConfig:
    """Everything a run needs.  Defaults are the documented reference settings."""

    input: str | None = None
    returns: bool = False
    date_column: str = "date"
    index_ticker: str | None = "INDEX"
    q: float = 0.05
    rce_k: int = 4
    smoothing: int = 13
    windows: StateWindows = DEFAULT_WINDOWS
    output: str = "tailmst-out"
    seed: int = 0
    workers: int = field(default_factory=default_workers)
    covar: bool = True
    dump_margins: bool = True
    dump_pairs: bool = True
    dump_lambda: bool = True
    dump_dot: bool = False

    def validate(self) -> None:
        if self.input is None:
            raise ConfigError("no input file given")
        if not 0.0 < self.q < 0.5:
            raise ConfigError(f"q must lie in (0, 0.5), got {self.q}")
        if self.rce_k < 1:
            raise ConfigError(f"rce threshold must be >= 1, got {self.rce_k}")
        if self.smoothing < 1:
            raise ConfigError(f"smoothing window must be >= 1, got {self.smoothing}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.covar and not self.index_ticker:
            raise ConfigError("the covar stage needs an index ticker")

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.to_mapping() if isinstance(v, StateWindows) else v
        return out


_BOOL_KEYS = ("returns", "covar", "dump_margins", "dump_pairs", "dump_lambda", "dump_dot")
_INT_KEYS = ("rce_k", "smoothing", "seed", "workers")
_FLOAT_KEYS = ("q",)
_STR_KEYS = ("input", "date_column", "index_ticker", "output")


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read an INI file (``[run]`` and optional ``[states]`` sections) and apply overrides.

    ``[states]`` entries look like ``SMC = 2008-02-08, 2013-03-01``; several
    spans for one label are separated by ``;``.  An empty ``[states]``
    section means no crisis windows at all.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep state labels case-sensitive
    if path is not None:
        if not parser.read(path):
            raise ConfigError(f"cannot read config file {path}")
    values: dict = {}
    if parser.has_section("run"):
        sec = parser["run"]
        unknown = set(sec) - set(_BOOL_KEYS + _INT_KEYS + _FLOAT_KEYS + _STR_KEYS)
        if unknown:
            raise ConfigError(f"unknown [run] keys: {sorted(unknown)}")
        try:
            for key in sec:
                if key in _BOOL_KEYS:
                    values[key] = sec.getboolean(key)
                elif key in _INT_KEYS:
                    values[key] = sec.getint(key)
                elif key in _FLOAT_KEYS:
                    values[key] = sec.getfloat(key)
                else:
                    values[key] = sec.get(key) or None
        except ValueError as exc:
            raise ConfigError(f"bad value in [run]: {exc}") from None
    if parser.has_section("states"):
        values["windows"] = parse_windows(dict(parser["states"]))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def parse_windows(mapping: dict[str, str]) -> StateWindows:
    items = []
    try:
        for label, text in mapping.items():
            for span in text.split(";"):
                if span.strip():
                    start, end = (s.strip() for s in span.split(","))
                    items.append((label, start, end))
        return StateWindows(tuple(items))
    except ValueError as exc:
        raise ConfigError(f"bad [states] entry: {exc}") from None


# ---------------------------------------------------------------------------
# worker tasks (top level so they pickle)

def _fit_margin_task(args):
    ticker, r = args
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit = fit_arma_garch(r, strict=False)
    notes = [f"{ticker}: {w.message}" for w in caught]
    if not fit.converged:
        notes.append(f"{ticker}: ARMA-GARCH fit did not converge ({fit.message})")
    return ticker, fit, notes


def _fit_pair_task(args):
    a, b, u_a, u_b = args
    return fit_pair_copula(u_a, u_b, pair=(a, b))


def _graph_task(args):
    tensor_slice, dates, rce_k = args
    trees = trees_from_tensor(tensor_slice)
    return trees, indicator_series(trees, dates, rce_k)


def _pool_map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


# ---------------------------------------------------------------------------
# report

@dataclass
class RunReport:
    status: str = "running"
    version: str = __version__
    backend: str = BACKEND
    config: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    convergence_failures: list = field(default_factory=list)
    fallbacks: list = field(default_factory=list)
    error: str | None = None
    outputs: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return {"ok": 0, "invalid": 1}.get(self.status, 2)

    def write(self, outdir: Path) -> None:
        payload = {k: getattr(self, k) for k in (
            "status", "version", "backend", "config", "stages", "warnings",
            "convergence_failures", "fallbacks", "error", "outputs")}
        with open(outdir / "run_report.json", "w") as fh:
            json.dump(payload, fh, indent=2, default=str)
            fh.write("\n")


class _Stage:
    def __init__(self, report: RunReport, name: str):
        self.report, self.name = report, name

    def __enter__(self):
        self.t0 = time.perf_counter()
        logger.info("stage %s ...", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        self.report.stages[self.name] = {"seconds": round(elapsed, 3),
                                         "ok": exc_type is None}
        if exc_type is not None and not issubclass(exc_type, StageError):
            raise StageError(self.name, f"{exc_type.__name__}: {exc}") from exc
        logger.info("stage %s done in %.2fs", self.name, elapsed)
        return False


# ---------------------------------------------------------------------------
# writers

def _write_csv(frame: pd.DataFrame, path: Path, report: RunReport, index=False) -> None:
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, date_format=DATE_FORMAT,
                 lineterminator="\n")
    report.outputs.append(path.name)


def _date_strings(dates) -> list:
    if isinstance(dates, pd.DatetimeIndex):
        return list(dates.strftime(DATE_FORMAT))
    return list(dates)


# ---------------------------------------------------------------------------
# stages

def load_returns(config: RunConfig) -> ReturnPanel:
    if config.returns:
        return load_return_panel(config.input, config.date_column)
    panel = load_price_panel(config.input, config.date_column)
    return log_returns(panel)


def fit_margins(returns: ReturnPanel, tickers, workers: int, report: RunReport) -> dict:
    results = _pool_map(_fit_margin_task, [(t, returns[t]) for t in tickers], workers)
    fits = {}
    for ticker, fit, notes in results:
        fits[ticker] = fit
        report.warnings.extend(notes)
        if not fit.converged:
            report.convergence_failures.append({"stage": "margins", "ticker": ticker,
                                                "message": fit.message})
    return fits


def fit_pairs(pairs, fits: dict, workers: int, report: RunReport) -> list:
    tasks = [(a, b, fits[a].pit, fits[b].pit) for a, b in pairs]
    results = _pool_map(_fit_pair_task, tasks, workers)
    for res in results:
        report.warnings.extend(res.warnings)
        if res.fallback:
            report.fallbacks.append(list(res.pair))
    return results


def graph_stage(tensor, rce_k: int, workers: int):
    """MSTs and indicators for every date; chunked over workers, reassembled by date."""
    n = tensor.values.shape[0]
    n_chunks = min(n, max(1, workers))
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    tasks = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        part = type(tensor)(dates=tensor.dates[lo:hi], tickers=tensor.tickers,
                            values=tensor.values[lo:hi])
        tasks.append((part, tensor.dates[lo:hi], rce_k))
    results = _pool_map(_graph_task, tasks, workers)
    trees = list(itertools.chain.from_iterable(r[0] for r in results))
    frames = [r[1] for r in results]
    scalars = pd.concat([f.scalars for f in frames])
    nodes = {name: pd.concat([f.nodes[name] for f in frames]) for name in frames[0].nodes}
    ind = type(frames[0])(scalars=scalars, nodes=nodes,
                          capped_edges=sum(f.capped_edges for f in frames))
    return trees, ind


def write_graph_outputs(outdir: Path, trees, ind, smoothing: int, report: RunReport,
                        dump_dot: bool = False) -> None:
    table = ind.smoothed(smoothing)
    table.index = pd.Index(_date_strings(table.index), name="date")
    _write_csv(table, outdir / "indicators.csv", report, index=True)
    _write_csv(ind.node_long(), outdir / "node_indicators.csv", report)
    _write_csv(ind.node_means().rename_axis("ticker").reset_index(),
               outdir / "node_means.csv", report)
    freq = pd.DataFrame([
        {"date": d, "degree": k, "count": c, "frequency": c / t.k}
        for d, t in zip(_date_strings(ind.dates), trees)
        for k, c in sorted(pd.Series(t.degrees()).value_counts().items())
    ])
    _write_csv(freq, outdir / "degree_distribution.csv", report)
    _write_csv(edge_table(trees, _date_strings(ind.dates)), outdir / "mst_edges.csv", report)
    if dump_dot:
        dot_dir = outdir / "mst_dot"
        dot_dir.mkdir(exist_ok=True)
        for d, t in zip(_date_strings(ind.dates), trees):
            (dot_dir / f"{d}.dot").write_text(t.to_dot())
        report.outputs.append("mst_dot/")
    if ind.capped_edges:
        report.warnings.append(f"{ind.capped_edges} zero-length MST edges had strength capped")


def run_pipeline(config: RunConfig) -> RunReport:
    """Run every enabled stage and write artifacts to ``config.output``.

    Never raises for stage failures: the returned report carries
    ``status`` (``ok``, ``invalid`` or ``failed``) and is always written.
    """
    report = RunReport()
    try:
        config.validate()
    except ConfigError as exc:
        report.status, report.error = "invalid", str(exc)
        return report
    report.config = config.as_dict()
    outdir = Path(config.output)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        _run(config, outdir, report)
        report.status = "ok"
    except ConfigError as exc:
        report.status, report.error = "invalid", str(exc)
    except StageError as exc:
        report.status, report.error = "failed", str(exc)
        logger.error("%s", exc)
    report.write(outdir)
    return report


def _run(config: RunConfig, outdir: Path, report: RunReport) -> None:
    with _Stage(report, "ingest"):
        returns = load_returns(config)
    if config.covar and config.index_ticker not in returns.tickers:
        raise ConfigError(f"index ticker {config.index_ticker!r} not in panel")
    network = [t for t in returns.tickers if t != config.index_ticker]
    if len(network) < 2:
        raise ConfigError("need at least two non-index assets for the network")
    dates = returns.dates
    needed = network + ([config.index_ticker] if config.covar else [])

    with _Stage(report, "margins"):
        fits = fit_margins(returns, needed, config.workers, report)
        if config.dump_margins:
            _write_csv(marginal_table({t: fits[t] for t in needed}), outdir / "margins.csv", report)

    with _Stage(report, "depnet"):
        pairs = list(itertools.combinations(network, 2))
        pair_fits = fit_pairs(pairs, fits, config.workers, report)
        tensor = tail_dep_tensor(pair_fits, network, dates)
        if config.dump_pairs:
            _write_csv(pair_table(pair_fits), outdir / "pairs.csv", report)
        if config.dump_lambda:
            _write_csv(tensor.to_long(), outdir / "lambda_long.csv", report)

    with _Stage(report, "graph"):
        trees, ind = graph_stage(tensor, config.rce_k, config.workers)
        write_graph_outputs(outdir, trees, ind, config.smoothing, report, config.dump_dot)

    cov = None
    if config.covar:
        with _Stage(report, "covar"):
            cov = covar_stage(returns, fits, network, config, report)
            write_covar_outputs(outdir, cov, report)

    with _Stage(report, "states"):
        write_state_outputs(outdir, ind, cov, config.windows, report)


def covar_stage(returns, fits, insurers, config: RunConfig, report: RunReport):
    sys_t = config.index_ticker
    sys_pairs = fit_pairs([(sys_t, t) for t in insurers], fits, config.workers, report)
    if config.dump_pairs:
        _write_csv(pair_table(sys_pairs), Path(config.output) / "system_pairs.csv", report)
    return delta_covar(fits[sys_t], dict(zip(insurers, sys_pairs)), returns.dates,
                       q=config.q, system=sys_t)


def write_covar_outputs(outdir: Path, cov, report: RunReport) -> None:
    long = cov.to_long()
    long["date"] = _date_strings(pd.DatetimeIndex(long["date"])) \
        if isinstance(cov.dates, pd.DatetimeIndex) else long["date"]
    _write_csv(long, outdir / "delta_covar.csv", report)
    _write_csv(cov.insurer_means(), outdir / "delta_covar_means.csv", report)
    mean = cov.mean_series().to_frame()
    mean.index = pd.Index(_date_strings(mean.index), name="date")
    _write_csv(mean, outdir / "delta_covar_mean_series.csv", report, index=True)


def write_state_outputs(outdir: Path, ind, cov, windows: StateWindows, report: RunReport) -> None:
    dates = ind.dates
    if not isinstance(dates, pd.DatetimeIndex):
        report.warnings.append("dates are not calendar dates; state summaries skipped")
        return
    labels = classify(dates, windows)
    frame = ind.scalars.copy()
    if cov is not None:
        frame["mean_delta_covar"] = cov.mean_series().to_numpy()
    states = windows.labels
    summary = state_summary(frame, labels.to_numpy(), states=states)
    summary.to_json(outdir / "state_summary.json")
    summary.to_csv(outdir / "state_summary.csv")
    report.outputs.extend(["state_summary.json", "state_summary.csv"])
    lab = pd.DataFrame({"date": _date_strings(dates), "state": labels.to_numpy()})
    _write_csv(lab, outdir / "states.csv", report)


def run_indicators(lambda_csv, output, rce_k: int = 4, smoothing: int = 13,
                   windows: StateWindows = DEFAULT_WINDOWS, workers: int = 1,
                   dump_dot: bool = False) -> RunReport:
    """Graph stage (and state summaries) from a long-format lambda table."""
    from .depnet import TailDepTensor

    report = RunReport()
    report.config = {"lambda": str(lambda_csv), "output": str(output), "rce_k": rce_k,
                     "smoothing": smoothing, "windows": windows.to_mapping()}
    if rce_k < 1 or smoothing < 1 or workers < 1:
        report.status, report.error = "invalid", "rce_k, smoothing and workers must be >= 1"
        return report
    outdir = Path(output)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        with _Stage(report, "ingest"):
            tensor = TailDepTensor.from_long(pd.read_csv(lambda_csv))
        with _Stage(report, "graph"):
            trees, ind = graph_stage(tensor, rce_k, workers)
            write_graph_outputs(outdir, trees, ind, smoothing, report, dump_dot)
        with _Stage(report, "states"):
            write_state_outputs(outdir, ind, None, windows, report)
        report.status = "ok"
    except StageError as exc:
        report.status, report.error = "failed", str(exc)
    report.write(outdir)
    return report


def run_covar(config: RunConfig) -> RunReport:
    """Margins for the index and insurers, index-insurer copulas and deltaCoVaR only."""
    report = RunReport()
    config.covar = True
    try:
        config.validate()
    except ConfigError as exc:
        report.status, report.error = "invalid", str(exc)
        return report
    report.config = config.as_dict()
    outdir = Path(config.output)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        with _Stage(report, "ingest"):
            returns = load_returns(config)
        if config.index_ticker not in returns.tickers:
            raise ConfigError(f"index ticker {config.index_ticker!r} not in panel")
        insurers = [t for t in returns.tickers if t != config.index_ticker]
        with _Stage(report, "margins"):
            fits = fit_margins(returns, insurers + [config.index_ticker], config.workers, report)
        with _Stage(report, "covar"):
            cov = covar_stage(returns, fits, insurers, config, report)
            write_covar_outputs(outdir, cov, report)
        with _Stage(report, "states"):
            labels = classify(cov.dates, config.windows)
            summary = state_summary(cov.delta_covar.assign(mean_delta_covar=cov.mean_series()),
                                    labels.to_numpy(), states=config.windows.labels)
            summary.to_json(outdir / "state_summary.json")
            summary.to_csv(outdir / "state_summary.csv")
        report.status = "ok"
    except ConfigError as exc:
        report.status, report.error = "invalid", str(exc)
    except StageError as exc:
        report.status, report.error = "failed", str(exc)
    report.write(outdir)
    return report
