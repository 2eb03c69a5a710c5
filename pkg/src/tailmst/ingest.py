"""Price and return panels: loading, validation, alignment, simple transforms."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

MIN_ROWS = 60
MIN_TICKERS = 2


class PanelError(ValueError):
    """Raised when an input panel cannot be used."""


def _check_common(dates: pd.DatetimeIndex, tickers: list[str], values: np.ndarray) -> None:
    if values.ndim != 2 or values.shape != (len(dates), len(tickers)):
        raise PanelError(
            f"values shape {values.shape} does not match {len(dates)} dates x {len(tickers)} tickers"
        )
    if len(set(tickers)) != len(tickers):
        raise PanelError("duplicated tickers")
    if len(dates) > 1 and not (np.diff(dates.asi8) > 0).all():
        raise PanelError("dates must be strictly increasing")


@dataclass(frozen=True)
class PricePanel:
    """Strictly positive prices, rows = dates, columns = tickers."""

    dates: pd.DatetimeIndex
    tickers: list[str]
    values: np.ndarray
    dropped_rows: int = 0

    def __post_init__(self):
        _check_common(self.dates, self.tickers, self.values)
        if not np.isfinite(self.values).all() or (self.values <= 0).any():
            raise PanelError("prices must be finite and strictly positive")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.dates, columns=self.tickers)


@dataclass(frozen=True)
class ReturnPanel:
    """Log returns, one row fewer than the price panel they came from."""

    dates: pd.DatetimeIndex
    tickers: list[str]
    values: np.ndarray
    dropped_rows: int = field(default=0)

    def __post_init__(self):
        _check_common(self.dates, self.tickers, self.values)
        if not np.isfinite(self.values).all():
            raise PanelError("returns must be finite")

    def __getitem__(self, ticker: str) -> np.ndarray:
        return self.values[:, self.tickers.index(ticker)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.dates, columns=self.tickers)


def _read_csv(path, date_column: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise PanelError(f"cannot read {path}: {exc}") from exc
    if date_column not in frame.columns:
        raise PanelError(f"{path}: no date column {date_column!r}")
    try:
        frame[date_column] = pd.to_datetime(frame[date_column], format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise PanelError(f"{path}: unparseable dates: {exc}") from exc
    frame = frame.set_index(date_column).sort_index()
    frame.index.name = "date"
    if frame.index.has_duplicates:
        raise PanelError(f"{path}: duplicated dates")
    tickers = [str(c) for c in frame.columns]
    if len(tickers) < MIN_TICKERS:
        raise PanelError(f"{path}: need at least {MIN_TICKERS} tickers, found {len(tickers)}")
    frame.columns = tickers
    return frame.apply(pd.to_numeric, errors="coerce")


def load_price_panel(path, date_column: str = "date", min_rows: int = MIN_ROWS) -> PricePanel:
    """Read a CSV of prices; rows with a missing or non-positive cell are dropped.

    The number of dropped rows is kept on the returned panel and logged.
    """
    frame = _read_csv(path, date_column)
    good = frame.notna().all(axis=1) & (frame > 0).all(axis=1)
    dropped = int((~good).sum())
    frame = frame[good]
    if dropped:
        logger.info("%s: dropped %d row(s) with missing or non-positive prices", path, dropped)
    if len(frame) < min_rows:
        raise PanelError(f"{path}: {len(frame)} usable rows, need at least {min_rows}")
    return PricePanel(
        dates=pd.DatetimeIndex(frame.index),
        tickers=list(frame.columns),
        values=frame.to_numpy(dtype=float),
        dropped_rows=dropped,
    )


def load_return_panel(path, date_column: str = "date", min_rows: int = MIN_ROWS) -> ReturnPanel:
    """Read pre-computed returns in the same layout as prices; non-finite rows dropped."""
    frame = _read_csv(path, date_column)
    good = np.isfinite(frame.to_numpy(dtype=float)).all(axis=1)
    dropped = int((~good).sum())
    frame = frame[good]
    if len(frame) < min_rows:
        raise PanelError(f"{path}: {len(frame)} usable rows, need at least {min_rows}")
    return ReturnPanel(
        dates=pd.DatetimeIndex(frame.index),
        tickers=list(frame.columns),
        values=frame.to_numpy(dtype=float),
        dropped_rows=dropped,
    )


def log_returns(panel: PricePanel) -> ReturnPanel:
    """ln p[t+1] - ln p[t], dated at the later observation."""
    logp = np.log(panel.values)
    return ReturnPanel(
        dates=panel.dates[1:],
        tickers=list(panel.tickers),
        values=np.diff(logp, axis=0),
        dropped_rows=panel.dropped_rows,
    )


def prices_from_returns(returns: ReturnPanel, start_date, start_prices=100.0) -> PricePanel:
    """Cumulative exponentiation of log returns, anchored at ``start_prices``."""
    start = np.broadcast_to(np.asarray(start_prices, dtype=float), (len(returns.tickers),))
    logp = np.vstack([np.log(start), np.log(start) + np.cumsum(returns.values, axis=0)])
    dates = pd.DatetimeIndex([pd.Timestamp(start_date)]).append(returns.dates)
    return PricePanel(dates=dates, tickers=list(returns.tickers), values=np.exp(logp))


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean over the last ``window`` points; the first window-1 entries are NaN."""
    x = np.asarray(series, dtype=float)
    if not isinstance(window, (int, np.integer)) or window < 1 or window > len(x):
        raise ValueError(f"window must be in [1, {len(x)}], got {window}")
    out = np.full(len(x), np.nan)
    out[window - 1:] = np.lib.stride_tricks.sliding_window_view(x, window).mean(axis=1)
    return out
