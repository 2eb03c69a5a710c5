"""Market-state windows and per-state distribution summaries."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

NORMAL = "N"
STAT_NAMES = ("count", "mean", "std", "min", "q25", "median", "q75", "max")


@dataclass(frozen=True)
class StateWindows:
    """Labelled, inclusive, non-overlapping date windows; all other dates are ``N``."""

    windows: tuple[tuple[str, pd.Timestamp, pd.Timestamp], ...]
    normal_label: str = NORMAL

    def __post_init__(self):
        cleaned = []
        for label, start, end in self.windows:
            start, end = pd.Timestamp(start), pd.Timestamp(end)
            if start > end:
                raise ValueError(f"window {label!r} starts after it ends")
            if label == self.normal_label:
                raise ValueError(f"{self.normal_label!r} is reserved for dates outside every window")
            cleaned.append((str(label), start, end))
        cleaned.sort(key=lambda w: w[1])
        for (la, _, ea), (lb, sb, _) in zip(cleaned, cleaned[1:]):
            if sb <= ea:
                raise ValueError(f"windows {la!r} and {lb!r} overlap")
        object.__setattr__(self, "windows", tuple(cleaned))

    @property
    def labels(self) -> list[str]:
        """All state labels, normal first, then windows in order of first appearance."""
        out = [self.normal_label]
        for label, _, _ in self.windows:
            if label not in out:
                out.append(label)
        return out

    @classmethod
    def from_mapping(cls, mapping) -> "StateWindows":
        """Build from ``{label: (start, end)}`` or ``{label: [(start, end), ...]}``."""
        items = []
        for label, spans in mapping.items():
            if len(spans) == 2 and not isinstance(spans[0], (list, tuple)):
                spans = [spans]
            items.extend((label, s, e) for s, e in spans)
        return cls(tuple(items))

    def to_mapping(self) -> dict[str, list[tuple[str, str]]]:
        out: dict[str, list] = {}
        for label, s, e in self.windows:
            out.setdefault(label, []).append((s.date().isoformat(), e.date().isoformat()))
        return out


DEFAULT_WINDOWS = StateWindows((
    ("SMC", "2008-02-08", "2013-03-01"),
    ("I", "2015-08-07", "2016-09-23"),
    ("FIC", "2017-04-21", "2018-05-11"),
))


def classify(dates, windows: StateWindows = DEFAULT_WINDOWS) -> pd.Series:
    """State label of each date (index = dates)."""
    idx = pd.DatetimeIndex(pd.to_datetime(dates))
    labels = np.full(len(idx), windows.normal_label, dtype=object)
    for label, start, end in windows.windows:
        labels[(idx >= start) & (idx <= end)] = label
    return pd.Series(labels, index=idx, name="state")


def _stats(values: np.ndarray) -> dict[str, float]:
    v = values[~np.isnan(values)]
    n = v.size
    if n == 0:
        return {"count": 0, **{k: float("nan") for k in STAT_NAMES[1:]}}
    q25, med, q75 = np.percentile(v, [25, 50, 75])
    return {
        "count": int(n),
        "mean": float(v.mean()),
        "std": float(v.std(ddof=1)) if n > 1 else float("nan"),
        "min": float(v.min()),
        "q25": float(q25),
        "median": float(med),
        "q75": float(q75),
        "max": float(v.max()),
    }


@dataclass
class StateSummary:
    """Statistics nested as state -> column -> statistic."""

    table: dict[str, dict[str, dict[str, float]]]

    def to_frame(self) -> pd.DataFrame:
        """Flat table: one row per (state, column)."""
        rows = [{"state": s, "column": c, **stats}
                for s, cols in self.table.items() for c, stats in cols.items()]
        return pd.DataFrame(rows, columns=["state", "column", *STAT_NAMES])

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.9g")

    def to_json(self, path=None) -> str:
        def clean(x):
            return None if isinstance(x, float) and np.isnan(x) else x

        payload = {s: {c: {k: clean(v) for k, v in stats.items()} for c, stats in cols.items()}
                   for s, cols in self.table.items()}
        text = json.dumps(payload, indent=2, sort_keys=False)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def state_summary(frame: pd.DataFrame, labels: pd.Series, states=None) -> StateSummary:
    """Per-state count, mean, sample sd, min, quartiles and max of every column.

    ``labels`` must align with ``frame`` row for row (same length; the index is
    ignored). ``states`` fixes the output order and lets empty states appear
    with count 0; by default it is the labels seen plus the default states.
    """
    labels = np.asarray(labels, dtype=object)
    if len(labels) != len(frame):
        raise ValueError("labels and frame differ in length")
    if states is None:
        states = list(DEFAULT_WINDOWS.labels)
        states += [s for s in dict.fromkeys(labels.tolist()) if s not in states]
    numeric = frame.select_dtypes(include=[np.number])
    table = {}
    for state in states:
        mask = labels == state
        table[state] = {col: _stats(numeric[col].to_numpy(dtype=float)[mask]) for col in numeric.columns}
    return StateSummary(table)


def weekly_fridays(start="2005-01-07", end="2019-12-20") -> pd.DatetimeIndex:
    """Weekly Friday calendar (the default sampling grid)."""
    return pd.date_range(start, end, freq="W-FRI")
