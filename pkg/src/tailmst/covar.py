"""Copula CoVaR and deltaCoVaR of a sector index conditional on each insurer.

Conditioning is on the insurer's return being at or below a quantile of its
own conditional law, so the system quantile u* solves

    C(u*, cond; rho_t, nu) / cond = q

with ``cond = q`` for distress and ``cond = 0.5`` for the median state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special

from .depnet import PairDependence, below_probability, conditional_nodes
from .margins import MarginalFit, skewt_quantile

ROOT_TOL = 1e-8


def _check_levels(q, cond):
    if not 0.0 < q < 0.5:
        raise ValueError(f"tail level q must lie in (0, 0.5), got {q}")
    if not 0.0 < cond <= 1.0:
        raise ValueError(f"conditioning level must lie in (0, 1], got {cond}")


def covar_roots(q: float, cond: float, rho, nu: float, tol: float = ROOT_TOL) -> np.ndarray:
    """Vectorised :func:`covar_root` over an array of correlations."""
    _check_levels(q, cond)
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if (np.abs(rho) > 1).any() or np.isnan(rho).any():
        raise ValueError("correlations must lie in [-1, 1]")
    out = np.empty(rho.shape)
    if cond >= 1.0:
        out[:] = q
        return out
    upper = rho >= 1.0
    lower = rho <= -1.0
    out[upper] = q * cond                     # C = min(u, v)
    out[lower] = q * cond + 1.0 - cond        # C = max(u + v - 1, 0)
    inner = ~(upper | lower)
    if inner.any():
        nodes = conditional_nodes(cond, nu)
        r = rho[inner]
        lo = np.zeros(r.shape)
        hi = np.ones(r.shape)
        while (hi - lo).max() > tol:
            mid = 0.5 * (lo + hi)
            val = below_probability(special.stdtrit(nu, mid), nodes, r, nu)
            below = val < q
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        root = 0.5 * (lo + hi)
        # the bracket must have closed on a sign change
        f_lo = below_probability(special.stdtrit(nu, np.maximum(lo, 1e-300)), nodes, r, nu) - q
        f_hi = below_probability(special.stdtrit(nu, np.minimum(hi, 1.0)), nodes, r, nu) - q
        if ((f_lo > 1e-9) | (f_hi < -1e-9)).any():
            raise RuntimeError("CoVaR root not bracketed; copula evaluation is inconsistent")
        out[inner] = root
    return out


def covar_root(q: float, cond: float, rho: float, nu: float, tol: float = ROOT_TOL) -> float:
    """System PIT level u* with C(u*, cond) / cond = q, by bisection on (0, 1)."""
    return float(covar_roots(q, cond, rho, nu, tol)[0])


def covar_series(system_fit: MarginalFit, pair: PairDependence, q: float = 0.05,
                 system: str | None = None):
    """Distress and median CoVaR paths of the system given one insurer.

    Returns ``(covar_distress, covar_median)`` in return units.
    """
    if system is not None and pair.pair[0] != system:
        raise ValueError(f"first margin of pair {pair.pair} is not the system index {system!r}")
    if len(pair.rho) != len(system_fit.cond_mean):
        raise ValueError("pair and system fit cover different periods")
    nu = pair.params.nu_cop
    sp = system_fit.params
    scale = np.sqrt(system_fit.cond_var)
    out = []
    for cond in (q, 0.5):
        u_star = covar_roots(q, cond, pair.rho, nu)
        u_star = np.clip(u_star, 1e-15, 1.0 - 1e-15)
        out.append(system_fit.cond_mean + scale * skewt_quantile(u_star, sp.nu, sp.xi))
    return out[0], out[1]


@dataclass
class CoVarFrame:
    """Per-insurer CoVaR paths (columns = insurers, rows = dates)."""

    q: float
    covar: pd.DataFrame
    covar_median: pd.DataFrame

    @property
    def delta_covar(self) -> pd.DataFrame:
        return self.covar - self.covar_median

    @property
    def dates(self) -> pd.Index:
        return self.covar.index

    @property
    def tickers(self) -> list[str]:
        return list(self.covar.columns)

    def mean_series(self) -> pd.Series:
        """Cross-insurer mean deltaCoVaR per date."""
        return self.delta_covar.mean(axis=1).rename("mean_delta_covar")

    def insurer_means(self) -> pd.DataFrame:
        """Time-averaged CoVaR and deltaCoVaR per insurer."""
        return pd.DataFrame({
            "mean_covar": self.covar.mean(axis=0),
            "mean_delta_covar": self.delta_covar.mean(axis=0),
        }).rename_axis("ticker").reset_index()

    def to_long(self) -> pd.DataFrame:
        """Long format: date, ticker, covar, covar_median, delta_covar."""
        long = self.covar.stack().rename("covar").to_frame()
        long["covar_median"] = self.covar_median.stack()
        long["delta_covar"] = self.delta_covar.stack()
        long.index.names = ["date", "ticker"]
        return long.reset_index()


def delta_covar(system_fit: MarginalFit, pairs, dates=None, q: float = 0.05,
                system: str | None = None) -> CoVarFrame:
    """deltaCoVaR for every insurer.

    ``pairs`` maps insurer ticker to the :class:`PairDependence` between the
    system index and that insurer.
    """
    _check_levels(q, q)
    if not pairs:
        raise ValueError("no insurer pairs given")
    distress, median = {}, {}
    for ticker, pair in pairs.items():
        distress[ticker], median[ticker] = covar_series(system_fit, pair, q, system)
    index = pd.Index(dates if dates is not None else np.arange(len(system_fit.cond_mean)), name="date")
    return CoVarFrame(q=q, covar=pd.DataFrame(distress, index=index),
                      covar_median=pd.DataFrame(median, index=index))
