"""Pairwise DCC(1,1) Student-t copulas and lower tail dependence.

Second IFM step: PIT series from the margins are mapped to t scores, a
bivariate DCC recursion drives the copula correlation, and the copula shape
stays constant over time for each pair.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize, special

from . import kernels
from .margins import ConvergenceError

logger = logging.getLogger(__name__)

NU_LOW, NU_HIGH = 2.1, 50.0
PERSIST_MAX = 0.999
MIN_OBS = 60


class DegenerateInputError(ValueError):
    """PIT inputs carry no usable dependence information (constant or identical)."""


@dataclass(frozen=True)
class DccCopulaParams:
    c: float
    d: float
    nu_cop: float
    qbar: float  # off-diagonal of the unit-diagonal target matrix

    def validate(self) -> None:
        if self.c < 0 or self.d < 0:
            raise ValueError("c and d must be non-negative")
        if not self.c + self.d < 1:
            raise ValueError(f"c + d = {self.c + self.d} is not < 1")
        if not self.nu_cop > 2:
            raise ValueError(f"copula shape must be > 2, got {self.nu_cop}")
        if not -1 < self.qbar < 1:
            raise ValueError(f"qbar off-diagonal must lie in (-1, 1), got {self.qbar}")

    @property
    def qbar_matrix(self) -> np.ndarray:
        return np.array([[1.0, self.qbar], [self.qbar, 1.0]])

    @property
    def effectively_gaussian(self) -> bool:
        return self.nu_cop >= NU_HIGH - 1e-6


@dataclass
class PairDependence:
    pair: tuple[str, str]
    params: DccCopulaParams
    rho: np.ndarray
    lam: np.ndarray
    loglik: float
    converged: bool = True
    fallback: bool = False
    warnings: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# scores and filters

def t_scores(u, nu: float):
    """t quantiles of the PIT values and their unit-variance rescaling."""
    x = special.stdtrit(nu, np.asarray(u, dtype=float))
    return x, x * math.sqrt((nu - 2.0) / nu)


def dcc_filter(params: DccCopulaParams, z1, z2=None) -> np.ndarray:
    """Conditional correlation path rho_t of a bivariate DCC(1,1).

    ``z1`` may be a (T, 2) array, in which case ``z2`` is omitted.
    """
    if params.c + params.d >= 1:
        raise ValueError(f"c + d = {params.c + params.d} is not < 1")
    params.validate()
    if z2 is None:
        z = np.asarray(z1, dtype=float)
        z1, z2 = z[:, 0], z[:, 1]
    return kernels.dcc_rho(np.ascontiguousarray(z1, dtype=float),
                           np.ascontiguousarray(z2, dtype=float),
                           params.qbar, params.c, params.d)


def _tcop_const(nu: float) -> float:
    return (special.gammaln((nu + 2) / 2) + special.gammaln(nu / 2)
            - 2.0 * special.gammaln((nu + 1) / 2))


def _check_pits(u_i, u_j):
    u_i = np.ascontiguousarray(u_i, dtype=float)
    u_j = np.ascontiguousarray(u_j, dtype=float)
    if u_i.shape != u_j.shape or u_i.ndim != 1:
        raise ValueError("PIT series must be 1-d and of equal length")
    if u_i.size < MIN_OBS:
        raise ValueError(f"need at least {MIN_OBS} observations, got {u_i.size}")
    for u in (u_i, u_j):
        if not ((u > 0) & (u < 1)).all():
            raise ValueError("PIT values must lie strictly inside (0, 1)")
        if np.ptp(u) == 0:
            raise DegenerateInputError("constant PIT series")
    return u_i, u_j


def _targets(u_i, u_j, nu):
    x1, z1 = t_scores(u_i, nu)
    x2, z2 = t_scores(u_j, nu)
    qbar = float(np.corrcoef(z1, z2)[0, 1])
    return x1, x2, z1, z2, qbar


def tcopula_loglik(params: DccCopulaParams, u_i, u_j) -> float:
    """Copula log-likelihood of the PIT pair under DCC(1,1) correlations."""
    params.validate()
    x1, z1 = t_scores(u_i, params.nu_cop)
    x2, z2 = t_scores(u_j, params.nu_cop)
    return kernels.tcopula_dcc_loglik(x1, x2, z1, z2, params.qbar, params.c, params.d,
                                      params.nu_cop, _tcop_const(params.nu_cop))


# ---------------------------------------------------------------------------
# estimation

_DEFAULT_STARTS = (
    # (c + d, c / (c + d)) for the inner fit at fixed shape
    (0.95, 0.05 / 0.95),
    (0.50, 0.20),
    (0.98, 0.02),
)
NU_GRID = (2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 8.0, 10.0, 13.0, 17.0, 23.0, 30.0, 40.0, 50.0)


class _Profile:
    """Copula log-likelihood profiled over (c, d) at a fixed shape."""

    def __init__(self, u_i, u_j, starts, maxiter):
        self.u_i, self.u_j = u_i, u_j
        self.n = u_i.size
        self.starts = tuple(starts)
        self.maxiter = maxiter
        self._targets: dict[float, tuple] = {}
        self.evaluated: dict[float, tuple] = {}

    def targets(self, nu: float):
        if nu not in self._targets:
            if len(self._targets) > 8:
                self._targets.pop(next(iter(self._targets)))
            self._targets[nu] = _targets(self.u_i, self.u_j, nu)
        return self._targets[nu]

    def inner(self, nu: float, starts) -> tuple:
        """Best (loglik, c, d, converged) over the given (persistence, share) starts."""
        x1, x2, z1, z2, qbar = self.targets(nu)
        if abs(qbar) >= 1.0 - 1e-12:
            return -np.inf, 0.0, 0.0, False
        lconst = _tcop_const(nu)
        n = self.n

        def objective(v):
            p, share = v
            c, d = p * share, p * (1.0 - share)
            ll, gc, gd = kernels.tcopula_dcc_loglik_grad(x1, x2, z1, z2, qbar, c, d, nu, lconst)
            if not np.isfinite(ll):
                return np.inf, np.zeros(2)
            grad = np.array([share * gc + (1.0 - share) * gd, p * (gc - gd)])
            return -ll / n, -grad / n

        best = (-np.inf, 0.0, 0.0, False)
        for start in starts:
            res = optimize.minimize(objective, np.asarray(start, dtype=float), jac=True,
                                    method="L-BFGS-B",
                                    bounds=[(0.0, PERSIST_MAX), (0.0, 1.0)],
                                    options={"maxiter": self.maxiter, "ftol": 1e-14, "gtol": 1e-8})
            if not np.isfinite(res.fun):
                continue
            ok = bool(res.success) or res.status == 2
            c, d = _unpack(res.x)
            cand = (-res.fun * n, c, d, ok)
            if (cand[3], cand[0]) > (best[3], best[0]):
                best = cand
        return best

    def value(self, nu: float, warm=None) -> float:
        nu = float(nu)
        if nu not in self.evaluated:
            starts = self.starts if warm is None else (warm,)
            self.evaluated[nu] = self.inner(nu, starts)
        return self.evaluated[nu][0]

    def warm_start(self, nu: float):
        _, c, d, _ = self.evaluated[nu]
        p = c + d
        return (min(p, PERSIST_MAX), c / p if p > 0 else 0.5)


def _unpack(v):
    p, share = v
    return p * share, p * (1.0 - share)


def fit_pair_copula(u_i, u_j, pair=("i", "j"), starts=_DEFAULT_STARTS,
                    maxiter: int = 300) -> PairDependence:
    """Fit a DCC(1,1) Student-t copula to two PIT series.

    The likelihood is maximised over (c, d, nu): (c, d) by L-BFGS-B with the
    analytic score at fixed shape, the shape by a grid search refined with
    bounded Brent steps on the profile.  Q-bar is targeted to the sample
    correlation of the unit-variance scores at each shape.  If the inner fit
    fails to converge the static copula (c = d = 0) is used and the result
    is flagged as a fallback.
    """
    u_i, u_j = _check_pits(u_i, u_j)
    prof = _Profile(u_i, u_j, starts, maxiter)
    _, _, _, _, qbar = prof.targets(8.0)
    if abs(qbar) > 1.0 - 1e-9:
        raise DegenerateInputError(f"pair {pair}: scores perfectly correlated (rho = {qbar:.12f})")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        values = [prof.value(nu) for nu in NU_GRID]
        i = int(np.argmax(values))
        lo = NU_GRID[i - 1] if i > 0 else NU_LOW
        hi = NU_GRID[i + 1] if i + 1 < len(NU_GRID) else NU_HIGH
        warm = prof.warm_start(NU_GRID[i])
        res = optimize.minimize_scalar(lambda nu: -prof.value(nu, warm), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-5})
        candidates = [(values[i], NU_GRID[i])]
        if res.success and np.isfinite(res.fun):
            candidates.append((-res.fun, float(res.x)))
        _, nu_hat = max(candidates)
        # final polish at the chosen shape with the full restart schedule
        ll, c, d, ok = prof.inner(nu_hat, tuple(starts) + (prof.warm_start(nu_hat),))

    notes = []
    if not ok or not np.isfinite(ll):
        msg = f"pair {pair}: DCC copula did not converge; static t copula used"
        logger.warning(msg)
        notes.append(msg)
        return _fit_static(u_i, u_j, pair, notes, prof.targets)
    return _finish(u_i, u_j, pair, c, d, nu_hat, prof.targets, notes=notes)


def _fit_static(u_i, u_j, pair, notes, targets) -> PairDependence:
    n = u_i.size

    def objective(nu):
        x1, x2, z1, z2, qbar = targets(float(nu))
        return -kernels.tcopula_dcc_loglik(x1, x2, z1, z2, qbar, 0.0, 0.0, nu, _tcop_const(nu)) / n

    res = optimize.minimize_scalar(objective, bounds=(NU_LOW, NU_HIGH), method="bounded",
                                   options={"xatol": 1e-6})
    if not res.success:
        raise ConvergenceError(f"pair {pair}: static t copula fit failed: {res.message}")
    return _finish(u_i, u_j, pair, 0.0, 0.0, float(res.x), targets, converged=False,
                   fallback=True, notes=notes)


def _finish(u_i, u_j, pair, c, d, nu, targets, converged=True, fallback=False, notes=()):
    x1, x2, z1, z2, qbar = targets(nu)
    params = DccCopulaParams(c=float(c), d=float(d), nu_cop=nu, qbar=qbar)
    rho = dcc_filter(params, z1, z2)
    notes = list(notes)
    if params.effectively_gaussian:
        notes.append(f"pair {pair}: copula shape at upper bound {NU_HIGH}, effectively Gaussian")
    return PairDependence(
        pair=tuple(pair),
        params=params,
        rho=rho,
        lam=t_copula_lower_tail_dep(rho, nu),
        loglik=float(tcopula_loglik(params, u_i, u_j)),
        converged=converged,
        fallback=fallback,
        warnings=notes,
    )


# ---------------------------------------------------------------------------
# copula functions

def t_copula_lower_tail_dep(rho, nu):
    """Lower tail dependence of the Student-t copula, 2 T_{nu+1}(-sqrt((nu+1)(1-rho)/(1+rho)))."""
    rho = np.asarray(rho, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if (np.abs(rho) > 1).any() or np.isnan(rho).any():
        raise ValueError("correlation must lie in [-1, 1]")
    if (nu <= 0).any() or np.isnan(nu).any():
        raise ValueError("shape must be positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = -np.sqrt((nu + 1.0) * (1.0 - rho) / (1.0 + rho))
    arg = np.where(rho >= 1.0, 0.0, np.where(rho <= -1.0, -np.inf, arg))
    out = 2.0 * special.stdtr(nu + 1.0, arg)
    out = np.clip(out, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


# Composite Gauss-Legendre rule in tau = log(level / s), s the conditioning
# probability; panels refine towards tau = 0 where the integrand moves most.
_BREAKS = np.array([0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _tau_rule():
    lo, hi = _BREAKS[:-1, None], _BREAKS[1:, None]
    tau = ((hi - lo) / 2 * _GL_X + (hi + lo) / 2).ravel()
    w = ((hi - lo) / 2 * _GL_W).ravel() * np.exp(-tau)
    return tau, w


_TAU, _TAU_W = _tau_rule()


def conditional_nodes(level, nu: float) -> np.ndarray:
    """t quantiles a(s) at the quadrature points s = level * exp(-tau)."""
    level = np.asarray(level, dtype=float)
    s = np.exp(np.log(level)[..., None] - _TAU)
    return special.stdtrit(nu, s)


def below_probability(x_other, nodes, rho, nu: float):
    """P(X_other <= x_other | X_cond <= level) for a bivariate t with corr ``rho``.

    ``nodes`` come from :func:`conditional_nodes` for the conditioning
    level; ``x_other`` and ``rho`` broadcast against the leading axes.
    """
    x = np.asarray(x_other, dtype=float)[..., None]
    r = np.asarray(rho, dtype=float)[..., None]
    one_m = 1.0 - r * r
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = (x - r * nodes) / np.sqrt((nu + nodes * nodes) * one_m / (nu + 1.0))
        limit = np.broadcast_to(r * np.sqrt((nu + 1.0) / one_m), arg.shape)
    arg = np.where(np.isinf(nodes), limit, arg)
    arg = np.where(np.isposinf(x), np.inf, np.where(np.isneginf(x), -np.inf, arg))
    return np.sum(_TAU_W * special.stdtr(nu + 1.0, arg), axis=-1)


def t_copula_cdf(u, v, rho: float, nu: float):
    """Bivariate Student-t copula C(u, v).

    Evaluated as the integral of the conditional t distribution over the
    smaller argument, with a fixed composite Gauss-Legendre rule on a
    log-probability scale; deterministic, accurate well below 1e-9.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if ((u < 0) | (u > 1) | (v < 0) | (v > 1)).any():
        raise ValueError("copula arguments must lie in [0, 1]")
    if not -1.0 <= rho <= 1.0 or not nu > 0:
        raise ValueError("need |rho| <= 1 and nu > 0")
    u, v = np.broadcast_arrays(u, v)
    if rho >= 1.0:
        out = np.minimum(u, v)
    elif rho <= -1.0:
        out = np.maximum(u + v - 1.0, 0.0)
    else:
        w = np.minimum(u, v)
        other = np.maximum(u, v)
        out = np.zeros(w.shape)
        inner = (w > 0) & (other < 1)
        out = np.where(other >= 1, w, out)
        if inner.any():
            nodes = conditional_nodes(w[inner], nu)
            y = special.stdtrit(nu, other[inner])
            out[inner] = w[inner] * below_probability(y, nodes, rho, nu)
        out = np.clip(out, np.maximum(u + v - 1.0, 0.0), np.minimum(u, v))
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# assembly

@dataclass
class TailDepTensor:
    dates: pd.DatetimeIndex
    tickers: list[str]
    values: np.ndarray  # (T, k, k)

    def at(self, t: int) -> pd.DataFrame:
        return pd.DataFrame(self.values[t], index=self.tickers, columns=self.tickers)

    def to_long(self) -> pd.DataFrame:
        """Long format: date, ticker_i, ticker_j, lambda (upper triangle)."""
        k = len(self.tickers)
        iu, ju = np.triu_indices(k, 1)
        frames = pd.DataFrame({
            "date": np.repeat(self.dates, len(iu)),
            "ticker_i": np.tile(np.asarray(self.tickers, dtype=object)[iu], len(self.dates)),
            "ticker_j": np.tile(np.asarray(self.tickers, dtype=object)[ju], len(self.dates)),
            "lambda": self.values[:, iu, ju].ravel(),
        })
        return frames

    @classmethod
    def from_long(cls, frame: pd.DataFrame) -> "TailDepTensor":
        frame = frame.copy()
        frame["date"] = pd.to_datetime(frame["date"])
        tickers = sorted(set(frame["ticker_i"].astype(str)) | set(frame["ticker_j"].astype(str)))
        dates = pd.DatetimeIndex(sorted(frame["date"].unique()))
        k = len(tickers)
        pos = {t: n for n, t in enumerate(tickers)}
        tpos = {d: n for n, d in enumerate(dates)}
        vals = np.full((len(dates), k, k), np.nan)
        ti = frame["date"].map(tpos).to_numpy()
        ii = frame["ticker_i"].astype(str).map(pos).to_numpy()
        jj = frame["ticker_j"].astype(str).map(pos).to_numpy()
        lam = frame["lambda"].to_numpy(dtype=float)
        vals[ti, ii, jj] = lam
        vals[ti, jj, ii] = lam
        idx = np.arange(k)
        vals[:, idx, idx] = 1.0
        if np.isnan(vals).any():
            raise ValueError("lambda table is incomplete: some (date, pair) cells are missing")
        return cls(dates=dates, tickers=tickers, values=vals)


def tail_dep_tensor(fits, tickers, dates=None) -> TailDepTensor:
    """Stack pairwise lambda series into per-date symmetric k x k matrices.

    ``fits`` is an iterable of :class:`PairDependence` or a mapping keyed by
    ticker pairs; every unordered pair of ``tickers`` must be present.
    """
    tickers = list(tickers)
    k = len(tickers)
    pos = {t: n for n, t in enumerate(tickers)}
    items = fits.values() if isinstance(fits, dict) else fits
    by_pair = {}
    for f in items:
        a, b = f.pair
        if a not in pos or b not in pos or a == b:
            raise ValueError(f"unexpected pair {f.pair}")
        by_pair[frozenset((a, b))] = f
    needed = [frozenset(p) for p in itertools.combinations(tickers, 2)]
    missing = [tuple(sorted(p)) for p in needed if p not in by_pair]
    if missing:
        raise ValueError(f"{len(missing)} of {len(needed)} pairs missing, e.g. {missing[0]}")
    lengths = {len(f.lam) for f in by_pair.values()}
    if len(lengths) != 1:
        raise ValueError("pair series have different lengths")
    n = lengths.pop()
    vals = np.empty((n, k, k))
    idx = np.arange(k)
    vals[:, idx, idx] = 1.0
    for a, b in itertools.combinations(tickers, 2):
        lam = by_pair[frozenset((a, b))].lam
        vals[:, pos[a], pos[b]] = lam
        vals[:, pos[b], pos[a]] = lam
    if dates is None:
        dates = pd.RangeIndex(n)
    return TailDepTensor(dates=pd.DatetimeIndex(dates) if not isinstance(dates, pd.RangeIndex) else dates,
                         tickers=tickers, values=vals)


def pair_table(fits) -> pd.DataFrame:
    """One row per pair: DCC copula parameters and diagnostics."""
    rows = []
    for f in fits:
        rows.append({
            "ticker_i": f.pair[0], "ticker_j": f.pair[1],
            "c": f.params.c, "d": f.params.d, "nu_cop": f.params.nu_cop, "qbar": f.params.qbar,
            "loglik": f.loglik, "mean_rho": float(np.mean(f.rho)),
            "mean_lambda": float(np.mean(f.lam)), "converged": f.converged,
            "fallback": f.fallback, "effectively_gaussian": f.params.effectively_gaussian,
        })
    return pd.DataFrame(rows)
