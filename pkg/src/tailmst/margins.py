"""Univariate ARMA(1,1)-GARCH(1,1) margins with skewed Student-t innovations.

The innovation law is the Fernandez-Steel skewed Student-t, rescaled to zero
mean and unit variance (the ``sstd`` convention common in GARCH software).
``xi > 1`` skews to the right, ``xi = 1`` is the symmetric unit-variance t.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize, special, stats

from . import kernels

logger = logging.getLogger(__name__)

PIT_CLAMP = 1e-10
NU_MIN, NU_MAX = 2.05, 200.0
PERSIST_MAX = 1.0 - 1e-6
MIN_OBS = 60
RIDGE_ALPHA = 1e-6


class ConvergenceError(RuntimeError):
    """No start of the restart schedule reached a converged optimum."""


# ---------------------------------------------------------------------------
# skewed Student-t

def _check_shape(nu, xi):
    if not (np.isfinite(nu) and nu > 2.0):
        raise ValueError(f"nu must be > 2, got {nu}")
    if not (np.isfinite(xi) and xi > 0.0):
        raise ValueError(f"xi must be > 0, got {xi}")


def _first_abs_moment(nu):
    # E|Z| for the unit-variance Student-t
    return math.sqrt(nu - 2.0) * math.exp(special.gammaln((nu - 1.0) / 2.0) - special.gammaln(nu / 2.0)) / math.sqrt(math.pi)


def skewt_moments(nu: float, xi: float) -> tuple[float, float]:
    """Mean and standard deviation of the un-standardized skewed variable."""
    _check_shape(nu, xi)
    m = _first_abs_moment(nu) * (xi - 1.0 / xi)
    s = math.sqrt(xi * xi + 1.0 / (xi * xi) - 1.0 - m * m)
    return m, s


def _unit_t_cdf(z, nu):
    return special.stdtr(nu, np.asarray(z) * math.sqrt(nu / (nu - 2.0)))


def _unit_t_ppf(p, nu):
    return special.stdtrit(nu, p) * math.sqrt((nu - 2.0) / nu)


def skewt_cdf(x, nu: float, xi: float):
    """Distribution function of the standardized skewed t."""
    m, s = skewt_moments(nu, xi)
    raw = m + s * np.asarray(x, dtype=float)
    xi2 = xi * xi
    lower = 2.0 / (1.0 + xi2) * _unit_t_cdf(np.minimum(raw, 0.0) * xi, nu)
    upper = 1.0 - 2.0 * xi2 / (1.0 + xi2) * _unit_t_cdf(-np.maximum(raw, 0.0) / xi, nu)
    out = np.where(raw < 0.0, lower, upper)
    return out[()] if out.ndim == 0 else out


def skewt_quantile(u, nu: float, xi: float):
    """Inverse of :func:`skewt_cdf` for ``u`` in (0, 1)."""
    m, s = skewt_moments(nu, xi)
    u = np.asarray(u, dtype=float)
    if ((u <= 0.0) | (u >= 1.0) | np.isnan(u)).any():
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    xi2 = xi * xi
    p0 = 1.0 / (1.0 + xi2)
    lo = np.minimum(u * (1.0 + xi2) / 2.0, 0.5)
    hi = np.minimum((1.0 - u) * (1.0 + xi2) / (2.0 * xi2), 0.5)
    raw = np.where(u < p0, _unit_t_ppf(lo, nu) / xi, -xi * _unit_t_ppf(hi, nu))
    out = (raw - m) / s
    return out[()] if out.ndim == 0 else out


def skewt_logpdf(x, nu: float, xi: float):
    m, s = skewt_moments(nu, xi)
    raw = m + s * np.asarray(x, dtype=float)
    w = np.where(raw >= 0.0, raw / xi, raw * xi)
    logk = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(math.pi * (nu - 2))
    out = (math.log(s) + math.log(2.0 / (xi + 1.0 / xi)) + logk
           - 0.5 * (nu + 1.0) * np.log1p(w * w / (nu - 2.0)))
    return out[()] if out.ndim == 0 else out


def skewt_pdf(x, nu: float, xi: float):
    return np.exp(skewt_logpdf(x, nu, xi))


def skewt_rvs(size, nu: float, xi: float, rng: np.random.Generator):
    u = rng.uniform(size=size)
    u = np.clip(u, PIT_CLAMP, 1.0 - PIT_CLAMP)
    return skewt_quantile(u, nu, xi)


def _density_constants(nu: float, xi: float) -> np.ndarray:
    """Shape-only pieces of the skew-t log density and their derivatives."""
    m1 = _first_abs_moment(nu)
    m = m1 * (xi - 1.0 / xi)
    s = math.sqrt(xi * xi + 1.0 / (xi * xi) - 1.0 - m * m)
    dm1_dnu = m1 * (0.5 / (nu - 2.0) + 0.5 * special.digamma((nu - 1.0) / 2.0)
                    - 0.5 * special.digamma(nu / 2.0))
    dm_dnu = dm1_dnu * (xi - 1.0 / xi)
    dm_dxi = m1 * (1.0 + 1.0 / (xi * xi))
    ds_dnu = -m * dm_dnu / s
    ds_dxi = (xi - 1.0 / xi ** 3 - m * dm_dxi) / s
    logk = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(math.pi * (nu - 2))
    logc = math.log(2.0 / (xi + 1.0 / xi))
    dlogk_dnu = 0.5 * special.digamma((nu + 1) / 2) - 0.5 * special.digamma(nu / 2) - 0.5 / (nu - 2.0)
    dlogc_dxi = -(1.0 - 1.0 / (xi * xi)) / (xi + 1.0 / xi)
    return np.array([
        nu, xi, m, s,
        math.log(s) + logc + logk,
        ds_dnu / s + dlogk_dnu,
        ds_dxi / s + dlogc_dxi,
        dm_dnu, dm_dxi, ds_dnu, ds_dxi,
    ])


# ---------------------------------------------------------------------------
# model

@dataclass(frozen=True)
class ArmaGarchParams:
    mu0: float
    ar: float
    ma: float
    omega: float
    alpha: float
    beta: float
    nu: float
    xi: float

    def validate(self) -> None:
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not self.alpha + self.beta < 1:
            raise ValueError(f"alpha + beta = {self.alpha + self.beta} is not < 1")
        if not abs(self.ar) < 1:
            raise ValueError(f"|ar| must be < 1, got {self.ar}")
        _check_shape(self.nu, self.xi)

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)

    def as_array(self) -> np.ndarray:
        return np.array([self.mu0, self.ar, self.ma, self.omega, self.alpha, self.beta, self.nu, self.xi])


@dataclass
class MarginalFit:
    params: ArmaGarchParams
    cond_mean: np.ndarray
    cond_var: np.ndarray
    std_resid: np.ndarray
    pit: np.ndarray
    loglik: float
    presample: object = "unconditional"
    presample_return: float = 0.0
    converged: bool = True
    message: str = ""
    n_starts: int = 0
    ks_stat: float = field(default=float("nan"))

    @property
    def nobs(self) -> int:
        return len(self.std_resid)


def _presample_values(returns, params: ArmaGarchParams, presample):
    """(h1_is_unconditional, h1, r0) for the kernels."""
    r0 = float(np.mean(returns))
    if presample == "unconditional":
        return 1, params.unconditional_variance, r0
    if presample == "sample":
        return 0, float(np.var(returns)), r0
    h1 = float(presample)
    if not h1 > 0:
        raise ValueError(f"presample variance must be positive, got {presample}")
    return 0, h1, r0


def garch_filter(params: ArmaGarchParams, returns, presample="unconditional"):
    """Run the ARMA(1,1)-GARCH(1,1) recursion.

    Parameters
    ----------
    params : ArmaGarchParams
    returns : array_like
        Return series r_t.
    presample : {"unconditional", "sample"} or float
        Seed for h_1: the model's unconditional variance, the sample
        variance of ``returns``, or an explicit positive value.  The
        presample innovation is 0 and the presample return is the sample
        mean of ``returns``.

    Returns
    -------
    cond_mean, cond_var, std_resid : ndarray
    """
    params.validate()
    r = np.ascontiguousarray(returns, dtype=float)
    if r.size == 0:
        raise ValueError("empty return series")
    _, h1, r0 = _presample_values(r, params, presample)
    return kernels.garch_filter(r, params.mu0, params.ar, params.ma, params.omega,
                                params.alpha, params.beta, h1, r0)


def arma_garch_loglik(params: ArmaGarchParams, returns, presample="unconditional", grad=False):
    """Exact skew-t log-likelihood; with ``grad`` also the analytic score.

    The score is ordered (mu0, ar, ma, omega, alpha, beta, nu, xi).
    """
    params.validate()
    r = np.ascontiguousarray(returns, dtype=float)
    uncond, h1, r0 = _presample_values(r, params, presample)
    theta = np.array([params.mu0, params.ar, params.ma, params.omega, params.alpha, params.beta])
    ll, g = kernels.garch_loglik_grad(r, theta, _density_constants(params.nu, params.xi),
                                      uncond, h1, r0)
    return (ll, g) if grad else ll


# -- unconstrained parameterisation ------------------------------------------

def _logistic(x):
    return 0.5 * (1.0 + math.tanh(0.5 * x))


def _logit(p):
    return math.log(p / (1.0 - p))


class _Transform:
    """Maps R^8 onto the admissible parameter region and back."""

    def __init__(self, returns):
        self.loc = float(np.mean(returns))
        self.sd = float(np.std(returns))

    def to_params(self, x) -> ArmaGarchParams:
        p = PERSIST_MAX * _logistic(x[4])
        share = _logistic(x[5])
        return ArmaGarchParams(
            mu0=self.loc + self.sd * x[0],
            ar=math.tanh(x[1]),
            ma=math.tanh(x[2]),
            omega=self.sd ** 2 * math.exp(x[3]),
            alpha=p * share,
            beta=p * (1.0 - share),
            nu=NU_MIN + (NU_MAX - NU_MIN) * _logistic(x[6]),
            xi=math.exp(x[7]),
        )

    def from_params(self, p: ArmaGarchParams) -> np.ndarray:
        persist = (p.alpha + p.beta) / PERSIST_MAX
        return np.array([
            (p.mu0 - self.loc) / self.sd,
            math.atanh(p.ar),
            math.atanh(p.ma),
            math.log(p.omega / self.sd ** 2),
            _logit(persist),
            _logit(p.alpha / (p.alpha + p.beta)),
            _logit((p.nu - NU_MIN) / (NU_MAX - NU_MIN)),
            math.log(p.xi),
        ])

    def chain(self, x, p: ArmaGarchParams, g) -> np.ndarray:
        """Gradient in x from the natural-parameter gradient g."""
        l4, l5, l6 = _logistic(x[4]), _logistic(x[5]), _logistic(x[6])
        persist = PERSIST_MAX * l4
        dp = PERSIST_MAX * l4 * (1.0 - l4)
        ds = l5 * (1.0 - l5)
        out = np.empty(8)
        out[0] = g[0] * self.sd
        out[1] = g[1] * (1.0 - p.ar ** 2)
        out[2] = g[2] * (1.0 - p.ma ** 2)
        out[3] = g[3] * p.omega
        out[4] = g[4] * dp * l5 + g[5] * dp * (1.0 - l5)
        out[5] = (g[4] - g[5]) * persist * ds
        out[6] = g[6] * (NU_MAX - NU_MIN) * l6 * (1.0 - l6)
        out[7] = g[7] * p.xi
        return out


def _default_starts(returns) -> list[ArmaGarchParams]:
    var = float(np.var(returns))
    mean = float(np.mean(returns))
    grid = [
        # (ar, ma, alpha, beta, nu, xi)
        (0.0, 0.0, 0.08, 0.90, 8.0, 1.0),
        (0.0, 0.0, 0.05, 0.10, 5.0, 0.9),
        (0.1, -0.1, 0.15, 0.70, 20.0, 1.1),
    ]
    return [
        ArmaGarchParams(mean * (1 - ar), ar, ma, var * (1 - a - b), a, b, nu, xi)
        for ar, ma, a, b, nu, xi in grid
    ]


def fit_arma_garch(returns, starts=None, presample="unconditional", strict=True,
                   maxiter: int = 500) -> MarginalFit:
    """Maximum-likelihood ARMA(1,1)-GARCH(1,1) skew-t fit.

    Runs L-BFGS-B with the analytic score from each start and keeps the best
    converged optimum.  With ``strict=False`` a non-converged best result is
    returned flagged instead of raising :class:`ConvergenceError`.
    """
    r = np.ascontiguousarray(returns, dtype=float)
    if r.ndim != 1 or r.size < MIN_OBS:
        raise ValueError(f"need a 1-d series of at least {MIN_OBS} observations")
    if not np.isfinite(r).all():
        raise ValueError("returns contain non-finite values")
    if np.ptp(r) == 0:
        raise ValueError("constant return series: zero variance")

    tr = _Transform(r)
    n = r.size

    def objective(x):
        try:
            p = tr.to_params(x)
            ll, g = arma_garch_loglik(p, r, presample, grad=True)
        except (ValueError, OverflowError, ZeroDivisionError):
            return np.inf, np.zeros(8)
        if not np.isfinite(ll) or not np.isfinite(g).all():
            return np.inf, np.zeros(8)
        return -ll / n, -tr.chain(x, p, g) / n

    best = None
    schedule = starts if starts is not None else _default_starts(r)
    for start in schedule:
        x0 = tr.from_params(start)
        res = optimize.minimize(objective, x0, jac=True, method="L-BFGS-B",
                                options={"maxiter": maxiter, "gtol": 1e-7, "ftol": 1e-13})
        if not np.isfinite(res.fun):
            continue
        ok = bool(res.success) or float(np.max(np.abs(res.jac))) < 1e-4
        cand = (ok, -res.fun, res)
        if best is None or (cand[0], cand[1]) > (best[0], best[1]):
            best = cand
    if best is None:
        raise ConvergenceError("every start produced a non-finite likelihood")
    ok, _, res = best
    if not ok:
        msg = f"ARMA-GARCH fit did not converge: {res.message}"
        if strict:
            raise ConvergenceError(msg)
        logger.warning(msg)

    params = _collapse_ridge(tr.to_params(res.x), r, presample)
    return _finish(params, r, presample, converged=ok, message=str(res.message),
                   n_starts=len(schedule))


def _collapse_ridge(params: ArmaGarchParams, r, presample) -> ArmaGarchParams:
    """With alpha at zero, beta only rescales a constant variance; fold it into omega."""
    if params.alpha > RIDGE_ALPHA or params.beta == 0.0:
        return params
    flat = ArmaGarchParams(params.mu0, params.ar, params.ma,
                           params.unconditional_variance * (1.0 - params.alpha),
                           params.alpha, 0.0, params.nu, params.xi)
    if arma_garch_loglik(flat, r, presample) >= arma_garch_loglik(params, r, presample) - 1e-9:
        return flat
    return params


def _finish(params, r, presample, converged=True, message="", n_starts=0) -> MarginalFit:
    mean, var, eps = garch_filter(params, r, presample)
    pit = np.clip(skewt_cdf(eps, params.nu, params.xi), PIT_CLAMP, 1.0 - PIT_CLAMP)
    loglik = arma_garch_loglik(params, r, presample)
    fit = MarginalFit(params=params, cond_mean=mean, cond_var=var, std_resid=eps, pit=pit,
                      loglik=float(loglik), presample=presample,
                      presample_return=float(np.mean(r)), converged=converged,
                      message=message, n_starts=n_starts)
    fit.ks_stat = pit_uniformity_check(fit)
    return fit


def filter_with_params(params: ArmaGarchParams, returns, presample="unconditional") -> MarginalFit:
    """Build a MarginalFit from known parameters (no estimation)."""
    return _finish(params, np.ascontiguousarray(returns, dtype=float), presample)


def pit_uniformity_check(fit) -> float:
    """Kolmogorov-Smirnov distance between the PIT values and U(0,1).

    Accepts a :class:`MarginalFit` or a bare array of PIT values.
    """
    pit = fit.pit if isinstance(fit, MarginalFit) else np.asarray(fit, dtype=float)
    return float(stats.kstest(pit, "uniform").statistic)


def marginal_table(fits: dict[str, MarginalFit]) -> pd.DataFrame:
    """One row per asset: parameters and diagnostics."""
    rows = []
    for ticker, fit in fits.items():
        row = {"ticker": ticker, **asdict(fit.params)}
        row.update(loglik=fit.loglik, persistence=fit.params.persistence,
                   ks_stat=fit.ks_stat, nobs=fit.nobs, converged=fit.converged)
        rows.append(row)
    return pd.DataFrame(rows)
