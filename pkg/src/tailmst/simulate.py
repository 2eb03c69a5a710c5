"""Seeded synthetic panels: DCC Student-t copula regimes over ARMA-GARCH skew-t margins.

A scenario is a plain mapping (JSON-friendly)::

    {
      "n_assets": 10, "n_periods": 300, "start": "2005-01-07", "freq": "W-FRI",
      "margin": {"mu0": 0.0005, "ar": 0.05, "ma": -0.02, "omega": 2e-5,
                 "alpha": 0.08, "beta": 0.88, "nu": 7.0, "xi": 0.95},
      "dcc": {"c": 0.05, "d": 0.85},
      "base": {"structure": "chain", "rho": 0.5, "nu": 5.0},
      "blocks": [{"start": 100, "end": 199, "structure": "double_star",
                  "rho": 0.97, "link": 0.9, "nu": 5.0, "label": "crisis"}],
      "index": true
    }

Block bounds are row positions of the return panel, inclusive.  With
``"index": true`` an equally weighted sector index is appended as ``INDEX``.
"""
from __future__ import annotations

import copy
import math

import numpy as np
import pandas as pd
from scipy import special

from .ingest import PricePanel, ReturnPanel, prices_from_returns
from .margins import PIT_CLAMP, ArmaGarchParams, skewt_quantile

DEFAULT_MARGIN = {"mu0": 0.0005, "ar": 0.05, "ma": -0.02, "omega": 2e-5,
                  "alpha": 0.08, "beta": 0.88, "nu": 7.0, "xi": 0.95}

DEFAULT_SCENARIO = {
    "n_assets": 10,
    "n_periods": 300,
    "start": "2005-01-07",
    "freq": "W-FRI",
    "margin": DEFAULT_MARGIN,
    "dcc": {"c": 0.05, "d": 0.85},
    "base": {"structure": "chain", "rho": 0.5, "nu": 5.0},
    "blocks": [{"start": 100, "end": 199, "structure": "double_star",
                "rho": 0.97, "link": 0.9, "nu": 5.0, "label": "crisis"}],
    "index": False,
}


def correlation_matrix(structure: str, k: int, rho: float = 0.5, link: float = 0.8) -> np.ndarray:
    """Target correlation matrices used by the scenarios.

    ``independent``  identity
    ``equi``         all off-diagonals ``rho``
    ``chain``        rho**|i-j|, whose tail-dependence MST is the path 0-1-...-k-1
    ``star``         one factor: corr(hub 0, leaf) = rho, corr(leaf, leaf) = rho**2
    ``double_star``  hubs 0 and k//2, each with its own leaves; leaf-hub ``rho``,
                     hub-hub ``link``; MST is two stars joined at the hubs
    """
    idx = np.arange(k)
    if structure == "independent":
        return np.eye(k)
    if structure == "equi":
        m = np.full((k, k), rho)
    elif structure == "chain":
        m = rho ** np.abs(idx[:, None] - idx[None, :])
    elif structure == "star":
        m = _one_factor(k, rho)
    elif structure == "double_star":
        m = _double_star(k, rho, link)
    else:
        raise ValueError(f"unknown correlation structure {structure!r}")
    np.fill_diagonal(m, 1.0)
    if np.linalg.eigvalsh(m).min() <= 0:
        raise ValueError(f"{structure} matrix with rho={rho}, link={link} is not positive definite")
    return m


def _one_factor(k, rho):
    # leaves x_i = rho * hub + noise, so corr(leaf, hub) = rho, corr(leaf, leaf) = rho**2
    m = np.full((k, k), rho * rho)
    m[0, :] = m[:, 0] = rho
    return m


def _double_star(k, rho, link):
    # hub_A, hub_B share a factor with corr(hub_A, hub_B) = link; leaves load rho on their hub
    half = k // 2
    group = np.where(np.arange(k) < half, 0, 1)
    hubs = {0: 0, 1: half}
    m = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            li = 1.0 if i == hubs[group[i]] else rho
            lj = 1.0 if j == hubs[group[j]] else rho
            m[i, j] = li * lj * (1.0 if group[i] == group[j] else link)
    return m


def simulate_arma_garch(params: ArmaGarchParams, n: int, rng: np.random.Generator = None,
                        innovations=None, burn: int = 500) -> np.ndarray:
    """Simulate returns; pass ``innovations`` (length n + burn) to couple several series."""
    params.validate()
    if innovations is None:
        u = np.clip(rng.uniform(size=n + burn), PIT_CLAMP, 1 - PIT_CLAMP)
        innovations = skewt_quantile(u, params.nu, params.xi)
    eps = np.asarray(innovations, dtype=float)
    if eps.size != n + burn:
        raise ValueError("innovations must have length n + burn")
    r = np.empty(n + burn)
    h = params.unconditional_variance
    y = 0.0
    r_prev = params.mu0 / (1.0 - params.ar)
    for t in range(n + burn):
        if t > 0:
            h = params.omega + params.alpha * y * y + params.beta * h
        mean = params.mu0 + params.ar * r_prev + params.ma * y
        y = math.sqrt(h) * eps[t]
        r[t] = mean + y
        r_prev = r[t]
    return r[burn:]


def simulate_dcc_copula(targets, nus, c: float, d: float, rng: np.random.Generator) -> np.ndarray:
    """Uniforms from a DCC(1,1) Student-t copula with time-varying targets.

    ``targets`` is (T, k, k) or (k, k); ``nus`` a scalar or length-T array.
    The recursion is driven by the unit-variance t scores, matching
    :func:`tailmst.depnet.dcc_filter`.
    """
    targets = np.asarray(targets, dtype=float)
    n = len(nus) if np.ndim(nus) else None
    if targets.ndim == 2:
        if n is None:
            raise ValueError("give the number of periods through nus when targets are constant")
        targets = np.broadcast_to(targets, (n,) + targets.shape)
    n, k, _ = targets.shape
    nus = np.broadcast_to(np.asarray(nus, dtype=float), (n,))
    if not (c >= 0 and d >= 0 and c + d < 1):
        raise ValueError("need c, d >= 0 and c + d < 1")
    q = targets[0].copy()
    z_prev = None
    out = np.empty((n, k))
    for t in range(n):
        if t > 0:
            q = (1.0 - c - d) * targets[t] + c * np.outer(z_prev, z_prev) + d * q
        dq = 1.0 / np.sqrt(np.diag(q))
        r = q * np.outer(dq, dq)
        nu = nus[t]
        g = np.linalg.cholesky(r) @ rng.standard_normal(k)
        x = g / math.sqrt(rng.chisquare(nu) / nu)
        out[t] = special.stdtr(nu, x)
        z_prev = x * math.sqrt((nu - 2.0) / nu)
    return np.clip(out, PIT_CLAMP, 1.0 - PIT_CLAMP)


def _merge(base: dict, override: dict | None) -> dict:
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve_scenario(scenario: dict | None) -> dict:
    """Fill a partial scenario from :data:`DEFAULT_SCENARIO`."""
    spec = _merge(DEFAULT_SCENARIO, scenario)
    n, k = int(spec["n_periods"]), int(spec["n_assets"])
    if k < 2 or n < 2:
        raise ValueError("need at least 2 assets and 2 periods")
    for b in spec["blocks"]:
        if not 0 <= b["start"] <= b["end"] < n:
            raise ValueError(f"block {b} outside 0..{n - 1}")
    return spec


def regime_labels(scenario: dict) -> np.ndarray:
    """Per-row label: the block's ``label`` (default ``"block<n>"``) or ``"base"``."""
    spec = resolve_scenario(scenario)
    labels = np.full(int(spec["n_periods"]), "base", dtype=object)
    for n, b in enumerate(spec["blocks"]):
        labels[b["start"]:b["end"] + 1] = b.get("label", f"block{n}")
    return labels


def simulate_returns(scenario: dict | None = None, seed: int = 0) -> ReturnPanel:
    spec = resolve_scenario(scenario)
    n, k = int(spec["n_periods"]), int(spec["n_assets"])
    rng = np.random.default_rng(seed)
    burn = int(spec.get("burn", 200))

    def regime_matrix(block):
        return correlation_matrix(block.get("structure", "equi"), k,
                                  rho=float(block.get("rho", 0.5)),
                                  link=float(block.get("link", 0.8)))

    base = spec["base"]
    targets = np.empty((n + burn, k, k))
    targets[:] = regime_matrix(base)
    nus = np.full(n + burn, float(base.get("nu", 8.0)))
    for b in spec["blocks"]:
        sl = slice(burn + b["start"], burn + b["end"] + 1)
        targets[sl] = regime_matrix(b)
        nus[sl] = float(b.get("nu", base.get("nu", 8.0)))

    u = simulate_dcc_copula(targets, nus, float(spec["dcc"]["c"]), float(spec["dcc"]["d"]), rng)
    margin = ArmaGarchParams(**{key: float(v) for key, v in spec["margin"].items()})
    eps = skewt_quantile(u, margin.nu, margin.xi)
    values = np.column_stack([
        simulate_arma_garch(margin, n, innovations=eps[:, i], burn=burn) for i in range(k)
    ])
    tickers = list(spec.get("tickers") or [f"A{i:02d}" for i in range(k)])
    if len(tickers) != k:
        raise ValueError("tickers list does not match n_assets")
    if spec.get("index"):
        values = np.column_stack([values.mean(axis=1), values])
        tickers = ["INDEX"] + tickers
    dates = pd.date_range(spec["start"], periods=n + 1, freq=spec["freq"])
    return ReturnPanel(dates=dates[1:], tickers=tickers, values=values)


def simulate_panel(scenario: dict | None = None, seed: int = 0) -> PricePanel:
    """Seeded price panel (start price 100) for a regime scenario."""
    spec = resolve_scenario(scenario)
    returns = simulate_returns(spec, seed)
    first = pd.date_range(spec["start"], periods=1, freq=spec["freq"])[0]
    return prices_from_returns(returns, first, 100.0)
