"""Compare the compiled and pure-Python kernel backends.

Times every kernel on identical inputs, checks that both backends agree, and
then times one end-to-end margin fit and pair-copula fit per backend (each in
a fresh interpreter, with ``TAILMST_PURE_PYTHON`` selecting the fallback).

Usage::

    python benchmarks/bench_kernels.py [--n 2000] [--repeat 5] [--no-fits]
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from tailmst import _pykernels
from tailmst.depnet import _tcop_const
from tailmst.margins import _density_constants

try:
    from tailmst import _ckernels
except ImportError:  # extension not built
    _ckernels = None

FIT_SNIPPET = """
import time, numpy as np
from tailmst import kernels
from tailmst.margins import ArmaGarchParams, fit_arma_garch
from tailmst.depnet import fit_pair_copula
from tailmst.simulate import simulate_arma_garch, simulate_dcc_copula
n = {n}
truth = ArmaGarchParams(0.01, 0.2, -0.1, 0.05, 0.10, 0.85, 7.0, 0.9)
r = simulate_arma_garch(truth, n, np.random.default_rng(0))
u = simulate_dcc_copula(np.array([[1, .5], [.5, 1]]), np.full(n, 8.0), .05, .9,
                        np.random.default_rng(1))
t0 = time.perf_counter(); fit_arma_garch(r, strict=False); t1 = time.perf_counter()
fit_pair_copula(u[:, 0], u[:, 1]); t2 = time.perf_counter()
print(kernels.BACKEND, t1 - t0, t2 - t1)
"""


def _inputs(n: int, rng: np.random.Generator) -> dict[str, tuple]:
    r = 0.01 * rng.standard_t(6, size=n)
    theta = np.array([0.0005, 0.05, -0.02, 2e-5, 0.08, 0.9])
    dens = _density_constants(7.0, 0.9)
    x = rng.standard_t(6, size=(2, n))
    z = x * np.sqrt(4.0 / 6.0)
    nu = 6.0
    return {
        "garch_filter": (r, *theta, 4e-4, 0.0),
        "garch_loglik_grad": (r, theta, dens, True, 0.0, 0.0),
        "dcc_rho": (z[0].copy(), z[1].copy(), 0.4, 0.05, 0.9),
        "tcopula_dcc_loglik": (x[0].copy(), x[1].copy(), z[0].copy(), z[1].copy(), 0.4,
                               0.05, 0.9, nu, _tcop_const(nu)),
        "tcopula_dcc_loglik_grad": (x[0].copy(), x[1].copy(), z[0].copy(), z[1].copy(), 0.4,
                                    0.05, 0.9, nu, _tcop_const(nu)),
    }


def _max_diff(a, b) -> float:
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return max(float(np.max(np.abs(np.asarray(x, float) - np.asarray(y, float))))
               for x, y in zip(a, b))


def bench_kernels(n: int, repeat: int) -> None:
    inputs = _inputs(n, np.random.default_rng(0))
    print(f"kernel timings, n = {n}, best of {repeat}")
    print(f"{'kernel':<26}{'python [ms]':>12}{'cython [ms]':>13}{'speed-up':>10}{'max |diff|':>12}")
    for name, args in inputs.items():
        py = getattr(_pykernels, name)
        t_py = min(timeit.repeat(lambda: py(*args), number=1, repeat=repeat))
        if _ckernels is None:
            print(f"{name:<26}{1e3 * t_py:12.2f}{'n/a':>13}")
            continue
        cy = getattr(_ckernels, name)
        t_cy = min(timeit.repeat(lambda: cy(*args), number=1, repeat=repeat))
        diff = _max_diff(py(*args), cy(*args))
        print(f"{name:<26}{1e3 * t_py:12.2f}{1e3 * t_cy:13.3f}{t_py / t_cy:10.0f}x{diff:12.1e}")


def bench_fits(n: int) -> None:
    print(f"\nend-to-end fits, n = {n}")
    print(f"{'backend':<10}{'margin fit [s]':>16}{'pair fit [s]':>14}")
    for pure in ("1", "0"):
        env = dict(os.environ, TAILMST_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", FIT_SNIPPET.format(n=n)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        backend, t_margin, t_pair = out[0], float(out[1]), float(out[2])
        print(f"{backend:<10}{t_margin:16.2f}{t_pair:14.2f}")


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=2000, help="series length")
    parser.add_argument("--repeat", type=int, default=5, help="timing repeats")
    parser.add_argument("--no-fits", action="store_true", help="skip end-to-end fits")
    args = parser.parse_args(argv)
    bench_kernels(args.n, args.repeat)
    if not args.no_fits:
        bench_fits(args.n)


if __name__ == "__main__":
    main()
