"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the pure-Python
twin.  Set ``TAILMST_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("TAILMST_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

garch_filter = _impl.garch_filter
garch_loglik_grad = _impl.garch_loglik_grad
dcc_rho = _impl.dcc_rho
tcopula_dcc_loglik = _impl.tcopula_dcc_loglik
tcopula_dcc_loglik_grad = _impl.tcopula_dcc_loglik_grad

__all__ = [
    "BACKEND",
    "garch_filter",
    "garch_loglik_grad",
    "dcc_rho",
    "tcopula_dcc_loglik",
    "tcopula_dcc_loglik_grad",
]
