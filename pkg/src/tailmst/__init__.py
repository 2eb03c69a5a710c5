"""Tail-dependence networks and copula deltaCoVaR for sector systemic risk.

Pipeline stages live in their own modules:

``ingest``   price/return panels and series transforms
``margins``  ARMA(1,1)-GARCH(1,1) skew-t fits and PIT
``depnet``   pairwise DCC Student-t copulas and lower tail dependence
``graph``    Mantegna distances, Kruskal MSTs, topological indicators
``covar``    copula CoVaR / deltaCoVaR against a sector index
``states``   market-state windows and per-state summaries
``pipeline`` orchestration used by the ``tailmst`` command line
"""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
