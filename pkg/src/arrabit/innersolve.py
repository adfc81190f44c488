"""Subspace updates between projections.

Both schemes apply the polynomial filter of the shifted operator
``rho(A - a*I)`` and never orthogonalize the iterate; the only dense
factorizations are the Gram/Cholesky solves of the Gauss-Newton step and
the periodic conditioning checks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .densela import NotPositiveDefinite, cholesky_solve, gram, rcond_gram
from .polyfilter import PolyFilter, apply_filter
from .projection import Deflation, project_out

__all__ = [
    "InnerStatus",
    "STAGNATION_RATIO",
    "gn_sweep",
    "inner_stop_check",
    "mpm_sweep",
]

log = logging.getLogger(__name__)

STAGNATION_RATIO = 0.99


@dataclass(frozen=True)
class InnerStatus:
    rc: float = math.inf
    rcp: float = math.inf
    sweeps_done: int = 0
    stop_reason: str = "none"  # rank_loss | stagnation | budget | none

    @property
    def stopped(self) -> bool:
        return self.stop_reason != "none"


def _resurrect(X: np.ndarray, cols: np.ndarray, defl: Deflation | None, rng) -> None:
    for j in cols:
        v = rng.standard_normal(X.shape[0])
        v = project_out(v[:, None], defl)[:, 0]
        X[:, j] = v / np.linalg.norm(v)
    log.info("replaced %d vanished column(s) with random vectors", len(cols))


def mpm_sweep(A, a: float, X, f: PolyFilter, defl: Deflation | None = None,
              count: int = 1, rng=None) -> np.ndarray:
    """``count`` multi-power steps: filter, project out the locked basis,
    normalize each column.  No orthogonalization among columns."""
    if count < 1:
        raise ValueError("count must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    for _ in range(count):
        X = apply_filter(A, a, X, f)
        X = project_out(X, defl)
        norms = np.linalg.norm(X, axis=0)
        dead = np.flatnonzero(~(norms > 0.0) | ~np.isfinite(norms))
        if dead.size:
            norms[dead] = 1.0
            X[:, dead] = 0.0
        X = X / norms
        if dead.size:
            _resurrect(X, dead, defl, rng if rng is not None else np.random.default_rng())
    return X


def gn_sweep(A, a: float, X, f: PolyFilter, defl: Deflation | None = None,
             count: int = 1) -> tuple[np.ndarray, bool]:
    """``count`` Gauss-Newton steps (unit step) on ``min ||X X^T - rho(A - aI)||_F``.

    Each step solves with ``X^T X`` by Cholesky.  If that fails the
    iterate has lost rank; the current ``X`` is returned with ``True``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    b = X.shape[1]
    for _ in range(count):
        try:
            Y = cholesky_solve(gram(X), X.T).T
        except NotPositiveDefinite:
            return X, True
        Z = apply_filter(A, a, Y, f)
        X = Z - X @ (Y.T @ Z - np.eye(b)) * 0.5
        X = project_out(X, defl)
        if not np.all(np.isfinite(X)):
            raise FloatingPointError("Gauss-Newton iterate overflowed")
    return X, False


def inner_stop_check(X, status: InnerStatus, tol_t: float) -> InnerStatus:
    """Refresh ``rc = rcond(X^T X)`` and decide whether the inner phase ends.

    Rank loss (``rc <= tol_t``) wins over stagnation (``rc/rcp > 0.99``).
    With the starting sentinel ``rcp = inf`` only the rank test can fire.
    """
    rc = rcond_gram(gram(X))
    rcp = status.rc
    if rc <= tol_t:
        reason = "rank_loss"
    elif math.isfinite(rcp) and rcp > 0.0 and rc / rcp > STAGNATION_RATIO:
        reason = "stagnation"
    else:
        reason = "none"
    return replace(status, rc=rc, rcp=rcp, stop_reason=reason)
