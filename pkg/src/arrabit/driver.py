"""The outer solver loop: filtered inner sweeps, augmented Rayleigh-Ritz,
continuation, locking and the adaptive choice of augmentation depth and
filter degree.

Internally everything works on an operator whose *largest* eigenpairs are
wanted.  For ``which="smallest"`` that operator is ``beta*I - A``; values
are mapped back before they leave :func:`solve`.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .densela import orthonormalize, sym_eig_dense
from .innersolve import InnerStatus, gn_sweep, inner_stop_check, mpm_sweep
from .polyfilter import build_filter, eval_scalar, with_interval
from .projection import (
    Deflation,
    RitzSet,
    arr,
    deflate,
    max_residual,
    merge,
    project_out,
    ritz_residuals,
)
from .sparsemat import SparseSymMatrix, SymOperator

__all__ = [
    "IterationRecord",
    "SolveResult",
    "SolverConfig",
    "SolverState",
    "adapt_degree",
    "adapt_p",
    "continuation_step",
    "estimate_interval",
    "initial_tolerance",
    "next_tolerance",
    "outer_stop",
    "lanczos_estimate",
    "power_estimate",
    "smallest_mode_wrap",
    "solve",
]

log = logging.getLogger(__name__)

P_DECAY_RATIO = 0.95
P_RESIDUAL_RATIO = 0.1
DEGREE_RATIO = 0.9
MIN_DEGREE = 3
STAGNATION_ITERS = 3
CONTINUATION_START = 1e-7

SUCCESS = ("converged", "near_miss")


@dataclass
class SolverConfig:
    k: int
    which: str = "largest"
    tol: float = 1e-6
    q: int | None = None
    p: int = 1
    p_max: int = 3
    d: int = 3
    d_max: int = 15
    maxit: int = 30
    maxit1: int = 10
    maxit2: int = 5
    inner: str = "mpm"
    filter: str = "interpolant"
    seed: int = 0
    tol1: float | None = None
    b_update: str = "every"

    @property
    def guard(self) -> int:
        if self.q is not None:
            return self.q
        return int(math.floor(0.1 * self.k + 0.5))

    @property
    def width(self) -> int:
        return self.k + self.guard

    def validate(self, n: int) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.guard < 0:
            raise ValueError("q must be >= 0")
        if self.which not in ("largest", "smallest"):
            raise ValueError(f"which must be 'largest' or 'smallest', got '{self.which}'")
        if self.inner not in ("mpm", "gn"):
            raise ValueError(f"inner must be 'mpm' or 'gn', got '{self.inner}'")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")
        if self.p < 0 or self.p_max < self.p:
            raise ValueError("need 0 <= p <= p_max")
        if self.d < 1 or self.d_max < self.d:
            raise ValueError("need 1 <= d <= d_max")
        for name in ("maxit", "maxit1", "maxit2"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if (self.p_max + 1) * self.width >= n:
            raise ValueError(
                f"(p_max+1)(k+q) = {(self.p_max + 1) * self.width} must be < n = {n}"
            )
        if self.b_update not in ("every", "continuation"):
            raise ValueError(f"b_update must be 'every' or 'continuation', got '{self.b_update}'")
        build_filter(self.filter, self.d)


@dataclass
class IterationRecord:
    outer: int
    maxres: float
    spmv: int
    rr: int
    p: int
    d: int
    locked: int
    seconds: float


@dataclass
class Best:
    maxres: float
    mu_k: float
    mu_w: float
    ritz: RitzSet


@dataclass
class SolverState:
    X: np.ndarray
    defl: Deflation
    tol_t: float
    t: int
    a: float
    b: float
    p: int
    d: int
    best: Best | None = None
    maxresp: float = math.inf
    no_improve: int = 0
    history: list = field(default_factory=list)


@dataclass
class SolveResult:
    """Outcome of a solve, in the units of the input matrix."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    locked: np.ndarray
    status: str
    maxres: float
    history: list
    spmv_count: int
    rr_calls: int
    seconds: float
    locked_values: np.ndarray
    locked_vectors: np.ndarray
    config: SolverConfig

    @property
    def converged(self) -> bool:
        return self.status in SUCCESS

    @property
    def outer_iterations(self) -> int:
        return len(self.history)

    @property
    def ritz(self) -> RitzSet:
        return RitzSet(self.values, self.vectors, self.residuals, self.locked)


def initial_tolerance(tol: float) -> float:
    """First tolerance of the continuation sequence.

    Locking uses ``max(1e-14, tol_t**2)``, so starting above 1e-7 would
    lock pairs that can never reach a tighter final tolerance.
    """
    return max(tol, CONTINUATION_START)


def next_tolerance(tol_t: float, tol: float) -> float:
    return max(1e-2 * tol_t, tol)


def power_estimate(op, rng, upper: float, maxiter: int = 300, rtol: float = 1e-3):
    """Estimate the smallest eigenvalue of ``op`` by power iteration on
    ``upper*I - op``.  Returns ``(estimate, converged)``."""
    x = rng.standard_normal(op.n)
    x /= np.linalg.norm(x)
    theta = None
    for _ in range(maxiter):
        y = upper * x - op.matmat(x[:, None])[:, 0]
        new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return upper, True
        x = y / ny
        if theta is not None and abs(new - theta) <= rtol * abs(new):
            return upper - new, True
        theta = new
    return upper - theta, False


def lanczos_estimate(op, rng, tol: float = 1e-6, maxiter: int = 300):
    """Lower estimate of the smallest eigenvalue of ``op`` by restarted
    Lanczos: the Ritz value minus its residual norm.

    Returns ``(estimate, converged)``.
    """
    n = op.n
    lin = LinearOperator((n, n), matvec=lambda x: op.matmat(x.reshape(n, 1))[:, 0],
                         matmat=op.matmat, dtype=np.float64)
    v0 = rng.standard_normal(n)
    try:
        theta, v = eigsh(lin, k=1, which="SA", v0=v0, tol=tol, maxiter=maxiter,
                         ncv=min(n - 1, 24))
    except ArpackNoConvergence:
        return math.nan, False
    v = v[:, 0]
    r = op.matmat(v[:, None])[:, 0] - theta[0] * v
    return float(theta[0] - np.linalg.norm(r)), True


def estimate_interval(A, X0, rng=None) -> tuple[float, float]:
    """Filter interval ``[a, b]``: ``a`` approximates the bottom of the
    spectrum, ``b`` is the smallest Ritz value of ``X0``."""
    if rng is None:
        rng = np.random.default_rng(0)
    a, ok = lanczos_estimate(A, rng)
    if not ok:
        log.warning("Lanczos estimate of the spectrum bottom did not converge; using Gershgorin bound")
        a = _gershgorin(A)[0]
    AX = A.matmat(X0)
    b = float(sym_eig_dense(X0.T @ AX).values[-1])
    if a >= b:
        a = b - 1e-8 * (abs(b) + 1.0)
    return a, b


def _gershgorin(A):
    if hasattr(A, "gershgorin_bounds"):
        return A.gershgorin_bounds()
    from .sparsemat import gershgorin_bounds

    return gershgorin_bounds(A)


def outer_stop(r: RitzSet, cfg: SolverConfig, consecutive_no_improve: int,
               outer: int = 0) -> str | None:
    """Return the exit status for this outer iteration, or ``None`` to go on.

    ``converged``: maxres <= tol.  ``near_miss``: maxres < (1 + 9h/k) tol
    with h the number of leading pairs below 0.1*tol.  ``stagnation``: no
    decrease for three consecutive iterations.  ``maxit``: budget spent.
    """
    k, tol = cfg.k, cfg.tol
    if r.count < k:
        maxres = math.inf
        h = 0
    else:
        maxres = max_residual(r, k)
        h = int(np.count_nonzero(r.residuals[:k] < 0.1 * tol))
    if maxres <= tol:
        return "converged"
    if maxres < (1.0 + 9.0 * h / k) * tol:
        return "near_miss"
    if consecutive_no_improve >= STAGNATION_ITERS:
        return "stagnation"
    if outer >= cfg.maxit:
        return "maxit"
    return None


def continuation_step(state: SolverState, tol: float, mu_w: float) -> SolverState:
    """Tighten the working tolerance and move ``b`` to the current
    (k+q)-th Ritz value."""
    b = mu_w if mu_w > state.a else state.b
    return replace(state, tol_t=next_tolerance(state.tol_t, tol), b=b, t=state.t + 1)


def adapt_p(p: int, p_max: int, mu_k: float, mu_w: float, maxres: float, maxresp: float) -> int:
    """Deepen the augmentation when the wanted Ritz values decay slowly and
    the residual did not drop by 10x.  Values are on the shifted scale."""
    if mu_k <= 0.0:
        return p
    if mu_w / mu_k > P_DECAY_RATIO and maxres / maxresp > P_RESIDUAL_RATIO:
        return min(p + 1, p_max)
    return p


def adapt_degree(kind: str, a: float, b: float, mu_k: float, mu_w: float, d_max: int) -> int:
    """Smallest degree >= 3 whose filter on ``[a, b]`` damps ``mu_w``
    relative to ``mu_k`` by at least 0.9, capped at ``d_max``.

    Evaluation points left of ``a`` are clamped to ``a``.
    """
    lo = max(mu_w, a)
    hi = max(mu_k, a)
    for d in range(MIN_DEGREE, d_max + 1):
        f = with_interval(build_filter(kind, d), a, b)
        num = abs(eval_scalar(f, lo))
        den = abs(eval_scalar(f, hi))
        if den > 0.0 and num / den < DEGREE_RATIO:
            return d
    return d_max


def _top_up(X: np.ndarray, count: int, defl: Deflation, rng) -> np.ndarray:
    R = rng.standard_normal((X.shape[0], count))
    R = project_out(R, defl)
    if X.shape[1]:
        R = R - X @ np.linalg.lstsq(X, R, rcond=None)[0]
    U, _ = orthonormalize(R)
    log.info("topped up the iterate with %d random column(s)", U.shape[1])
    return np.hstack([X, U])


def _inner_phase(op, state: SolverState, cfg: SolverConfig, f, rng):
    X = state.X
    status = InnerStatus()
    for _ in range(cfg.maxit1):
        if cfg.inner == "mpm":
            X = mpm_sweep(op, state.a, X, f, state.defl, cfg.maxit2, rng)
        else:
            X, lost = gn_sweep(op, state.a, X, f, state.defl, cfg.maxit2)
            if lost:
                return X, replace(status, stop_reason="rank_loss")
        status = replace(status, sweeps_done=status.sweeps_done + cfg.maxit2)
        status = inner_stop_check(X, status, state.tol_t)
        if status.stopped:
            return X, status
    return X, replace(status, stop_reason="budget")


def _iterate(op, cfg: SolverConfig, callback: Callable | None = None):
    n = op.n
    k, w = cfg.k, cfg.width
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()

    X0 = rng.standard_normal((n, w))
    U, _ = orthonormalize(X0)
    a, b = estimate_interval(op, U, rng)
    tol1 = cfg.tol1 if cfg.tol1 is not None else initial_tolerance(cfg.tol)
    state = SolverState(X=U, defl=Deflation.empty(n), tol_t=max(tol1, cfg.tol), t=1,
                        a=a, b=b, p=cfg.p, d=cfg.d)
    rr_calls = 0
    status = "maxit"
    merged = None
    log.debug("interval a=%.6g b=%.6g tol_1=%.3g", a, b, state.tol_t)

    for outer in range(1, cfg.maxit + 1):
        f = with_interval(build_filter(cfg.filter, state.d), 0.0, state.b - state.a)
        X, inner = _inner_phase(op, state, cfg, f, rng)

        p_used = state.p
        keep = w - state.defl.size
        ritz = arr(op, X, p_used, state.defl, keep)
        rr_calls += 1
        merged = merge(state.defl, ritz)
        maxres = max_residual(merged, k) if merged.count >= k else math.inf

        state.no_improve = 0 if maxres < state.maxresp else state.no_improve + 1
        if merged.count >= w and (state.best is None or maxres < state.best.maxres):
            state.best = Best(maxres, merged.values[k - 1], merged.values[w - 1], merged)

        log.debug("outer %d: inner=%s after %d sweeps, maxres=%.3e p=%d d=%d locked=%d",
                  outer, inner.stop_reason, inner.sweeps_done, maxres, p_used, f.degree,
                  state.defl.size)

        stop = outer_stop(merged, cfg, state.no_improve, outer)
        if stop is None:
            if maxres <= state.tol_t and merged.count >= w:
                state = continuation_step(state, cfg.tol, merged.values[w - 1])
            elif cfg.b_update == "every" and merged.count >= w and merged.values[w - 1] > state.a:
                state.b = float(merged.values[w - 1])
            locked, active = deflate(ritz, state.tol_t)
            state.defl = state.defl.extend(locked)
            if state.defl.size >= w:
                # nothing left to iterate on; cannot happen while tol >= 1e-14
                stop = "stagnation"
            else:
                X = active.vectors
                deficit = w - state.defl.size - X.shape[1]
                if deficit > 0:
                    X = _top_up(X, deficit, state.defl, rng)
                state.X = X
                if merged.count >= w:
                    state.p = adapt_p(state.p, cfg.p_max, merged.values[k - 1] - state.a,
                                      merged.values[w - 1] - state.a, maxres, state.maxresp)
                if state.best is not None:
                    state.d = adapt_degree(cfg.filter, 0.0, state.b - state.a,
                                           state.best.mu_k - state.a,
                                           state.best.mu_w - state.a, cfg.d_max)

        rec = IterationRecord(outer, maxres, op.spmv_count, rr_calls, p_used, f.degree,
                              state.defl.size, time.perf_counter() - t0)
        state.history.append(rec)
        if callback is not None:
            callback(rec)
        state.maxresp = maxres
        if stop is not None:
            status = stop
            break

    if status in SUCCESS or state.best is None:
        final = merged
    else:
        final = state.best.ritz
    return final, status, state, rr_calls, time.perf_counter() - t0


def _finish(A: SparseSymMatrix, op: SymOperator, cfg: SolverConfig, final: RitzSet,
            status: str, state: SolverState, rr_calls: int, seconds: float) -> SolveResult:
    k = cfg.k
    top = final.head(k)
    values = op.to_original(top.values)
    vectors = top.vectors
    # residuals re-measured on the original matrix (not counted as solver work)
    residuals = ritz_residuals(A, vectors, A.matmat(vectors), values)
    maxres = float(np.max(residuals)) if residuals.size else math.inf
    locked_vals = op.to_original(state.defl.values)
    return SolveResult(
        values=values,
        vectors=vectors,
        residuals=residuals,
        locked=top.locked.copy(),
        status=status,
        maxres=maxres,
        history=state.history,
        spmv_count=op.spmv_count,
        rr_calls=rr_calls,
        seconds=seconds,
        locked_values=locked_vals,
        locked_vectors=state.defl.Q,
        config=cfg,
    )


def solve(A: SparseSymMatrix, cfg: SolverConfig,
          callback: Callable[[IterationRecord], None] | None = None) -> SolveResult:
    """Compute ``cfg.k`` exterior eigenpairs of the symmetric matrix ``A``.

    ``callback`` is invoked once per outer iteration with the new
    :class:`IterationRecord`.
    """
    cfg.validate(A.n)
    if cfg.which == "smallest":
        return smallest_mode_wrap(A, cfg, callback)
    op = SymOperator(A)
    final, status, state, rr_calls, seconds = _iterate(op, cfg, callback)
    return _finish(A, op, cfg, final, status, state, rr_calls, seconds)


def smallest_mode_wrap(A: SparseSymMatrix, cfg: SolverConfig,
                       callback: Callable[[IterationRecord], None] | None = None) -> SolveResult:
    """Smallest eigenpairs via the largest ones of ``beta*I - A``, with
    ``beta`` a power-iteration estimate of the top of the spectrum plus a
    1% margin."""
    cfg.validate(A.n)
    rng = np.random.default_rng([cfg.seed, 1])
    glo, ghi = _gershgorin(A)
    neg = SymOperator(A, scale=-1.0, shift=0.0)
    top, ok = power_estimate(neg, rng, -glo)
    top = -top if ok else ghi
    beta = top + 0.01 * max(abs(top), 1.0)
    op = SymOperator(A, scale=-1.0, shift=beta)
    final, status, state, rr_calls, seconds = _iterate(op, cfg, callback)
    return _finish(A, op, cfg, final, status, state, rr_calls, seconds)
