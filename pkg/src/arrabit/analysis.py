"""Measurable quantities behind the acceleration theory of augmented
Rayleigh-Ritz, checked against a brute-force dense eigendecomposition.

Everything here is a correctness instrument for small matrices
(n <= 1000): the oracle is a cyclic Jacobi decomposition, independent of
the LAPACK path the solver uses.

Notation: ``Q``, ``lam`` are the eigenvectors and descending eigenvalues
of ``A``; for a block ``X`` with ``k`` columns the augmented block is
``X_p = [X, AX, ..., A^p X] = Q Ghat`` with
``Ghat = [C, diag(lam) C, ..., diag(lam)^p C]`` and ``C = Q^T X``.
Row ``i`` of ``Ghat`` has norm ``D_ii = ||C_i|| * ||V_i||`` where ``V``
is the Vandermonde matrix of the spectrum, so ``G = D^+ Ghat`` has unit
(or zero) rows.  ``G1`` is the leading ``m`` rows of ``G``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .densela import EPS, sym_eig_dense
from .polyfilter import PolyFilter, eval_scalar
from .sparsemat import SparseSymMatrix

__all__ = [
    "MAX_ORACLE_N",
    "THEOREM_SLACK",
    "AugmentationDecomposition",
    "SpectrumOracle",
    "assumption_holds",
    "build_decomposition",
    "delta_from_coords",
    "delta_k",
    "dense_oracle",
    "filter_comparison",
    "gamma_km",
    "lemma_coords",
    "ordering_holds",
    "power_sweep",
    "select_m",
    "theorem_sweep",
    "vandermonde",
    "verify_power_bound",
    "verify_thm_bound",
]

MAX_ORACLE_N = 1000
THEOREM_SLACK = 1e-8


@dataclass(frozen=True)
class SpectrumOracle:
    """Full eigendecomposition ``A = Q diag(lam) Q^T``, values descending."""

    Q: np.ndarray
    lam: np.ndarray

    @property
    def n(self) -> int:
        return len(self.lam)

    def coords(self, X) -> np.ndarray:
        """``Q^T X``: the block in eigenvector coordinates."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        return self.Q.T @ X


def dense_oracle(A) -> SpectrumOracle:
    """Jacobi eigendecomposition of a small matrix (sparse or dense)."""
    M = A.to_dense() if isinstance(A, SparseSymMatrix) else np.asarray(A, dtype=np.float64)
    n = M.shape[0]
    if n > MAX_ORACLE_N:
        raise ValueError(f"dense oracle is limited to n <= {MAX_ORACLE_N}, got n={n}")
    eig = sym_eig_dense(M, method="jacobi")
    return SpectrumOracle(eig.vectors, eig.values)


def _row_norms(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        return np.abs(M)
    return np.linalg.norm(M, axis=1)


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def delta_from_coords(C, k: int) -> float:
    """``max_{i>k} ||C_i|| / min_{i<=k} ||C_i||`` over the rows of ``C``."""
    r = _row_norms(C)
    if not 1 <= k < len(r):
        raise ValueError(f"need 1 <= k < {len(r)}, got k={k}")
    return _ratio(float(r[k:].max()), float(r[:k].min()))


def delta_k(oracle: SpectrumOracle, X, k: int) -> float:
    """Accuracy measure of a block: largest unwanted eigenvector component
    over smallest wanted one (``inf`` when a wanted component vanishes)."""
    return delta_from_coords(oracle.coords(X), k)


def gamma_km(M, k: int, m: int) -> float:
    """``max_{i>m} ||M_i|| / min_{i<=k} ||M_i||`` over the rows of ``M``
    (entries of a vector)."""
    r = _row_norms(M)
    if not 1 <= k <= m < len(r):
        raise ValueError(f"need 1 <= k <= m < {len(r)}, got k={k}, m={m}")
    return _ratio(float(r[m:].max()), float(r[:k].min()))


def vandermonde(lam, p: int) -> np.ndarray:
    """``V[i, j] = lam[i]**j`` for ``j = 0..p``."""
    if p < 0:
        raise ValueError("p must be >= 0")
    lam = np.asarray(lam, dtype=np.float64)
    return lam[:, None] ** np.arange(p + 1)


def _singular_rank(M: np.ndarray, m: int) -> tuple[int, float]:
    if M.size == 0:
        return 0, math.inf
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0, math.inf
    rank = int(np.count_nonzero(s > m * EPS * s[0]))
    cond = float(s[0] / s[m - 1]) if len(s) >= m and s[m - 1] > 0 else math.inf
    return rank, cond


@dataclass(frozen=True)
class AugmentationDecomposition:
    """Row-normalized coefficients of the augmented block in the eigenbasis.

    ``X_p = Q @ Ghat = Q @ diag(D) @ G``; ``G1``/``G2`` split ``G`` after
    row ``m``, ``S = D2 G2 G1^+ D1^{-1}`` couples the tail to the head.
    ``S`` is ``None`` when ``G1`` is rank deficient.
    """

    k: int
    p: int
    m: int
    Ghat: np.ndarray
    D: np.ndarray
    G: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    G1_pinv: np.ndarray
    S: np.ndarray | None
    rank_G1: int
    cond_G1: float

    @property
    def assumption(self) -> bool:
        """Rows of ``G1`` linearly independent (numerically)."""
        return self.rank_G1 == self.m

    @property
    def E_k(self) -> np.ndarray:
        return np.eye(self.m, self.k)

    def reconstruct(self) -> np.ndarray:
        """``diag(D) @ G``, equal to ``Ghat`` up to rounding."""
        return self.D[:, None] * self.G


def _augmented_coords(C: np.ndarray, lam: np.ndarray, p: int) -> np.ndarray:
    blocks = [C]
    for _ in range(p):
        blocks.append(lam[:, None] * blocks[-1])
    return np.hstack(blocks)


def _decompose_coords(C: np.ndarray, lam: np.ndarray, p: int, m: int) -> AugmentationDecomposition:
    n, k = C.shape
    if p < 0:
        raise ValueError("p must be >= 0")
    if (p + 1) * k >= n:
        raise ValueError(f"need (p+1)k < n, got (p+1)k={(p + 1) * k}, n={n}")
    if not k <= m <= k + p * k:
        raise ValueError(f"need k <= m <= k+pk, got k={k}, p={p}, m={m}")
    Ghat = _augmented_coords(C, lam, p)
    D = _row_norms(C) * _row_norms(vandermonde(lam, p))
    Dinv = np.zeros_like(D)
    nz = D > 0.0
    Dinv[nz] = 1.0 / D[nz]
    G = Dinv[:, None] * Ghat
    G1, G2 = G[:m], G[m:]
    rank, cond = _singular_rank(G1, m)
    G1_pinv = np.linalg.pinv(G1)
    S = None
    if rank == m and np.all(D[:m] > 0.0):
        S = (D[m:, None] * G2) @ G1_pinv / D[:m]
    return AugmentationDecomposition(k, p, m, Ghat, D, G, G1, G2, G1_pinv, S, rank, cond)


def build_decomposition(oracle: SpectrumOracle, X, p: int, m: int) -> AugmentationDecomposition:
    """Coefficients of ``[X, AX, ..., A^p X]`` in the eigenbasis, row-normalized."""
    return _decompose_coords(oracle.coords(X), oracle.lam, p, m)


def assumption_holds(oracle: SpectrumOracle, X, p: int, m: int) -> bool:
    return build_decomposition(oracle, X, p, m).assumption


def select_m(C: np.ndarray, lam: np.ndarray, p: int) -> int | None:
    """Largest ``m`` in ``[k, k+pk]`` whose ``G1`` has full row rank."""
    k = C.shape[1]
    for m in range(k + p * k, k - 1, -1):
        if _decompose_coords(C, lam, p, m).assumption:
            return m
    return None


def lemma_coords(dec: AugmentationDecomposition) -> np.ndarray:
    """``Q^T Y`` for the basis ``Y = X_p G1^+ D1^{-1} E_k``:
    identity on the first ``k`` rows, zero up to row ``m``, ``S E_k`` below."""
    if dec.S is None:
        raise ValueError("G1 is rank deficient; the coupling matrix is undefined")
    n = dec.G.shape[0]
    Y = np.zeros((n, dec.k))
    Y[: dec.k] = np.eye(dec.k)
    Y[dec.m:] = dec.S[:, : dec.k]
    return Y


def _check(name: str, lhs: float, rhs: float) -> dict:
    limit = rhs * (1.0 + THEOREM_SLACK)
    return {
        "name": name,
        "lhs": float(lhs),
        "rhs": float(rhs),
        "margin": float(limit - lhs) if math.isfinite(limit) else math.inf,
        "passed": bool(lhs <= limit),
    }


def _report(instance: dict, checks: list[dict], skipped: str | None = None, **extra) -> dict:
    out = {
        "instance": instance,
        "skipped": skipped is not None,
        "reason": skipped,
        "checks": checks,
        "passed": skipped is None and all(c["passed"] for c in checks),
    }
    out.update(extra)
    return out


def _theorem_terms(C: np.ndarray, lam: np.ndarray, p: int, m: int | None):
    k = C.shape[1]
    if m is None:
        m = select_m(C, lam, p)
        if m is None:
            return None, None
    dec = _decompose_coords(C, lam, p, m)
    if not dec.assumption:
        return dec, None
    gk = float(np.linalg.norm(dec.G1_pinv[:, :k], 2))
    gv = gamma_km(vandermonde(lam, p), k, m)
    return dec, (gk, gv)


def verify_thm_bound(oracle: SpectrumOracle, X, p: int, m: int | None, k: int | None = None,
                     instance: dict | None = None) -> dict:
    """Check ``delta_k(Y) <= Gamma_km(Q^T X) Gamma_km(V) ||G1^+ E_k||_2``.

    ``m=None`` picks the largest admissible ``m`` with full-rank ``G1``.
    Skipped (not failed) when no such ``m`` exists.
    """
    C = oracle.coords(X)
    if k is not None and k != C.shape[1]:
        raise ValueError(f"X has {C.shape[1]} columns but k={k}")
    k = C.shape[1]
    inst = dict(instance or {}, n=oracle.n, k=k, p=p)
    dec, terms = _theorem_terms(C, oracle.lam, p, m)
    if terms is None:
        inst["m"] = m
        return _report(inst, [], "G1 rank deficient",
                       cond_G1=None if dec is None else dec.cond_G1)
    inst["m"] = dec.m
    gk, gv = terms
    lhs = delta_from_coords(lemma_coords(dec), k)
    rhs = gamma_km(C, k, dec.m) * gv * gk
    return _report(inst, [_check("theorem", lhs, rhs)], cond_G1=dec.cond_G1)


def ordering_holds(values: np.ndarray, k: int, m: int) -> bool:
    """Filtered-spectrum ordering: ``|rho_k|`` is the smallest wanted
    magnitude, magnitudes decrease from ``k`` to ``m+1``, and ``|rho_{m+1}|``
    dominates everything after ``m``."""
    r = np.abs(np.asarray(values, dtype=np.float64))
    if r[:k].min() != r[k - 1]:
        return False
    if np.any(np.diff(r[k - 1: m + 1]) > 0.0):
        return False
    return bool(r[m:].max() == r[m])


def verify_power_bound(oracle: SpectrumOracle, X0, rho, q_steps: int, p: int,
                       m: int | None, k: int | None = None,
                       instance: dict | None = None) -> dict:
    """Check both filtered power-iteration bounds for ``X = rho(A)^q X0``.

    ``delta_k(Y) <= c_m |rho(lam_{m+1}) / rho(lam_k)|^q`` and
    ``delta_k(Y)/delta_k(X) <= c'_m |rho(lam_{m+1}) / rho(lam_{k+1})|^q``.
    ``rho`` is a :class:`PolyFilter` or any callable on arrays.
    """
    if q_steps < 0:
        raise ValueError("q_steps must be >= 0")
    C0 = oracle.coords(X0)
    if k is not None and k != C0.shape[1]:
        raise ValueError(f"X0 has {C0.shape[1]} columns but k={k}")
    k = C0.shape[1]
    lam = oracle.lam
    rvals = eval_scalar(rho, lam) if isinstance(rho, PolyFilter) else np.asarray(rho(lam), dtype=np.float64)
    inst = dict(instance or {}, n=oracle.n, k=k, p=p, q=q_steps)
    if q_steps > 0 and not np.all(np.isfinite(rvals)):
        return _report(dict(inst, m=m), [], "filter values not finite")

    # coordinates of rho(A)^q X0, scaled to avoid overflow (delta is scale free)
    if q_steps > 0:
        top = np.max(np.abs(rvals))
        if top == 0.0:
            return _report(dict(inst, m=m), [], "filter vanishes on the spectrum")
        C = (rvals / top)[:, None] ** q_steps * C0
    else:
        C = C0.copy()
    dec, terms = _theorem_terms(C, lam, p, m)
    if terms is None:
        return _report(dict(inst, m=m), [], "G1 rank deficient",
                       cond_G1=None if dec is None else dec.cond_G1)
    m = dec.m
    inst["m"] = m
    if q_steps > 0 and not ordering_holds(rvals, k, m):
        return _report(inst, [], "filter ordering violated on this spectrum", cond_G1=dec.cond_G1)
    gk, gv = terms
    r0 = _row_norms(C0)
    lhs = delta_from_coords(lemma_coords(dec), k)
    ra = abs(rvals[m])
    c_m = gamma_km(C0, k, m) * gv * gk
    checks = [_check("power", lhs, c_m * _ratio(ra, abs(rvals[k - 1])) ** q_steps)]
    dx = delta_from_coords(C, k)
    if dx > 0.0 and math.isfinite(dx):
        c_mp = _ratio(float(r0[m:].max()), float(r0[k:].min())) * gv * gk
        checks.append(_check("ratio", lhs / dx, c_mp * _ratio(ra, abs(rvals[k])) ** q_steps))
    return _report(inst, checks, cond_G1=dec.cond_G1, c_m=float(c_m))


# --- sweeps -------------------------------------------------------------

def _random_symmetric(n: int, rng) -> np.ndarray:
    G = rng.standard_normal((n, n))
    return 0.5 * (G + G.T)


def _sweep_shape(rng, n_max: int, p: int) -> tuple[int, int]:
    n = int(rng.integers(max(8, n_max // 2), n_max + 1))
    k = int(rng.integers(1, min(5, (n - 1) // (p + 1)) + 1))
    return n, k


def theorem_sweep(seeds: int = 30, n_max: int = 60) -> dict:
    """Theorem bound on random symmetric matrices with ``m = k + pk``,
    ``p`` cycling through 0, 1, 2."""
    if n_max > MAX_ORACLE_N:
        raise ValueError(f"n must be <= {MAX_ORACLE_N}")
    reports = []
    for seed in range(seeds):
        rng = np.random.default_rng([seed, 41])
        p = seed % 3
        n, k = _sweep_shape(rng, n_max, p)
        oracle = dense_oracle(_random_symmetric(n, rng))
        X = rng.standard_normal((n, k))
        reports.append(verify_thm_bound(oracle, X, p, k + p * k,
                                        instance={"seed": seed, "kind": "random-symmetric"}))
    return _summarize(reports)


def power_sweep(seeds: int = 30, n_max: int = 60, degree: int = 8) -> dict:
    """Filtered power-iteration bounds on synthetic positive spectra.

    Even seeds use the interpolant filter on ``[lam_n, lam_{m+1}]``, odd
    seeds the identity ``rho(t) = t``.
    """
    from .generators import random_orthogonal
    from .polyfilter import build_interpolant, with_interval

    if n_max > MAX_ORACLE_N:
        raise ValueError(f"n must be <= {MAX_ORACLE_N}")
    reports = []
    for seed in range(seeds):
        rng = np.random.default_rng([seed, 43])
        p = seed % 3
        n, k = _sweep_shape(rng, n_max, p)
        lam = np.sort(rng.uniform(0.1, 1.0, n))[::-1]
        Q = random_orthogonal(n, rng)
        oracle = dense_oracle((Q * lam) @ Q.T)
        m = k + p * k
        q_steps = int(rng.integers(1, 5))
        X0 = rng.standard_normal((n, k))
        if seed % 2 == 0:
            lo, hi = oracle.lam[-1], oracle.lam[m]
            rho = with_interval(build_interpolant(degree), lo, hi) if hi > lo else (lambda t: t)
            kind = f"interpolant-d{degree}"
        else:
            rho = lambda t: t  # noqa: E731
            kind = "identity"
        reports.append(verify_power_bound(oracle, X0, rho, q_steps, p, m,
                                          instance={"seed": seed, "kind": kind}))
    return _summarize(reports)


def _summarize(reports: list[dict]) -> dict:
    checked = [r for r in reports if not r["skipped"]]
    return {
        "instances": len(reports),
        "checked": len(checked),
        "skipped": len(reports) - len(checked),
        "assumption_failures": sum(r["reason"] == "G1 rank deficient" for r in reports),
        "failures": sum(not r["passed"] for r in checked),
        "reports": reports,
    }


def filter_comparison(seed: int = 0, n: int = 400, k: int = 20, step: float = 5e-4,
                      tol: float = 1e-12, inner: str = "mpm") -> dict:
    """Solve the linear-decay instance with both filter kinds and report
    outer iterations and SpMV counts side by side (no timing, so the
    report is reproducible)."""
    from .driver import SolverConfig, solve
    from .generators import make_profile

    A = make_profile("linear", n, seed=seed, step=step)
    rows = {}
    for kind in ("interpolant", "classic-chebyshev"):
        res = solve(A, SolverConfig(k=k, tol=tol, inner=inner, filter=kind, seed=seed))
        rows[kind] = {
            "status": res.status,
            "converged": res.converged,
            "outer_iterations": res.outer_iterations,
            "spmv": int(res.spmv_count),
            "maxres": float(res.maxres),
        }
    return {"instance": {"profile": "linear", "n": n, "k": k, "step": step, "tol": tol,
                         "inner": inner, "seed": seed},
            "filters": rows}
