"""Dense kernels for the projected problems: QR, symmetric eigensolvers,
Gram matrices, Cholesky solves and reciprocal condition numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg as sla

__all__ = [
    "NotPositiveDefinite",
    "SymEig",
    "cholesky_solve",
    "gram",
    "jacobi_eig",
    "orthonormalize",
    "rcond_gram",
    "sym_eig_dense",
]

EPS = np.finfo(np.float64).eps


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Cholesky factorization hit a non-positive pivot."""


@dataclass(frozen=True)
class SymEig:
    """Eigenvalues (descending) and matching orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray


def orthonormalize(Z) -> tuple[np.ndarray, int]:
    """Orthonormal basis of ``range(Z)`` with numerical-rank truncation.

    Columns are scaled to unit norm and factored by Householder QR.  A
    column whose diagonal entry in ``R`` falls below ``n*eps`` is
    numerically dependent on its predecessors; in that case the rank and
    the basis are read off the SVD of the small triangular factor, since
    later columns may still use the direction the dependent one produced.

    Returns
    -------
    U : ndarray, shape (n, rank)
    rank : int
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, b = Z.shape
    if b > n:
        raise ValueError(f"cannot orthonormalize {b} columns in dimension {n}")
    if not np.all(np.isfinite(Z)):
        raise ValueError("block contains non-finite entries")
    norms = np.linalg.norm(Z, axis=0)
    live = norms > 0.0
    if not np.any(live):
        return np.zeros((n, 0)), 0
    Zs = Z[:, live] / norms[live]
    Q, R = np.linalg.qr(Zs)
    tol = n * EPS
    if np.min(np.abs(np.diag(R))) > tol:
        return Q, Q.shape[1]
    W, s, _ = np.linalg.svd(R)
    rank = int(np.count_nonzero(s > tol * s[0]))
    return Q @ W[:, :rank], rank


def _fix_signs(V: np.ndarray) -> np.ndarray:
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _symmetrized(H) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix contains non-finite entries")
    return 0.5 * (H + H.T)


def sym_eig_dense(H, method: str = "lapack") -> SymEig:
    """Full eigendecomposition of a small symmetric matrix.

    ``method="lapack"`` calls the tridiagonal QR driver; ``method="jacobi"``
    runs :func:`jacobi_eig`, which is slower but fully independent and is
    what the analysis oracle uses.  Values come back descending and each
    eigenvector has its largest-magnitude entry made positive.
    """
    if method == "jacobi":
        return jacobi_eig(H)
    if method != "lapack":
        raise ValueError(f"unknown method '{method}'")
    H = _symmetrized(H)
    if H.shape[0] == 0:
        return SymEig(np.zeros(0), np.zeros((0, 0)))
    w, V = np.linalg.eigh(H)
    return SymEig(w[::-1].copy(), _fix_signs(V[:, ::-1]))


@numba.njit(cache=True)
def _jacobi_sweeps(A, V, max_sweeps):
    n = A.shape[0]
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += A[i, j] * A[i, j]
    fro = math.sqrt(fro)
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += A[p, q] * A[p, q]
        if math.sqrt(2.0 * off) <= 1e-15 * fro:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    return max_sweeps


def jacobi_eig(H, max_sweeps: int = 60) -> SymEig:
    """Cyclic Jacobi eigensolver (descending values, sign-normalized vectors)."""
    A = np.array(_symmetrized(H), order="C")
    n = A.shape[0]
    if n == 0:
        return SymEig(np.zeros(0), np.zeros((0, 0)))
    V = np.eye(n)
    sweeps = _jacobi_sweeps(A, V, max_sweeps)
    if sweeps >= max_sweeps:
        raise np.linalg.LinAlgError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return SymEig(w[order], _fix_signs(V[:, order]))


def gram(X) -> np.ndarray:
    """``X.T @ X``, exactly symmetric (upper triangle mirrored)."""
    X = np.asarray(X, dtype=np.float64)
    G = X.T @ X
    return np.triu(G) + np.triu(G, 1).T


def _cholesky(G) -> np.ndarray:
    G = np.asarray(G, dtype=np.float64)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("matrix is not positive definite") from None
    if not np.all(np.isfinite(L)):
        raise NotPositiveDefinite("matrix is not positive definite")
    return L


def cholesky_solve(G, B) -> np.ndarray:
    """Solve ``G S = B`` for symmetric positive definite ``G``."""
    L = _cholesky(G)
    B = np.asarray(B, dtype=np.float64)
    Y = sla.solve_triangular(L, B, lower=True)
    return sla.solve_triangular(L.T, Y, lower=False)


def rcond_gram(G) -> float:
    """Reciprocal 1-norm condition number of a symmetric PSD matrix.

    Computed exactly from the Cholesky factor; a failed factorization means
    the matrix is numerically singular and 0.0 is returned.
    """
    G = np.asarray(G, dtype=np.float64)
    k = G.shape[0]
    if k == 0:
        return 1.0
    if not np.all(np.isfinite(G)):
        return 0.0
    try:
        Ginv = cholesky_solve(G, np.eye(k))
    except NotPositiveDefinite:
        return 0.0
    n1 = np.abs(G).sum(axis=0).max()
    ninv = np.abs(Ginv).sum(axis=0).max()
    if n1 == 0.0 or not np.isfinite(ninv) or ninv == 0.0:
        return 0.0
    return float(min(1.0, max(0.0, 1.0 / (n1 * ninv))))
