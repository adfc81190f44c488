"""Rayleigh-Ritz extraction, the augmented (block Krylov) variant, and the
bookkeeping for locked (deflated) Ritz pairs.

Ritz pairs are always ordered by descending value; the driver maps the
smallest-eigenvalue problem onto a largest one, so nothing here needs to
know which end of the spectrum is wanted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densela import orthonormalize, sym_eig_dense

__all__ = [
    "Deflation",
    "RitzSet",
    "arr",
    "deflate",
    "deflation_threshold",
    "max_residual",
    "merge",
    "project_out",
    "rayleigh_ritz",
    "ritz_residuals",
]


@dataclass
class RitzSet:
    """Ritz values (descending), orthonormal Ritz vectors and relative
    residual norms ``||A y - mu y|| / max(1, |mu|)``."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    locked: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.residuals = np.asarray(self.residuals, dtype=np.float64)
        if self.locked is None:
            self.locked = np.zeros(len(self.values), dtype=bool)
        if not (len(self.values) == self.vectors.shape[1] == len(self.residuals)):
            raise ValueError("inconsistent Ritz set sizes")

    @property
    def count(self) -> int:
        return len(self.values)

    def __len__(self):
        return self.count

    @classmethod
    def empty(cls, n: int) -> "RitzSet":
        return cls(np.zeros(0), np.zeros((n, 0)), np.zeros(0))

    def take(self, idx) -> "RitzSet":
        idx = np.asarray(idx, dtype=np.int64)
        return RitzSet(
            self.values[idx], self.vectors[:, idx], self.residuals[idx], self.locked[idx]
        )

    def head(self, k: int) -> "RitzSet":
        return self.take(np.arange(min(k, self.count)))


@dataclass
class Deflation:
    """Locked Ritz pairs: orthonormal basis ``Q`` with its values."""

    Q: np.ndarray
    values: np.ndarray
    residuals: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "Deflation":
        return cls(np.zeros((n, 0)), np.zeros(0), np.zeros(0))

    @property
    def size(self) -> int:
        return self.Q.shape[1]

    def __bool__(self):
        return self.size > 0

    def extend(self, pairs: RitzSet) -> "Deflation":
        if pairs.count == 0:
            return self
        return Deflation(
            np.hstack([self.Q, pairs.vectors]),
            np.concatenate([self.values, pairs.values]),
            np.concatenate([self.residuals, pairs.residuals]),
        )

    def as_ritz(self) -> RitzSet:
        return RitzSet(self.values, self.Q, self.residuals, np.ones(self.size, dtype=bool))


def ritz_residuals(A, Y: np.ndarray, AY: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Relative residual norms, measured in the units of the underlying
    matrix when ``A`` is a scaled/shifted operator."""
    nr = np.linalg.norm(AY - Y * mu, axis=0)
    scale = abs(getattr(A, "scale", 1.0))
    to_original = getattr(A, "to_original", None)
    mu0 = to_original(mu) if to_original is not None else mu
    return nr / scale / np.maximum(1.0, np.abs(mu0))


def project_out(X: np.ndarray, defl: Deflation | None) -> np.ndarray:
    """``X - Q (Q^T X)`` for the locked basis ``Q``; no-op when empty."""
    if defl is None or defl.size == 0:
        return X
    return X - defl.Q @ (defl.Q.T @ X)


def _basis(Z: np.ndarray, defl: Deflation | None) -> np.ndarray:
    Z = project_out(Z, defl)
    U, rank = orthonormalize(Z)
    if defl is not None and defl.size and rank:
        # second pass: orthonormalization can reintroduce O(eps) locked components
        U, rank = orthonormalize(project_out(U, defl))
    return U


def rayleigh_ritz(A, Z, keep: int | None = None, defl: Deflation | None = None) -> RitzSet:
    """Ritz pairs of ``A`` from ``range(Z)`` (optionally restricted to the
    orthogonal complement of a locked basis).

    Only the ``keep`` leading pairs are assembled and get residuals; by
    default all of them.  If ``Z`` is numerically rank deficient the set
    has fewer pairs than requested.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    U = _basis(Z, defl)
    r = U.shape[1]
    if r == 0:
        return RitzSet.empty(A.n)
    AU = A.matmat(U)
    H = U.T @ AU
    eig = sym_eig_dense(H)
    nkeep = r if keep is None else min(keep, r)
    V = eig.vectors[:, :nkeep]
    mu = eig.values[:nkeep]
    Y = U @ V
    AY = A.matmat(Y)
    return RitzSet(mu, Y, ritz_residuals(A, Y, AY, mu))


def arr(A, X, p: int, defl: Deflation | None = None, keep: int | None = None) -> RitzSet:
    """Augmented Rayleigh-Ritz: RR on ``[X, AX, ..., A^p X]``, returning the
    ``keep`` leading pairs (``X.shape[1]`` by default)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    b = X.shape[1]
    if p < 0:
        raise ValueError("augmentation depth p must be >= 0")
    if (p + 1) * b >= A.n:
        raise ValueError(
            f"augmented block has {(p + 1) * b} columns for n={A.n}; reduce p or the block size"
        )
    if keep is None:
        keep = b
    if keep > (p + 1) * b:
        raise ValueError("cannot keep more pairs than the augmented block has columns")
    blocks = [X]
    for _ in range(p):
        blocks.append(A.matmat(blocks[-1]))
    return rayleigh_ritz(A, np.hstack(blocks), keep=keep, defl=defl)


def deflation_threshold(tol_t: float) -> float:
    return max(1e-14, tol_t * tol_t)


def deflate(r: RitzSet, tol_t: float) -> tuple[RitzSet, RitzSet]:
    """Split ``r`` into pairs that pass the locking test and the rest,
    both keeping their relative order."""
    ok = r.residuals <= deflation_threshold(tol_t)
    return r.take(np.flatnonzero(ok)), r.take(np.flatnonzero(~ok))


def merge(defl: Deflation, active: RitzSet) -> RitzSet:
    """Combine locked and active pairs, sorted by descending value with
    locked pairs first on ties."""
    both = RitzSet(
        np.concatenate([defl.values, active.values]),
        np.hstack([defl.Q, active.vectors]),
        np.concatenate([defl.residuals, active.residuals]),
        np.concatenate([np.ones(defl.size, dtype=bool), np.zeros(active.count, dtype=bool)]),
    )
    order = np.lexsort((~both.locked, -both.values))
    return both.take(order)


def max_residual(r: RitzSet, k: int) -> float:
    if not 1 <= k <= r.count:
        raise ValueError(f"k={k} out of range for {r.count} Ritz pairs")
    return float(np.max(r.residuals[:k]))
