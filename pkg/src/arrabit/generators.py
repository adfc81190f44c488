"""Synthetic symmetric test matrices with prescribed spectra."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.stats import ortho_group

from .sparsemat import SparseSymMatrix

__all__ = [
    "PROFILES",
    "from_spectrum",
    "make_profile",
    "random_orthogonal",
    "random_sparse_symmetric",
    "spectrum",
]

PROFILES = ("diag", "flat", "geometric", "clustered", "linear", "random")


def spectrum(profile: str, n: int, gap: float | None = None, step: float = 5e-4) -> np.ndarray:
    """Descending eigenvalues for a named profile.

    ``diag``      n, n-1, ..., 1
    ``flat``      geometric with ratio ``gap`` (default 0.99): slow decay
    ``geometric`` geometric with ratio ``gap`` (default 0.8): fast decay
    ``clustered`` five tight clusters of equal width with a wide gap between them
    ``linear``    1 - step*i, i = 1..n
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    i = np.arange(n, dtype=np.float64)
    if profile == "diag":
        return np.arange(n, 0, -1, dtype=np.float64)
    if profile in ("flat", "geometric"):
        r = gap if gap is not None else (0.99 if profile == "flat" else 0.8)
        if not 0.0 < r < 1.0:
            raise ValueError("gap must lie in (0, 1)")
        return r ** i
    if profile == "clustered":
        centers = np.array([10.0, 8.0, 6.0, 4.0, 2.0])
        which = np.minimum((i * 5) // n, 4).astype(np.int64)
        jitter = 1e-3 * np.linspace(0.0, 1.0, n)
        return np.sort(centers[which] - jitter)[::-1]
    if profile == "linear":
        return 1.0 - step * (i + 1)
    raise ValueError(f"unknown profile '{profile}' (choose from {', '.join(PROFILES)})")


def random_orthogonal(n: int, rng) -> np.ndarray:
    """Haar-distributed orthogonal matrix (product of Householder reflectors)."""
    if n == 1:
        return np.ones((1, 1))
    return ortho_group.rvs(n, random_state=rng)


def from_spectrum(lam, rng) -> SparseSymMatrix:
    """``Q diag(lam) Q^T`` with a random orthogonal ``Q``, stored densely in CSR."""
    lam = np.asarray(lam, dtype=np.float64)
    Q = random_orthogonal(len(lam), rng)
    M = (Q * lam) @ Q.T
    return SparseSymMatrix.from_dense(0.5 * (M + M.T))


def random_sparse_symmetric(n: int, density: float, rng) -> SparseSymMatrix:
    """Symmetric matrix with about ``density*n*n`` standard normal nonzeros."""
    M = sp.random(n, n, density=density / 2, random_state=rng, data_rvs=rng.standard_normal,
                  format="csr")
    return SparseSymMatrix.from_scipy(M + M.T)


def make_profile(profile: str, n: int, seed: int = 0, gap: float | None = None,
                 density: float = 0.05, step: float = 5e-4) -> SparseSymMatrix:
    rng = np.random.default_rng(seed)
    if profile == "diag":
        return SparseSymMatrix.diag(spectrum("diag", n))
    if profile == "random":
        return random_sparse_symmetric(n, density, rng)
    return from_spectrum(spectrum(profile, n, gap=gap, step=step), rng)
