"""Polynomial accelerators.

Two families are provided, both stored as monomial coefficients (leading
first) of a polynomial ``psi`` on the reference interval [-1, 1]:

* ``interpolant``: the degree-d polynomial interpolating
  ``f_d(t) = max(0, t)**(F1_EXPONENT*d)`` at the d+1 Chebyshev points of the
  second kind.  It is small on [-1, 0], equals 1 at t = 1 and grows quickly
  to the right of 1.
* ``classic-chebyshev``: the Chebyshev polynomial of the first kind T_d.

A filter carries an interval [a, b] which is mapped affinely onto [-1, 1];
``rho(t) = psi((2t - a - b)/(b - a))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import chebyshev as npcheb

__all__ = [
    "F1_EXPONENT",
    "MAX_DEGREE",
    "PolyFilter",
    "apply_filter",
    "barycentric_eval",
    "build_classic_chebyshev",
    "build_filter",
    "build_interpolant",
    "chebyshev_points",
    "eval_reference",
    "eval_scalar",
    "interpolated_function",
    "with_interval",
]

F1_EXPONENT = 10
MAX_DEGREE = 30

INTERPOLANT = "interpolant"
CLASSIC = "classic-chebyshev"


@dataclass(frozen=True)
class PolyFilter:
    degree: int
    coeffs: np.ndarray
    a: float = -1.0
    b: float = 1.0
    kind: str = INTERPOLANT

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("filter degree must be >= 1")
        if len(self.coeffs) != self.degree + 1:
            raise ValueError("need degree+1 coefficients")
        if not self.a < self.b:
            raise ValueError(f"empty filter interval [{self.a}, {self.b}]")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite filter coefficients")

    @property
    def c0(self) -> float:
        return (self.a + self.b) / (self.a - self.b)

    @property
    def c1(self) -> float:
        return 2.0 / (self.b - self.a)

    def __call__(self, t):
        return eval_scalar(self, t)


def chebyshev_points(N: int) -> np.ndarray:
    """Chebyshev points of the second kind, ``-cos(j*pi/N)``, ascending."""
    if N < 1:
        raise ValueError("N must be >= 1")
    t = -np.cos(np.arange(N + 1) * np.pi / N)
    # exact symmetry and endpoints
    t = 0.5 * (t - t[::-1])
    return t


def interpolated_function(t, d: int):
    """The target ``f_d(t) = max(0, t)**(F1_EXPONENT*d)``."""
    return np.maximum(0.0, np.asarray(t, dtype=np.float64)) ** (F1_EXPONENT * d)


def _cheb_coeffs_from_values(values: np.ndarray) -> np.ndarray:
    # values at x_j = cos(j*pi/N), j = 0..N; direct O(N^2) cosine sum
    N = len(values) - 1
    dt = values.dtype
    pi = np.arccos(np.asarray(-1.0, dtype=dt))
    j = np.arange(N + 1).astype(dt)
    w = np.ones(N + 1, dtype=dt)
    w[0] = w[-1] = 0.5
    c = np.empty(N + 1, dtype=dt)
    for k in range(N + 1):
        c[k] = (2 / dt.type(N)) * np.sum(w * values * np.cos(j * k * pi / N))
    c[0] *= 0.5
    c[N] *= 0.5
    return c


def build_interpolant(d: int) -> PolyFilter:
    """Degree-d Chebyshev interpolant of ``f_d`` on [-1, 1].

    Coefficients are formed in extended precision.  The monomial
    coefficients grow like 10**(d/4) with alternating signs, so once they
    are rounded to float64 the node condition ``psi(1) = 1`` is restored by
    adjusting the constant term (the sum of the coefficients is ``psi(1)``).
    """
    if not 1 <= d <= MAX_DEGREE:
        raise ValueError(f"interpolant degree must be in [1, {MAX_DEGREE}], got {d}")
    ld = np.longdouble
    pi = np.arccos(ld(-1.0))
    x = np.cos(np.arange(d + 1).astype(ld) * pi / d)
    x[np.abs(x) < 1e-15] = 0.0
    c = _cheb_coeffs_from_values(np.maximum(ld(0.0), x) ** (F1_EXPONENT * d))
    mono = np.asarray(npcheb.cheb2poly(c)[::-1], dtype=np.float64)
    mono[-1] += 1.0 - math.fsum(mono)
    return PolyFilter(d, mono, kind=INTERPOLANT)


def build_classic_chebyshev(d: int) -> PolyFilter:
    """Chebyshev polynomial of the first kind T_d, from the three-term recursion."""
    if d < 1:
        raise ValueError("degree must be >= 1")
    prev = np.array([1.0])  # ascending powers
    cur = np.array([0.0, 1.0])
    for _ in range(d - 1):
        nxt = np.zeros(len(cur) + 1)
        nxt[1:] = 2.0 * cur
        nxt[: len(prev)] -= prev
        prev, cur = cur, nxt
    return PolyFilter(d, cur[::-1].copy(), kind=CLASSIC)


def build_filter(kind: str, d: int) -> PolyFilter:
    if kind in (INTERPOLANT, "interp"):
        return build_interpolant(d)
    if kind in (CLASSIC, "classic", "chebyshev"):
        return build_classic_chebyshev(d)
    raise ValueError(f"unknown filter kind '{kind}'")


def with_interval(f: PolyFilter, a: float, b: float) -> PolyFilter:
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    return replace(f, a=float(a), b=float(b))


_SPLIT = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    z = s - a
    return s, (a - (s - z)) + (b - z)


def _two_prod(a, b):
    p = a * b
    ah = _SPLIT * a
    ah = ah - (ah - a)
    al = a - ah
    bh = _SPLIT * b
    bh = bh - (bh - b)
    bl = b - bh
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


def eval_reference(f: PolyFilter, s):
    """Evaluate ``psi`` at reference points ``s`` by compensated Horner.

    The error-free transformations recover the rounding of each step, so
    the result is as accurate as plain Horner in twice the working
    precision; this matters for high degrees, whose coefficients are large
    and alternate in sign.
    """
    s = np.asarray(s, dtype=np.float64)
    y = np.full_like(s, f.coeffs[0])
    c = np.zeros_like(s)
    for g in f.coeffs[1:]:
        p, pe = _two_prod(y, s)
        y, se = _two_sum(p, g)
        c = c * s + (pe + se)
    return y + c


def eval_scalar(f: PolyFilter, t):
    """Evaluate ``rho(t)``, the filter on its interval, with the same
    recurrence the matrix application uses."""
    t = np.asarray(t, dtype=np.float64)
    c0, c1 = f.c0, f.c1
    y = np.full_like(t, f.coeffs[0])
    for g in f.coeffs[1:]:
        y = c0 * y + c1 * t * y + g
    return y if y.ndim else float(y)


def barycentric_eval(f: PolyFilter, s):
    """Evaluate the interpolant through its node values with the
    second-kind barycentric formula (independent of the monomial form)."""
    if f.kind != INTERPOLANT:
        raise ValueError("barycentric evaluation needs an interpolant filter")
    d = f.degree
    x = chebyshev_points(d)
    fx = interpolated_function(x, d)
    w = (-1.0) ** np.arange(d + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    out = np.empty_like(s)
    for i, si in enumerate(s):
        diff = si - x
        hit = np.flatnonzero(diff == 0.0)
        if hit.size:
            out[i] = fx[hit[0]]
            continue
        q = w / diff
        out[i] = np.dot(q, fx) / np.sum(q)
    return out


def apply_filter(A, shift: float, X, f: PolyFilter) -> np.ndarray:
    """Compute ``rho(A - shift*I) @ X`` with ``f.degree`` block products.

    ``A`` is anything with ``matmat`` (a matrix or a counting operator).
    The Horner-style recurrence keeps two blocks alive regardless of degree.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be an n x b block")
    if X.shape[0] != A.n:
        raise ValueError(f"dimension mismatch: operator is {A.n}, X has {X.shape[0]} rows")
    c0, c1 = f.c0, f.c1
    Y = f.coeffs[0] * X
    for g in f.coeffs[1:]:
        AY = A.matmat(Y)
        if shift != 0.0:
            AY -= shift * Y
        Y *= c0
        Y += c1 * AY
        if g != 0.0:
            Y += g * X
    return Y
