"""Sparse symmetric eigensolver with polynomial-filtered block updates and
augmented Rayleigh-Ritz projections."""

from .driver import IterationRecord, SolveResult, SolverConfig, solve
from .sparsemat import SparseSymMatrix, load_matrix_market, write_matrix_market

__all__ = [
    "IterationRecord",
    "SolveResult",
    "SolverConfig",
    "SparseSymMatrix",
    "load_matrix_market",
    "solve",
    "write_matrix_market",
]

__version__ = "0.1.0"
