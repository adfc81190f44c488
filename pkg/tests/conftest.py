import numpy as np
import pytest

from arrabit.generators import random_sparse_symmetric
from arrabit.sparsemat import SparseSymMatrix, set_threads


@pytest.fixture(autouse=True)
def sequential_kernels():
    set_threads(0)
    yield


def random_sym_dense(n, seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    return 0.5 * (G + G.T)


def random_sym_sparse(n, seed, density=0.05):
    return random_sparse_symmetric(n, density, np.random.default_rng(seed))


@pytest.fixture
def sym40():
    return SparseSymMatrix.from_dense(random_sym_dense(40, 3))


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion and assert it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def record(number: int, ok: bool, detail: str) -> None:
        lines[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, lines[number]

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
