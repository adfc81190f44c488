import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from arrabit.sparsemat import (
    MatrixMarketError,
    SparseSymMatrix,
    SpmvCounter,
    SymOperator,
    gershgorin_bounds,
    load_matrix_market,
    set_threads,
    shifted_spmv_block,
    spmv_block,
    write_matrix_market,
)

from conftest import random_sym_dense, random_sym_sparse


def _write(tmp_path, text, name="m.mtx"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_diagonal(tmp_path):
    path = _write(tmp_path, "%%MatrixMarket matrix coordinate real symmetric\n"
                            "% comment\n3 3 3\n1 1 1.0\n2 2 2.0\n3 3 3.0\n")
    A = load_matrix_market(path)
    assert A.n == 3 and A.nnz == 3
    np.testing.assert_array_equal(A.to_dense(), np.diag([1.0, 2.0, 3.0]))


def test_load_symmetric_mirrors_offdiagonal(tmp_path):
    path = _write(tmp_path, "%%MatrixMarket matrix coordinate real symmetric\n"
                            "2 2 3\n1 1 1\n2 1 5.0\n2 2 1\n")
    D = load_matrix_market(path).to_dense()
    assert D[1, 0] == 5.0 and D[0, 1] == 5.0


def test_load_general_symmetric_pattern(tmp_path):
    path = _write(tmp_path, "%%MatrixMarket matrix coordinate real general\n"
                            "2 2 4\n1 1 1\n1 2 3\n2 1 3\n2 2 4\n")
    np.testing.assert_array_equal(load_matrix_market(path).to_dense(), [[1, 3], [3, 4]])


def test_load_integer_field_and_duplicates_summed(tmp_path):
    path = _write(tmp_path, "%%MatrixMarket matrix coordinate integer symmetric\n"
                            "2 2 3\n1 1 1\n1 1 2\n2 2 7\n")
    np.testing.assert_array_equal(load_matrix_market(path).to_dense(), [[3, 0], [0, 7]])


@pytest.mark.parametrize("text, match", [
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1.0\n2 1 2.0\n", "symmetric"),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1.0\n", "square"),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n", "line 3"),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n", "entries"),
    ("%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1 0\n", "complex"),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 abc\n", "line 3"),
    ("not a header\n", "line 1"),
])
def test_load_rejects_bad_files(tmp_path, text, match):
    with pytest.raises(MatrixMarketError, match=match):
        load_matrix_market(_write(tmp_path, text))


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_matrix_market(tmp_path / "absent.mtx")


def test_round_trip_is_idempotent(tmp_path):
    A = random_sym_sparse(60, 1, density=0.1)
    write_matrix_market(tmp_path / "a.mtx", A)
    B = load_matrix_market(tmp_path / "a.mtx")
    write_matrix_market(tmp_path / "b.mtx", B)
    C = load_matrix_market(tmp_path / "b.mtx")
    for M in (B, C):
        assert (M.n, M.nnz) == (A.n, A.nnz)
        np.testing.assert_array_equal(M.indptr, A.indptr)
        np.testing.assert_array_equal(M.indices, A.indices)
        np.testing.assert_array_equal(M.data, A.data)


def test_invariants_sorted_no_duplicates_symmetric():
    M = sp.coo_matrix(([1.0, 1.0, 2.0, 2.0], ([0, 0, 1, 0], [1, 1, 0, 0])), shape=(2, 2))
    A = SparseSymMatrix.from_scipy(M)
    np.testing.assert_array_equal(A.to_dense(), [[2.0, 2.0], [2.0, 0.0]])
    for i in range(A.n):
        row = A.indices[A.indptr[i]:A.indptr[i + 1]]
        assert np.all(np.diff(row) > 0)
    D = A.to_dense()
    np.testing.assert_array_equal(D, D.T)


def test_rejects_asymmetric_and_nonsquare():
    with pytest.raises(ValueError):
        SparseSymMatrix.from_dense([[1.0, 2.0], [2.0 + 1e-6, 1.0]])
    with pytest.raises(ValueError):
        SparseSymMatrix.from_dense(np.ones((2, 3)))


def test_immutable_arrays():
    A = SparseSymMatrix.diag([1.0, 2.0])
    with pytest.raises(ValueError):
        A.data[0] = 5.0


def test_spmv_examples():
    A = SparseSymMatrix.diag([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(spmv_block(A, np.ones((3, 1)))[:, 0], [1, 2, 3])
    np.testing.assert_array_equal(shifted_spmv_block(A, 1.0, np.ones(3))[:, 0], [0, 1, 2])
    Z = SparseSymMatrix.from_dense(np.zeros((4, 4)))
    assert not np.any(spmv_block(Z, np.random.default_rng(0).standard_normal((4, 3))))


def test_spmv_matches_dense_and_counts():
    D = random_sym_dense(50, 2)
    A = SparseSymMatrix.from_dense(D)
    X = np.random.default_rng(5).standard_normal((50, 7))
    c = SpmvCounter()
    Y = spmv_block(A, X, c)
    assert c.count == 7
    np.testing.assert_allclose(Y, D @ X, rtol=1e-13, atol=1e-13 * np.abs(D @ X).max())
    np.testing.assert_array_equal(shifted_spmv_block(A, 0.0, X), Y)
    np.testing.assert_allclose(shifted_spmv_block(A, 0.7, X, c), (D - 0.7 * np.eye(50)) @ X,
                               atol=1e-12)
    assert c.count == 14


def test_spmv_dimension_mismatch():
    A = SparseSymMatrix.diag([1.0, 2.0])
    with pytest.raises(ValueError):
        spmv_block(A, np.ones((3, 1)))


def test_unit_vectors_reproduce_columns_exhaustively():
    A = random_sym_sparse(200, 7, density=0.05)
    D = A.to_dense()
    np.testing.assert_array_equal(spmv_block(A, np.eye(200)), D)


def test_parallel_kernel_matches_sequential():
    A = random_sym_sparse(300, 4)
    X = np.random.default_rng(1).standard_normal((300, 13))
    seq = A.matmat(X)
    set_threads(2)
    try:
        par = A.matmat(X)
    finally:
        set_threads(0)
    # row-local accumulation: identical order, identical bits
    np.testing.assert_array_equal(seq, par)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 40), b=st.integers(1, 12), seed=st.integers(0, 10_000))
def test_operator_symmetry_property(n, b, seed):
    A = SparseSymMatrix.from_dense(random_sym_dense(n, seed))
    rng = np.random.default_rng(seed + 1)
    X = rng.standard_normal((n, b))
    Y = rng.standard_normal((n, b))
    lhs = Y.T @ A.matmat(X)
    rhs = A.matmat(Y).T @ X
    norm1 = np.abs(A.to_dense()).sum(axis=0).max()
    assert np.abs(lhs - rhs).max() <= 1e-12 * norm1 * np.linalg.norm(X) * np.linalg.norm(Y)


def test_gershgorin_examples():
    assert gershgorin_bounds(SparseSymMatrix.diag([1.0, 2.0, 3.0])) == (1.0, 3.0)
    assert gershgorin_bounds(SparseSymMatrix.from_dense([[2.0, 1.0], [1.0, 2.0]])) == (1.0, 3.0)


@pytest.mark.parametrize("seed", range(5))
def test_gershgorin_contains_spectrum(seed):
    A = random_sym_sparse(80, seed, density=0.1)
    lo, hi = gershgorin_bounds(A)
    w = np.linalg.eigvalsh(A.to_dense())
    assert lo <= w[0] and w[-1] <= hi


def test_sym_operator_scale_shift_and_count():
    A = SparseSymMatrix.diag([1.0, 2.0, 3.0])
    op = SymOperator(A, scale=-1.0, shift=10.0)
    Y = op.matmat(np.eye(3))
    np.testing.assert_array_equal(np.diag(Y), [9.0, 8.0, 7.0])
    assert op.spmv_count == 3
    np.testing.assert_array_equal(op.to_original(np.array([9.0, 7.0])), [1.0, 3.0])
    assert op.gershgorin_bounds() == (7.0, 9.0)
