import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arrabit.polyfilter import (
    MAX_DEGREE,
    PolyFilter,
    apply_filter,
    barycentric_eval,
    build_classic_chebyshev,
    build_filter,
    build_interpolant,
    chebyshev_points,
    eval_reference,
    eval_scalar,
    interpolated_function,
    with_interval,
)
from arrabit.sparsemat import SparseSymMatrix, SymOperator

from conftest import random_sym_dense


def _chebyshev_direct(d, t):
    # T_d(t) by the three-term recursion, evaluated pointwise
    t = np.asarray(t, dtype=float)
    prev, cur = np.ones_like(t), t.copy()
    if d == 0:
        return prev
    for _ in range(d - 1):
        prev, cur = cur, 2 * t * cur - prev
    return cur


def _dense_poly(f, M, X):
    # sum_j gamma_j * M^(d-j) X with explicit matrix powers
    d = f.degree
    return sum(g * np.linalg.matrix_power(M, d - j) @ X for j, g in enumerate(f.coeffs))


@pytest.mark.parametrize("N, expected", [
    (1, [-1.0, 1.0]),
    (2, [-1.0, 0.0, 1.0]),
    (4, [-1.0, -np.sqrt(2) / 2, 0.0, np.sqrt(2) / 2, 1.0]),
])
def test_chebyshev_points_examples(N, expected):
    np.testing.assert_allclose(chebyshev_points(N), expected, atol=1e-15)


def test_chebyshev_points_shape_and_symmetry():
    for N in range(1, 40):
        t = chebyshev_points(N)
        assert len(t) == N + 1 and t[0] == -1.0 and t[-1] == 1.0
        assert np.all(np.diff(t) > 0)
        np.testing.assert_array_equal(t, -t[::-1])
    with pytest.raises(ValueError):
        chebyshev_points(0)


def test_interpolant_degree_one():
    f = build_interpolant(1)
    np.testing.assert_allclose(f.coeffs, [0.5, 0.5], atol=1e-15)


@pytest.mark.parametrize("d", range(1, 16))
def test_interpolant_reproduces_nodes(d):
    f = build_interpolant(d)
    t = chebyshev_points(d)
    np.testing.assert_allclose(eval_reference(f, t), interpolated_function(t, d), atol=1e-10)
    assert abs(eval_reference(f, 1.0) - 1.0) <= 1e-10


@pytest.mark.parametrize("d", range(1, MAX_DEGREE + 1))
def test_interpolant_equals_one_at_one(d):
    assert abs(eval_reference(build_interpolant(d), 1.0) - 1.0) <= 1e-8


def test_interpolant_degree_range():
    for bad in (0, MAX_DEGREE + 1):
        with pytest.raises(ValueError):
            build_interpolant(bad)


def test_interpolant_low_on_left_half():
    s = np.linspace(-1.0, 0.0, 1000)
    assert np.abs(eval_reference(build_interpolant(8), s)).max() <= 0.25


@pytest.mark.parametrize("d", range(1, 16))
def test_monomial_agrees_with_barycentric(d):
    f = build_interpolant(d)
    s = np.linspace(-1.0, 1.0, 1000)
    assert np.abs(eval_reference(f, s) - barycentric_eval(f, s)).max() <= 1e-8


def test_classic_examples():
    np.testing.assert_array_equal(build_classic_chebyshev(2).coeffs, [2, 0, -1])
    np.testing.assert_array_equal(build_classic_chebyshev(3).coeffs, [4, 0, -3, 0])
    assert eval_reference(build_classic_chebyshev(5), 2.0) == 362.0
    f = with_interval(build_classic_chebyshev(2), -1.0, 1.0)
    assert eval_scalar(f, 0.0) == -1.0


@pytest.mark.parametrize("d", [1, 2, 5, 9, 15])
def test_classic_matches_direct_recursion(d):
    t = np.linspace(-1.2, 1.2, 100)
    f = build_classic_chebyshev(d)
    np.testing.assert_allclose(eval_reference(f, t), _chebyshev_direct(d, t), atol=1e-10)
    np.testing.assert_allclose(eval_scalar(f, t), _chebyshev_direct(d, t), atol=1e-10)


def test_build_filter_aliases():
    assert build_filter("classic", 3).kind == build_filter("classic-chebyshev", 3).kind
    assert build_filter("interp", 3).kind == "interpolant"
    with pytest.raises(ValueError):
        build_filter("bogus", 3)


def test_with_interval_maps():
    f = build_interpolant(4)
    same = with_interval(f, -1.0, 1.0)
    assert (same.c0, same.c1) == (0.0, 1.0)
    g = with_interval(f, 0.0, 2.0)
    assert (g.c0, g.c1) == (-1.0, 1.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = np.sort(rng.uniform(-5, 5, 2))
        h = with_interval(f, a, b)
        assert abs(eval_scalar(h, b) - eval_reference(f, 1.0)) <= 1e-10
        assert abs(eval_scalar(h, b) - 1.0) <= 1e-8
    with pytest.raises(ValueError):
        with_interval(f, 1.0, 1.0)


def test_polyfilter_invariants():
    with pytest.raises(ValueError):
        PolyFilter(0, np.array([1.0]))
    with pytest.raises(ValueError):
        PolyFilter(2, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        PolyFilter(1, np.array([np.inf, 0.0]))


def test_eval_scalar_matches_reference_map():
    rng = np.random.default_rng(1)
    for d in (3, 7, 12):
        f = with_interval(build_interpolant(d), 0.2, 1.7)
        t = rng.uniform(0.0, 2.0, 50)
        s = (2 * t - 0.2 - 1.7) / 1.5
        np.testing.assert_allclose(eval_scalar(f, t), eval_reference(f, s), rtol=1e-11, atol=1e-12)


def test_apply_identity_filter_is_spmv(sym40):
    f = PolyFilter(1, np.array([1.0, 0.0]))
    X = np.random.default_rng(0).standard_normal((40, 3))
    np.testing.assert_allclose(apply_filter(sym40, 0.0, X, f), sym40.matmat(X), atol=1e-14)


def test_apply_on_eigenvector():
    H = random_sym_dense(30, 4)
    lam, Q = np.linalg.eigh(H)
    A = SparseSymMatrix.from_dense(H)
    f = with_interval(build_interpolant(6), lam[0], lam[-2])
    i = 27
    Y = apply_filter(A, 0.0, Q[:, [i]], f)
    np.testing.assert_allclose(Y[:, 0], eval_scalar(f, lam[i]) * Q[:, i], rtol=1e-10,
                               atol=1e-10 * abs(eval_scalar(f, lam[i])))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("kind", ["interpolant", "classic-chebyshev"])
def test_apply_matches_dense_polynomial(seed, kind):
    rng = np.random.default_rng(seed)
    H = random_sym_dense(40, seed)
    A = SparseSymMatrix.from_dense(H)
    lam = np.linalg.eigvalsh(H)
    shift = lam[0]
    f = with_interval(build_filter(kind, 6), 0.0, lam[-5] - shift)
    X = rng.standard_normal((40, 4))
    Y = apply_filter(A, shift, X, f)
    M = f.c1 * (H - shift * np.eye(40)) + f.c0 * np.eye(40)
    ref = _dense_poly(f, M, X)
    assert np.linalg.norm(Y - ref) <= 1e-9 * np.linalg.norm(ref)


def test_spectral_mapping(sym40):
    H = sym40.to_dense()
    lam, Q = np.linalg.eigh(H)
    f = with_interval(build_interpolant(5), lam[0], lam[-4])
    Y = apply_filter(sym40, 0.0, Q, f)
    np.testing.assert_allclose(Y, Q * eval_scalar(f, lam), atol=1e-9 * np.abs(Y).max())


def test_apply_counts_exactly_d_block_products(sym40):
    op = SymOperator(sym40)
    X = np.ones((40, 5))
    apply_filter(op, 0.3, X, with_interval(build_interpolant(7), 0.0, 1.0))
    assert op.spmv_count == 7 * 5


def test_apply_dimension_mismatch(sym40):
    with pytest.raises(ValueError):
        apply_filter(sym40, 0.0, np.ones((39, 2)), build_interpolant(3))


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 12), t=st.floats(-3.0, 3.0), a=st.floats(-2.0, 0.0),
       w=st.floats(0.1, 4.0))
def test_scalar_matches_one_by_one_matrix(d, t, a, w):
    f = with_interval(build_interpolant(d), a, a + w)
    A = SparseSymMatrix.from_dense([[t]])
    y = apply_filter(A, 0.0, np.ones((1, 1)), f)[0, 0]
    assert abs(y - eval_scalar(f, t)) <= 1e-12 * max(1.0, abs(y))
