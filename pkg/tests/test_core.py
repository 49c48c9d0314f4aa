import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inflation.core import (
    ConvergenceRecord,
    EigenpairSet,
    MatvecCounter,
    SparseSymMatrix,
    SpectralBounds,
    StateVector,
    Trace,
    canonical_sign,
    gershgorin_bounds,
    matvec,
    normalize,
    rayleigh_quotient,
    residual_measure,
)
from inflation.io import generate

from .strategies import nonzero_vectors, sym_matrices

SWAP = SparseSymMatrix.from_dense([[0.0, 1.0], [1.0, 0.0]])
D12 = SparseSymMatrix.from_diagonal([1.0, 2.0])
J21 = SparseSymMatrix.from_dense([[2.0, 1.0], [1.0, 2.0]])


# -- construction -----------------------------------------------------------


def test_from_triplets_sums_duplicates():
    A = SparseSymMatrix.from_triplets(2, [0, 0, 1, 0, 1], [0, 0, 1, 1, 0], [1.0, 2.0, 5.0, 1.0, 1.0])
    np.testing.assert_array_equal(A.to_dense(), [[3.0, 1.0], [1.0, 5.0]])


@pytest.mark.parametrize(
    "n,ro,ci,va,msg",
    [
        (2, [0, 1, 2], [1, 0], [1.0, 2.0], "symmetric"),
        (2, [0, 2, 2], [1, 0], [1.0, 1.0], "increasing"),
        (2, [1, 1, 2], [0], [1.0], "start at 0"),
        (2, [0, 1, 2], [0, 2], [1.0, 1.0], "out of range"),
        (1, [0, 1], [0], [np.inf], "finite"),
        (2, [0, 2, 1], [0, 1], [1.0, 1.0], "nondecreasing"),
    ],
)
def test_invalid_csr_rejected(n, ro, ci, va, msg):
    with pytest.raises(ValueError, match=msg):
        SparseSymMatrix(n, ro, ci, va)


def test_structural_asymmetry_rejected():
    # (0,1) stored without (1,0)
    with pytest.raises(ValueError, match="symmetric"):
        SparseSymMatrix(2, [0, 2, 3], [0, 1, 1], [1.0, 1.0, 1.0])


def test_arrays_are_read_only():
    A = SparseSymMatrix.identity(3)
    with pytest.raises(ValueError):
        A.values[0] = 2.0


# -- matvec -----------------------------------------------------------------


def test_matvec_identity_and_diagonal():
    np.testing.assert_array_equal(matvec(SparseSymMatrix.identity(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(matvec(D12, [1.0, 1.0]), [1.0, 2.0])


def test_matvec_random_against_dense_rows():
    A = generate("random_sparse:50:0.1:5")
    v = np.random.default_rng(0).standard_normal(50)
    D = A.to_dense()
    ref = np.array([sum(D[i, j] * v[j] for j in range(50)) for i in range(50)])
    np.testing.assert_allclose(matvec(A, v), ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_matvec_counts_and_blocks():
    c = MatvecCounter()
    matvec(D12, [1.0, 0.0], c)
    matvec(D12, np.ones((2, 3)), c)
    assert c.count == 4


def test_matvec_dimension_mismatch():
    with pytest.raises(ValueError):
        matvec(D12, [1.0, 2.0, 3.0])


@settings(max_examples=50, deadline=None)
@given(sym_matrices(), st.integers(0, 2**32 - 1))
def test_matvec_is_symmetric(A, seed):
    rng = np.random.default_rng(seed)
    v, w = rng.standard_normal(A.n), rng.standard_normal(A.n)
    lhs, rhs = w @ matvec(A, v), v @ matvec(A, w)
    scale = np.abs(A.values).sum() * np.linalg.norm(v) * np.linalg.norm(w) + 1e-300
    assert abs(lhs - rhs) <= 1e-12 * scale


# -- Rayleigh quotient and residual ----------------------------------------


@pytest.mark.parametrize(
    "A,x,expected",
    [(D12, [1.0, 0.0], 1.0), (J21, [1.0, 1.0], 3.0), (SWAP, [1.0, 0.0], 0.0)],
)
def test_rayleigh_examples(A, x, expected):
    assert rayleigh_quotient(A, x) == pytest.approx(expected, abs=1e-15)


def test_rayleigh_reuses_product():
    c = MatvecCounter()
    x = np.array([1.0, 1.0])
    y = matvec(J21, x, c)
    rayleigh_quotient(J21, x, y, counter=c)
    residual_measure(J21, x, 3.0, y, counter=c)
    assert c.count == 1


@pytest.mark.parametrize(
    "A,x,lam,expected",
    [
        (D12, [1.0, 0.0], 1.0, 0.0),
        (SWAP, [1.0, 0.0], 0.0, 1.0),
        (D12, [math.sqrt(2) / 2, math.sqrt(2) / 2], 1.5, 0.25),
    ],
)
def test_residual_examples(A, x, lam, expected):
    assert residual_measure(A, x, lam) == pytest.approx(expected, abs=1e-15)


def test_zero_vector_rejected():
    with pytest.raises(ValueError):
        rayleigh_quotient(D12, [0.0, 0.0])
    with pytest.raises(ValueError):
        residual_measure(D12, [0.0, 0.0], 1.0)


@settings(max_examples=60, deadline=None)
@given(sym_matrices(), st.data())
def test_rayleigh_within_gershgorin(A, data):
    x = data.draw(nonzero_vectors(A.n))
    b = gershgorin_bounds(A)
    lam = rayleigh_quotient(A, x)
    slack = 1e-12 * max(1.0, abs(b.lo), abs(b.hi))
    assert b.lo - slack <= lam <= b.hi + slack


@settings(max_examples=60, deadline=None)
@given(sym_matrices(), st.data(), st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3))
def test_scale_invariance(A, data, c):
    x = data.draw(nonzero_vectors(A.n))
    lam = rayleigh_quotient(A, x)
    assert rayleigh_quotient(A, c * x) == pytest.approx(lam, rel=1e-10, abs=1e-10)
    mu = residual_measure(A, x, lam)
    assert residual_measure(A, c * x, lam) == pytest.approx(mu, rel=1e-8, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(sym_matrices(max_n=20), st.data(), st.floats(-5, 5))
def test_mu_bounded_below_by_spectrum(A, data, lam):
    x = data.draw(nonzero_vectors(A.n))
    e = np.linalg.eigvalsh(A.to_dense())
    assert residual_measure(A, x, lam) >= np.min((e - lam) ** 2) * (1 - 1e-9) - 1e-12


# -- normalize, bounds, signs ----------------------------------------------


@pytest.mark.parametrize(
    "v,expected", [([3.0, 4.0], [0.6, 0.8]), ([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]), ([-2.0, 0.0], [-1.0, 0.0])]
)
def test_normalize_examples(v, expected):
    np.testing.assert_allclose(normalize(v), expected, atol=1e-16)


@pytest.mark.parametrize("v", [[0.0, 0.0], [np.nan, 1.0], [np.inf, 0.0]])
def test_normalize_rejects(v):
    with pytest.raises(ValueError):
        normalize(v)


@pytest.mark.parametrize(
    "A,expected",
    [(D12, (1.0, 2.0)), (J21, (1.0, 3.0)), (generate("laplacian1d:10"), (0.0, 4.0))],
)
def test_gershgorin_examples(A, expected):
    b = gershgorin_bounds(A)
    assert (b.lo, b.hi) == expected


@settings(max_examples=40, deadline=None)
@given(sym_matrices())
def test_gershgorin_contains_spectrum(A):
    b = gershgorin_bounds(A)
    e = np.linalg.eigvalsh(A.to_dense())
    tol = 1e-12 * max(1.0, abs(b.lo), abs(b.hi))
    assert b.lo - tol <= e[0] and e[-1] <= b.hi + tol


def test_spectral_bounds_order():
    with pytest.raises(ValueError):
        SpectralBounds(1.0, 0.0)
    assert SpectralBounds(-1.0, 3.0).width == 4.0


def test_canonical_sign():
    np.testing.assert_array_equal(canonical_sign([0.1, -0.9]), [-0.1, 0.9])
    V = canonical_sign(np.array([[1.0, -0.2], [-2.0, 0.1]]))
    np.testing.assert_array_equal(V, [[-1.0, 0.2], [2.0, -0.1]])


# -- containers -------------------------------------------------------------


def test_state_vector_shapes():
    with pytest.raises(ValueError):
        StateVector([1.0, 2.0], [0.0])
    s = StateVector.at_rest([1.0, 2.0])
    assert s.is_finite() and not s.p.any()
    assert not StateVector([np.nan], [0.0]).is_finite()


def test_trace_requires_nondecreasing_m():
    t = Trace()
    t.append(ConvergenceRecord(0, 1, 0.5, 1.0, 0.1, 0.6))
    t.append(ConvergenceRecord(1, 1, 0.4, 0.5, 0.1, 0.5))
    with pytest.raises(ValueError):
        t.append(ConvergenceRecord(2, 0, 0.4, 0.5, 0.1, 0.5))
    assert t.first_m_below(0.7) == 1 and t.first_m_below(0.1) is None
    np.testing.assert_array_equal(t.mu, [1.0, 0.5])


def test_eigenpair_set_sorts():
    s = EigenpairSet([2.0, 1.0], np.eye(2), [0.0, 1e-3], [True, False])
    np.testing.assert_array_equal(s.values, [1.0, 2.0])
    np.testing.assert_array_equal(s.vector(0), [0.0, 1.0])
    assert list(s.converged) == [False, True] and not s.all_converged
