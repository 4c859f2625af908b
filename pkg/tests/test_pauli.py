import itertools
import math

import numpy as np
import pytest

from qemtp.errors import DimensionError, InvalidParameterError
from qemtp.pauli import (
    PauliDecomposition, PauliString, all_codes, circuits_reduced, effective_basis_bounds, gkd, is_odd_y,
    mapping_error, mlqc_decompose, naive_pauli_decompose, naive_pauli_decompose_reference, nkd, rearrange,
    split_dims, unrearrange, y_counts,
)

from conftest import random_symmetric

X = np.array([[0, 1], [1, 0]])
Y = np.array([[0, -1j], [1j, 0]])


# ---- strings ---------------------------------------------------------------

@pytest.mark.parametrize("s,odd", [("IY", True), ("YY", False), ("XYZ", True), ("IIII", False)])
def test_is_odd_y(s, odd):
    assert is_odd_y(s) is odd
    assert is_odd_y(PauliString(s)) is odd


def test_string_matrix_is_kron_left_to_right():
    np.testing.assert_array_equal(PauliString("XY").matrix(), np.kron(X, Y))


def test_string_code_roundtrip():
    for code in range(64):
        assert PauliString.from_code(code, 3).code == code


def test_bad_letter_rejected():
    with pytest.raises(InvalidParameterError):
        PauliString("IQ")


# ---- naive mapping ---------------------------------------------------------

def test_naive_two_by_two(backend):
    d = naive_pauli_decompose(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert d.as_dict() == pytest.approx({"I": 2.0, "X": 1.0})


def test_naive_identity(backend):
    d = naive_pauli_decompose(np.eye(4))
    assert d.as_dict() == {"II": 1.0}


def test_naive_complex_y(backend):
    d = naive_pauli_decompose(Y)
    assert list(d.as_dict()) == ["Y"]
    assert d.coefficient("Y") == pytest.approx(1.0)


def test_naive_matches_dense_oracle(backend, rng):
    for dim in (2, 4, 8, 16):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        fast = naive_pauli_decompose(g).dense_coefficients()
        ref = naive_pauli_decompose_reference(g).dense_coefficients()
        assert np.max(np.abs(fast - ref)) < 1e-12


def test_naive_reconstruction(backend, rng):
    for dim in (4, 16, 64):
        g = random_symmetric(dim, rng)
        assert mapping_error(g, naive_pauli_decompose(g)) <= 1e-13


def test_naive_rejects_bad_dimension(backend):
    with pytest.raises(DimensionError):
        naive_pauli_decompose(np.eye(3))
    with pytest.raises(DimensionError):
        naive_pauli_decompose(np.ones((2, 4)))


def test_symmetric_filter_skips_exactly_odd_y(backend, rng):
    g = random_symmetric(16, rng)
    full = naive_pauli_decompose(g)
    filt = naive_pauli_decompose(g, symmetric_filter=True)
    dense = naive_pauli_decompose_reference(g).dense_coefficients()
    odd = y_counts(all_codes(4), 4) % 2 == 1
    assert np.max(np.abs(dense[odd])) <= 1e-14
    assert all(s.y_count() % 2 == 0 for s in filt.strings)
    np.testing.assert_allclose(full.dense_coefficients(), filt.dense_coefficients(), atol=1e-15)


def test_parseval(backend, rng):
    g = random_symmetric(32, rng)
    d = naive_pauli_decompose(g)
    assert np.sum(np.abs(d.coeffs) ** 2) * 2**5 == pytest.approx(np.linalg.norm(g) ** 2, rel=1e-13)


# ---- decomposition container ----------------------------------------------

def test_text_roundtrip_sorted(rng):
    g = random_symmetric(8, rng)
    d = naive_pauli_decompose(g)
    text = d.to_text()
    names = [line.split()[0] for line in text.splitlines()]
    assert names == sorted(names)
    back = PauliDecomposition.from_text(text)
    np.testing.assert_array_equal(back.codes, d.codes)
    np.testing.assert_allclose(back.coeffs, d.coeffs, rtol=0, atol=0)


def test_drop_tolerance_applied():
    d = PauliDecomposition.from_items(1, [("I", 1.0), ("X", 1e-15), ("Z", 2e-14)])
    assert [str(s) for s in d.strings] == ["I", "Z"]


def test_mapping_error_single_zeroed_coefficient(rng):
    g = random_symmetric(8, rng)
    d = naive_pauli_decompose(g)
    k = 3
    c = d.coeffs[k]
    trimmed = PauliDecomposition(d.n_qubits, np.delete(d.codes, k), np.delete(d.coeffs, k))
    expected = abs(c) * 2 ** (3 / 2) / np.linalg.norm(g)
    assert mapping_error(g, trimmed) == pytest.approx(expected, rel=1e-12)


def test_mapping_error_empty_and_zero():
    assert mapping_error(np.eye(2), PauliDecomposition(1, [], [])) == 1.0
    with pytest.raises(InvalidParameterError):
        mapping_error(np.zeros((2, 2)), PauliDecomposition(1, [], []))


# ---- rearrangement and Kronecker factors ------------------------------------

def test_rearrange_identity_rank_one():
    r = rearrange(np.eye(4), (2, 2, 2, 2))
    assert np.linalg.matrix_rank(r) == 1


def test_rearrange_kron_is_outer_product(rng):
    a, b = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    r = rearrange(np.kron(a, b), (2, 2, 2, 2))
    np.testing.assert_allclose(r, np.outer(a.ravel(order="F"), b.ravel(order="F")), atol=1e-15)
    s = np.linalg.svd(r, compute_uv=False)
    assert s[0] == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b))
    assert s[1] < 1e-14


def test_rearrange_bijection(rng):
    g = rng.standard_normal((8, 8))
    dims = (4, 4, 2, 2)
    np.testing.assert_array_equal(unrearrange(rearrange(g, dims), dims), g)


def test_rearrange_dimension_mismatch():
    with pytest.raises(DimensionError):
        rearrange(np.eye(8), (2, 2, 2, 2))


def test_split_dims_larger_half_left():
    assert split_dims(5) == (3, 2)
    assert split_dims(4) == (2, 2)


def test_gkd_full_rank_lossless(rng):
    g = random_symmetric(32, rng)
    fs = gkd(g)
    assert np.linalg.norm(g - fs.to_matrix()) <= 1e-12 * np.linalg.norm(g)
    assert np.all(np.diff(fs.singular_values) <= 1e-15)


def test_gkd_tail_norm_every_rank(rng):
    for g in (random_symmetric(16, rng), rng.standard_normal((16, 16))):
        s = gkd(g).singular_values
        for r in range(1, len(s) + 1):
            fs = gkd(g, r)
            err = np.linalg.norm(g - fs.to_matrix())
            assert abs(err - np.sqrt(np.sum(s[r:] ** 2))) <= 1e-12
            assert fs.tail_norm() == pytest.approx(np.sqrt(np.sum(s[r:] ** 2)), abs=1e-12)


def test_gkd_rank_out_of_range(rng):
    g = random_symmetric(8, rng)
    for bad in (0, 17, -1):
        with pytest.raises(InvalidParameterError):
            gkd(g, bad)


def test_nkd_recovers_kron(rng):
    a, b = rng.standard_normal((4, 4)), rng.standard_normal((2, 2))
    left, right = nkd(np.kron(a, b))
    np.testing.assert_allclose(np.kron(left, right), np.kron(a, b), atol=1e-13)
    left, right = nkd(np.eye(8))
    np.testing.assert_allclose(np.kron(left, right), np.eye(8), atol=1e-14)


def test_nkd_eckart_young(rng):
    g = random_symmetric(16, rng)
    s = gkd(g).singular_values
    left, right = nkd(g)
    assert np.linalg.norm(g - np.kron(left, right)) == pytest.approx(np.sqrt(np.sum(s[1:] ** 2)), abs=1e-12)


def test_gkd_symmetric_parity_pairs(rng):
    fs = gkd(random_symmetric(16, rng))
    for (a, b), p in zip(fs.factors, fs.parity):
        sign = -1 if p else 1
        np.testing.assert_allclose(a.T, sign * a, atol=1e-13)
        np.testing.assert_allclose(b.T, sign * b, atol=1e-13)


# ---- MLQC ----------------------------------------------------------------

def test_mlqc_identity_rank_one(backend):
    d = mlqc_decompose(np.eye(4), 1)
    assert d.as_dict() == pytest.approx({"II": 1.0})


@pytest.mark.parametrize("dim", [2, 4, 8, 16, 32, 64, 128])
def test_mlqc_matches_naive(backend, rng, dim):
    g = random_symmetric(dim, rng)
    a = naive_pauli_decompose(g).dense_coefficients()
    b = mlqc_decompose(g).dense_coefficients()
    assert np.max(np.abs(a - b)) <= 1e-12


def test_mlqc_nonsymmetric_and_complex(backend, rng):
    g = rng.standard_normal((16, 16))
    a = naive_pauli_decompose(g).dense_coefficients()
    b = mlqc_decompose(g).dense_coefficients()
    assert np.max(np.abs(a - b)) <= 1e-12
    with pytest.raises(DimensionError):
        mlqc_decompose(g + 1j * g)


def test_mlqc_truncated_error_is_tail(backend, rng):
    g = random_symmetric(64, rng)
    s = gkd(g).singular_values
    for r in (1, 2, 8, 32, 63):
        d = mlqc_decompose(g, r)
        assert d.provenance == f"mlqc{{R={r}}}"
        tail = np.sqrt(np.sum(s[r:] ** 2)) / np.linalg.norm(g)
        assert abs(mapping_error(g, d) - tail) <= 1e-12


def test_mlqc_never_produces_odd_y(backend, rng):
    d = mlqc_decompose(random_symmetric(32, rng), 5)
    assert all(s.y_count() % 2 == 0 for s in d.strings)


def test_mlqc_large_factor_fallback(backend, rng):
    # 11 qubits splits 6/5; the 6-qubit factors go through the trace kernel
    g = random_symmetric(2048, rng)
    d = mlqc_decompose(g, 2)
    fs = gkd(g, 2)
    grid = sum(np.outer(naive_pauli_decompose(a).dense_coefficients(), naive_pauli_decompose(b).dense_coefficients())
               for a, b in fs.factors)
    assert np.max(np.abs(d.dense_coefficients() - grid.ravel())) < 1e-12


# ---- counting ------------------------------------------------------------

def _brute_even_y(n):
    return sum(1 for s in itertools.product("IXYZ", repeat=n) if s.count("Y") % 2 == 0)


@pytest.mark.parametrize("n,expected", [(1, (2, 3)), (2, (4, 10)), (3, (8, 36))])
def test_effective_basis_bounds(n, expected):
    assert effective_basis_bounds(n) == expected
    assert effective_basis_bounds(n)[1] == _brute_even_y(n)


def test_effective_basis_upper_matches_enumeration():
    for n in range(1, 7):
        assert effective_basis_bounds(n)[1] == _brute_even_y(n) == len(all_codes(n, even_y_only=True))


def test_effective_basis_bounds_invalid():
    with pytest.raises(InvalidParameterError):
        effective_basis_bounds(0)


@pytest.mark.parametrize("n,t,saved", [(2, 8, 128), (3, 30, 2700), (2, 0, 0)])
def test_circuits_reduced(n, t, saved):
    assert circuits_reduced(n, t) == saved


def test_term_count_within_bound(rng):
    for n in range(1, 6):
        d = naive_pauli_decompose(random_symmetric(2**n, rng), symmetric_filter=True)
        assert len(d) <= effective_basis_bounds(n)[1]


def test_bounds_formula_is_closed_form():
    # even-Y strings of n qubits: (4^n + 2^n) / 2
    for n in range(1, 9):
        assert effective_basis_bounds(n)[1] == (4**n + 2**n) // 2
        assert effective_basis_bounds(n)[1] == sum(math.comb(n, 2 * i) * 3 ** (n - 2 * i) for i in range(n // 2 + 1))
