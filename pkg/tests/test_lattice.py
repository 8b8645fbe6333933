from fractions import Fraction

import numpy as np
import pytest

from nctorus.lattice import (
    fraction_det,
    fraction_matrix,
    fraction_nullspace,
    fraction_rref,
    fraction_solve,
    integer_kernel,
    is_positive_definite_exact,
    lll_reduce,
    primitive_vector,
)


def test_fraction_rref_and_solve():
    A = fraction_matrix([[2, 1], [1, 3]])
    X = fraction_solve(A, [[Fraction(1)], [Fraction(0)]])
    assert X[0][0] == Fraction(3, 5) and X[1][0] == Fraction(-1, 5)
    R, pivots = fraction_rref(fraction_matrix([[1, 2, 3], [2, 4, 6]]))
    assert pivots == [0]
    with pytest.raises(ValueError):
        fraction_solve(fraction_matrix([[1, 2], [2, 4]]), [[Fraction(1)], [Fraction(1)]])


def test_fraction_det():
    assert fraction_det(fraction_matrix([[2, 1], [1, 3]])) == 5
    assert fraction_det(fraction_matrix([[1, 2], [2, 4]])) == 0
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = rng.integers(-5, 6, size=(4, 4))
        assert fraction_det(fraction_matrix(A.tolist())) == round(np.linalg.det(A))


def test_nullspace_matches_rank():
    rng = np.random.default_rng(1)
    for _ in range(20):
        A = rng.integers(-4, 5, size=(3, 5)).tolist()
        basis = fraction_nullspace(fraction_matrix(A))
        assert len(basis) == 5 - np.linalg.matrix_rank(np.array(A))
        for v in basis:
            for row in A:
                assert sum(Fraction(int(x)) * y for x, y in zip(row, v)) == 0


def test_integer_kernel_saturated():
    # the HNF kernel picks up integer vectors missed by naive denominator
    # clearing: x + 2y + 3z = 0 has the full rank-2 saturated solution lattice
    A = [[1, 2, 3]]
    basis = integer_kernel(A)
    assert len(basis) == 2
    span = np.abs(np.linalg.det(np.array([b[:2] for b in basis]).astype(float)))
    for v in basis:
        assert sum(a * x for a, x in zip(A[0], v)) == 0
    # (1, 1, -1) must be an integer combination of the basis
    target = np.array([1, 1, -1])
    M = np.array(basis).T
    coeffs, res, *_ = np.linalg.lstsq(M.astype(float), target, rcond=None)
    assert np.allclose(M @ np.rint(coeffs), target)


def test_integer_kernel_random():
    rng = np.random.default_rng(2)
    for _ in range(40):
        m, n = rng.integers(1, 5), rng.integers(2, 7)
        A = rng.integers(-6, 7, size=(m, n)).tolist()
        basis = integer_kernel(A)
        assert len(basis) == len(fraction_nullspace(fraction_matrix(A)))
        for v in basis:
            assert all(sum(r[i] * v[i] for i in range(n)) == 0 for r in A)


def test_positive_definite_exact():
    assert is_positive_definite_exact(fraction_matrix([[2, 1], [1, 2]]))
    assert not is_positive_definite_exact(fraction_matrix([[1, 2], [2, 1]]))
    assert not is_positive_definite_exact(fraction_matrix([[0, 0], [0, 1]]))


def test_primitive_vector():
    assert primitive_vector([Fraction(2, 3), Fraction(-4, 3)]) == [1, -2]
    assert primitive_vector([Fraction(0), Fraction(-5)]) == [0, 1]
    assert primitive_vector([0, 0]) == [0, 0]


def test_lll_reduces_norms():
    rng = np.random.default_rng(3)
    B = np.array([[201, 100, 0], [200, 101, 0], [0, 0, 1]], dtype=float)
    red = lll_reduce(B)
    assert np.max(np.linalg.norm(red, axis=1)) < np.max(np.linalg.norm(B, axis=1))
    # the reduced rows still generate the same lattice (integer determinant)
    assert round(abs(np.linalg.det(red))) == round(abs(np.linalg.det(B)))
