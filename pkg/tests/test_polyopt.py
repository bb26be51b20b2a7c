import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fundmat.polyopt import (MomentVector, Polynomial, basis_size, det3, dirac_moments,
                             enumerate_basis, grlex_key, localizing_matrix, moment_matrix,
                             poly_eval, riesz)


def test_basis_small_cases():
    b = enumerate_basis(2, 1)
    assert b.monomials == ((0, 0), (1, 0), (0, 1))
    assert len(enumerate_basis(2, 2)) == 6
    assert len(enumerate_basis(9, 2)) == 55


def test_basis_order_and_bijection():
    for n in range(1, 10):
        for t in range(5):
            b = enumerate_basis(n, t)
            assert len(b) == basis_size(n, t) == math.comb(n + t, t)
            assert b.monomials[0] == (0,) * n
            if t >= 1:
                for i in range(n):
                    assert b.monomials[1 + i] == tuple(int(k == i) for k in range(n))
            keys = [grlex_key(a) for a in b.monomials]
            assert keys == sorted(keys) and len(set(keys)) == len(keys)
            assert all(b.index_of[a] == i for i, a in enumerate(b.monomials))


def test_two_variable_degree_two_listing():
    assert enumerate_basis(2, 2).monomials == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


def _sample_poly():
    x1, x2 = Polynomial.variables(2)
    return 1 + 2 * x2 + 3 * x1 * x1 + 4 * x1 * x2


def test_poly_eval_examples():
    p = _sample_poly()
    assert poly_eval(p, [0, 0]) == 1
    assert poly_eval(p, [1, 1]) == 10
    assert poly_eval(det3(Polynomial.variables(9)), np.eye(3).ravel()) == 1
    with pytest.raises(ValueError):
        poly_eval(p, [1, 2, 3])


def test_empty_polynomial():
    z = Polynomial(3)
    assert z.degree == 0 and poly_eval(z, [1, 2, 3]) == 0
    assert riesz(dirac_moments([1, 2, 3], 2), z) == 0


def test_half_degree():
    x1, x2 = Polynomial.variables(2)
    assert (x1 * x2 * x2).half_degree == 2
    assert (x1 * x2).half_degree == 1
    assert Polynomial.constant(2, 5.0).half_degree == 0


def test_det_polynomial_has_six_cubic_terms():
    d = det3(Polynomial.variables(9))
    assert d.degree == 3 and len(d.terms) == 6
    M = np.random.default_rng(0).standard_normal((3, 3))
    assert poly_eval(d, M.ravel()) == pytest.approx(np.linalg.det(M), rel=1e-12)


def test_riesz_linearization():
    y = MomentVector(2, 2, np.arange(1.0, 7.0))
    # y00=1, y10=2, y01=3, y20=4, y11=5, y02=6
    assert riesz(y, _sample_poly()) == 1 + 2 * 3 + 3 * 4 + 4 * 5


def test_dirac_examples():
    y = dirac_moments([0.0, 0.0, 0.0], 3)
    assert y.values[0] == 1 and not np.any(y.values[1:])
    assert np.all(dirac_moments([1.0, 1.0], 2).values == 1)
    y = dirac_moments([2.0, 3.0], 2)
    assert y[(1, 1)] == 6 and y[(2, 0)] == 4


def test_riesz_of_dirac_evaluates():
    x = np.array([0.3, -1.2])
    y = dirac_moments(x, 4)
    p = _sample_poly() ** 2
    assert riesz(y, p) == pytest.approx(poly_eval(p, x), rel=1e-13)


def test_riesz_degree_overflow():
    with pytest.raises(ValueError):
        riesz(dirac_moments([1.0, 2.0], 2), _sample_poly() ** 2)


def test_moment_matrix_dirac_rank_one(rng):
    for t in (1, 2):
        x = rng.uniform(-10, 10, 3) / np.sqrt(3)
        y = dirac_moments(x, 2 * t)
        M = moment_matrix(y, t)
        v = dirac_moments(x, t).values
        np.testing.assert_allclose(M, np.outer(v, v), rtol=1e-13)
        w = np.linalg.eigvalsh(M)
        assert w[0] >= -1e-10 * max(1.0, w[-1])
        assert np.sum(w > 1e-9 * w[-1]) == 1


def test_moment_matrix_symmetric_and_linear(rng):
    y1 = MomentVector(3, 4, rng.standard_normal(basis_size(3, 4)))
    y2 = MomentVector(3, 4, rng.standard_normal(basis_size(3, 4)))
    M1 = moment_matrix(y1, 2)
    assert np.array_equal(M1, M1.T)
    np.testing.assert_allclose(moment_matrix(y1 * 2.0 + y2 * -3.0, 2),
                               2.0 * M1 - 3.0 * moment_matrix(y2, 2), atol=1e-13)


def test_moment_matrix_order_overflow():
    with pytest.raises(ValueError):
        moment_matrix(dirac_moments([1.0, 2.0], 3), 2)


def test_localizing_with_unit_multiplier(rng):
    y = MomentVector(2, 4, rng.standard_normal(15))
    np.testing.assert_array_equal(localizing_matrix(y, Polynomial.constant(2, 1.0), 2),
                                  moment_matrix(y, 2))


def test_localizing_dirac_psd(rng):
    x = rng.standard_normal(2)
    x1, x2 = Polynomial.variables(2)
    q = 4 - x1 * x1 - x2 * x2 + 0.0
    x = x / np.linalg.norm(x)  # q(x) = 3 > 0
    L = localizing_matrix(dirac_moments(x, 4), q, 1)
    v = dirac_moments(x, 1).values
    np.testing.assert_allclose(L, poly_eval(q, x) * np.outer(v, v), atol=1e-13)
    assert np.linalg.eigvalsh(L)[0] >= -1e-12


coeffs = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(coeffs, min_size=6, max_size=6), st.lists(coeffs, min_size=6, max_size=6),
       st.lists(coeffs, min_size=6, max_size=6), coeffs)
def test_riesz_bilinear(a, b, yv, s):
    basis = enumerate_basis(2, 2).monomials
    p = Polynomial(2, dict(zip(basis, a)))
    q = Polynomial(2, dict(zip(basis, b)))
    y = MomentVector(2, 2, np.array(yv))
    assert riesz(y, p + q) == pytest.approx(riesz(y, p) + riesz(y, q), abs=1e-9)
    assert riesz(y * s, p) == pytest.approx(s * riesz(y, p), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=2, max_size=2),
       st.lists(coeffs, min_size=6, max_size=6), st.lists(coeffs, min_size=6, max_size=6))
def test_polynomial_product_evaluates(x, a, b):
    basis = enumerate_basis(2, 2).monomials
    p = Polynomial(2, dict(zip(basis, a)))
    q = Polynomial(2, dict(zip(basis, b)))
    assert poly_eval(p * q, x) == pytest.approx(poly_eval(p, x) * poly_eval(q, x), abs=1e-8)
