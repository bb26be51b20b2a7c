import numpy as np
import pytest

from conftest import GOLDEN_RATIO, worked_example
from fundmat.lasserre import (ExtractionFailed, SemiAlgebraicProblem, build_relaxation,
                              check_certificate, extract_minimizers, numerical_rank,
                              solve_relaxation)
from fundmat.polyopt import MomentVector, Polynomial, basis_size, dirac_moments, poly_eval
from fundmat.sdp import SolverStatus


def test_numerical_rank_examples():
    assert numerical_rank(np.eye(5)) == 5
    v = np.arange(1.0, 5.0)
    assert numerical_rank(np.outer(v, v)) == 1
    assert numerical_rank(np.diag([1, 1e-2, 1e-8])) == 2


def test_relaxation_shapes_for_example():
    prob = worked_example()
    q1 = build_relaxation(prob, 1)
    assert q1.block_sizes == [3, 1, 1, 1] and q1.n_vars == 6
    q2 = build_relaxation(prob, 2)
    assert q2.block_sizes == [6, 3, 3, 3] and q2.n_vars == 15
    assert q2.eq_matrix.shape == (1, 15) and q2.eq_matrix[0, 0] == 1.0


def test_order_below_minimum_rejected():
    x1, x2 = Polynomial.variables(2)
    prob = SemiAlgebraicProblem(x1 ** 4, equalities=(x1 * x1 + x2 * x2 - 1,))
    with pytest.raises(ValueError):
        build_relaxation(prob, 1)


def test_equality_rows_count():
    x = Polynomial.variables(3)
    h = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 1
    prob = SemiAlgebraicProblem(x[0] * x[1], equalities=(h,))
    sdp = build_relaxation(prob, 2)
    assert sdp.eq_matrix.shape[0] == 1 + basis_size(3, 2)
    assert sdp.block_sizes == [basis_size(3, 2)]


def test_worked_example_second_relaxation(example_problem):
    res = solve_relaxation(example_problem, 2)
    assert res.optimum == pytest.approx(-GOLDEN_RATIO, abs=1e-6)
    assert res.certified and res.rank == 1 and len(res.minimizers) == 1
    x = res.minimizers[0]
    np.testing.assert_allclose(x, [GOLDEN_RATIO, 1 - GOLDEN_RATIO], atol=1e-5)
    assert example_problem.is_feasible(x, 1e-6)
    assert res.moments.values[0] == pytest.approx(1.0, abs=1e-9)


def test_hierarchy_monotone(example_problem):
    f1 = solve_relaxation(example_problem, 1).optimum
    f2 = solve_relaxation(example_problem, 2).optimum
    assert f1 <= f2 + 1e-7


def test_first_relaxation_value(example_problem):
    # the exact order-1 value of this problem is -(3 + sqrt 17)/4
    assert solve_relaxation(example_problem, 1).optimum == pytest.approx(
        -(3 + np.sqrt(17)) / 4, abs=1e-6)


def test_zero_objective():
    x1, x2 = Polynomial.variables(2)
    prob = SemiAlgebraicProblem(Polynomial(2), equalities=(x1 * x1 + x2 * x2 - 1,))
    res = solve_relaxation(prob, 1)
    assert res.optimum == pytest.approx(0.0, abs=1e-8)
    assert res.moments.values[0] == pytest.approx(1.0, abs=1e-8)


def test_single_point_feasible_set():
    # |x|^2 = 1 with x1 = x2 and x3 = 0, x1 >= 0: the point (1,1,0)/sqrt 2
    x = Polynomial.variables(3)
    prob = SemiAlgebraicProblem(x[0] + x[2], inequalities=(x[0] + 0.0,),
                                equalities=(x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 1,
                                            x[0] - x[1], x[2] + 0.0))
    res = solve_relaxation(prob, 2)
    assert res.certified
    np.testing.assert_allclose(res.minimizers[0], [2 ** -0.5, 2 ** -0.5, 0], atol=1e-6)


def test_certificate_dirac():
    y = dirac_moments([0.4, -0.7], 4)
    ranks, ok = check_certificate(y, 2, 1)
    assert ranks == [1, 1, 1] and ok
    np.testing.assert_allclose(extract_minimizers(y, 2, 1)[0], [0.4, -0.7])


def test_two_atom_extraction():
    a, b = np.array([0.5, -1.0]), np.array([-0.3, 0.8])
    y = dirac_moments(a, 4) * 0.5 + dirac_moments(b, 4) * 0.5
    ranks, ok = check_certificate(y, 2, 1)
    assert ranks[1] == ranks[2] == 2 and ok
    pts = sorted(extract_minimizers(y, 2, 2), key=lambda p: p[0])
    np.testing.assert_allclose(pts[0], b, atol=1e-6)
    np.testing.assert_allclose(pts[1], a, atol=1e-6)


def test_three_atoms_in_three_variables():
    atoms = [np.array([1.0, 0.0, 0.5]), np.array([-0.5, 0.5, 0.0]), np.array([0.2, -0.9, 0.3])]
    y = sum((dirac_moments(p, 4) * w for p, w in zip(atoms, (0.2, 0.3, 0.5))),
            MomentVector(3, 4, np.zeros(basis_size(3, 4))))
    ranks, ok = check_certificate(y, 2, 1)
    assert ok and ranks[-1] == 3
    got = sorted(extract_minimizers(y, 2, 3), key=lambda p: p[0])
    want = sorted(atoms, key=lambda p: p[0])
    for g, w in zip(got, want):
        np.testing.assert_allclose(g, w, atol=1e-6)


def test_extraction_rejects_bad_rank():
    y = dirac_moments([0.4, -0.7], 4)
    with pytest.raises(ExtractionFailed):
        extract_minimizers(y, 2, 3)


def test_objective_matches_at_minimizer(example_problem):
    res = solve_relaxation(example_problem, 2)
    fx = poly_eval(example_problem.objective, res.minimizers[0])
    assert abs(fx - res.optimum) <= 1e-5 * (1 + abs(res.optimum))
    assert res.solver_status in (SolverStatus.OPTIMAL, SolverStatus.SLOW_PROGRESS)
