"""Moment (LMI) relaxations of polynomial problems and minimizer extraction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .polyopt import (MomentVector, Polynomial, basis_size, enumerate_basis,
                      localizing_map, moment_matrix, poly_eval, riesz_row)
from .sdp import LmiBlock, SdpProblem, SolverStatus, solve_sdp

DEFAULT_RANK_TOL = 1e-3


class ExtractionFailed(RuntimeError):
    """The moment matrix does not yield a consistent set of atoms."""


@dataclass(frozen=True)
class SemiAlgebraicProblem:
    """minimize objective(x) s.t. g(x) >= 0 for g in inequalities, h(x) = 0 for h in equalities.

    Compactness of the feasible set is the caller's job: include a ball
    constraint or an equality such as ``|x|^2 = 1``.
    """

    objective: Polynomial
    inequalities: tuple[Polynomial, ...] = ()
    equalities: tuple[Polynomial, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        for p in self.inequalities + self.equalities:
            if p.n != self.objective.n:
                raise ValueError("all polynomials must share the variable count")

    @property
    def n(self) -> int:
        return self.objective.n

    @property
    def min_order(self) -> int:
        """d_K: the largest half-degree among objective and constraints."""
        polys = (self.objective,) + self.inequalities + self.equalities
        return max(max(p.half_degree for p in polys), 1)

    def is_feasible(self, x, tol: float = 1e-6) -> bool:
        return (all(poly_eval(g, x) >= -tol for g in self.inequalities)
                and all(abs(poly_eval(h, x)) <= tol for h in self.equalities))


@dataclass
class RelaxationResult:
    order: int
    optimum: float
    moments: MomentVector
    moment_matrix_ranks: list[int]
    certified: bool
    minimizers: list[np.ndarray]
    solver_status: SolverStatus
    sdp: object = field(default=None, repr=False)

    @property
    def rank(self) -> int:
        return self.moment_matrix_ranks[-1]


def build_relaxation(prob: SemiAlgebraicProblem, t: int) -> SdpProblem:
    """Order-t moment relaxation over y indexed by monomials of degree <= 2t.

    Equalities become the scalar linear rows riesz(x^alpha h) = 0 rather
    than PSD pairs.
    """
    if t < prob.min_order:
        raise ValueError(f"relaxation order {t} is below the minimum order {prob.min_order}")
    n, order = prob.n, 2 * t
    m = basis_size(n, order)
    one = Polynomial.constant(n, 1.0)

    def block(q, tq, name):
        L = localizing_map(q, tq, order)
        s = basis_size(n, tq)
        return LmiBlock(np.zeros((s, s)), L, name)

    blocks = [block(one, t, "moment")]
    for j, g in enumerate(prob.inequalities):
        blocks.append(block(g, t - g.half_degree, f"localizing[{j}]"))

    rows = [riesz_row(one, order)]
    rhs = [1.0]
    for h in prob.equalities:
        for alpha in enumerate_basis(n, order - h.degree).monomials:
            rows.append(riesz_row(h.shift(alpha), order))
            rhs.append(0.0)
    cost = riesz_row(prob.objective, order)
    return SdpProblem(cost, blocks, np.array(rows), np.array(rhs))


def numerical_rank(M, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    sv = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if sv.size == 0:
        return 0
    return int(np.sum(sv > rank_tol * max(sv[0], 1.0)))


def check_certificate(moments: MomentVector, t: int, d_K: int,
                      rank_tol: float = DEFAULT_RANK_TOL) -> tuple[list[int], bool]:
    """Ranks of M_s(y) for s = 0..t and the flat-extension test rank M_t == rank M_{t-d_K}."""
    ranks = [numerical_rank(moment_matrix(moments, s), rank_tol) for s in range(t + 1)]
    certified = ranks[t] == 1 or ranks[t] == ranks[max(t - d_K, 0)]
    return ranks, bool(certified)


def _column_echelon_basis(V: np.ndarray, tol: float) -> list[int]:
    """Rows of V (in order) picked greedily as pivots of a column echelon form."""
    A = V.copy()
    r = A.shape[1]
    scale = max(np.max(np.abs(A)), 1.0)
    pivots = []
    col = 0
    for i in range(A.shape[0]):
        if col == r:
            break
        j = col + int(np.argmax(np.abs(A[i, col:])))
        if abs(A[i, j]) <= tol * scale:
            continue
        A[:, [col, j]] = A[:, [j, col]]
        A[:, col] /= A[i, col]
        for k in range(r):
            if k != col:
                A[:, k] -= A[i, k] * A[:, col]
        pivots.append(i)
        col += 1
    return pivots


def extract_minimizers(moments: MomentVector, t: int, r: int,
                       rank_tol: float = DEFAULT_RANK_TOL, seed: int = 0) -> list[np.ndarray]:
    """Recover the r atoms of a flat moment matrix M_t(y).

    Rank one returns the first-order moments.  Otherwise: truncated
    factorization M_t = V V^T, column echelon form to find a monomial
    basis, multiplication matrices for each variable, and a common Schur
    basis from a random combination of them.
    """
    n = moments.n
    if r < 1:
        raise ExtractionFailed("rank must be positive")
    if r == 1:
        return [moments.first_order() / moments.values[0]]

    M = moment_matrix(moments, t)
    w, U = np.linalg.eigh(M)
    w, U = w[::-1][:r], U[:, ::-1][:, :r]
    if np.any(w <= 0):
        raise ExtractionFailed("moment matrix has fewer positive eigenvalues than the rank")
    V = U * np.sqrt(w)
    pivots = _column_echelon_basis(V, rank_tol)
    if len(pivots) != r:
        raise ExtractionFailed(f"found {len(pivots)} basis monomials, expected {r}")
    Wmat = V @ np.linalg.inv(V[pivots])

    basis = enumerate_basis(n, t)
    mons = [basis.monomials[i] for i in pivots]
    Ns = []
    for i in range(n):
        rows = []
        for alpha in mons:
            shifted = list(alpha)
            shifted[i] += 1
            k = basis.index_of.get(tuple(shifted))
            if k is None:
                raise ExtractionFailed("shifted basis monomial exceeds the relaxation order")
            rows.append(Wmat[k])
        Ns.append(np.array(rows))

    rng = np.random.default_rng(seed)
    coef = rng.random(n)
    coef /= coef.sum()
    N = sum(c * Ni for c, Ni in zip(coef, Ns))
    _, Q = sla.schur(N, output="real")
    atoms = np.array([[Q[:, j] @ Ni @ Q[:, j] for Ni in Ns] for j in range(r)])
    if not np.all(np.isfinite(atoms)):
        raise ExtractionFailed("non-finite atoms")
    return [a for a in atoms]


def solve_relaxation(prob: SemiAlgebraicProblem, t: int, rank_tol: float = DEFAULT_RANK_TOL,
                     feas_tol_extract: float = 1e-6, **solver_opts) -> RelaxationResult:
    """Solve the order-t relaxation, test the rank certificate, extract minimizers.

    An uncertified result still carries the first-order moments as a
    candidate minimizer.
    """
    sdp = build_relaxation(prob, t)
    sol = solve_sdp(sdp, **solver_opts)
    y = MomentVector(prob.n, 2 * t, sol.y)
    ranks, certified = check_certificate(y, t, prob.min_order, rank_tol)
    minimizers: list[np.ndarray] = []
    if sol.status in (SolverStatus.INFEASIBLE, SolverStatus.NUMERICAL_FAILURE) and sol.gap > 1e-3:
        certified = False
    if certified:
        try:
            minimizers = extract_minimizers(y, t, ranks[-1], rank_tol)
        except ExtractionFailed:
            certified = False
        else:
            if not all(prob.is_feasible(x, feas_tol_extract) for x in minimizers):
                certified = False
    if not certified:
        minimizers = [y.first_order() / y.values[0]]
    return RelaxationResult(order=t, optimum=sol.objective, moments=y,
                            moment_matrix_ranks=ranks, certified=certified,
                            minimizers=minimizers, solver_status=sol.status, sdp=sol)
