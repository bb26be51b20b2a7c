"""Fundamental-matrix estimators: the eight-point algorithm and the certified global method."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (DegenerateCloud, DegenerateConfiguration, RankDeficientInput,
                     TooFewMatches)
from .lasserre import DEFAULT_RANK_TOL, SemiAlgebraicProblem, build_relaxation, solve_relaxation
from .polyopt import Polynomial, det3
from .sdp import SolverStatus

log = logging.getLogger(__name__)

MIN_MATCHES = 8


class PointMatch(NamedTuple):
    q: np.ndarray
    q2: np.ndarray


@dataclass(frozen=True)
class Matches:
    """n point matches as homogeneous pixel coordinates, third coordinate 1."""

    q1: np.ndarray
    q2: np.ndarray

    def __post_init__(self):
        q1 = _homogeneous(self.q1)
        q2 = _homogeneous(self.q2)
        if q1.shape != q2.shape:
            raise ValueError("both images need the same number of points")
        if not (np.all(np.isfinite(q1)) and np.all(np.isfinite(q2))):
            raise ValueError("non-finite point coordinates")
        q1.setflags(write=False)
        q2.setflags(write=False)
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q2", q2)

    @classmethod
    def from_pixels(cls, x1, x2) -> Matches:
        return cls(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))

    def __len__(self) -> int:
        return self.q1.shape[0]

    def __getitem__(self, i) -> PointMatch:
        return PointMatch(self.q1[i], self.q2[i])

    def __iter__(self):
        return (PointMatch(a, b) for a, b in zip(self.q1, self.q2))

    def transformed(self, T1, T2) -> Matches:
        p1 = self.q1 @ np.asarray(T1).T
        p2 = self.q2 @ np.asarray(T2).T
        return Matches(p1[:, :2] / p1[:, 2:], p2[:, :2] / p2[:, 2:])

    @property
    def x1(self) -> np.ndarray:
        return self.q1[:, :2]

    @property
    def x2(self) -> np.ndarray:
        return self.q2[:, :2]


def _homogeneous(pts) -> np.ndarray:
    pts = np.array(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise ValueError(f"expected an (n, 2) or (n, 3) array, got shape {pts.shape}")
    if pts.shape[1] == 3:
        pts = pts[:, :2] / pts[:, 2:]
    return np.hstack([pts, np.ones((pts.shape[0], 1))])


@dataclass(frozen=True)
class GlobalCertificate:
    # optimum is the relaxation value in unscaled cost units, accurate to the
    # solver's absolute tolerance times the cost scale
    certified: bool
    order: int
    rank: int
    optimum: float
    solver_status: SolverStatus


@dataclass(frozen=True)
class FMatrix:
    m: np.ndarray
    rank2_certified: bool = False
    global_certificate: GlobalCertificate | None = None

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(3, 3)
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.m))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.m, dtype=dtype)


@dataclass(frozen=True)
class Standardization:
    T1: np.ndarray
    T2: np.ndarray


def _similarity(pts: np.ndarray) -> np.ndarray:
    centroid = pts.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((pts - centroid) ** 2, axis=1)))
    if rms <= 1e-12 * max(1.0, np.abs(centroid).max()):
        raise DegenerateCloud("all points of an image coincide")
    s = np.sqrt(2.0) / rms
    return np.array([[s, 0.0, -s * centroid[0]],
                     [0.0, s, -s * centroid[1]],
                     [0.0, 0.0, 1.0]])


def standardize(matches: Matches) -> tuple[Matches, Standardization]:
    """Move each image's centroid to the origin with RMS distance sqrt(2)."""
    T1 = _similarity(matches.x1)
    T2 = _similarity(matches.x2)
    return matches.transformed(T1, T2), Standardization(T1, T2)


def _as_matrix(F) -> np.ndarray:
    return np.asarray(F.m if isinstance(F, FMatrix) else F, dtype=float).reshape(3, 3)


def epipolar_residuals(F, matches: Matches) -> np.ndarray:
    F = _as_matrix(F)
    return np.einsum("ij,jk,ik->i", matches.q2, F, matches.q1)


def algebraic_cost(F, matches: Matches) -> float:
    """Sum of squared epipolar residuals q2^T F q1."""
    return float(np.sum(epipolar_residuals(F, matches) ** 2))


def design_matrix(matches: Matches) -> np.ndarray:
    """Rows kron(q2, q1), so that row @ vec(F) = q2^T F q1 for row-major vec."""
    return np.einsum("ni,nj->nij", matches.q2, matches.q1).reshape(len(matches), 9)


def fix_sign(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    return -F if F.flat[np.argmax(np.abs(F))] < 0 else F


def unit(F: np.ndarray) -> np.ndarray:
    return fix_sign(F / np.linalg.norm(F))


def linear_f(matches: Matches) -> np.ndarray:
    """Unit-norm minimizer of the algebraic cost without the rank constraint."""
    if len(matches) < MIN_MATCHES:
        raise TooFewMatches(f"need at least {MIN_MATCHES} matches, got {len(matches)}")
    A = design_matrix(matches)
    _, sv, Vt = np.linalg.svd(A, full_matrices=True)
    if sv.size < 8 or sv[7] <= 1e-8 * sv[0]:
        raise DegenerateConfiguration("design matrix has numerical rank below 8")
    return fix_sign(Vt[-1].reshape(3, 3))


def nearest_rank2(F) -> tuple[np.ndarray, float]:
    """Closest rank-2 matrix in Frobenius norm and its distance (the smallest singular value)."""
    U, sv, Vt = np.linalg.svd(_as_matrix(F))
    if sv[1] <= 1e-12:
        raise RankDeficientInput("input has rank <= 1; the rank-2 projection is ambiguous")
    return (U[:, :2] * sv[:2]) @ Vt[:2], float(sv[2])


def project_rank2(F) -> FMatrix:
    F2, _ = nearest_rank2(F)
    return FMatrix(unit(F2), rank2_certified=True)


def denormalize(F_std, std: Standardization) -> np.ndarray:
    return unit(std.T2.T @ _as_matrix(F_std) @ std.T1)


def to_standardized(F, std: Standardization) -> np.ndarray:
    return unit(np.linalg.inv(std.T2).T @ _as_matrix(F) @ np.linalg.inv(std.T1))


def standardized_cost(F, matches: Matches) -> float:
    """Algebraic cost of F expressed in the standardized frame of ``matches``."""
    sm, std = standardize(matches)
    return algebraic_cost(to_standardized(F, std), sm)


def eight_point(matches: Matches) -> FMatrix:
    """Standardize, solve the linear problem, zero the smallest singular value, map back."""
    sm, std = standardize(matches)
    F_hat = project_rank2(linear_f(sm))
    return FMatrix(denormalize(F_hat.m, std), rank2_certified=True)


# --- global method ---------------------------------------------------------

_VARS = Polynomial.variables(9)
DET_POLY = det3(_VARS)
NORM_POLY = sum(v * v for v in _VARS) - 1.0

_EPS = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS[_i, _j, _k] = 1.0
    _EPS[_i, _k, _j] = -1.0


def _det_derivatives(F: np.ndarray):
    grad = 0.5 * np.einsum("ikm,jln,kl,mn->ij", _EPS, _EPS, F, F)
    hess = np.einsum("ikm,jln,mn->ijkl", _EPS, _EPS, F)
    return grad.ravel(), hess.reshape(9, 9)


def fundamental_problem(matches: Matches, halfspace=None,
                        scale: float = 1.0) -> SemiAlgebraicProblem:
    """min scale * sum (q2^T F q1)^2 s.t. det F = 0, |F|^2 = 1 [, <halfspace, F> >= 0].

    Variables are the entries of F in row-major order.  The optional
    half-space keeps exactly one of each +-F pair, which makes the
    minimizer unique.
    """
    A = design_matrix(matches)
    objective = Polynomial.quadratic_form(scale * (A.T @ A))
    ineq = ()
    if halfspace is not None:
        h = np.asarray(halfspace, dtype=float).ravel()
        ineq = (Polynomial(9, {tuple(int(k == i) for k in range(9)): h[i] for i in range(9)}),)
    return SemiAlgebraicProblem(objective, ineq, (DET_POLY, NORM_POLY))


def polish(F0: np.ndarray, Q: np.ndarray, max_iter: int = 30,
           max_move: float = 1e-2) -> np.ndarray:
    """Newton iterations on the KKT system of min x^T Q x s.t. det = 0, |x| = 1.

    Returns the start point unchanged if Newton wanders off or does not
    lower the cost.
    """
    x = _as_matrix(F0).ravel() / np.linalg.norm(F0)
    x0 = x.copy()
    g, _ = _det_derivatives(x.reshape(3, 3))
    lam = np.linalg.lstsq(np.column_stack([g, 2 * x]), 2 * Q @ x, rcond=None)[0]
    for _ in range(max_iter):
        g, Hd = _det_derivatives(x.reshape(3, 3))
        r = np.concatenate([2 * Q @ x - lam[0] * g - 2 * lam[1] * x,
                            [np.linalg.det(x.reshape(3, 3)), x @ x - 1.0]])
        if np.max(np.abs(r)) <= 1e-15 * max(1.0, np.abs(Q).max()):
            break
        J = np.zeros((11, 11))
        J[:9, :9] = 2 * Q - lam[0] * Hd - 2 * lam[1] * np.eye(9)
        J[:9, 9] = -g
        J[:9, 10] = -2 * x
        J[9, :9] = g
        J[10, :9] = 2 * x
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return x0
        x = x + step[:9]
        lam = lam + step[9:]
    F = _as_matrix(x.reshape(3, 3))
    if not np.all(np.isfinite(F)):
        return x0
    F2, _ = nearest_rank2(F)
    x = (F2 / np.linalg.norm(F2)).ravel()
    if x @ x0 < 0:
        x = -x
    if np.linalg.norm(x - x0) > max_move or x @ Q @ x > x0 @ Q @ x0:
        return x0
    return x


def global_f(matches: Matches, order: int = 2, standardize_coords: bool = True,
             rank_tol: float = DEFAULT_RANK_TOL, polish_result: bool = True,
             **solver_opts) -> FMatrix:
    """Rank-2, unit-norm F minimizing the algebraic cost, via a moment relaxation.

    An uncertified relaxation is not an error: the returned matrix then
    comes from the first-order moments and its certificate says so.
    """
    if len(matches) < MIN_MATCHES:
        raise TooFewMatches(f"need at least {MIN_MATCHES} matches, got {len(matches)}")
    if standardize_coords:
        work, std = standardize(matches)
    else:
        work, std = matches, None
    F_lin = linear_f(work)
    A = design_matrix(work)
    Q = A.T @ A
    scale = 1.0 / max(np.abs(Q).max(), 1e-300)
    prob = fundamental_problem(work, halfspace=F_lin, scale=scale)
    res = solve_relaxation(prob, order, rank_tol=rank_tol, **solver_opts)
    candidates = [res.minimizers[0].reshape(3, 3)]
    if not res.certified:
        # an uncertified relaxation may be far off; keep the linear solution as a fallback
        candidates.append(nearest_rank2(F_lin)[0])
    best = None
    for F in candidates:
        if not np.all(np.isfinite(F)) or np.linalg.norm(F) < 1e-8:
            continue
        if polish_result:
            F = polish(F, scale * Q).reshape(3, 3)
        F = unit(nearest_rank2(F)[0])
        cost = algebraic_cost(F, work)
        if best is None or cost < best[0]:
            best = (cost, F)
    F_work = best[1] if best is not None else unit(nearest_rank2(F_lin)[0])
    F_out = denormalize(F_work, std) if std is not None else F_work
    cert = GlobalCertificate(certified=res.certified, order=order, rank=res.rank,
                             optimum=res.optimum / scale, solver_status=res.solver_status)
    if not res.certified:
        log.info("global relaxation at order %d not certified (ranks %s)", order,
                 res.moment_matrix_ranks)
    return FMatrix(F_out, rank2_certified=True, global_certificate=cert)


def global_relaxation(matches: Matches, order: int = 2, standardize_coords: bool = True):
    """The SDP that global_f solves, for inspection or dumping."""
    work = standardize(matches)[0] if standardize_coords else matches
    A = design_matrix(work)
    Q = A.T @ A
    prob = fundamental_problem(work, halfspace=linear_f(work),
                               scale=1.0 / max(np.abs(Q).max(), 1e-300))
    return build_relaxation(prob, order)
