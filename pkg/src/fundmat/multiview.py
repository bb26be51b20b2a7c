"""Projective two-view reconstruction from F and the reprojection-error evaluation.

Pipeline: epipoles, canonical cameras P = [I|0], P' = [[e']x F | e'],
optimal triangulation of every match, then Levenberg-Marquardt bundle
adjustment over P' and the points.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .epipolar import FMatrix, Matches, PointMatch, eight_point, global_f
from .errors import PointAtInfinity, RankDeficiencyViolated, TriangulationFailure

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("method", "e_init", "e_ba", "iterations", "time_s")


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _mat(F) -> np.ndarray:
    return np.asarray(F.m if isinstance(F, FMatrix) else F, dtype=float).reshape(3, 3)


@dataclass(frozen=True)
class CameraPair:
    P: np.ndarray
    P2: np.ndarray


@dataclass(frozen=True)
class ScenePoint:
    Q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.Q, dtype=float).reshape(4)
        object.__setattr__(self, "Q", q / np.linalg.norm(q))


def epipoles(F) -> tuple[np.ndarray, np.ndarray]:
    """Unit null vectors: F e = 0 and F^T e' = 0."""
    F = _mat(F)
    U, sv, Vt = np.linalg.svd(F)
    if sv[1] <= 1e-10 * max(sv[0], 1.0):
        raise RankDeficiencyViolated(f"F has rank below 2 (singular values {sv})")
    return Vt[2].copy(), U[:, 2].copy()


def canonical_cameras(F) -> CameraPair:
    F = _mat(F)
    _, e2 = epipoles(F)
    P = np.hstack([np.eye(3), np.zeros((3, 1))])
    P2 = np.hstack([skew(e2) @ F, e2[:, None]])
    return CameraPair(P, P2)


def fundamental_from_cameras(P, P2) -> np.ndarray:
    """F = [e']x P' P^+ with e' = P' C, C the center of P; unit Frobenius norm."""
    P, P2 = np.asarray(P, float), np.asarray(P2, float)
    C = np.linalg.svd(P)[2][-1]
    F = skew(P2 @ C) @ P2 @ np.linalg.pinv(P)
    return F / np.linalg.norm(F)


# --- triangulation -------------------------------------------------------------

def _poly(*c):
    return np.polynomial.Polynomial(c)


def _line_foot(l):
    """Point on the line l closest to the origin."""
    a, b, c = l
    return np.array([-a * c, -b * c, a * a + b * b])


def correct_match(F, q, q2) -> tuple[np.ndarray, np.ndarray]:
    """Nearest pair (in image distance) to (q, q2) that satisfies q2^T F q = 0 exactly.

    Points are 2-vectors or homogeneous 3-vectors; returns homogeneous
    points with last coordinate 1.
    """
    F = _mat(F)
    x1 = np.asarray(q, float)[:2] / (np.asarray(q, float)[2] if len(q) == 3 else 1.0)
    x2 = np.asarray(q2, float)[:2] / (np.asarray(q2, float)[2] if len(q2) == 3 else 1.0)
    T1 = np.array([[1.0, 0, x1[0]], [0, 1.0, x1[1]], [0, 0, 1.0]])  # T^-1
    T2 = np.array([[1.0, 0, x2[0]], [0, 1.0, x2[1]], [0, 0, 1.0]])
    Fm = T2.T @ F @ T1
    e1, e2 = epipoles(Fm)
    n1, n2 = np.hypot(e1[0], e1[1]), np.hypot(e2[0], e2[1])
    # pixel distance between each point and its epipole
    for n, e, x in ((n1, e1, x1), (n2, e2, x2)):
        if n <= 1e-12 * max(1.0, np.abs(x).max()) * abs(e[2]):
            raise TriangulationFailure("point coincides with the epipole")
    e1, e2 = e1 / n1, e2 / n2
    R1 = np.array([[e1[0], e1[1], 0.0], [-e1[1], e1[0], 0.0], [0.0, 0.0, 1.0]])
    R2 = np.array([[e2[0], e2[1], 0.0], [-e2[1], e2[0], 0.0], [0.0, 0.0, 1.0]])
    Fm = R2 @ Fm @ R1.T
    f1, f2 = e1[2], e2[2]
    a, b, c, d = Fm[1, 1], Fm[1, 2], Fm[2, 1], Fm[2, 2]

    at_b, ct_d = _poly(b, a), _poly(d, c)
    g = (_poly(0, 1) * (at_b ** 2 + f2 ** 2 * ct_d ** 2) ** 2
         - (a * d - b * c) * _poly(1, 0, f1 ** 2) ** 2 * at_b * ct_d)
    coef = g.coef[::-1]
    nz = np.flatnonzero(np.abs(coef) > 1e-300)
    roots = np.roots(coef[nz[0]:]) if nz.size else np.zeros(0)
    ts = np.real(roots)
    dg = g.deriv()
    with np.errstate(all="ignore"):
        for _ in range(2):  # sharpen the real parts by Newton on g
            step = g(ts) / np.where(dg(ts) == 0, 1.0, dg(ts))
            ts = np.where(np.isfinite(step), ts - step, ts)

    def cost(t):
        den = (a * t + b) ** 2 + f2 ** 2 * (c * t + d) ** 2
        return t * t / (1 + f1 * f1 * t * t) + (c * t + d) ** 2 / den

    best_t, best = None, np.inf
    for t in ts:
        with np.errstate(divide="ignore", invalid="ignore"):
            s = cost(t)
        if np.isfinite(s) and s < best:
            best_t, best = t, s
    # the t -> infinity asymptote
    s_inf = (1 / f1 ** 2 if f1 != 0 else np.inf) + c * c / (a * a + f2 * f2 * c * c)
    if best_t is None or s_inf < best:
        l1, l2 = np.array([f1, 0.0, -1.0]), np.array([-f2 * c, a, c])
    else:
        t = best_t
        l1 = np.array([t * f1, 1.0, -t])
        l2 = np.array([-f2 * (c * t + d), a * t + b, c * t + d])
    y1 = T1 @ R1.T @ _line_foot(l1)
    y2 = T2 @ R2.T @ _line_foot(l2)
    if abs(y1[2]) < 1e-300 or abs(y2[2]) < 1e-300:
        raise TriangulationFailure("corrected point at infinity")
    return y1 / y1[2], y2 / y2[2]


def linear_triangulation(P, P2, q, q2) -> np.ndarray:
    """DLT: unit 4-vector Q minimizing the algebraic error of q ~ P Q, q2 ~ P2 Q."""
    q, q2 = np.asarray(q, float), np.asarray(q2, float)
    A = np.array([q[0] * P[2] - q[2] * P[0], q[1] * P[2] - q[2] * P[1],
                  q2[0] * P2[2] - q2[2] * P2[0], q2[1] * P2[2] - q2[2] * P2[1]])
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    Q = np.linalg.svd(A)[2][-1]
    return Q / np.linalg.norm(Q)


def triangulate(P, P2, match: PointMatch, F) -> ScenePoint:
    y1, y2 = correct_match(F, match.q, match.q2)
    return ScenePoint(linear_triangulation(P, P2, y1, y2))


def triangulate_all(cams: CameraPair, matches: Matches, F) -> np.ndarray:
    """(n, 4) array of unit homogeneous points, in match order."""
    return np.array([triangulate(cams.P, cams.P2, m, F).Q for m in matches])


# --- reprojection ---------------------------------------------------------------

def _points(points) -> np.ndarray:
    return np.array([p.Q if isinstance(p, ScenePoint) else p for p in points], dtype=float)


def _project(P, Q):
    u = Q @ P.T
    if np.any(np.abs(u[:, 2]) < 1e-12):
        raise PointAtInfinity("a point projects to infinity")
    return u[:, :2] / u[:, 2:]


def reprojection_residuals(P, P2, points, matches: Matches) -> np.ndarray:
    Q = _points(points)
    if Q.shape[0] != len(matches):
        raise ValueError("point and match counts differ")
    return np.hstack([_project(P, Q) - matches.x1, _project(P2, Q) - matches.x2])


def rms_reprojection(P, P2, points, matches: Matches) -> float:
    r = reprojection_residuals(np.asarray(P, float), np.asarray(P2, float), points, matches)
    return float(np.sqrt(np.sum(r * r) / (2 * len(matches))))


# --- bundle adjustment ----------------------------------------------------------

@dataclass
class BundleResult:
    P2: np.ndarray
    points: np.ndarray
    iterations: int
    e_final: float
    cost_trace: list[float] = field(default_factory=list)
    diverged_lambda: bool = False


def _proj_jac(u):
    """Jacobian of (u1/u3, u2/u3) for every row of u, shape (n, 2, 3)."""
    w = 1.0 / u[:, 2]
    J = np.zeros((u.shape[0], 2, 3))
    J[:, 0, 0] = w
    J[:, 1, 1] = w
    J[:, 0, 2] = -u[:, 0] * w * w
    J[:, 1, 2] = -u[:, 1] * w * w
    return J


def ba_residuals(P2, Q, matches: Matches, P=None) -> np.ndarray:
    """(n, 4) residuals: image-1 x, y then image-2 x, y."""
    P = np.hstack([np.eye(3), np.zeros((3, 1))]) if P is None else P
    return np.hstack([_project(P, Q) - matches.x1, _project(P2, Q) - matches.x2])


def ba_jacobian(P2, Q, P=None):
    """Blocks of the residual Jacobian.

    Returns JP of shape (n, 4, 12), derivative with respect to the
    row-major entries of P2, and JQ of shape (n, 4, 4), derivative with
    respect to each point.
    """
    P = np.hstack([np.eye(3), np.zeros((3, 1))]) if P is None else P
    n = Q.shape[0]
    u1, u2 = Q @ P.T, Q @ P2.T
    D1, D2 = _proj_jac(u1), _proj_jac(u2)
    JQ = np.concatenate([D1 @ P, D2 @ P2], axis=1)
    JP = np.zeros((n, 4, 12))
    # d(P2 Q)_r / d P2[r, c] = Q_c
    JP[:, 2:, :] = np.einsum("nir,nc->nirc", D2, Q).reshape(n, 2, 12)
    return JP, JQ


def bundle_adjust(P2, points, matches: Matches, max_iter: int = 1000,
                  gradient_tol: float = 1e-10, step_tol: float = 1e-12,
                  cost_tol: float = 1e-12, lambda_max: float = 1e12) -> BundleResult:
    """Levenberg-Marquardt over the 12 entries of P2 and the 4n point coordinates.

    P stays [I|0].  The gauge freedom is left to the damping; points are
    renormalized to unit length after every accepted step.  Reports
    ``max_iter + 1`` iterations when the cap is reached.
    """
    P2 = np.array(P2, dtype=float).reshape(3, 4)
    Q = _points(points)
    Q = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    n = Q.shape[0]
    r = ba_residuals(P2, Q, matches)
    cost = float(np.sum(r * r))
    if not np.isfinite(cost):
        raise ValueError("initial reprojection is not finite")
    trace = [cost]
    lam = None
    diverged = False
    it = 0
    converged = False
    I4, I12 = np.eye(4), np.eye(12)
    while it < max_iter:
        JP, JQ = ba_jacobian(P2, Q)
        gP = np.einsum("nik,ni->k", JP, r)
        gQ = np.einsum("nik,ni->nk", JQ, r)
        if max(np.abs(gP).max(), np.abs(gQ).max()) < gradient_tol:
            converged = True
            break
        U = np.einsum("nik,nil->kl", JP, JP)
        V = np.einsum("nik,nil->nkl", JQ, JQ)
        W = np.einsum("nik,nil->nkl", JP, JQ)
        if lam is None:
            diag = np.concatenate([np.diag(U), np.einsum("nkk->nk", V).ravel()])
            lam = 1e-3 * float(np.mean(diag))
        it += 1
        xnorm = np.sqrt(np.sum(P2 ** 2) + np.sum(Q ** 2))
        while True:
            Vinv = np.linalg.inv(V + lam * I4)
            WV = W @ Vinv                                    # (n, 12, 4)
            S = U + lam * I12 - np.einsum("nij,nkj->ik", WV, W)
            rhs = -gP + np.einsum("nij,nj->i", WV, gQ)
            dP = np.linalg.solve(S, rhs)
            dQ = -np.einsum("nij,nj->ni", Vinv, gQ + np.einsum("nji,j->ni", W, dP))
            step = np.sqrt(np.sum(dP ** 2) + np.sum(dQ ** 2))
            P2_new = P2 + dP.reshape(3, 4)
            Q_new = Q + dQ
            Q_new /= np.linalg.norm(Q_new, axis=1, keepdims=True)
            try:
                r_new = ba_residuals(P2_new, Q_new, matches)
                cost_new = float(np.sum(r_new * r_new))
            except PointAtInfinity:
                cost_new = np.inf
            if np.isfinite(cost_new) and cost_new <= cost:
                decrease = cost - cost_new
                P2, Q, r, cost = P2_new, Q_new, r_new, cost_new
                trace.append(cost)
                lam /= 10.0
                if decrease <= cost_tol * max(trace[-2], 1e-300) or step <= step_tol * (xnorm + step_tol):
                    converged = True
                break
            if step <= step_tol * (xnorm + step_tol):
                converged = True
                break
            lam *= 10.0
            if lam > lambda_max:
                diverged = True
                break
        if converged or diverged:
            break
    if diverged:
        log.warning("bundle adjustment: damping exceeded %g without an acceptable step", lambda_max)
    iterations = it if (converged or diverged or it < max_iter) else max_iter + 1
    e_final = float(np.sqrt(cost / (2 * n)))
    return BundleResult(P2, Q, iterations, e_final, trace, diverged)


# --- evaluation -----------------------------------------------------------------

@dataclass
class EvaluationReport:
    method: str
    e_init: float
    e_ba: float
    iterations: int
    time_s: float
    diverged_lambda: bool = False

    def csv_row(self, timing: bool = True) -> list[str]:
        t = f"{self.time_s:.6g}" if timing else "0"
        return [self.method, f"{self.e_init:.6g}", f"{self.e_ba:.6g}", str(self.iterations), t]


def reports_to_csv(reports, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for rep in reports:
        w.writerow(rep.csv_row(timing))
    return buf.getvalue()


def evaluate(F, matches: Matches, method: str = "", time_s: float = 0.0,
             ba_opts: dict | None = None) -> EvaluationReport:
    """Reprojection error before and after bundle adjustment, starting from F."""
    cams = canonical_cameras(F)
    Q = triangulate_all(cams, matches, F)
    e_init = rms_reprojection(cams.P, cams.P2, Q, matches)
    ba = bundle_adjust(cams.P2, Q, matches, **(ba_opts or {}))
    return EvaluationReport(method, e_init, min(ba.e_final, e_init), ba.iterations, time_s,
                            ba.diverged_lambda)


_ALIASES = {"eightpoint": "EightPoint", "8pt": "EightPoint", "global": "Global", "gp": "Global"}


def method_name(method: str) -> str:
    """Canonical name ("EightPoint" or "Global") for a method flag or name."""
    key = method.lower().replace("-", "").replace("_", "")
    if key not in _ALIASES:
        raise ValueError(f"unknown method {method!r}")
    return _ALIASES[key]


def estimate(matches: Matches, method: str, global_opts: dict | None = None) -> tuple[FMatrix, float]:
    """Run one estimator; returns F and the seconds it took."""
    name = method_name(method)
    t0 = time.perf_counter()
    F = eight_point(matches) if name == "EightPoint" else global_f(matches, **(global_opts or {}))
    return F, time.perf_counter() - t0


def assess(matches: Matches, method: str, ba_opts: dict | None = None,
           global_opts: dict | None = None) -> EvaluationReport:
    """Estimate F with ``method`` and evaluate it; only the estimation is timed."""
    F, dt = estimate(matches, method, global_opts)
    return evaluate(F, matches, method=method_name(method), time_s=dt, ba_opts=ba_opts)
