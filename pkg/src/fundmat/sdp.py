"""Dense primal-dual interior-point solver for small block LMI problems.

The problems have the form::

    minimize    c @ y
    subject to  F_b(y) = F_b0 + sum_i y_i F_bi  >= 0   (PSD, every block b)
                E @ y = d

with a free decision vector ``y``.  Its conic dual is::

    maximize    d @ lam - sum_b <F_b0, X_b>
    subject to  sum_b <F_bi, X_b> + (E^T lam)_i = c_i,   X_b >= 0

The iteration is an infeasible path-following method with Nesterov-Todd
scaling and Mehrotra's predictor-corrector.  Each Newton step reduces to
the dense system ``[H -E^T; E 0]`` with ``H_ij = sum_b <F_bi, W_b F_bj W_b>``.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import sparse

log = logging.getLogger(__name__)


class SolverStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    SLOW_PROGRESS = "SlowProgress"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class LmiBlock:
    """F0 + sum_i y_i F_i >= 0, with vec(F_i) stored as column i of ``coeffs``."""

    const: np.ndarray
    coeffs: sparse.csr_matrix
    name: str = ""
    _cache: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.const = np.atleast_2d(np.asarray(self.const, dtype=float))
        self.coeffs = sparse.csr_matrix(self.coeffs)
        s = self.const.shape[0]
        if self.const.shape != (s, s) or self.coeffs.shape[0] != s * s:
            raise ValueError("block data has inconsistent size")

    @property
    def size(self) -> int:
        return self.const.shape[0]

    def evaluate(self, y) -> np.ndarray:
        s = self.size
        return self.const + (self.coeffs @ y).reshape(s, s)

    def linear(self, y) -> np.ndarray:
        s = self.size
        return (self.coeffs @ y).reshape(s, s)

    def adjoint(self, X) -> np.ndarray:
        return self.coeffs.T @ np.asarray(X).ravel()


@dataclass
class SdpProblem:
    cost: np.ndarray
    blocks: list[LmiBlock]
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float).ravel()
        m = self.cost.size
        self.eq_matrix = np.asarray(self.eq_matrix, dtype=float).reshape(-1, m)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).ravel()
        if self.eq_rhs.size != self.eq_matrix.shape[0]:
            raise ValueError("equality matrix and right-hand side disagree")
        for blk in self.blocks:
            if blk.coeffs.shape[1] != m:
                raise ValueError(f"block {blk.name!r} has {blk.coeffs.shape[1]} columns, expected {m}")

    @property
    def n_vars(self) -> int:
        return self.cost.size

    @property
    def block_sizes(self) -> list[int]:
        return [b.size for b in self.blocks]

    def dump(self, fh) -> None:
        """Plain-text dump: sizes, cost, equalities, then block triplets.

        Block triplets are ``var row col value`` with var 0 the constant
        term and var i>=1 the coefficient of y_{i-1}; only the upper
        triangle is written.
        """
        m, p = self.n_vars, self.eq_matrix.shape[0]
        fh.write(f"vars {m}\n")
        fh.write(f"equalities {p}\n")
        fh.write("blocks " + " ".join(str(s) for s in self.block_sizes) + "\n")
        fh.write("cost\n")
        for i in np.flatnonzero(self.cost):
            fh.write(f"{i} {self.cost[i]:.17g}\n")
        fh.write("eq\n")
        for r in range(p):
            for i in np.flatnonzero(self.eq_matrix[r]):
                fh.write(f"{r} {i} {self.eq_matrix[r, i]:.17g}\n")
            fh.write(f"{r} rhs {self.eq_rhs[r]:.17g}\n")
        for k, blk in enumerate(self.blocks):
            s = blk.size
            fh.write(f"block {k} {s} {blk.name}\n")
            for r, c in zip(*np.nonzero(np.triu(blk.const))):
                fh.write(f"0 {r} {c} {blk.const[r, c]:.17g}\n")
            coo = blk.coeffs.tocoo()
            order = np.lexsort((coo.row, coo.col))
            for idx in order:
                r, c = divmod(int(coo.row[idx]), s)
                if r <= c and coo.data[idx] != 0.0:
                    fh.write(f"{coo.col[idx] + 1} {r} {c} {coo.data[idx]:.17g}\n")


@dataclass
class SdpSolution:
    y: np.ndarray
    block_values: list[np.ndarray]
    eq_multipliers: np.ndarray
    block_multipliers: list[np.ndarray]
    objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    status: SolverStatus
    merit_history: list[float] = field(default_factory=list)

    @property
    def dual_multipliers(self):
        return self.eq_multipliers, self.block_multipliers


class _Breakdown(Exception):
    pass


def _independent_rows(E: np.ndarray, d: np.ndarray, tol: float = 1e-10):
    """Drop linearly dependent equality rows; fail if they are inconsistent."""
    if E.shape[0] == 0:
        return E, d
    _, R, piv = sla.qr(E.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(diag[0], 1.0)))
    keep = np.sort(piv[:rank])
    if rank < E.shape[0]:
        sol = np.linalg.lstsq(E[keep], d[keep], rcond=None)[0]
        if np.linalg.norm(E @ sol - d) > 1e-8 * (1 + np.linalg.norm(d)):
            raise ValueError("inconsistent equality constraints")
        log.debug("presolve removed %d dependent equality rows", E.shape[0] - rank)
    return E[keep], d[keep]


def _nt_scaling(X, S):
    """G with G^T S G = G^{-1} X G^{-T} = diag(lam); W = G G^T is the NT point."""
    Ls = np.linalg.cholesky(S)
    Lx = np.linalg.cholesky(X)
    U, lam, Vt = np.linalg.svd(Ls.T @ Lx)
    rt = np.sqrt(lam)
    G = sla.solve_triangular(Ls.T, U, lower=False) * rt
    Ginv = (U.T @ Ls.T) / rt[:, None]
    return G, Ginv, lam


def _max_step(lam, D):
    """Largest a with diag(lam) + a*D >= 0."""
    rs = 1.0 / np.sqrt(lam)
    M = D * rs[:, None] * rs[None, :]
    e = np.linalg.eigvalsh((M + M.T) / 2)[0]
    return np.inf if e >= 0 else -1.0 / e


def _schur_block(blk: LmiBlock, W: np.ndarray) -> np.ndarray:
    """sum of <F_i, W F_j W> over the block, for all i, j."""
    A = blk.coeffs
    s, m = blk.size, A.shape[1]
    if s * s * m <= 4e7:
        if blk._cache is None:
            # rows (d, j), columns c: entry (c, d) of F_j
            A3 = A.tocoo()
            r, c = np.divmod(A3.row, s)
            blk._cache = (sparse.csr_matrix((A3.data, (c * m + A3.col, r)), shape=(s * m, s)),
                          A.T.tocsr())
        A2t, At = blk._cache
        T = (A2t @ W).T.reshape(s, s, m)        # W F_j, indexed (a, d, j)
        Y = np.tensordot(W, T, axes=(0, 1))     # W F_j W, indexed (b, a, j)
        return At @ Y.transpose(1, 0, 2).reshape(s * s, m)
    # big blocks: apply W . W column by column
    cols = []
    Ad = A.tocsc()
    for j in range(m):
        Fj = Ad[:, j].toarray().reshape(s, s)
        cols.append(A.T @ (W @ Fj @ W).ravel())
    return np.column_stack(cols)


def solve_sdp(prob: SdpProblem, gap_tol: float = 1e-9, feas_tol: float = 1e-9,
              max_iter: int = 200, step_fraction: float = 0.98,
              stall_iters: int = 5, stall_improvement: float = 1e-2) -> SdpSolution:
    """Solve ``prob`` and return the final (or best) iterate.

    Stops with ``Optimal`` once the relative gap and both residuals are
    below tolerance.  When the merit (gap + residuals) has not improved by
    ``stall_improvement`` relative over ``stall_iters`` iterations it stops
    with ``SlowProgress`` and returns the best iterate seen.
    """
    m = prob.n_vars
    c = prob.cost
    E, d = _independent_rows(prob.eq_matrix, prob.eq_rhs)
    blocks = prob.blocks
    nu = sum(b.size for b in blocks)
    if nu == 0:
        raise ValueError("problem has no conic blocks")

    scale = max(np.linalg.norm(d), np.linalg.norm(c), 1.0)
    y = np.linalg.lstsq(E, d, rcond=None)[0] if E.shape[0] else np.zeros(m)
    lam_eq = np.zeros(E.shape[0])
    X = [scale * np.eye(b.size) for b in blocks]
    S = [scale * np.eye(b.size) for b in blocks]

    norm_f0 = np.sqrt(sum(np.sum(b.const ** 2) for b in blocks))
    norm_c = np.linalg.norm(c)
    norm_d = np.linalg.norm(d)

    def measures(y, S, X, lam_eq):
        Fy = [b.evaluate(y) for b in blocks]
        Rp = [f - s for f, s in zip(Fy, S)]
        re = d - E @ y
        rd = c - sum(b.adjoint(x) for b, x in zip(blocks, X)) - E.T @ lam_eq
        pobj = float(c @ y)
        dobj = float(d @ lam_eq - sum(np.sum(b.const * x) for b, x in zip(blocks, X)))
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = max(np.sqrt(sum(np.sum(r ** 2) for r in Rp)) / (1.0 + norm_f0),
                   np.linalg.norm(re) / (1.0 + norm_d))
        dinf = np.linalg.norm(rd) / (1.0 + norm_c)
        return Fy, Rp, re, rd, pobj, dobj, gap, pinf, dinf

    history: list[float] = []
    best = None
    status = SolverStatus.MAX_ITER
    growth = 0
    k = 0
    for k in range(max_iter + 1):
        Fy, Rp, re, rd, pobj, dobj, gap, pinf, dinf = measures(y, S, X, lam_eq)
        merit = gap + pinf + dinf
        history.append(merit)
        log.debug("it %d pobj %.10g gap %.2e pinf %.2e dinf %.2e", k, pobj, gap, pinf, dinf)
        if best is None or merit <= best[0]:
            best = (merit, k, y.copy(), [s.copy() for s in S], [x.copy() for x in X],
                    lam_eq.copy(), pobj, dobj, gap, pinf, dinf)
        if gap <= gap_tol and pinf <= feas_tol and dinf <= feas_tol:
            status = SolverStatus.OPTIMAL
            break
        if k == max_iter:
            status = SolverStatus.MAX_ITER
            break
        if len(history) > stall_iters:
            ref = history[-stall_iters - 1]
            if min(history[-stall_iters:]) > (1.0 - stall_improvement) * ref:
                status = SolverStatus.SLOW_PROGRESS
                break
        if k > best[1] and best[0] < 1e-4 and merit > 1e2 * best[0]:
            # accuracy is being lost faster than it is gained
            status = SolverStatus.SLOW_PROGRESS
            break
        resid = max(pinf, dinf)
        if k > 0 and resid > 10 * max(history[0], 1.0) and resid > 1e3 * best[0]:
            growth += 1
            if growth >= 10:
                status = SolverStatus.INFEASIBLE
                break
        else:
            growth = 0

        mu = sum(np.sum(x * s) for x, s in zip(X, S)) / nu
        try:
            y, S, X, lam_eq = _step(blocks, E, y, S, X, lam_eq, Rp, re, rd, mu,
                                    step_fraction)
        except (_Breakdown, np.linalg.LinAlgError) as exc:
            log.debug("breakdown at iteration %d: %s", k, exc)
            # a breakdown after the iterates have converged as far as they can
            # is a stall, not a failure
            near = best[0] <= 1e2 * (gap_tol + 2 * feas_tol)
            status = SolverStatus.SLOW_PROGRESS if near else SolverStatus.NUMERICAL_FAILURE
            break

    if status is SolverStatus.OPTIMAL:
        final = (merit, k, y, S, X, lam_eq, pobj, dobj, gap, pinf, dinf)
    else:
        final = best
    _, _, y, S, X, lam_eq, pobj, dobj, gap, pinf, dinf = final
    return SdpSolution(
        y=y, block_values=[b.evaluate(y) for b in blocks], eq_multipliers=lam_eq,
        block_multipliers=X, objective=pobj, dual_objective=dobj, gap=gap,
        primal_residual=pinf, dual_residual=dinf, iterations=k, status=status,
        merit_history=history)


def _step(blocks, E, y, S, X, lam_eq, Rp, re, rd, mu, step_fraction, refine_steps=1):
    m = y.size
    p = E.shape[0]
    scal = [_nt_scaling(x, s) for x, s in zip(X, S)]
    Ws = [G @ G.T for G, _, _ in scal]

    H = np.zeros((m, m))
    for blk, W in zip(blocks, Ws):
        H += _schur_block(blk, W)
    H = (H + H.T) / 2
    if p:
        kkt = np.block([[H, -E.T], [E, np.zeros((p, p))]])
        try:
            factor = sla.lu_factor(kkt, check_finite=False)
        except (ValueError, sla.LinAlgError) as exc:
            raise _Breakdown(str(exc))
    else:
        factor = _factor(H)

    # constant part of the dual right-hand side
    WRW = [W @ r @ W for W, r in zip(Ws, Rp)]

    def kkt_solve(g, r):
        if p:
            sol = sla.lu_solve(factor, np.concatenate([g, r]))
            return sol[:m], sol[m:]
        return sla.cho_solve(factor, g), np.zeros(0)

    def apply_h(dy):
        return sum(b.adjoint(W @ b.linear(dy) @ W) for b, W in zip(blocks, Ws))

    def newton(Rc):
        g = sum(b.adjoint(rc - wrw) for b, rc, wrw in zip(blocks, Rc, WRW)) - rd
        dy, dlam = kkt_solve(g, re)
        for _ in range(refine_steps):
            # residual with the exact operator, not the assembled H
            rg = g - apply_h(dy) + E.T @ dlam
            rr = re - E @ dy
            cy, cl = kkt_solve(rg, rr)
            dy, dlam = dy + cy, dlam + cl
        if not np.all(np.isfinite(dy)):
            raise _Breakdown("non-finite Newton direction")
        dS = [b.linear(dy) + r for b, r in zip(blocks, Rp)]
        dX = [rc - W @ ds @ W for rc, W, ds in zip(Rc, Ws, dS)]
        return dy, dlam, dS, dX

    def scaled(dS, dX):
        dSt = [G.T @ ds @ G for (G, _, _), ds in zip(scal, dS)]
        dXt = [Gi @ dx @ Gi.T for (_, Gi, _), dx in zip(scal, dX)]
        return dSt, dXt

    def steps(dSt, dXt):
        ap = min(_max_step(lam, ds) for (_, _, lam), ds in zip(scal, dSt))
        ad = min(_max_step(lam, dx) for (_, _, lam), dx in zip(scal, dXt))
        return min(1.0, step_fraction * ap), min(1.0, step_fraction * ad)

    def rc_from(rhs_scaled):
        out = []
        for (G, _, lam), rhs in zip(scal, rhs_scaled):
            T = 2.0 * rhs / (lam[:, None] + lam[None, :])
            out.append(G @ T @ G.T)
        return out

    # predictor
    rhs_aff = [-np.diag(lam ** 2) for _, _, lam in scal]
    dy, dlam, dS, dX = newton(rc_from(rhs_aff))
    dSt, dXt = scaled(dS, dX)
    ap, ad = steps(dSt, dXt)
    nu = sum(x.shape[0] for x in X)
    mu_aff = sum(np.sum((x + ad * dx) * (s + ap * ds))
                 for x, dx, s, ds in zip(X, dX, S, dS)) / nu
    sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

    # corrector
    rhs_cor = []
    for (_, _, lam), ds, dx in zip(scal, dSt, dXt):
        prod = (dx @ ds + ds @ dx) / 2
        rhs_cor.append(np.diag(sigma * mu - lam ** 2) - prod)
    dy, dlam, dS, dX = newton(rc_from(rhs_cor))
    dSt, dXt = scaled(dS, dX)
    ap, ad = steps(dSt, dXt)

    y = y + ap * dy
    S = [s + ap * ds for s, ds in zip(S, dS)]
    X = [x + ad * dx for x, dx in zip(X, dX)]
    lam_eq = lam_eq + ad * dlam
    S = [(s + s.T) / 2 for s in S]
    X = [(x + x.T) / 2 for x in X]
    return y, S, X, lam_eq


def _factor(H):
    try:
        return sla.cho_factor(H)
    except np.linalg.LinAlgError:
        pass
    base = max(np.max(np.abs(np.diag(H))), 1e-300)
    for k in range(14, 4, -2):
        try:
            return sla.cho_factor(H + (10.0 ** -k) * base * np.eye(H.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise _Breakdown("Schur complement is not positive definite")
