"""Monomials, sparse polynomials, moment vectors and moment/localizing matrices.

Monomials are exponent tuples ordered graded-lexicographically with
x1 > x2 > ... > xn, so for two variables the order is
``1, x1, x2, x1^2, x1*x2, x2^2, ...``.  Every matrix layout in the package
follows this order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

MultiIndex = tuple[int, ...]


def degree(alpha: MultiIndex) -> int:
    return sum(alpha)


def grlex_key(alpha: MultiIndex):
    """Sort key: total degree first, then larger leading exponents first."""
    return (sum(alpha), tuple(-a for a in alpha))


def basis_size(n: int, t: int) -> int:
    """Number of monomials of degree <= t in n variables, (n+t)!/(t! n!)."""
    return math.comb(n + t, t)


def _compositions(d: int, n: int):
    # exponent vectors of total degree d, leading exponent descending
    if n == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _compositions(d - first, n - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class MonomialBasis:
    n: int
    t: int
    monomials: tuple[MultiIndex, ...]
    index_of: Mapping[MultiIndex, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.monomials)

    def __getitem__(self, i: int) -> MultiIndex:
        return self.monomials[i]

    @property
    def exponents(self) -> np.ndarray:
        return _exponent_array(self.n, self.t)

    def variable_index(self, i: int) -> int:
        """Flat index of the monomial x_{i+1}."""
        return 1 + i


@lru_cache(maxsize=None)
def enumerate_basis(n: int, t: int) -> MonomialBasis:
    """All monomials of degree <= t in n variables, graded-lex ordered."""
    if n < 1 or t < 0:
        raise ValueError(f"need n >= 1 and t >= 0, got n={n}, t={t}")
    mons = tuple(a for d in range(t + 1) for a in _compositions(d, n))
    return MonomialBasis(n, t, mons, {a: i for i, a in enumerate(mons)})


@lru_cache(maxsize=None)
def _exponent_array(n: int, t: int) -> np.ndarray:
    arr = np.array(enumerate_basis(n, t).monomials, dtype=np.int64).reshape(-1, n)
    arr.setflags(write=False)
    return arr


def monomial_values(x, t: int) -> np.ndarray:
    """The vector v_t(x) of all monomials of degree <= t evaluated at x."""
    x = np.asarray(x, dtype=float)
    return np.prod(x[None, :] ** _exponent_array(x.size, t), axis=1)


class Polynomial:
    """Sparse real polynomial in ``n`` variables.

    ``terms`` maps exponent tuples to coefficients; zero coefficients are
    dropped on construction.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[MultiIndex, float] | None = None):
        self.n = int(n)
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n or min(alpha, default=0) < 0:
                raise ValueError(f"bad exponent {alpha} for {self.n} variables")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        self.terms = {a: c for a, c in clean.items() if c != 0.0}

    @classmethod
    def constant(cls, n: int, c: float) -> Polynomial:
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, i: int) -> Polynomial:
        alpha = [0] * n
        alpha[i] = 1
        return cls(n, {tuple(alpha): 1.0})

    @classmethod
    def variables(cls, n: int) -> list[Polynomial]:
        return [cls.variable(n, i) for i in range(n)]

    @classmethod
    def quadratic_form(cls, Q) -> Polynomial:
        """x^T Q x for a square matrix Q (symmetrized)."""
        Q = np.asarray(Q, dtype=float)
        n = Q.shape[0]
        terms: dict[MultiIndex, float] = {}
        for i in range(n):
            for j in range(n):
                alpha = [0] * n
                alpha[i] += 1
                alpha[j] += 1
                key = tuple(alpha)
                terms[key] = terms.get(key, 0.0) + Q[i, j]
        return cls(n, terms)

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    @property
    def half_degree(self) -> int:
        return (self.degree + 1) // 2

    def __call__(self, x) -> float:
        return poly_eval(self, x)

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise ValueError("variable count mismatch")
            return other
        return Polynomial.constant(self.n, float(other))

    def __add__(self, other) -> Polynomial:
        other = self._coerce(other)
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return Polynomial(self.n, terms)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial(self.n, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other) -> Polynomial:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Polynomial:
        return self._coerce(other) - self

    def __mul__(self, other) -> Polynomial:
        if not isinstance(other, Polynomial):
            return Polynomial(self.n, {a: c * float(other) for a, c in self.terms.items()})
        other = self._coerce(other)
        terms: dict[MultiIndex, float] = {}
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                key = tuple(i + j for i, j in zip(a, b))
                terms[key] = terms.get(key, 0.0) + ca * cb
        return Polynomial(self.n, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Polynomial:
        out = Polynomial.constant(self.n, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def derivative(self, i: int) -> Polynomial:
        terms = {}
        for a, c in self.terms.items():
            if a[i]:
                b = list(a)
                b[i] -= 1
                terms[tuple(b)] = c * a[i]
        return Polynomial(self.n, terms)

    def shift(self, alpha: MultiIndex) -> Polynomial:
        """Multiply by the monomial x^alpha."""
        return Polynomial(self.n, {tuple(i + j for i, j in zip(a, alpha)): c
                                   for a, c in self.terms.items()})

    def __repr__(self) -> str:
        if not self.terms:
            return f"Polynomial({self.n}, 0)"
        parts = []
        for a in sorted(self.terms, key=grlex_key):
            mono = "*".join(f"x{i + 1}" + (f"^{e}" if e > 1 else "")
                            for i, e in enumerate(a) if e) or "1"
            parts.append(f"{self.terms[a]:+g}*{mono}")
        return f"Polynomial({self.n}, {' '.join(parts)})"


def poly_eval(p: Polynomial, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != p.n:
        raise ValueError(f"point has {x.size} coordinates, polynomial has {p.n} variables")
    total = 0.0
    for alpha, c in p.terms.items():
        total += c * float(np.prod(x ** np.asarray(alpha)))
    return total


def det3(entries: Iterable[Polynomial]) -> Polynomial:
    """Determinant of a 3x3 matrix given row-major polynomial entries."""
    a = list(entries)
    return (a[0] * (a[4] * a[8] - a[5] * a[7])
            - a[1] * (a[3] * a[8] - a[5] * a[6])
            + a[2] * (a[3] * a[7] - a[4] * a[6]))


@dataclass(frozen=True)
class MomentVector:
    """Truncated moment sequence y_alpha for all |alpha| <= order."""

    n: int
    order: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size != basis_size(self.n, self.order):
            raise ValueError(f"expected {basis_size(self.n, self.order)} moments, got {vals.size}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def basis(self) -> MonomialBasis:
        return enumerate_basis(self.n, self.order)

    def __getitem__(self, alpha: MultiIndex) -> float:
        return float(self.values[self.basis.index_of[tuple(alpha)]])

    def __len__(self) -> int:
        return self.values.size

    def first_order(self) -> np.ndarray:
        return self.values[1:self.n + 1].copy()

    def __add__(self, other: MomentVector) -> MomentVector:
        return MomentVector(self.n, self.order, self.values + other.values)

    def __mul__(self, s: float) -> MomentVector:
        return MomentVector(self.n, self.order, self.values * float(s))

    __rmul__ = __mul__


def dirac_moments(x, order: int) -> MomentVector:
    """Moments of the point mass at x up to the given total degree."""
    x = np.asarray(x, dtype=float).ravel()
    return MomentVector(x.size, order, monomial_values(x, order))


def riesz(y: MomentVector, p: Polynomial) -> float:
    """Linearize p by replacing each monomial x^alpha with y_alpha."""
    if p.n != y.n:
        raise ValueError("variable count mismatch")
    if p.degree > y.order:
        raise ValueError(f"polynomial degree {p.degree} exceeds moment order {y.order}")
    idx = y.basis.index_of
    return float(sum(c * y.values[idx[a]] for a, c in p.terms.items()))


def riesz_row(p: Polynomial, order: int) -> np.ndarray:
    """Coefficient vector of riesz(., p) over moments of the given order."""
    if p.degree > order:
        raise ValueError(f"polynomial degree {p.degree} exceeds moment order {order}")
    idx = enumerate_basis(p.n, order).index_of
    row = np.zeros(basis_size(p.n, order))
    for a, c in p.terms.items():
        row[idx[a]] += c
    return row


@lru_cache(maxsize=None)
def _sum_table(n: int, t: int, shift: MultiIndex, order: int) -> np.ndarray:
    # table[a, b] = flat index of alpha_a + alpha_b + shift in the order-`order` basis
    exps = _exponent_array(n, t)
    idx = enumerate_basis(n, order).index_of
    s = exps.shape[0]
    table = np.empty((s, s), dtype=np.int64)
    sh = np.asarray(shift, dtype=np.int64)
    for a in range(s):
        for b in range(a, s):
            k = idx[tuple((exps[a] + exps[b] + sh).tolist())]
            table[a, b] = table[b, a] = k
    table.setflags(write=False)
    return table


def moment_matrix(y: MomentVector, t: int) -> np.ndarray:
    """M_t(y) with entries y_{alpha+beta}; symmetric by construction."""
    if 2 * t > y.order:
        raise ValueError(f"moment matrix of order {t} needs moments up to {2 * t}, have {y.order}")
    return y.values[_sum_table(y.n, t, (0,) * y.n, y.order)]


def localizing_matrix(y: MomentVector, q: Polynomial, t: int) -> np.ndarray:
    """M_t(q y): entry (alpha, beta) is sum_gamma q_gamma y_{alpha+beta+gamma}."""
    if q.n != y.n:
        raise ValueError("variable count mismatch")
    if 2 * t + q.degree > y.order:
        raise ValueError(f"localizing matrix of order {t} for a degree-{q.degree} polynomial "
                         f"needs moments up to {2 * t + q.degree}, have {y.order}")
    s = basis_size(y.n, t)
    out = np.zeros((s, s))
    for gamma, c in sorted(q.terms.items(), key=lambda kv: grlex_key(kv[0])):
        out += c * y.values[_sum_table(y.n, t, gamma, y.order)]
    return out


def localizing_map(q: Polynomial, t: int, order: int) -> sparse.csr_matrix:
    """Sparse matrix L with vec(M_t(q y)) = L @ y.values (row-major vec).

    Passing the constant polynomial 1 gives the moment-matrix map.
    """
    s = basis_size(q.n, t)
    rows, cols, vals = [], [], []
    flat = np.arange(s * s)
    for gamma, c in q.terms.items():
        table = _sum_table(q.n, t, gamma, order)
        rows.append(flat)
        cols.append(table.ravel())
        vals.append(np.full(s * s, c))
    if not rows:
        return sparse.csr_matrix((s * s, basis_size(q.n, order)))
    mat = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(s * s, basis_size(q.n, order)))
    return mat.tocsr()
