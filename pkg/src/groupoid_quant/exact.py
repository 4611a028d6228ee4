"""Thin helpers around sympy's sparse DomainMatrix over QQ."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

import numpy as np
from sympy import QQ
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.sdm import SDM

Mat = DomainMatrix


def qq(x) -> object:
    if isinstance(x, Fraction):
        return QQ(x.numerator, x.denominator)
    return QQ.convert(x)


def from_dok(entries: Mapping[tuple, object], shape: tuple) -> Mat:
    rows: dict = {}
    for (i, j), v in entries.items():
        if v != 0:
            rows.setdefault(i, {})[j] = qq(v)
    return DomainMatrix.from_rep(SDM(rows, shape, QQ))


def from_rows(rows) -> Mat:
    rows = [list(r) for r in rows]
    n = len(rows[0]) if rows else 0
    return from_dok({(i, j): v for i, r in enumerate(rows) for j, v in enumerate(r)},
                    (len(rows), n))


def zeros(m: int, n: int) -> Mat:
    return DomainMatrix.from_rep(SDM({}, (m, n), QQ))


def eye(n: int) -> Mat:
    return DomainMatrix.from_rep(SDM({i: {i: QQ(1)} for i in range(n)}, (n, n), QQ))


def kron(a: Mat, b: Mat) -> Mat:
    (ma, na), (mb, nb) = a.shape, b.shape
    da, db = a.rep.to_sdm(), b.rep.to_sdm()
    rows: dict = {}
    for i, ri in da.items():
        for k, rk in db.items():
            row = rows.setdefault(i * mb + k, {})
            for j, v in ri.items():
                for l, w in rk.items():
                    row[j * nb + l] = v * w
    return DomainMatrix.from_rep(SDM(rows, (ma * mb, na * nb), QQ))


def scale(a: Mat, c) -> Mat:
    return a.rscalarmul(qq(c))


def is_zero(a: Mat) -> bool:
    return not a.to_dok()


def equal(a: Mat, b: Mat) -> bool:
    return a.shape == b.shape and a.to_dok() == b.to_dok()


def rref_rows(a: Mat) -> tuple[Mat, tuple]:
    """Nonzero rows of the reduced row echelon form and the pivot columns."""
    r, pivots = a.to_sparse().rref()
    rows = {i: row for i, row in r.rep.to_sdm().items() if i < len(pivots)}
    return DomainMatrix.from_rep(SDM(rows, (len(pivots), a.shape[1]), QQ)), tuple(pivots)


def rank(a: Mat) -> int:
    return len(a.to_sparse().rref()[1])


def nullspace_rref(a: Mat) -> Mat:
    """Canonical basis of the null space: rows of the RREF of any null-space basis."""
    n = a.to_sparse().nullspace()
    if n.shape[0] == 0:
        return zeros(0, a.shape[1])
    return rref_rows(n)[0]


def pivot_section(pivots: tuple, n: int) -> Mat:
    """Matrix S (n x r) with S e_k = e_{pivot_k}; a right inverse of an RREF map."""
    return from_dok({(p, k): 1 for k, p in enumerate(pivots)}, (n, len(pivots)))


def to_numpy(a: Mat) -> np.ndarray:
    out = np.zeros(a.shape)
    for (i, j), v in a.to_dok().items():
        out[i, j] = float(v)
    return out


def to_fractions(a: Mat) -> list:
    out = [[Fraction(0)] * a.shape[1] for _ in range(a.shape[0])]
    for (i, j), v in a.to_dok().items():
        out[i][j] = Fraction(int(v.numerator), int(v.denominator))
    return out


def cayley_orthogonal(rng: np.random.Generator, n: int, bound: int = 3) -> Mat:
    """Random rational orthogonal matrix (I - S)(I + S)^-1 with S integer skew-symmetric."""
    s = np.triu(rng.integers(-bound, bound + 1, size=(n, n)), 1)
    s = s - s.T
    S = from_rows(s.tolist())
    I = eye(n)
    return ((I - S).to_dense() * (I + S).to_dense().inv()).to_sparse()
