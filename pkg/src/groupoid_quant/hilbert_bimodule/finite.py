"""Finite bibundles and their Hilbert bimodules in exact rational arithmetic.

A bimodule over (C*(G), C*(H)) is stored in a basis e_1..e_d of its middle space:
``lact[x]`` is the matrix of delta_x acting on the left, ``ract[c]`` the matrix of
phi -> phi * delta_c, and ``inner[c][i, j]`` the value at c of <e_i, e_j>.  All
structure constants are rational, so the complex inner product restricted to the
rational span is the bilinear form below.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .. import exact as ex
from ..convolution import ConvolutionElement, regular_matrix
from ..groupoid_core import (FiniteGroupoid, Violation, _hashable, _jsonable, block_groupoid,
                             random_block_shape, trivial_groupoid)


# ---------------------------------------------------------------- bibundles

@dataclass(frozen=True, eq=False)
class Bibundle:
    """G acts on the left of ``points`` along ``t``; H acts on the right along ``s``."""

    left: FiniteGroupoid
    right: FiniteGroupoid
    points: tuple
    t: Mapping
    s: Mapping
    lact: Mapping  # (x, p) -> x p, defined iff src(x) == t[p]
    ract: Mapping  # (p, y) -> p y, defined iff s[p] == tgt(y)
    name: str = ""

    @property
    def degenerate(self) -> bool:
        return len(self.points) == 0


def validate_bibundle(b: Bibundle, regular: bool = True) -> list[Violation]:
    G, H = b.left, b.right
    out: list[Violation] = []
    pts = b.points
    for x, p in product(G.arrows, pts):
        ok = G.src[x] == b.t[p]
        if ok != ((x, p) in b.lact):
            out.append(Violation("left_domain", (x, p)))
        elif ok:
            q = b.lact[(x, p)]
            if b.t[q] != G.tgt[x] or b.s[q] != b.s[p]:
                out.append(Violation("left_anchor", (x, p)))
    for p, y in product(pts, H.arrows):
        ok = b.s[p] == H.tgt[y]
        if ok != ((p, y) in b.ract):
            out.append(Violation("right_domain", (p, y)))
        elif ok:
            q = b.ract[(p, y)]
            if b.t[q] != b.t[p] or b.s[q] != H.src[y]:
                out.append(Violation("right_anchor", (p, y)))
    if out:
        return out
    for p in pts:
        if b.lact[(b.t[p], p)] != p:
            out.append(Violation("left_unit", (p,)))
        if b.ract[(p, b.s[p])] != p:
            out.append(Violation("right_unit", (p,)))
    for (x, y), xy in G.compose.items():
        for p in pts:
            if b.t[p] == G.src[y] and b.lact[(xy, p)] != b.lact[(x, b.lact[(y, p)])]:
                out.append(Violation("left_associative", (x, y, p)))
    for (y, z), yz in H.compose.items():
        for p in pts:
            if b.s[p] == H.tgt[y] and b.ract[(p, yz)] != b.ract[(b.ract[(p, y)], z)]:
                out.append(Violation("right_associative", (p, y, z)))
    for (x, p), xp in b.lact.items():
        for y in H.by_target[b.s[p]]:
            if b.ract[(xp, y)] != b.lact[(x, b.ract[(p, y)])]:
                out.append(Violation("commuting", (x, p, y)))
    if regular:
        fibers: dict = {}
        for p in pts:
            fibers.setdefault(b.s[p], []).append(p)
        for fib in fibers.values():
            p0 = fib[0]
            orbit = {b.lact[(x, p0)] for x in G.by_source[b.t[p0]]}
            if orbit != set(fib):
                out.append(Violation("left_transitive", (p0,)))
        for (x, p), q in b.lact.items():
            if q == p and x not in G.units:
                out.append(Violation("left_free", (x, p)))
    return out


def _require_regular(b: Bibundle):
    bad = validate_bibundle(b)
    if bad:
        raise ValueError(f"bibundle is not regular: {bad[0].axiom} fails at {bad[0].witnesses}")


def bibundle_from_homomorphism(G: FiniteGroupoid, H: FiniteGroupoid, phi: Mapping,
                               name: str = "") -> Bibundle:
    """M = {(x, y0) : s(x) = phi(y0)}, G acting by composition, H through phi."""
    points = [(x, y0) for y0 in H.unit_list for x in G.by_source[phi[y0]]]
    t = {p: G.tgt[p[0]] for p in points}
    s = {p: p[1] for p in points}
    lact = {(x, p): (G.compose[(x, p[0])], p[1]) for p in points for x in G.by_source[t[p]]}
    ract = {(p, y): (G.compose[(p[0], phi[y])], H.src[y])
            for p in points for y in H.by_target[p[1]]}
    return Bibundle(G, H, tuple(points), t, s, lact, ract, name)


def identity_bibundle(G: FiniteGroupoid) -> Bibundle:
    """G as a bibundle over itself: points are arrows, both actions are composition."""
    pts = tuple(G.arrows)
    lact = {(x, p): G.compose[(x, p)] for p in pts for x in G.by_source[G.tgt[p]]}
    ract = {(p, y): G.compose[(p, y)] for p in pts for y in G.by_target[G.src[p]]}
    return Bibundle(G, G, pts, dict(G.tgt), dict(G.src), lact, ract, "identity")


def random_homomorphism(rng: np.random.Generator, G: FiniteGroupoid, H: FiniteGroupoid) -> dict:
    """Random functor H -> G between block groupoids (see ``block_groupoid``)."""
    gs, hs = G.block_shape, H.block_shape
    phi = {}
    for j, (n, k) in enumerate(hs):
        c = int(rng.integers(len(gs)))
        nc, kc = gs[c]
        objs = rng.integers(nc, size=n)
        mults = [m for m in range(kc) if (m * k) % kc == 0]
        m = int(rng.choice(mults))
        tw = rng.integers(kc, size=n)
        for a, bb, r in product(range(n), range(n), range(k)):
            phi[(j, a, bb, r)] = (c, int(objs[a]), int(objs[bb]),
                                  int((tw[a] + m * r - tw[bb]) % kc))
    return phi


def random_bibundle(rng: np.random.Generator, G: FiniteGroupoid, H: FiniteGroupoid,
                    max_points: int | None = None, tries: int = 50) -> Bibundle:
    for _ in range(tries):
        b = bibundle_from_homomorphism(G, H, random_homomorphism(rng, G, H))
        if max_points is None or len(b.points) <= max_points:
            return b
    raise RuntimeError("could not sample a small enough bibundle")


def bibundle_tensor(m: Bibundle, n: Bibundle) -> Bibundle:
    """(M x_H N) / H with representatives chosen as the first pair of each orbit."""
    if m.right is not n.left:
        raise ValueError("middle groupoids differ")
    H = m.right
    pairs = [(p, q) for p in m.points for q in n.points if m.s[p] == n.t[q]]
    parent = {pq: pq for pq in pairs}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for p, q in pairs:
        for h in H.by_target[m.s[p]]:
            other = (m.ract[(p, h)], n.lact[(H.inv[h], q)])
            ra, rb = find((p, q)), find(other)
            if ra != rb:
                parent[rb] = ra
    rep = {pq: find(pq) for pq in pairs}
    points = tuple(dict.fromkeys(rep[pq] for pq in pairs))
    G, K = m.left, n.right
    t = {r: m.t[r[0]] for r in points}
    s = {r: n.s[r[1]] for r in points}
    lact = {(x, r): rep[(m.lact[(x, r[0])], r[1])] for r in points for x in G.by_source[t[r]]}
    ract = {(r, y): rep[(r[0], n.ract[(r[1], y)])] for r in points for y in K.by_target[s[r]]}
    out = Bibundle(G, K, points, t, s, lact, ract, f"({m.name}*{n.name})")
    object.__setattr__(out, "orbit_of", rep)
    return out


# ---------------------------------------------------------------- bimodules

@dataclass(frozen=True, eq=False)
class Bimodule:
    left: FiniteGroupoid
    right: FiniteGroupoid
    dim: int
    lact: Mapping
    ract: Mapping
    inner: Mapping
    labels: tuple = ()
    quotient: tuple | None = None  # (Q, pivots, dimE, dimF) for interior tensors
    name: str = ""

    def left_matrix(self, f: ConvolutionElement) -> ex.Mat:
        out = ex.zeros(self.dim, self.dim)
        for x, c in f.coeffs.items():
            out = out + ex.scale(self.lact[x], c)
        return out

    def right_matrix(self, b: ConvolutionElement) -> ex.Mat:
        out = ex.zeros(self.dim, self.dim)
        for y, c in b.coeffs.items():
            out = out + ex.scale(self.ract[y], c)
        return out

    def inner_product(self, phi: Sequence, psi: Sequence) -> ConvolutionElement:
        u = ex.from_rows([[v] for v in phi])
        w = ex.from_rows([[v] for v in psi])
        coeffs = {}
        for c, I in self.inner.items():
            val = (u.transpose() * I * w).to_dok().get((0, 0), 0)
            coeffs[c] = Fraction(int(val.numerator), int(val.denominator)) if val else 0
        return ConvolutionElement(self.right, coeffs)

    def to_json(self) -> str:
        def mats(d, arrows):
            return [[_jsonable(a), [[str(v) for v in row] for row in ex.to_fractions(d[a])]]
                    for a in arrows]

        return json.dumps({
            "name": self.name, "dim": self.dim, "labels": [_jsonable(x) for x in self.labels],
            "left": mats(self.lact, self.left.arrows), "right": mats(self.ract, self.right.arrows),
            "inner": mats(self.inner, self.right.arrows),
        })


def bimodule_structure_from_json(text: str) -> dict:
    """Parse a bimodule document into exact matrices keyed by arrow id."""
    doc = json.loads(text)

    def mats(entries):
        return {_hashable(a): ex.from_rows([[Fraction(v) for v in row] for row in m])
                for a, m in entries}

    return {"dim": doc["dim"], "labels": [_hashable(x) for x in doc["labels"]],
            "left": mats(doc["left"]), "right": mats(doc["right"]), "inner": mats(doc["inner"])}


def bimodule_from_bibundle(b: Bibundle) -> Bimodule:
    """Basis e_p, p in M.  delta_x e_p = w e_{xp}; e_p delta_y = w e_{py};
    <e_p, e_p'>(y) = mu [s(p) = t(y) and p y = p'] with mu the G weight at t(p)."""
    _require_regular(b)
    G, H = b.left, b.right
    pos = {p: i for i, p in enumerate(b.points)}
    d = len(b.points)
    L = {x: {} for x in G.arrows}
    for (x, p), q in b.lact.items():
        L[x][(pos[q], pos[p])] = G.weight(x)
    R = {y: {} for y in H.arrows}
    inner = {y: {} for y in H.arrows}
    for (p, y), q in b.ract.items():
        R[y][(pos[q], pos[p])] = H.weight(y)
        inner[y][(pos[p], pos[q])] = G.haar_weight[b.t[p]]
    return Bimodule(G, H, d, {x: ex.from_dok(v, (d, d)) for x, v in L.items()},
                    {y: ex.from_dok(v, (d, d)) for y, v in R.items()},
                    {y: ex.from_dok(v, (d, d)) for y, v in inner.items()},
                    tuple(b.points), None, b.name)


def identity_bimodule(G: FiniteGroupoid) -> Bimodule:
    return bimodule_from_bibundle(identity_bibundle(G))


def conjugate(E: Bimodule, U: ex.Mat) -> Bimodule:
    """Transport the structure along an orthogonal change of basis U."""
    Ut = U.transpose()
    return Bimodule(E.left, E.right, E.dim,
                    {x: U * m * Ut for x, m in E.lact.items()},
                    {y: U * m * Ut for y, m in E.ract.items()},
                    {y: U * m * Ut for y, m in E.inner.items()}, (), None, E.name + "'")


def _block(a: ex.Mat, b: ex.Mat) -> ex.Mat:
    (m, n), (p, q) = a.shape, b.shape
    d = dict(a.to_dok())
    d.update({(i + m, j + n): v for (i, j), v in b.to_dok().items()})
    return ex.from_dok(d, (m + p, n + q))


def direct_sum(E: Bimodule, F: Bimodule) -> Bimodule:
    if E.left is not F.left or E.right is not F.right:
        raise ValueError("algebras differ")
    return Bimodule(E.left, E.right, E.dim + F.dim,
                    {x: _block(E.lact[x], F.lact[x]) for x in E.left.arrows},
                    {y: _block(E.ract[y], F.ract[y]) for y in E.right.arrows},
                    {y: _block(E.inner[y], F.inner[y]) for y in E.right.arrows},
                    E.labels + F.labels, None, f"{E.name}+{F.name}")


def _positivity_matrix(E: Bimodule) -> np.ndarray:
    H = E.right
    n = len(H.arrows)
    P = np.zeros((E.dim * n, E.dim * n))
    for c in H.arrows:
        pi = regular_matrix(ConvolutionElement.delta(H, c)).astype(float)
        P += np.kron(ex.to_numpy(E.inner[c]), pi)
    return P


def positivity_min_eig(E: Bimodule) -> float:
    """Smallest eigenvalue of [<e_i, e_j>] represented in the regular representation."""
    P = _positivity_matrix(E)
    if P.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (P + P.T)).min())


def check_bimodule(E: Bimodule) -> list[str]:
    """Exact checks of the algebraic bimodule and inner-product axioms."""
    G, H = E.left, E.right
    bad = []
    for x, y in product(G.arrows, G.arrows):
        lhs = E.lact[x] * E.lact[y]
        rhs = ex.scale(E.lact[G.compose[(x, y)]], G.weight(x)) if (x, y) in G.compose \
            else ex.zeros(E.dim, E.dim)
        if not ex.equal(lhs, rhs):
            bad.append(f"left action not multiplicative at {x!r},{y!r}")
    for c, d in product(H.arrows, H.arrows):
        lhs = E.ract[d] * E.ract[c]
        rhs = ex.scale(E.ract[H.compose[(c, d)]], H.weight(c)) if (c, d) in H.compose \
            else ex.zeros(E.dim, E.dim)
        if not ex.equal(lhs, rhs):
            bad.append(f"right action not multiplicative at {c!r},{d!r}")
    for x, c in product(G.arrows, H.arrows):
        if not ex.equal(E.lact[x] * E.ract[c], E.ract[c] * E.lact[x]):
            bad.append(f"actions do not commute at {x!r},{c!r}")
    for c in H.arrows:
        if not ex.equal(E.inner[c], E.inner[H.inv[c]].transpose()):
            bad.append(f"inner product not hermitian at {c!r}")
        for d in H.arrows:
            lhs = E.inner[c] * E.ract[d]
            if H.src[c] == H.src[d]:
                rhs = ex.scale(E.inner[H.compose[(c, H.inv[d])]], H.weight(c))
            else:
                rhs = ex.zeros(E.dim, E.dim)
            if not ex.equal(lhs, rhs):
                bad.append(f"inner product not right linear at {c!r},{d!r}")
        for x in G.arrows:
            if not ex.equal(E.lact[x].transpose() * E.inner[c], E.inner[c] * E.lact[G.inv[x]]):
                bad.append(f"left action not adjointable at {x!r},{c!r}")
    unit = ex.zeros(E.dim, E.dim)
    for u in G.units:
        unit = unit + E.lact[u]
    if E.dim and ex.rank(unit) != E.dim:
        bad.append("left action degenerate")
    return bad


# ---------------------------------------------------------------- interior tensor product

def _gram(E: Bimodule) -> ex.Mat:
    """Sum of inner-product values over units: a faithful positive trace of <.,.>."""
    out = ex.zeros(E.dim, E.dim)
    for u in E.right.units:
        out = out + E.inner[u]
    return out


def interior_tensor(E: Bimodule, F: Bimodule) -> Bimodule:
    """E (x)_B F: algebraic tensor product modulo the null space of its inner product."""
    if E.right is not F.left:
        raise ValueError("middle algebras differ")
    B = E.right
    dE, dF = E.dim, F.dim
    n = dE * dF
    inner_v = {}
    for c in F.right.arrows:
        acc = ex.zeros(n, n)
        for b in B.arrows:
            if E.inner[b].to_dok():
                acc = acc + ex.kron(E.inner[b], F.inner[c] * F.lact[b])
        inner_v[c] = acc
    gram = ex.zeros(n, n)
    for u in F.right.units:
        gram = gram + inner_v[u]
    Q, pivots = ex.rref_rows(gram)
    S = ex.pivot_section(pivots, n)
    St = S.transpose()
    IdF, IdE = ex.eye(dF), ex.eye(dE)
    lact = {x: Q * ex.kron(m, IdF) * S for x, m in E.lact.items()}
    ract = {y: Q * ex.kron(IdE, m) * S for y, m in F.ract.items()}
    inner = {c: St * m * S for c, m in inner_v.items()}
    labels = tuple((E.labels[p // dF] if E.labels else p // dF,
                    F.labels[p % dF] if F.labels else p % dF) for p in pivots)
    return Bimodule(E.left, F.right, len(pivots), lact, ract, inner, labels,
                    (Q, pivots, dE, dF), f"({E.name}x{F.name})")


# ---------------------------------------------------------------- unitary equivalence

def unitary_defects(U: ex.Mat, E: Bimodule, F: Bimodule) -> list[str]:
    """Why U: E -> F is not a unitary bimodule isomorphism (empty list if it is)."""
    bad = []
    if E.left is not F.left or E.right is not F.right:
        return ["algebras differ"]
    if U.shape != (F.dim, E.dim):
        return [f"shape {U.shape} does not map dim {E.dim} to dim {F.dim}"]
    if E.dim != F.dim or (E.dim and ex.rank(U) != E.dim):
        return ["not invertible"]
    for x in E.left.arrows:
        if not ex.equal(U * E.lact[x], F.lact[x] * U):
            bad.append(f"left action not intertwined at {x!r}")
    for c in E.right.arrows:
        if not ex.equal(U * E.ract[c], F.ract[c] * U):
            bad.append(f"right action not intertwined at {c!r}")
        if not ex.equal(U.transpose() * F.inner[c] * U, E.inner[c]):
            bad.append(f"inner product not preserved at {c!r}")
    return bad


def _on_quotient(T: Bimodule, full: ex.Mat) -> ex.Mat:
    """Restrict a map defined on the algebraic tensor product to the quotient basis."""
    _, pivots, dE, dF = T.quotient
    return full * ex.pivot_section(pivots, dE * dF)


def right_identity_witness(E: Bimodule, EB: Bimodule) -> ex.Mat:
    """phi (x) delta_c -> phi delta_c, from E (x)_B B to E."""
    H = E.right
    nH = len(H.arrows)
    cols = {}
    for i in range(E.dim):
        for k, c in enumerate(H.arrows):
            for (r, j), v in E.ract[c].to_dok().items():
                if j == i:
                    cols[(r, i * nH + k)] = v
    return _on_quotient(EB, ex.from_dok(cols, (E.dim, E.dim * nH)))


def left_identity_witness(E: Bimodule, AE: Bimodule) -> ex.Mat:
    """delta_x (x) phi -> delta_x phi, from A (x)_A E to E."""
    G = E.left
    cols = {}
    for k, x in enumerate(G.arrows):
        for (r, j), v in E.lact[x].to_dok().items():
            cols[(r, k * E.dim + j)] = v
    return _on_quotient(AE, ex.from_dok(cols, (E.dim, len(G.arrows) * E.dim)))


def associativity_witness(EF: Bimodule, EF_G: Bimodule, FG: Bimodule, E_FG: Bimodule) -> ex.Mat:
    """Identity on E (x) F (x) G pushed through both quotient maps."""
    Q1, _, dE, dF = EF.quotient
    Q2, _, _, dG = FG.quotient
    QL, pl, _, _ = EF_G.quotient
    QR, _, _, _ = E_FG.quotient
    to_left = QL * ex.kron(Q1, ex.eye(dG))
    to_right = QR * ex.kron(ex.eye(dE), Q2)
    # to_left restricted to its pivot columns is invertible; that gives a right inverse
    _, piv = ex.rref_rows(to_left)
    S = ex.pivot_section(piv, dE * dF * dG)
    A = to_left * S
    return to_right * S * A.to_dense().inv().to_sparse()


def bibundle_tensor_witness(m: Bibundle, n: Bibundle, EMN: Bimodule, E_comp: Bimodule,
                            comp: Bibundle) -> ex.Mat:
    """e_p (x) e_q -> w e_[p, q] for composable pairs, zero otherwise."""
    pos = {r: i for i, r in enumerate(comp.points)}
    qpos = {q: j for j, q in enumerate(n.points)}
    dN = len(n.points)
    entries = {}
    for i, p in enumerate(m.points):
        for q in n.points:
            if m.s[p] == n.t[q]:
                entries[(pos[comp.orbit_of[(p, q)]], i * dN + qpos[q])] = \
                    m.right.haar_weight[m.s[p]]
    full = ex.from_dok(entries, (len(comp.points), len(m.points) * dN))
    return _on_quotient(EMN, full)


# ---------------------------------------------------------------- tensor product kernel

@dataclass(frozen=True, eq=False)
class KernelIdeal:
    """Subspace of A (x) B^op in the basis delta_x (x) delta_c, ordered (x, c)."""

    left_arrows: tuple
    right_arrows: tuple
    basis: ex.Mat  # rows in reduced row echelon form

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __eq__(self, other):
        return (isinstance(other, KernelIdeal) and self.left_arrows == other.left_arrows
                and self.right_arrows == other.right_arrows and ex.equal(self.basis, other.basis))

    def basis_list(self) -> list:
        nR = len(self.right_arrows)
        out = []
        for row in ex.to_fractions(self.basis):
            out.append({(_jsonable(self.left_arrows[k // nR]), _jsonable(self.right_arrows[k % nR])):
                        str(v) for k, v in enumerate(row) if v})
        return out


def tensor_product_kernel(E: Bimodule) -> KernelIdeal:
    """Kernel of delta_x (x) delta_c -> L_x R_c, returned as a canonical RREF basis."""
    G, H = E.left, E.right
    d = E.dim
    nH = len(H.arrows)
    entries = {}
    for k, x in enumerate(G.arrows):
        for l, c in enumerate(H.arrows):
            for (i, j), v in (E.lact[x] * E.ract[c]).to_dok().items():
                entries[(i * d + j, k * nH + l)] = v
    T = ex.from_dok(entries, (d * d, len(G.arrows) * nH))
    return KernelIdeal(tuple(G.arrows), tuple(H.arrows), ex.nullspace_rref(T))


# ---------------------------------------------------------------- representations and induction

@dataclass(frozen=True, eq=False)
class Representation:
    """Representation of C*(G) on Q^dim with inner product ``gram``."""

    groupoid: FiniteGroupoid
    dim: int
    matrices: Mapping
    gram: ex.Mat | None = None

    def __post_init__(self):
        if self.gram is None:
            object.__setattr__(self, "gram", ex.eye(self.dim))

    def defects(self) -> list[str]:
        G = self.groupoid
        bad = []
        for x, y in product(G.arrows, G.arrows):
            lhs = self.matrices[x] * self.matrices[y]
            rhs = ex.scale(self.matrices[G.compose[(x, y)]], G.weight(x)) \
                if (x, y) in G.compose else ex.zeros(self.dim, self.dim)
            if not ex.equal(lhs, rhs):
                bad.append(f"not multiplicative at {x!r},{y!r}")
        for x in G.arrows:
            if not ex.equal(self.matrices[x].transpose() * self.gram,
                            self.gram * self.matrices[G.inv[x]]):
                bad.append(f"not a *-map at {x!r}")
        return bad

    def kernel(self) -> ex.Mat:
        """Canonical basis of {a in C*(G) : rho(a) = 0} in the arrow basis."""
        d = self.dim
        entries = {}
        for k, x in enumerate(self.groupoid.arrows):
            for (i, j), v in self.matrices[x].to_dok().items():
                entries[(i * d + j, k)] = v
        return ex.nullspace_rref(ex.from_dok(entries, (d * d, len(self.groupoid.arrows))))


def representation_module(rep: Representation) -> Bimodule:
    """H_pi as a (C*(B), C)-bimodule."""
    T = trivial_groupoid()
    d = rep.dim
    return Bimodule(rep.groupoid, T, d, dict(rep.matrices), {0: ex.eye(d)}, {0: rep.gram},
                    tuple(range(d)), None, "rep")


@dataclass(frozen=True, eq=False)
class InducedRepresentation:
    rep: Representation
    module: Bimodule
    degenerate: bool


def rieffel_induce(E: Bimodule, rep: Representation) -> InducedRepresentation:
    if rep.groupoid is not E.right:
        raise ValueError("representation is not of the right algebra")
    M = interior_tensor(E, representation_module(rep))
    out = Representation(E.left, M.dim, dict(M.lact), M.inner[0])
    return InducedRepresentation(out, M, M.dim == 0)


def block_irreps(G: FiniteGroupoid) -> list[Representation]:
    """Irreducible representations of a block groupoid pair(n) x Z/k with k <= 2."""
    out = []
    for c, (n, k) in enumerate(G.block_shape):
        if k > 2:
            raise ValueError("only real characters (k <= 2) are supported")
        for sgn in range(k):
            mats = {}
            for x in G.arrows:
                e = {}
                if x[0] == c:
                    e[(x[1], x[2])] = (-1) ** (sgn * x[3])
                mats[x] = ex.from_dok(e, (n, n))
            out.append(Representation(G, n, mats))
    return out


# ---------------------------------------------------------------- JSON

def bibundle_to_json(b: Bibundle) -> str:
    return json.dumps({
        "name": b.name,
        "points": [_jsonable(p) for p in b.points],
        "t": [_jsonable(b.t[p]) for p in b.points],
        "s": [_jsonable(b.s[p]) for p in b.points],
        "left_action": [[_jsonable(x), _jsonable(p), _jsonable(q)] for (x, p), q in b.lact.items()],
        "right_action": [[_jsonable(p), _jsonable(y), _jsonable(q)] for (p, y), q in b.ract.items()],
    })


def bibundle_from_json(text: str, G: FiniteGroupoid, H: FiniteGroupoid) -> Bibundle:
    doc = json.loads(text)
    pts = tuple(_hashable(p) for p in doc["points"])
    t = dict(zip(pts, (_hashable(v) for v in doc["t"])))
    s = dict(zip(pts, (_hashable(v) for v in doc["s"])))
    lact = {(_hashable(x), _hashable(p)): _hashable(q) for x, p, q in doc["left_action"]}
    ract = {(_hashable(p), _hashable(y)): _hashable(q) for p, y, q in doc["right_action"]}
    return Bibundle(G, H, pts, t, s, lact, ract, doc.get("name", ""))


# ---------------------------------------------------------------- random instances

def random_chain(rng: np.random.Generator, length: int = 2, max_units: int = 8,
                 max_points: int = 8):
    """Block groupoids G_0..G_n and regular bibundles G_i <- M_i -> G_{i+1}."""
    for _ in range(500):
        gs = [block_groupoid(random_block_shape(rng, max_units, max_n=2))
              for _ in range(length + 1)]
        try:
            ms = [random_bibundle(rng, a, b, max_points) for a, b in zip(gs, gs[1:])]
        except RuntimeError:
            continue
        return gs, ms
    raise RuntimeError("no instance found")


def random_instance(rng: np.random.Generator, max_units: int = 8, max_points: int = 8):
    """Three block groupoids G, H, K and regular bibundles G <- M -> H <- N -> K."""
    (G, H, K), (M, N) = random_chain(rng, 2, max_units, max_points)
    return G, H, K, M, N
