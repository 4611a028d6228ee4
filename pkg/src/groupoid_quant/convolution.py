"""Convolution algebras of finite groupoids and kernel operators on grids."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from pathlib import Path
from typing import Mapping

import numpy as np
import scipy.sparse.linalg as spla

from .groupoid_core import FiniteGroupoid

DENSE_NORM_LIMIT = 2000


def _conj(z):
    return z.conjugate() if isinstance(z, complex) else z


@dataclass(frozen=True, eq=False)
class ConvolutionElement:
    """Finitely supported function on the arrows of a finite groupoid."""

    groupoid: FiniteGroupoid
    coeffs: Mapping = field(default_factory=dict)

    def __post_init__(self):
        clean = {x: c for x, c in dict(self.coeffs).items() if c != 0}
        for x in clean:
            if x not in self.groupoid.index:
                raise KeyError(f"{x!r} is not an arrow")
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def delta(cls, g: FiniteGroupoid, x, c=1) -> "ConvolutionElement":
        return cls(g, {x: c})

    @classmethod
    def unit(cls, g: FiniteGroupoid) -> "ConvolutionElement":
        return cls(g, {u: 1 for u in g.units})

    def __getitem__(self, x):
        return self.coeffs.get(x, 0)

    def _check(self, other: "ConvolutionElement"):
        if other.groupoid is not self.groupoid:
            raise ValueError("elements live on different groupoids")

    def __add__(self, other):
        self._check(other)
        out = dict(self.coeffs)
        for x, c in other.coeffs.items():
            out[x] = out.get(x, 0) + c
        return ConvolutionElement(self.groupoid, out)

    def __neg__(self):
        return ConvolutionElement(self.groupoid, {x: -c for x, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, a) -> "ConvolutionElement":
        return ConvolutionElement(self.groupoid, {x: a * c for x, c in self.coeffs.items()})

    def __rmul__(self, a):
        if isinstance(a, Number):
            return self.scale(a)
        return NotImplemented

    def __matmul__(self, other):
        return convolve(self, other)

    def star(self) -> "ConvolutionElement":
        g = self.groupoid
        return ConvolutionElement(g, {g.inv[x]: _conj(c) for x, c in self.coeffs.items()})

    def __eq__(self, other):
        if not isinstance(other, ConvolutionElement):
            return NotImplemented
        return other.groupoid is self.groupoid and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def dense(self) -> list:
        return [self[x] for x in self.groupoid.arrows]


def convolve(f: ConvolutionElement, g: ConvolutionElement) -> ConvolutionElement:
    """(f*g)(z) = sum over y with s(y) = s(z) of w f(z y^-1) g(y)."""
    f._check(g)
    G = f.groupoid
    out: dict = {}
    gb = {}
    for y, c in g.coeffs.items():
        gb.setdefault(G.tgt[y], []).append((y, c))
    for x, a in f.coeffs.items():
        w = G.weight(x)
        for y, b in gb.get(G.src[x], ()):
            z = G.compose[(x, y)]
            out[z] = out.get(z, 0) + w * a * b
    return ConvolutionElement(G, out)


def is_pair_groupoid(g: FiniteGroupoid) -> bool:
    units = g.unit_list
    if len(g.arrows) != len(units) ** 2:
        return False
    seen = {(g.tgt[x], g.src[x]) for x in g.arrows}
    return len(seen) == len(g.arrows)


def matrix_units_iso(f: ConvolutionElement) -> np.ndarray:
    """Send the delta at the arrow with target a and source b to w * E_ab (w the Haar weight)."""
    g = f.groupoid
    if not is_pair_groupoid(g):
        raise ValueError("groupoid is not a finite pair groupoid")
    units = g.unit_list
    pos = {u: i for i, u in enumerate(units)}
    n = len(units)
    exact = all(isinstance(c, (int, Fraction)) for c in f.coeffs.values())
    out = np.zeros((n, n), dtype=object if exact else complex)
    if exact:
        out[:] = Fraction(0)
    for x, c in f.coeffs.items():
        out[pos[g.tgt[x]], pos[g.src[x]]] = c * g.weight(x)
    return out


def matrix_units_inverse(g: FiniteGroupoid, mat) -> ConvolutionElement:
    if not is_pair_groupoid(g):
        raise ValueError("groupoid is not a finite pair groupoid")
    units = g.unit_list
    pos = {u: i for i, u in enumerate(units)}
    return ConvolutionElement(
        g, {x: mat[pos[g.tgt[x]]][pos[g.src[x]]] / g.weight(x) for x in g.arrows})


def regular_matrix(f: ConvolutionElement) -> np.ndarray:
    """Matrix of the left regular representation on functions of the arrows."""
    G = f.groupoid
    n = len(G.arrows)
    exact = all(isinstance(c, (int, Fraction)) for c in f.coeffs.values())
    out = np.zeros((n, n), dtype=object if exact else complex)
    if exact:
        out[:] = Fraction(0)
    for a, c in f.coeffs.items():
        w = G.weight(a)
        for y in G.by_target[G.src[a]]:
            out[G.index[G.compose[(a, y)]], G.index[y]] += w * c
    return out


# ---------------------------------------------------------------- grid kernels

@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Discretized integral kernel acting on grid functions.

    ``matrix`` already has the Haar quadrature weight folded in, so the operator acts
    on sample vectors by plain matrix multiplication.  ``kernel`` returns K(x, x').
    """

    matrix: np.ndarray
    weight: float = 1.0
    meta: dict = field(default_factory=dict)
    overflow: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("kernel has non-finite entries")

    @property
    def kernel(self) -> np.ndarray:
        return self.matrix / self.weight

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        if isinstance(other, KernelOperator):
            return KernelOperator(self.matrix @ other.matrix, self.weight, self.meta)
        return self.matrix @ other

    def adjoint(self) -> "KernelOperator":
        return KernelOperator(self.matrix.conj().T, self.weight, self.meta)

    def hs_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    def save(self, path: str | Path) -> None:
        """Write ``<path>.csv`` (real and imaginary blocks) with a ``<path>.json`` header."""
        path = Path(path)
        m = np.asarray(self.matrix)
        header = {"shape": list(m.shape), "weight": self.weight, "overflow": self.overflow,
                  "complex": bool(np.iscomplexobj(m)), **self.meta}
        path.with_suffix(".json").write_text(json.dumps(header, indent=2, default=str))
        block = np.hstack([m.real, m.imag]) if np.iscomplexobj(m) else m
        np.savetxt(path.with_suffix(".csv"), block, delimiter=",", fmt="%.17g")

    @classmethod
    def load(cls, path: str | Path) -> "KernelOperator":
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text())
        block = np.loadtxt(path.with_suffix(".csv"), delimiter=",", ndmin=2)
        n = header["shape"][1]
        m = block[:, :n] + 1j * block[:, n:] if header.pop("complex") else block
        shape = header.pop("shape")
        weight, overflow = header.pop("weight"), header.pop("overflow")
        return cls(m.reshape(shape), weight, header, overflow)


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """Block-diagonal operator stored as a stack of square blocks (m, n, n)."""

    blocks: np.ndarray

    def __post_init__(self):
        if self.blocks.ndim != 3 or self.blocks.shape[1] != self.blocks.shape[2]:
            raise ValueError("blocks must have shape (m, n, n)")
        if not np.all(np.isfinite(self.blocks)):
            raise ValueError("kernel has non-finite entries")

    def __matmul__(self, other):
        if isinstance(other, BlockOperator):
            return BlockOperator(self.blocks @ other.blocks)
        return np.einsum("mij,mj->mi", self.blocks, other)

    def __add__(self, other):
        return BlockOperator(self.blocks + other.blocks)

    def __sub__(self, other):
        return BlockOperator(self.blocks - other.blocks)

    def scale(self, a) -> "BlockOperator":
        return BlockOperator(a * self.blocks)

    def adjoint(self) -> "BlockOperator":
        return BlockOperator(np.conj(np.swapaxes(self.blocks, 1, 2)))

    def hs_norm(self) -> float:
        return float(np.linalg.norm(self.blocks))


def _power_norm(a, tol: float) -> float:
    """Largest singular value by ARPACK on the normal operator."""
    return float(spla.svds(a, k=1, tol=tol * 1e-2, return_singular_vectors=False)[0])


def op_norm(k, tol: float = 1e-10, dense_limit: int = DENSE_NORM_LIMIT) -> float:
    if isinstance(k, BlockOperator):
        if k.blocks.size == 0:
            return 0.0
        return float(np.max(np.linalg.norm(k.blocks, 2, axis=(1, 2))))
    m = k.matrix if isinstance(k, KernelOperator) else np.asarray(k)
    if m.dtype == object:
        m = m.astype(complex)
    if not np.all(np.isfinite(m)):
        raise ValueError("kernel has non-finite entries")
    if m.size == 0 or not np.any(m):
        return 0.0
    if max(m.shape) <= dense_limit or min(m.shape) < 3:
        return float(np.linalg.svd(m, compute_uv=False)[0])
    return _power_norm(m, tol)


def left_regular(f) -> KernelOperator:
    """Left regular representation of a finite element or of a quantized grid element."""
    if isinstance(f, ConvolutionElement):
        m = regular_matrix(f)
        if m.dtype == object:
            m = m.astype(complex)
        return KernelOperator(m, 1.0, {"groupoid": f.groupoid.name})
    return f.left_regular()


def hs_norm(k) -> float:
    if isinstance(k, (KernelOperator, BlockOperator)):
        return k.hs_norm()
    return float(np.linalg.norm(np.asarray(k, dtype=complex)))
