"""Sampled hbar-families of operators: sections, norm profiles, the vanishing ideal and
the classical fiber at hbar = 0."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .convolution import BlockOperator, op_norm
from .quantization import CutoffSpec, HbarGrid, Symbol, quantized_operator


# ---------------------------------------------------------------- provenance

@dataclass(frozen=True)
class Generated:
    symbol: Symbol


@dataclass(frozen=True)
class Product:
    factors: tuple


@dataclass(frozen=True)
class Combination:
    terms: tuple  # (coefficient, Section)


@dataclass(frozen=True)
class Scaled:
    func: Callable[[float], complex]
    section: "Section"


@dataclass(frozen=True)
class Adjoint:
    section: "Section"


@dataclass(frozen=True)
class Raw:
    note: str = ""


def _adj(a):
    return a.adjoint() if isinstance(a, BlockOperator) else np.conj(np.swapaxes(a, -1, -2))


def _mul(a, b):
    return a @ b


@dataclass(frozen=True, eq=False)
class Section:
    grid: HbarGrid
    fibers: tuple
    provenance: object = Raw()

    def __post_init__(self):
        if len(self.fibers) != len(self.grid):
            raise ValueError("one fiber per hbar sample required")

    def _check(self, other: "Section"):
        if other.grid != self.grid:
            raise ValueError("sections sampled on different hbar grids")

    def __matmul__(self, other: "Section") -> "Section":
        self._check(other)
        fibers = tuple(_mul(a, b) for a, b in zip(self.fibers, other.fibers))
        return Section(self.grid, fibers, Product((self, other)))

    def combine(self, terms: Sequence[tuple]) -> "Section":
        return linear_combination([(1.0, self)] + list(terms))

    def __add__(self, other: "Section") -> "Section":
        return linear_combination([(1.0, self), (1.0, other)])

    def __sub__(self, other: "Section") -> "Section":
        return linear_combination([(1.0, self), (-1.0, other)])

    def scale_by(self, func: Callable[[float], complex]) -> "Section":
        """Multiply by a bounded continuous function of hbar."""
        fibers = tuple(_scale(a, func(h)) for a, h in zip(self.fibers, self.grid))
        return Section(self.grid, fibers, Scaled(func, self))

    def adjoint(self) -> "Section":
        return Section(self.grid, tuple(_adj(a) for a in self.fibers), Adjoint(self))

    def norms(self) -> np.ndarray:
        return np.array([op_norm(a) for a in self.fibers])


def _scale(a, c):
    return a.scale(c) if isinstance(a, BlockOperator) else c * a


def linear_combination(terms: Sequence[tuple]) -> Section:
    terms = list(terms)
    grid = terms[0][1].grid
    for _, s in terms:
        terms[0][1]._check(s)
    fibers = []
    for i in range(len(grid)):
        acc = None
        for c, s in terms:
            t = _scale(s.fibers[i], c)
            acc = t if acc is None else acc + t
        fibers.append(acc)
    return Section(grid, tuple(fibers), Combination(tuple(terms)))


def section_from_symbol(f: Symbol, grid: HbarGrid, cutoff: CutoffSpec | None = None,
                        quantizer: Callable | None = None) -> Section:
    """Fiber at hbar is the left regular representation of Q_hbar(f).

    ``quantizer(f, hbar)`` overrides the default PairGrid(1) Weyl quantization.
    """
    q = quantizer or (lambda s, h: quantized_operator(s, h, cutoff))
    return Section(grid, tuple(q(f, h) for h in grid), Generated(f))


def zero_section(grid: HbarGrid, shape: tuple) -> Section:
    return Section(grid, tuple(np.zeros(shape) for _ in grid), Raw("zero"))


def sup_norm(s: Section) -> float:
    return float(np.max(s.norms()))


# ---------------------------------------------------------------- norm profiles

@dataclass
class NormProfile:
    hbar: np.ndarray
    norms: np.ndarray

    def modulus(self) -> list[tuple[float, float]]:
        """omega(delta) = max |n(h) - n(h')| over sample pairs with |h - h'| <= delta."""
        h, n = self.hbar, self.norms
        dh = np.abs(h[:, None] - h[None, :])
        dn = np.abs(n[:, None] - n[None, :])
        deltas = np.unique(dh[dh > 0])
        return [(float(d), float(dn[dh <= d].max())) for d in deltas]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["hbar", "norm"])
        for h, n in zip(self.hbar, self.norms):
            w.writerow([repr(float(h)), repr(float(n))])
        return buf.getvalue()


def norm_profile(s: Section) -> NormProfile:
    return NormProfile(s.grid.array.copy(), s.norms())


# ---------------------------------------------------------------- extrapolation and K0

@dataclass
class Extrapolation:
    limit: float
    coeffs: tuple
    residuals: list
    hbar: list
    values: list

    def to_dict(self) -> dict:
        return {"limit": self.limit, "coeffs": list(self.coeffs), "residuals": self.residuals,
                "hbar": self.hbar, "values": self.values}


def extrapolate_to_zero(hbar: Sequence[float], values: Sequence[float],
                        clamp: bool = True) -> Extrapolation:
    """Least-squares fit c0 + c1 hbar over the smallest decade.

    The limit is max(c0, 0) for norm profiles (``clamp``) and c0 for signed data.
    """
    h = np.asarray(hbar, float)
    y = np.asarray(values, float)
    if len(h) < 3:
        raise ValueError("too few samples to extrapolate")
    if h.min() > 1e-2 * (1 + 1e-12):
        raise ValueError("hbar grid must reach 1e-2 for extrapolation")
    idx = np.nonzero(h <= 10 * h.min() * (1 + 1e-12))[0]
    if len(idx) < 3:
        raise ValueError("too few samples in the smallest decade")
    hs, ys = h[idx], y[idx]
    A = np.stack([np.ones_like(hs), hs], axis=1)
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    res = ys - A @ coef
    # norms are nonnegative, so a negative intercept means the profile reaches zero
    limit = max(coef[0], 0.0) if clamp else coef[0]
    return Extrapolation(float(limit), (float(coef[0]), float(coef[1])),
                         res.tolist(), hs.tolist(), ys.tolist())


@dataclass
class VanishingReport:
    vanishes: bool
    limit: float
    threshold: float
    fit: Extrapolation

    def __bool__(self):
        return self.vanishes

    def to_json(self) -> str:
        return json.dumps({"vanishes": self.vanishes, "limit": self.limit,
                           "threshold": self.threshold, "fit": self.fit.to_dict()}, indent=2)


def vanishing_at_zero(s: Section, threshold: float | None = None, rel: float = 1e-3,
                      scale: float | None = None) -> VanishingReport:
    """K0 membership: extrapolated norm limit below ``threshold``.

    Default threshold is ``rel`` times ``scale`` (itself defaulting to the sup norm).
    """
    n = s.norms()
    fit = extrapolate_to_zero(s.grid.array, n)
    if threshold is None:
        base = float(n.max()) if scale is None else scale
        threshold = rel * max(base, np.finfo(float).tiny)
        if base == 0:
            return VanishingReport(True, 0.0, threshold, fit)
    return VanishingReport(fit.limit < threshold, fit.limit, threshold, fit)


# ---------------------------------------------------------------- classical fiber

class NoSymbolicLimit(ValueError):
    pass


def _limit_symbol(s: Section):
    p = s.provenance
    if isinstance(p, Generated):
        return p.symbol
    if isinstance(p, Product):
        out = None
        for f in p.factors:
            sym = _limit_symbol(f)
            out = sym if out is None else out * sym
        return out
    if isinstance(p, Combination):
        out = None
        for c, t in p.terms:
            sym = _limit_symbol(t) * c
            out = sym if out is None else out + sym
        return out
    if isinstance(p, Scaled):
        return _limit_symbol(p.section) * complex(p.func(0.0))
    if isinstance(p, Adjoint):
        return _limit_symbol(p.section).conj()
    raise NoSymbolicLimit("no symbolic limit available")


@dataclass
class ClassicalFiber:
    """hbar -> 0 symbols of a family of sections, with the K0 equivalence relation."""

    sections: list
    symbols: list
    rel: float = 1e-3

    def symbol(self, s: Section) -> Symbol:
        return self.symbols[self.sections.index(s)]

    def same_class(self, a: Section, b: Section) -> bool:
        scale = max(sup_norm(a), sup_norm(b))
        return bool(vanishing_at_zero(a - b, rel=self.rel, scale=scale))

    def classes(self) -> list[list[int]]:
        out: list[list[int]] = []
        for i, s in enumerate(self.sections):
            for cls in out:
                if self.same_class(self.sections[cls[0]], s):
                    cls.append(i)
                    break
            else:
                out.append([i])
        return out


def classical_fiber(sections: Sequence[Section], rel: float = 1e-3) -> ClassicalFiber:
    sections = list(sections)
    return ClassicalFiber(sections, [_limit_symbol(s) for s in sections], rel)
