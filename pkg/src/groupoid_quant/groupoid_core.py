"""Finite groupoids, the three grid groupoid families and their algebroid duals."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

Arrow = Hashable

AXIOMS = ("composability", "source_target", "inverse", "associativity")


@dataclass(frozen=True)
class Violation:
    axiom: str
    witnesses: tuple

    def to_dict(self) -> dict:
        return {"axiom": self.axiom, "witnesses": [_jsonable(w) for w in self.witnesses]}


@dataclass(frozen=True, eq=False)
class FiniteGroupoid:
    """A finite groupoid given by explicit tables.

    Units are arrows; ``src`` and ``tgt`` send each arrow to a unit.  ``compose``
    maps ``(x, y)`` to ``x*y`` and is defined when ``src[x] == tgt[y]``.
    """

    arrows: tuple
    units: frozenset
    src: Mapping[Arrow, Arrow]
    tgt: Mapping[Arrow, Arrow]
    compose: Mapping[tuple, Arrow]
    inv: Mapping[Arrow, Arrow]
    haar_weight: Mapping[Arrow, Fraction] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if not self.haar_weight:
            object.__setattr__(self, "haar_weight", {u: Fraction(1) for u in self.units})

    @cached_property
    def index(self) -> dict:
        return {x: i for i, x in enumerate(self.arrows)}

    @cached_property
    def unit_list(self) -> list:
        return [x for x in self.arrows if x in self.units]

    @cached_property
    def by_source(self) -> dict:
        out: dict = {u: [] for u in self.units}
        for x in self.arrows:
            out.setdefault(self.src[x], []).append(x)
        return out

    @cached_property
    def by_target(self) -> dict:
        out: dict = {u: [] for u in self.units}
        for x in self.arrows:
            out.setdefault(self.tgt[x], []).append(x)
        return out

    def __len__(self) -> int:
        return len(self.arrows)

    def mul(self, x: Arrow, y: Arrow) -> Arrow:
        try:
            return self.compose[(x, y)]
        except KeyError:
            raise ValueError(f"arrows {x!r} and {y!r} are not composable") from None

    def weight(self, x: Arrow) -> Fraction:
        """Haar weight attached to the target fiber of ``x``."""
        return self.haar_weight[self.tgt[x]]


def validate_groupoid(g: FiniteGroupoid) -> list[Violation]:
    out: list[Violation] = []
    arrows = list(g.arrows)
    units = g.units

    for x in arrows:
        for y in arrows:
            ok = g.src[x] == g.tgt[y]
            defined = (x, y) in g.compose
            if ok != defined:
                out.append(Violation("composability", (x, y)))
            elif defined:
                z = g.compose[(x, y)]
                if g.tgt.get(z) != g.tgt[x] or g.src.get(z) != g.src[y]:
                    out.append(Violation("source_target", (x, y)))

    for x in arrows:
        xi = g.inv.get(x)
        good = (
            xi is not None
            and g.compose.get((x, xi)) == g.tgt[x]
            and g.compose.get((xi, x)) == g.src[x]
            and g.tgt[x] in units
            and g.src[x] in units
        )
        if not good:
            out.append(Violation("inverse", (x,)))

    for (x, y), xy in g.compose.items():
        for z in g.by_target.get(g.src[y], ()):
            yz = g.compose.get((y, z))
            left = g.compose.get((xy, z))
            right = g.compose.get((x, yz)) if yz is not None else None
            if left is None or left != right:
                out.append(Violation("associativity", (x, y, z)))
    return out


def _from_composition(
    arrows: Sequence, units: Iterable, src: dict, tgt: dict, mul, inv: dict, name: str
) -> FiniteGroupoid:
    units = frozenset(units)
    compose = {}
    by_target: dict = {}
    for y in arrows:
        by_target.setdefault(tgt[y], []).append(y)
    for x in arrows:
        for y in by_target.get(src[x], ()):
            compose[(x, y)] = mul(x, y)
    return FiniteGroupoid(tuple(arrows), units, src, tgt, compose, inv, name=name)


def pair_groupoid(points: Iterable) -> FiniteGroupoid:
    pts = list(dict.fromkeys(points))
    if not pts:
        raise ValueError("empty object set")
    arrows = [(a, b) for a in pts for b in pts]
    src = {x: (x[1], x[1]) for x in arrows}
    tgt = {x: (x[0], x[0]) for x in arrows}
    inv = {x: (x[1], x[0]) for x in arrows}
    g = _from_composition(
        arrows, [(a, a) for a in pts], src, tgt, lambda x, y: (x[0], y[1]), inv, "pair"
    )
    object.__setattr__(g, "pair_points", tuple(pts))
    return g


def cyclic_group(k: int) -> FiniteGroupoid:
    """The group Z/k as a one-object groupoid; arrows are residues."""
    if k < 1:
        raise ValueError("order must be positive")
    arrows = list(range(k))
    src = {x: 0 for x in arrows}
    inv = {x: (-x) % k for x in arrows}
    return _from_composition(arrows, [0], src, dict(src), lambda x, y: (x + y) % k, inv, f"Z{k}")


def trivial_groupoid() -> FiniteGroupoid:
    return cyclic_group(1)


def block_groupoid(shape: Sequence[tuple[int, int]]) -> FiniteGroupoid:
    """Disjoint union of pair(n_c) x Z/k_c.

    Arrow ids are ``(c, a, b, r)``: component ``c``, target object ``a``,
    source object ``b`` and group residue ``r``.
    """
    if not shape:
        raise ValueError("empty object set")
    arrows, units = [], []
    for c, (n, k) in enumerate(shape):
        if n < 1 or k < 1:
            raise ValueError("component sizes must be positive")
        for a, b, r in product(range(n), range(n), range(k)):
            arrows.append((c, a, b, r))
        units.extend((c, a, a, 0) for a in range(n))
    ks = [k for _, k in shape]
    src = {x: (x[0], x[2], x[2], 0) for x in arrows}
    tgt = {x: (x[0], x[1], x[1], 0) for x in arrows}
    inv = {x: (x[0], x[2], x[1], (-x[3]) % ks[x[0]]) for x in arrows}

    def mul(x, y):
        return (x[0], x[1], y[2], (x[3] + y[3]) % ks[x[0]])

    g = _from_composition(arrows, units, src, tgt, mul, inv, "block")
    object.__setattr__(g, "block_shape", tuple(tuple(s) for s in shape))
    return g


def random_block_shape(rng: np.random.Generator, max_units: int = 8, max_n: int = 3,
                       max_k: int = 2) -> list[tuple[int, int]]:
    shape, used = [], 0
    ncomp = int(rng.integers(1, 3))
    for _ in range(ncomp):
        n = int(rng.integers(1, max_n + 1))
        if used + n > max_units:
            break
        shape.append((n, int(rng.integers(1, max_k + 1))))
        used += n
    return shape or [(1, 1)]


def random_groupoid(rng: np.random.Generator, max_units: int = 8) -> FiniteGroupoid:
    return block_groupoid(random_block_shape(rng, max_units))


# ---------------------------------------------------------------- JSON

def _jsonable(x: Any) -> Any:
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    return x


def _hashable(x: Any) -> Any:
    if isinstance(x, list):
        return tuple(_hashable(v) for v in x)
    return x


def finite_groupoid_to_json(g: FiniteGroupoid) -> str:
    doc = {
        "name": g.name,
        "arrows": [_jsonable(x) for x in g.arrows],
        "units": [_jsonable(u) for u in g.unit_list],
        "src": [_jsonable(g.src[x]) for x in g.arrows],
        "tgt": [_jsonable(g.tgt[x]) for x in g.arrows],
        "inv": [_jsonable(g.inv[x]) for x in g.arrows],
        "compose": [[_jsonable(x), _jsonable(y), _jsonable(z)] for (x, y), z in g.compose.items()],
        "haar": [[_jsonable(u), str(w)] for u, w in g.haar_weight.items()],
    }
    return json.dumps(doc)


def finite_groupoid_from_json(text: str) -> FiniteGroupoid:
    doc = json.loads(text)
    arrows = tuple(_hashable(x) for x in doc["arrows"])
    src = dict(zip(arrows, (_hashable(v) for v in doc["src"])))
    tgt = dict(zip(arrows, (_hashable(v) for v in doc["tgt"])))
    inv = dict(zip(arrows, (_hashable(v) for v in doc["inv"])))
    compose = {(_hashable(x), _hashable(y)): _hashable(z) for x, y, z in doc["compose"]}
    haar = {_hashable(u): Fraction(w) for u, w in doc.get("haar", [])}
    return FiniteGroupoid(arrows, frozenset(_hashable(u) for u in doc["units"]), src, tgt,
                          compose, inv, haar, doc.get("name", ""))


# ---------------------------------------------------------------- grid families

FAMILIES = ("PairGrid", "ActionSO2onR2", "ActionRonR")


@dataclass(frozen=True)
class UniformGrid:
    start: float
    spacing: float
    num: int

    def __post_init__(self):
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise ValueError("grid spacing must be positive")
        if self.num < 2:
            raise ValueError("grid needs at least two points")

    @property
    def points(self) -> np.ndarray:
        return self.start + self.spacing * np.arange(self.num)

    @property
    def stop(self) -> float:
        return self.start + self.spacing * (self.num - 1)

    @classmethod
    def symmetric(cls, half_width: float, num: int) -> "UniformGrid":
        return cls(-half_width, 2 * half_width / (num - 1), num)

    def to_dict(self) -> dict:
        return {"start": self.start, "spacing": self.spacing, "num": self.num}


@dataclass(frozen=True)
class SmoothGroupoidDescriptor:
    """One of the built-in grid groupoid families.

    ``PairGrid``: pair groupoid of ``grid`` in every one of ``dim`` axes.
    ``ActionSO2onR2``: rotations acting on the square ``grid`` x ``grid``; ``angles`` holds
    the number of samples on [0, 2 pi).
    ``ActionRonR``: translations of the line ``grid`` by parameters ``translations``.
    """

    family: str
    grid: UniformGrid
    dim: int = 1
    angles: int = 0
    translations: UniformGrid | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "PairGrid" and self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.family == "ActionSO2onR2" and self.angles < 2:
            raise ValueError("angle grid needs at least two points")
        if self.family == "ActionRonR" and self.translations is None:
            raise ValueError("translation grid required")

    @classmethod
    def pair_grid(cls, num: int, spacing: float, dim: int = 1, start: float | None = None):
        if start is None:
            start = -spacing * (num - 1) / 2
        return cls("PairGrid", UniformGrid(start, spacing, num), dim=dim)

    @classmethod
    def action_so2_on_r2(cls, num: int, spacing: float, angles: int = 64):
        return cls("ActionSO2onR2", UniformGrid(-spacing * (num - 1) / 2, spacing, num),
                   dim=2, angles=angles)

    @classmethod
    def action_r_on_r(cls, num: int, spacing: float, shifts: int | None = None):
        shifts = shifts or num
        return cls("ActionRonR", UniformGrid(-spacing * (num - 1) / 2, spacing, num), dim=1,
                   translations=UniformGrid(-spacing * (shifts // 2), spacing, shifts))

    @property
    def haar(self) -> float:
        """Quadrature weight of one point in a source or target fiber."""
        if self.family == "PairGrid":
            return self.grid.spacing ** self.dim
        if self.family == "ActionSO2onR2":
            return 2 * np.pi / self.angles
        return self.translations.spacing

    @property
    def angle_points(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.angles) / self.angles

    def to_json(self) -> str:
        doc = {"family": self.family, "grid": self.grid.to_dict(), "dim": self.dim}
        if self.family == "ActionSO2onR2":
            doc["angles"] = self.angles
        if self.translations is not None:
            doc["translations"] = self.translations.to_dict()
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SmoothGroupoidDescriptor":
        doc = json.loads(text)
        tr = doc.get("translations")
        return cls(doc["family"], UniformGrid(**doc["grid"]), dim=doc.get("dim", 1),
                   angles=doc.get("angles", 0), translations=UniformGrid(**tr) if tr else None)


def nyquist_momenta(num: int, spacing: float) -> np.ndarray:
    """Momentum samples dual to a position grid: p_k = (k - num/2) * 2 pi / (num h)."""
    dp = 2 * np.pi / (num * spacing)
    return (np.arange(num) - num // 2) * dp


@dataclass(frozen=True)
class LieAlgebroidDual:
    """Sampled dual algebroid: base axes and fiber (momentum) axes.

    ``coords`` names the coordinates in the order a symbol callable receives them.
    ``anchor`` records, per base direction, which fiber coordinate pairs with it.
    """

    desc: SmoothGroupoidDescriptor
    base_axes: tuple
    fiber_axes: tuple
    coords: tuple
    anchor: str

    @property
    def axes(self) -> tuple:
        return self.base_axes + self.fiber_axes

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def fiber_dim(self) -> int:
        return len(self.fiber_axes)

    def mesh(self) -> tuple:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))


def algebroid_dual(desc: SmoothGroupoidDescriptor, hbar: float = 1.0) -> LieAlgebroidDual:
    """Sampled dual of the algebroid.

    Fiber grids are the Nyquist duals of the arrow grids, scaled by ``hbar``; with
    ``hbar < 1`` they resolve the momentum band that the quantization at that hbar uses.
    """
    g = desc.grid
    if desc.family == "PairGrid":
        base = tuple(g.points for _ in range(desc.dim))
        fiber = tuple(hbar * nyquist_momenta(g.num, g.spacing) for _ in range(desc.dim))
        if desc.dim == 1:
            coords = ("q", "p")
        else:
            coords = tuple(f"q{i+1}" for i in range(desc.dim)) + tuple(
                f"p{i+1}" for i in range(desc.dim))
        return LieAlgebroidDual(desc, base, fiber, coords, "identity")
    if desc.family == "ActionSO2onR2":
        # dual of the angle grid: integer angular momenta
        fiber = (hbar * (np.arange(desc.angles, dtype=float) - desc.angles // 2),)
        return LieAlgebroidDual(desc, (g.points, g.points), fiber, ("x1", "x2", "xi"),
                                "rotation")
    tr = desc.translations
    fiber = (hbar * nyquist_momenta(tr.num, tr.spacing),)
    return LieAlgebroidDual(desc, (g.points,), fiber, ("x", "xi"), "translation")
