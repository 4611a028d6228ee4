"""Symbols on the dual algebroid, Poisson brackets, fiberwise Fourier transform,
Weyl exponential and the quantization map with its defect diagnostics."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .convolution import KernelOperator, op_norm
from .groupoid_core import LieAlgebroidDual, SmoothGroupoidDescriptor, UniformGrid

SYMBOL_CLASSES = ("PaleyWiener", "Schwartz")
FD_STEP = 1e-3


# ---------------------------------------------------------------- symbols

@dataclass(frozen=True, eq=False)
class Symbol:
    """A function on the sampled dual algebroid.

    ``func`` takes one broadcastable array per coordinate of ``dual.coords``.  Samples on
    the dual grid are computed lazily.  ``factors`` optionally records a tensor splitting
    used by the rotation example: one callable per coordinate group.
    """

    dual: LieAlgebroidDual
    func: Callable
    cls: str = "Schwartz"
    factors: tuple | None = None
    support_radius: float | None = None

    def __post_init__(self):
        if self.cls not in SYMBOL_CLASSES:
            raise ValueError(f"unknown symbol class {self.cls!r}")

    def __call__(self, *z):
        out = self.func(*z)
        return np.broadcast_to(out, np.broadcast_shapes(*(np.shape(a) for a in z)))

    @cached_property
    def values(self) -> np.ndarray:
        v = np.asarray(self(*self.dual.mesh()))
        if not np.all(np.isfinite(v)):
            raise ValueError("symbol has non-finite samples")
        return v

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _same(self, other: "Symbol"):
        if other.dual is not self.dual and other.dual.coords != self.dual.coords:
            raise ValueError("symbols live on different duals")

    def _combine(self, other, op, factor_op=None) -> "Symbol":
        if isinstance(other, Symbol):
            self._same(other)
            f, g = self.func, other.func
            factors = None
            if factor_op and self.factors and other.factors:
                factors = tuple(factor_op(a, b) for a, b in zip(self.factors, other.factors))
            return Symbol(self.dual, lambda *z: op(f(*z), g(*z)), self.cls, factors)
        c = other
        f = self.func
        factors = None
        if factor_op and self.factors:
            factors = (lambda *z, h=self.factors[0]: op(h(*z), c),) + self.factors[1:]
        return Symbol(self.dual, lambda *z: op(f(*z), c), self.cls, factors)

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        def tensor(a, b):
            return lambda *z: a(*z) * b(*z)

        return self._combine(other, np.multiply, tensor)

    __rmul__ = __mul__

    def conj(self) -> "Symbol":
        f = self.func
        factors = None
        if self.factors:
            factors = tuple((lambda *z, h=h: np.conj(h(*z))) for h in self.factors)
        return Symbol(self.dual, lambda *z: np.conj(f(*z)), self.cls, factors)

    @classmethod
    def from_samples(cls, dual: LieAlgebroidDual, values: np.ndarray, kind: str = "Schwartz"):
        values = np.asarray(values)
        if values.shape != dual.shape:
            raise ValueError("sample array does not match the dual grid")
        interp = RegularGridInterpolator(dual.axes, values, method="cubic",
                                         bounds_error=False, fill_value=0.0)

        def func(*z):
            z = np.broadcast_arrays(*[np.asarray(a, float) for a in z])
            pts = np.stack([a.ravel() for a in z], axis=-1)
            return interp(pts).reshape(z[0].shape)

        return cls(dual, func, kind)

    @classmethod
    def constant(cls, dual: LieAlgebroidDual, c: complex = 1.0) -> "Symbol":
        return cls(dual, lambda *z: c + 0.0 * z[0])

    @classmethod
    def coordinate(cls, dual: LieAlgebroidDual, name: str) -> "Symbol":
        i = dual.coords.index(name)
        return cls(dual, lambda *z: 1.0 * z[i])


def gaussian(dual: LieAlgebroidDual, center: Sequence[float], widths: Sequence[float],
             amplitude: float = 1.0) -> Symbol:
    """exp(-sum (z_i - c_i)^2 / (2 w_i^2))."""
    c = np.asarray(center, float)
    w = np.asarray(widths, float)

    def func(*z):
        r = sum((zi - ci) ** 2 / (2 * wi ** 2) for zi, ci, wi in zip(z, c, w))
        return amplitude * np.exp(-r)

    return Symbol(dual, func)


def taper(t: np.ndarray) -> np.ndarray:
    """cos^2 taper on |t| < 1, zero outside."""
    t = np.asarray(t, float)
    return np.where(np.abs(t) < 1, np.cos(0.5 * np.pi * np.clip(t, -1, 1)) ** 2, 0.0)


def bump(dual: LieAlgebroidDual, center: Sequence[float], widths: Sequence[float]) -> Symbol:
    """Tensor cosine-taper bump supported on the box center +- widths."""
    c = list(center)
    w = list(widths)

    def func(*z):
        out = 1.0
        for zi, ci, wi in zip(z, c, w):
            out = out * taper((zi - ci) / wi)
        return out

    return Symbol(dual, func)


# ---------------------------------------------------------------- cutoff and hbar grid

def _psi(u):
    u = np.asarray(u, float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


@dataclass(frozen=True)
class CutoffSpec:
    """Even smooth bump: 1 on |X| <= radius/2, 0 for |X| >= radius.  radius=inf gives 1."""

    radius: float = float("inf")

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("cutoff radius must be positive")

    def __call__(self, x) -> np.ndarray:
        x = np.abs(np.asarray(x, float))
        if np.isinf(self.radius):
            return np.ones_like(x)
        s = (x - self.radius / 2) / (self.radius / 2)
        a, b = _psi(1 - s), _psi(s)
        return np.where(s <= 0, 1.0, np.where(s >= 1, 0.0, a / np.maximum(a + b, 1e-300)))


@dataclass(frozen=True)
class HbarGrid:
    values: tuple

    def __post_init__(self):
        v = np.asarray(self.values, float)
        object.__setattr__(self, "values", tuple(float(x) for x in v))
        if len(v) < 8:
            raise ValueError("hbar grid needs at least 8 samples")
        if np.any(v <= 0) or np.any(v > 1):
            raise ValueError("hbar samples must lie in (0, 1]")
        if np.any(np.diff(v) >= 0):
            raise ValueError("hbar samples must be strictly decreasing")
        if v[0] / v[-1] < 100 * (1 - 1e-12):
            raise ValueError("hbar grid must span at least two decades")

    @classmethod
    def logspace(cls, lo: float = 1e-2, hi: float = 1.0, num: int = 16) -> "HbarGrid":
        return cls(tuple(np.geomspace(hi, lo, num)))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def smallest_decade(self) -> np.ndarray:
        v = self.array
        return np.nonzero(v <= 10 * v[-1] * (1 + 1e-12))[0]


# ---------------------------------------------------------------- Poisson brackets

def _grad(f: Callable, z: Sequence[np.ndarray], step: float = FD_STEP) -> list:
    """4th-order centered finite-difference gradient of a callable."""
    z = [np.asarray(a, float) for a in z]
    out = []
    for i in range(len(z)):
        def at(t):
            zz = list(z)
            zz[i] = z[i] + t
            return f(*zz)

        out.append((-at(2 * step) + 8 * at(step) - 8 * at(-step) + at(-2 * step)) / (12 * step))
    return out


def poisson_tensor(dual: LieAlgebroidDual, z: Sequence[np.ndarray]) -> dict:
    """Nonzero entries {(a, b): Pi_ab(z)} of the Poisson bivector, {F,G} = Pi_ab dF_a dG_b."""
    coords = dual.coords
    one = np.ones(np.broadcast_shapes(*(np.shape(a) for a in z)))
    if dual.anchor in ("identity", "translation", "radial"):
        n = len(dual.fiber_axes) if dual.anchor != "radial" else 1
        out = {}
        for i in range(n):
            out[(i, len(dual.base_axes) + i)] = one
            out[(len(dual.base_axes) + i, i)] = -one
        return out
    if dual.anchor == "rotation":
        x1, x2 = z[0], z[1]
        v = (-x2 * one, x1 * one)
        k = coords.index("xi")
        out = {}
        for i in range(2):
            out[(k, i)] = -v[i]
            out[(i, k)] = v[i]
        return out
    if dual.anchor == "abelian":
        return {}
    raise ValueError(f"no Poisson structure for anchor {dual.anchor!r}")


def poisson_bracket(f: Symbol, g: Symbol, step: float = FD_STEP) -> Symbol:
    f._same(g)
    dual = f.dual

    def func(*z):
        pi = poisson_tensor(dual, z)
        if not pi:
            return np.zeros(np.broadcast_shapes(*(np.shape(a) for a in z)))
        df = _grad(f, z, step)
        dg = _grad(g, z, step)
        return sum(c * df[a] * dg[b] for (a, b), c in pi.items())

    return Symbol(dual, func, f.cls)


def fd4(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """4th-order finite-difference derivative along an axis, one-sided near the ends."""
    v = np.moveaxis(np.asarray(values), axis, 0)
    n = v.shape[0]
    if n < 5:
        raise ValueError("need at least 5 samples for 4th-order differences")
    d = np.empty_like(v, dtype=np.result_type(v, float))
    d[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)
    d[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)
    d[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
    d[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
    d[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
    return np.moveaxis(d, 0, axis)


def interior_mask(shape: Sequence[int], ring: int = 2) -> np.ndarray:
    m = np.zeros(shape, bool)
    m[tuple(slice(ring, n - ring) for n in shape)] = True
    return m


def poisson_bracket_grid(f: Symbol, g: Symbol) -> np.ndarray:
    """Bracket of the sampled values using grid stencils; trust only ``interior_mask``."""
    f._same(g)
    dual = f.dual
    axes = dual.axes
    steps = [a[1] - a[0] for a in axes]
    df = [fd4(f.values, i, h) for i, h in enumerate(steps)]
    dg = [fd4(g.values, i, h) for i, h in enumerate(steps)]
    pi = poisson_tensor(dual, dual.mesh())
    out = np.zeros(dual.shape, dtype=np.result_type(f.values, g.values, float))
    for (a, b), c in pi.items():
        out = out + c * df[a] * dg[b]
    return out


# ---------------------------------------------------------------- fiberwise Fourier transform

@dataclass(frozen=True, eq=False)
class FiberFunction:
    """Samples of a function on the algebroid: base axes then the fiber variable X."""

    dual: LieAlgebroidDual
    x_axis: np.ndarray
    values: np.ndarray


def _fiber_axis(dual: LieAlgebroidDual) -> tuple[np.ndarray, float]:
    if dual.fiber_dim != 1:
        raise NotImplementedError("fiberwise transform implemented for one fiber dimension")
    p = dual.fiber_axes[0]
    n, dp = len(p), p[1] - p[0]
    hx = 2 * np.pi / (n * dp)
    return (np.arange(n) - n // 2) * hx, dp


def fiberwise_ft(f: Symbol | np.ndarray, dual: LieAlgebroidDual | None = None) -> FiberFunction:
    """f_hat(x, X) = sum_k dp exp(i p_k X) f(x, p_k) on the Nyquist-dual fiber grid."""
    if isinstance(f, Symbol):
        dual, vals = f.dual, f.values
    else:
        vals = np.asarray(f)
    x_axis, dp = _fiber_axis(dual)
    n = len(x_axis)
    c = n // 2
    sign_k = np.exp(-2j * np.pi * c * np.arange(n) / n)
    sign_j = np.exp(-2j * np.pi * c * np.arange(n) / n) * np.exp(2j * np.pi * c * c / n)
    out = n * dp * np.fft.ifft(vals * sign_k, axis=-1) * sign_j
    return FiberFunction(dual, x_axis, out)


def inverse_fiberwise_ft(fh: FiberFunction) -> np.ndarray:
    """f(x, p_k) = (1/2pi) sum_j hX exp(-i p_k X_j) f_hat(x, X_j)."""
    n = len(fh.x_axis)
    hx = fh.x_axis[1] - fh.x_axis[0]
    c = n // 2
    sign_j = np.exp(2j * np.pi * c * np.arange(n) / n)
    sign_k = np.exp(2j * np.pi * c * np.arange(n) / n) * np.exp(-2j * np.pi * c * c / n)
    return hx / (2 * np.pi) * np.fft.fft(fh.values * sign_j, axis=-1) * sign_k


# ---------------------------------------------------------------- Weyl exponential

def _inside(grid: UniformGrid, x, slack: float = 1e-9) -> bool:
    x = np.asarray(x, float)
    return bool(np.all(x >= grid.start - slack) and np.all(x <= grid.stop + slack))


def _rot(a, x):
    c, s = np.cos(a), np.sin(a)
    x = np.asarray(x, float)
    return np.stack([c * x[..., 0] - s * x[..., 1], s * x[..., 0] + c * x[..., 1]], axis=-1)


def weyl_exp(desc: SmoothGroupoidDescriptor, x0, X):
    """Arrow coordinates of exp^W(X) at the base point x0.

    PairGrid: (target, source) = (x0 + X/2, x0 - X/2).
    ActionRonR: (t, source) = (X, x0 - X/2); target is x0 + X/2.
    ActionSO2onR2: (angle, source) = (X, R(-X/2) x0); target is R(X/2) x0.
    """
    if desc.family == "PairGrid":
        x0, X = np.asarray(x0, float), np.asarray(X, float)
        tgt, src = x0 + X / 2, x0 - X / 2
        if not (_inside(desc.grid, tgt) and _inside(desc.grid, src)):
            raise ValueError("exp overflow: arrow leaves the grid box")
        return tgt, src
    if desc.family == "ActionRonR":
        x0, X = float(x0), float(X)
        src, tgt = x0 - X / 2, x0 + X / 2
        if not (_inside(desc.grid, src) and _inside(desc.grid, tgt)):
            raise ValueError("exp overflow: arrow leaves the grid box")
        return X, src
    x0 = np.asarray(x0, float)
    src, tgt = _rot(-X / 2, x0), _rot(X / 2, x0)
    if not (_inside(desc.grid, src) and _inside(desc.grid, tgt)):
        raise ValueError("exp overflow: arrow leaves the grid box")
    return float(X), src


def arrow_inverse(desc: SmoothGroupoidDescriptor, arrow):
    a, b = arrow
    if desc.family == "PairGrid":
        return b, a
    if desc.family == "ActionRonR":
        return -a, b + a
    return -a, _rot(a, b)


# ---------------------------------------------------------------- quantization

OVERFLOW_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class GridElement:
    """Quantized symbol on a PairGrid(1): kernel K(x, x') on the grid."""

    desc: SmoothGroupoidDescriptor
    hbar: float
    kernel: np.ndarray
    overflow: float = 0.0
    warnings: tuple = ()

    def left_regular(self, tol: float = OVERFLOW_TOL) -> KernelOperator:
        if self.overflow > tol:
            raise ValueError(
                f"truncation overflow: symbol mass {self.overflow:.3g} at the momentum band edge")
        h = self.desc.grid.spacing
        return KernelOperator(h * self.kernel, h, {"hbar": self.hbar, "family": self.desc.family},
                              self.overflow)

    @property
    def matrix(self) -> np.ndarray:
        return self.desc.grid.spacing * self.kernel


def check_class(f: Symbol, tol: float = 1e-12) -> list[str]:
    if f.cls != "PaleyWiener" or f.support_radius is None:
        return []
    fh = fiberwise_ft(f)
    outside = np.abs(fh.x_axis) > f.support_radius
    mass = float(np.max(np.abs(fh.values[..., outside]), initial=0.0))
    scale = max(float(np.max(np.abs(fh.values))), 1e-300)
    if mass / scale >= tol:
        return [f"PaleyWiener support violated: relative mass {mass / scale:.3g} outside radius"]
    return []


def quantize(f: Symbol, hbar: float, cutoff: CutoffSpec | None = None, band: int = 8) -> GridElement:
    """Weyl quantization on PairGrid(1).

    K(x, x') = (2 pi hbar)^-1 int dp f((x+x')/2, p) exp(i p (x - x') / hbar) kappa(x - x'),
    evaluated on the momentum band |p| <= pi hbar / h with ``band * N`` samples.
    """
    if not hbar > 0:
        raise ValueError("hbar must be positive")
    desc = f.dual.desc
    if desc.family != "PairGrid" or desc.dim != 1:
        raise NotImplementedError("quantize is implemented for PairGrid(1)")
    cutoff = cutoff or CutoffSpec()
    grid = desc.grid
    n, h = grid.num, grid.spacing
    m = band * n
    dp = 2 * np.pi * hbar / (m * h)
    p = (np.arange(m) - m // 2) * dp
    mids = grid.start + 0.5 * h * np.arange(2 * n - 1)
    F = np.asarray(f(mids[:, None], p[None, :]))
    sup = float(np.max(np.abs(F))) if F.size else 0.0
    edge = float(np.max(np.abs(F[:, [0, -1]]))) if F.size else 0.0
    overflow = edge / sup if sup > 0 else 0.0
    if sup > 0 and float(np.max(np.ptp(F, axis=1))) <= 1e-12 * sup:
        # constant across the band: the band sum is exactly the grid delta
        overflow = 0.0
    # G[s, j] = sum_k F[s, k] exp(i p_k j h / hbar) = (-1)^j M ifft(F)[j mod M]
    G = m * np.fft.ifft(F, axis=1)
    a = np.arange(n)
    j = a[:, None] - a[None, :]
    s = a[:, None] + a[None, :]
    K = (dp / (2 * np.pi * hbar)) * G[s, j % m] * np.where(j % 2, -1.0, 1.0)
    K = K * cutoff(j * h)
    return GridElement(desc, float(hbar), K, overflow, tuple(check_class(f)))


def quantized_operator(f: Symbol, hbar: float, cutoff: CutoffSpec | None = None,
                       tol: float = OVERFLOW_TOL) -> np.ndarray:
    return quantize(f, hbar, cutoff).left_regular(tol).matrix


# ---------------------------------------------------------------- circle quantization

@dataclass(frozen=True)
class CircleQuantizer:
    """Quantization on the rotation group SO(2), diagonalized by Fourier modes.

    In the mode basis e^{i m theta}, Q_hbar(g) acts by the multiplier
    c_m = int ds g(hbar (m + s)) kcheck(s), kcheck(s) = (2 pi)^-1 int kappa(a) e^{i s a} da.
    """

    cutoff: CutoffSpec = CutoffSpec(np.pi)
    s_max: float = 40.0
    ds: float = 0.02
    quad_points: int = 4001

    @cached_property
    def s_axis(self) -> np.ndarray:
        k = int(round(self.s_max / self.ds))
        return self.ds * np.arange(-k, k + 1)

    @cached_property
    def kcheck(self) -> np.ndarray:
        r = min(self.cutoff.radius, np.pi)
        a = np.linspace(0, r, self.quad_points)
        w = np.full_like(a, a[1] - a[0])
        w[[0, -1]] *= 0.5
        k = self.cutoff(a)
        return (np.cos(np.outer(self.s_axis, a)) @ (w * k)) / np.pi

    def multipliers(self, g: Callable, hbar: float, modes: np.ndarray) -> np.ndarray:
        modes = np.asarray(modes, float)
        ell = hbar * (modes[:, None] + self.s_axis[None, :])
        return np.asarray(g(ell)) @ (self.kcheck * self.ds)


def _fit_exponent(h: np.ndarray, y: np.ndarray) -> float:
    good = y > 0
    if good.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(h[good]), np.log(y[good]), 1)[0])


@dataclass
class DefectTable:
    hbar: np.ndarray
    vn: np.ndarray
    dirac_scaled: np.ndarray
    dirac_raw: np.ndarray
    norm: np.ndarray
    scales: dict = field(default_factory=dict)

    @property
    def exponents(self) -> dict:
        idx = np.nonzero(self.hbar <= 10 * self.hbar.min() * (1 + 1e-12))[0]
        h = self.hbar[idx]
        return {"vn": _fit_exponent(h, self.vn[idx]),
                "dirac_scaled": _fit_exponent(h, self.dirac_scaled[idx]),
                "dirac_raw": _fit_exponent(h, self.dirac_raw[idx])}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["hbar", "vn", "dirac_scaled", "dirac_raw", "norm"])
        for row in zip(self.hbar, self.vn, self.dirac_scaled, self.dirac_raw, self.norm):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "hbar": self.hbar.tolist(), "vn": self.vn.tolist(),
            "dirac_scaled": self.dirac_scaled.tolist(), "dirac_raw": self.dirac_raw.tolist(),
            "norm": self.norm.tolist(), "exponents": self.exponents, "scales": self.scales,
        }, indent=2)


def strict_quantization_defects(f: Symbol, g: Symbol, grid: HbarGrid,
                                cutoff: CutoffSpec | None = None) -> DefectTable:
    fg = f * g
    br = poisson_bracket(f, g)
    rows = []
    for hb in grid:
        A = quantized_operator(f, hb, cutoff)
        B = quantized_operator(g, hb, cutoff)
        AB = quantized_operator(fg, hb, cutoff)
        P = quantized_operator(br, hb, cutoff)
        comm = A @ B - B @ A
        rows.append((hb, op_norm(A @ B - AB), op_norm(P - comm / (1j * hb)),
                     op_norm(P - comm), op_norm(A)))
    arr = np.array(rows)
    scales = {"sup_f": f.sup_norm(), "sup_g": g.sup_norm(),
              "sup_bracket": float(np.max(np.abs(br.values)))}
    return DefectTable(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], scales)
