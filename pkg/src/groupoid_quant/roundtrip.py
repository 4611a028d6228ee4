"""Classical limit of quantized arrows through the kernel characterization, and the
end-to-end comparison with the Lagrangian relation of the momentum maps."""

from __future__ import annotations

import json
import time
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import exact as ex
from .cstar_bundle import (Extrapolation, Section, classical_fiber, extrapolate_to_zero,
                           section_from_symbol)
from .convolution import BlockOperator, ConvolutionElement
from .dual_pair import (GridBibundle, HausdorffReport, MomentumPair, Relation, hausdorff,
                        lagrangian_relation, momentum_maps)
from .groupoid_core import LieAlgebroidDual, algebroid_dual
from .hilbert_bimodule.finite import Bibundle, bimodule_from_bibundle, tensor_product_kernel
from .hilbert_bimodule.grid import (DUAL_HBAR, PairTrivialFiber, RotationFiber, SectionBimodule,
                                    circle_dual, gauge_dual, module_norm, pair_trivial_lift,
                                    point_dual, positivity_min, right_norm, rotation_lift,
                                    standard_battery, strong_nondegeneracy_check, symbol_sup,
                                    tensor_symbol)
from .quantization import CircleQuantizer, HbarGrid, Symbol, bump, gaussian, taper

MEMBERSHIP_REL = 1e-2
ZERO_REL = 1e-12


# ---------------------------------------------------------------- beta0

@dataclass
class Beta0:
    values: np.ndarray
    warnings: list

    def vanishes(self, scale: float = 1.0) -> bool:
        return float(np.max(np.abs(self.values), initial=0.0)) <= ZERO_REL * max(scale, 1e-300)


def _outside(dual: LieAlgebroidDual, pts: np.ndarray) -> bool:
    for k, ax in enumerate(dual.axes):
        if len(ax) > 1 and (pts[..., k].min() < ax.min() - 1e-12 or pts[..., k].max() > ax.max() + 1e-12):
            return True
    return False


def beta0(mp: MomentumPair, f: Symbol, g: Symbol, q: np.ndarray, p: np.ndarray) -> Beta0:
    """(f o j_G)(eta) (g o j_H)(eta) on the sampled covectors."""
    a, b = mp.j_G(q, p), mp.j_H(q, p)
    warns = []
    if _outside(f.dual, a):
        warns.append("j_G image leaves the symbol grid; symbol evaluated by extrapolation")
    if _outside(g.dual, b):
        warns.append("j_H image leaves the symbol grid; symbol evaluated by extrapolation")
    vals = np.asarray(f(*np.moveaxis(a, -1, 0))) * np.asarray(g(*np.moveaxis(b, -1, 0)))
    return Beta0(vals, warns)


# ---------------------------------------------------------------- quantum kernel test

@dataclass
class Membership:
    in_kernel: bool
    defects: np.ndarray
    fit: Extrapolation
    threshold: float
    scale: float

    @property
    def magnitude(self) -> float:
        """|c0| of the unclamped fit, used for the separation margin."""
        return abs(self.fit.coeffs[0])

    def to_dict(self) -> dict:
        return {"in_kernel": self.in_kernel, "defects": self.defects.tolist(),
                "limit": self.fit.limit, "intercept": self.fit.coeffs[0],
                "threshold": self.threshold, "scale": self.scale}


def kernel_membership_quantum(f: Symbol, g: Symbol, se: SectionBimodule,
                              rel: float = MEMBERSHIP_REL) -> Membership:
    """d(hbar) = sup_phi |Q(f) phi Q(g)| / |phi|, extrapolated to hbar = 0.

    The sup over the module is computed exactly as an operator norm, so the module test
    battery is the whole middle space.
    """
    d = np.array([fib.pair_defect(f, g) for fib in se.fibers])
    fit = extrapolate_to_zero(se.grid.array, d)
    scale = symbol_sup(f) * symbol_sup(g)
    thr = rel * scale
    if scale == 0:
        return Membership(True, d, fit, thr, scale)
    return Membership(fit.limit < thr, d, fit, thr, scale)


@dataclass
class Tile:
    symbol: Symbol
    center: tuple
    widths: tuple


@dataclass
class KernelZeroSet:
    pairs: list  # (f tile index, g tile index)
    verdicts: list
    results: list
    relation: Relation
    warnings: list = field(default_factory=list)


def reconstruct_relation(se: SectionBimodule, f_tiles: Sequence[Tile], g_tiles: Sequence[Tile],
                         rel: float = MEMBERSHIP_REL, min_tiles: int = 3) -> KernelZeroSet:
    """Tile-center pairs whose bump pair is not in the quantum kernel."""
    warns = []
    for name, tiles in (("G", f_tiles), ("H", g_tiles)):
        if not tiles:
            continue
        centers = np.array([t.center for t in tiles], float).reshape(len(tiles), -1)
        for k in range(centers.shape[1]):
            if len(np.unique(centers[:, k])) < min_tiles and len(tiles) > 1 and np.ptp(centers[:, k]) > 0:
                warns.append(f"battery too coarse on {name} axis {k}")
    pairs, verdicts, results, pts = [], [], [], []
    for i, ft in enumerate(f_tiles):
        for j, gt in enumerate(g_tiles):
            m = kernel_membership_quantum(ft.symbol, gt.symbol, se, rel)
            pairs.append((i, j))
            verdicts.append(m.in_kernel)
            results.append(m)
            if not m.in_kernel:
                pts.append(tuple(ft.center) + tuple(gt.center))
    dims = (len(f_tiles[0].center) if f_tiles else 0, len(g_tiles[0].center) if g_tiles else 0)
    widths = [w for t in list(f_tiles[:1]) + list(g_tiles[:1]) for w in t.widths if w > 0]
    tol = min(widths) if widths else 1.0
    empty = np.prod(se.fibers[0].shape) == 0
    rel_pts = np.array(pts, float).reshape(-1, sum(dims))
    return KernelZeroSet(pairs, verdicts, results,
                         Relation(rel_pts, dims, tol, degenerate=empty or not pts), warns)


def separation_orders(results: Sequence[Membership]) -> float:
    """log10 of (smallest limit outside the kernel) / (largest |intercept| inside)."""
    inside = [m.magnitude for m in results if m.in_kernel]
    outside = [m.fit.limit for m in results if not m.in_kernel]
    if not inside or not outside:
        return float("inf")
    lo, hi = min(outside), max(inside)
    if hi == 0:
        return float("inf")
    return float(np.log10(lo / hi))


# ---------------------------------------------------------------- worked examples

@dataclass
class Example:
    """Everything roundtrip_report needs for one built-in bibundle."""

    bibundle: GridBibundle
    se: SectionBimodule
    f_tiles: list
    g_tiles: list
    tile_scale: tuple  # per relation coordinate, for tile-width normalized distances
    support_samples: tuple  # (q, p) covering every tile support, for beta0
    box_samples: tuple  # (q, p) covering the tile-center box, for the relation
    nondeg_symbols: list
    object_check: Callable


def _object_check_pair(desc, grid: HbarGrid) -> dict:
    """Sections generated by symbols come back to their symbols at hbar = 0, and a section
    differing by an hbar-vanishing term lands in the same class."""
    d = algebroid_dual(desc, DUAL_HBAR)
    f1 = gaussian(d, (0.0, 0.0), (0.4, 0.15))
    f2 = gaussian(d, (0.3, 0.1), (0.3, 0.15))
    s1 = section_from_symbol(f1, grid)
    s2 = section_from_symbol(f2, grid)
    return _classes_doc(s1, s2, f1, f2)


def _classes_doc(s1: Section, s2: Section, f1: Symbol, f2: Symbol) -> dict:
    # s1 + hbar^2 s2 must share the class of s1; with hbar s2 the linear fit over the
    # smallest decade can be biased by curvature of the profile, so that verdict is only
    # reported
    s3 = s1 + s2.scale_by(lambda h: h * h)
    s4 = s1 + s2.scale_by(lambda h: h)
    cf = classical_fiber([s1, s2, s3])
    err = max(float(np.max(np.abs(cf.symbol(s).values - f.values)))
              for s, f in ((s1, f1), (s2, f2), (s3, f1)))
    classes = cf.classes()
    ok = err == 0 and classes == [[0, 2], [1]]
    return {"ok": ok, "symbol_error": err, "classes": classes,
            "linear_perturbation_same_class": cf.same_class(s1, s4)}


def _object_check_rotation(fiber: RotationFiber, grid: HbarGrid) -> dict:
    radial = _object_check_pair(fiber.radial, grid)
    ell = circle_dual(np.linspace(-3, 3, 121))
    g1 = bump(ell, (0.0,), (0.5,))
    g2 = bump(ell, (1.0,), (0.5,))

    def diag(g, h):
        c = CircleQuantizer().multipliers(g.func, h, fiber.modes)
        return BlockOperator(c[:, None, None])

    s1 = section_from_symbol(g1, grid, quantizer=diag)
    s2 = section_from_symbol(g2, grid, quantizer=diag)
    circle = _classes_doc(s1, s2, g1, g2)
    return {"ok": radial["ok"] and circle["ok"], "radial": radial, "circle": circle}


def pair_trivial_example(num: int = 64, box: tuple = (-1.0, 1.0),
                         grid: HbarGrid | None = None) -> Example:
    grid = grid or HbarGrid.logspace()
    b = GridBibundle("pair_trivial", box, num)
    x = np.linspace(box[0], box[1], num)
    gens = {"gauss": lambda h: np.exp(-x ** 2 / 0.18) + 0j,
            "wave": lambda h: np.exp(-(x - 0.3) ** 2 / 0.1 + 5j * x),
            "hbar_gauss": lambda h: h * np.exp(-x ** 2 / 0.18) + 0j}
    se = pair_trivial_lift(num, box, grid, generators=gens)
    d = algebroid_dual(se.fibers[0].desc, DUAL_HBAR)
    pt = point_dual()
    wq, wp = 0.5, 0.4
    f_tiles = [Tile(bump(d, (qc, pc), (wq, wp)), (qc, pc), (wq, wp))
               for qc in np.arange(-2.0, 2.01, 0.5) for pc in (-0.4, 0.0, 0.4)]
    g_tiles = [Tile(Symbol.constant(pt, c), (0.0,), (0.0,)) for c in (1.0, 0.0)]
    # beta0 samples must reach every tile support inside the momentum band
    P = np.linspace(-1.0, 1.0, 81)
    qs, ps = np.meshgrid(x, P, indexing="ij")
    support = (qs.reshape(-1, 1), ps.reshape(-1, 1))
    Pb = np.linspace(-0.4, 0.4, 17)
    qb, pb = np.meshgrid(x, Pb, indexing="ij")
    boxs = (qb.reshape(-1, 1), pb.reshape(-1, 1))
    return Example(b, se, f_tiles, g_tiles, (wq, wp, 1.0), support, boxs,
                   [gaussian(d, (0.0, 0.0), (0.4, 0.15)), bump(d, (0.2, 0.0), (0.5, 0.4))],
                   lambda: _object_check_pair(se.fibers[0].desc, grid))


def _polar_samples(r, pr, ell, angles=(0.3,)):
    R, PR, L, A = np.meshgrid(r, pr, ell, angles, indexing="ij")
    R, PR, L, A = (a.ravel() for a in (R, PR, L, A))
    u = np.stack([np.cos(A), np.sin(A)], axis=-1)
    v = np.stack([-np.sin(A), np.cos(A)], axis=-1)
    q = R[:, None] * u
    p = PR[:, None] * u + (L / R)[:, None] * v
    return q, p


def rotation_example(num: int = 64, radii: tuple = (0.5, 2.5), max_mode: int = 400,
                     grid: HbarGrid | None = None) -> Example:
    grid = grid or HbarGrid.logspace()
    b = GridBibundle("rotation", radii, num)
    se = rotation_lift(num, radii, max_mode, grid)
    fib = se.fibers[0]
    r = fib.radial.grid.points
    m = fib.modes.astype(float)
    se.generators.update({
        "gauss": lambda h: np.exp(-(m[:, None] / 20.0) ** 2 - (r[None, :] - 1.5) ** 2 / 0.1) + 0j,
        "hbar_gauss": lambda h: h * np.exp(-(m[:, None] / 20.0) ** 2) * np.ones_like(r)[None, :] + 0j,
    })
    l_axis = np.linspace(-3.0, 3.0, 241)
    gd = gauge_dual(fib.radial, l_axis)
    cd = circle_dual(l_axis)
    wr, wp, wl = 0.5, 0.4, 0.5
    ells = np.arange(-2.0, 2.01, 0.5)
    ang = {lc: (lambda l, lc=lc: taper((l - lc) / wl)) for lc in ells}
    f_tiles = []
    for rc in (1.0, 1.5, 2.0):
        for pc in (-0.4, 0.0, 0.4):
            rad = (lambda rr, pp, rc=rc, pc=pc: taper((rr - rc) / wr) * taper((pp - pc) / wp))
            for lc in ells:
                f_tiles.append(Tile(tensor_symbol(gd, rad, ang[lc]), (rc, pc, lc), (wr, wp, wl)))
    g_tiles = [Tile(Symbol(cd, ang[lc]), (lc,), (wl,)) for lc in ells]
    support = _polar_samples(r, np.linspace(-1.0, 1.0, 21), np.linspace(-3.0, 3.0, 241))
    inner_r = r[(r >= 1.0 - 1e-12) & (r <= 2.0 + 1e-12)]
    boxs = _polar_samples(inner_r, np.linspace(-0.4, 0.4, 9), np.linspace(-2.0, 2.0, 81))
    rad0 = lambda rr, pp: taper((rr - 1.5) / wr) * taper(pp / wp)
    return Example(b, se, f_tiles, g_tiles, (wr, wp, wl, wl), support, boxs,
                   [tensor_symbol(gd, rad0, ang[0.0])],
                   lambda: _object_check_rotation(fib, grid))


# ---------------------------------------------------------------- report

class StageError(RuntimeError):
    def __init__(self, stage: str, err: Exception):
        super().__init__(f"[{stage}] {type(err).__name__}: {err}")
        self.stage = stage


def _stage(name: str, fn: Callable, timings: dict):
    t = time.perf_counter()
    try:
        return fn()
    except Exception as e:  # propagated with the stage tag
        raise StageError(name, e) from e
    finally:
        timings[name] = time.perf_counter() - t


def roundtrip_report(example: Example, corrupt_sign: bool = False,
                     hausdorff_tiles: float = 3.0, min_separation: float = 2.0,
                     membership_rel: float = MEMBERSHIP_REL) -> dict:
    timings: dict = {}
    se = example.se
    mp = _stage("momentum_maps", lambda: momentum_maps(example.bibundle, corrupt_sign), timings)

    def lift_checks():
        gens = list(se.generators.values())
        cs = min(float(np.min(se.cauchy_schwarz(a, b))) for a in gens for b in gens)
        pos = min(se.positivity(a) for a in gens)
        return {"cauchy_schwarz_min_slack": cs, "positivity_min": pos,
                "warnings": [w.to_dict() for w in se.warnings]}

    lift_doc = _stage("lift", lift_checks, timings)
    nd = _stage("strong_nondegeneracy", lambda: strong_nondegeneracy_check(
        se, standard_battery(se, example.nondeg_symbols)), timings)
    kz = _stage("reconstruct_relation", lambda: reconstruct_relation(
        se, example.f_tiles, example.g_tiles, membership_rel), timings)

    def consistency():
        q, p = example.support_samples
        rows, agree = [], 0
        for (i, j), m in zip(kz.pairs, kz.results):
            ft, gt = example.f_tiles[i], example.g_tiles[j]
            b0 = beta0(mp, ft.symbol, gt.symbol, q, p)
            zero = b0.vanishes(m.scale)
            ok = zero == m.in_kernel
            agree += ok
            rows.append({"f": list(ft.center), "g": list(gt.center), "beta0_zero": zero,
                         **m.to_dict(), "agree": ok})
        return rows, agree

    rows, agree = _stage("beta0_consistency", consistency, timings)
    truth = _stage("lagrangian_relation",
                   lambda: lagrangian_relation(mp, *example.box_samples), timings)
    hd = _stage("hausdorff", lambda: hausdorff(kz.relation.points, truth.points,
                                               example.tile_scale), timings)
    obj = _stage("object_roundtrip", example.object_check, timings)
    sep = separation_orders(kz.results)
    checks = {
        "hausdorff": hd.symmetric < hausdorff_tiles,
        "consistency": agree == len(rows),
        "separation": sep >= min_separation,
        "nondegeneracy": nd.passed,
        "positivity": lift_doc["positivity_min"] >= -1e-10,
        "cauchy_schwarz": lift_doc["cauchy_schwarz_min_slack"] >= -1e-10,
        "object_roundtrip": obj["ok"],
    }
    return {
        "example": example.bibundle.kind,
        "corrupt_sign": corrupt_sign,
        "verdict": "PASS" if all(checks.values()) else "FAIL",
        "checks": checks,
        "failed": [k for k, v in checks.items() if not v],
        "hausdorff_tiles": hd.to_dict(),
        "hausdorff_tolerance": hausdorff_tiles,
        "consistency": {"agree": agree, "total": len(rows)},
        "separation_orders": sep,
        "tiles": {"surviving": len(kz.relation), "pairs": len(kz.pairs),
                  "warnings": kz.warnings},
        "relation_points": len(truth),
        "lift": lift_doc,
        "nondegeneracy": nd.to_dict(),
        "object_roundtrip": obj,
        "battery": rows,
        "timings": timings,
    }


def summary(report: dict) -> str:
    h = report["hausdorff_tiles"]
    c = report["consistency"]
    return (f"{report['example']}{' (sign fault)' if report['corrupt_sign'] else ''}: "
            f"{report['verdict']}  hausdorff={h['symmetric']:.3g} tiles "
            f"(fwd {h['forward']:.3g}, bwd {h['backward']:.3g}), "
            f"consistency {c['agree']}/{c['total']}, separation {report['separation_orders']:.3g} "
            f"orders, failed={report['failed']}")


# ---------------------------------------------------------------- finite round trip

def finite_roundtrip(b: Bibundle) -> dict:
    """Exact version: the unit pairs (u, v) with delta_u (x) delta_v outside the tensor
    product kernel are exactly the pairs (t(q), s(q)) over the middle points."""
    E = bimodule_from_bibundle(b)
    K = tensor_product_kernel(E)
    G, H = b.left, b.right
    nH = len(H.arrows)
    base_rank = K.dim
    quantum = set()
    for u in G.unit_list:
        for v in H.unit_list:
            k = G.index[u] * nH + H.index[v]
            stacked = ex.from_dok({**K.basis.to_dok(), (base_rank, k): 1},
                                  (base_rank + 1, K.basis.shape[1]))
            if ex.rank(stacked) > base_rank:
                quantum.add((u, v))
    classical = {(b.t[q], b.s[q]) for q in b.points}
    # object level: the dual of a finite groupoid is its unit space, and a function on
    # units quantizes to the element with the same coefficients
    f = {u: Fraction(i + 1, 3) for i, u in enumerate(G.unit_list)}
    back = ConvolutionElement(G, f).coeffs
    return {"equal": quantum == classical, "object_equal": dict(back) == f,
            "quantum": sorted(map(repr, quantum)), "classical": sorted(map(repr, classical)),
            "kernel_dim": K.dim}


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, default=float)
