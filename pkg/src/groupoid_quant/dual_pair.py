"""Momentum maps of the built-in grid bibundles, dual-pair checks and sampled
Lagrangian relations."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .quantization import FD_STEP, _grad

KINDS = ("pair_trivial", "pair_pair", "rotation")


@dataclass(frozen=True)
class GridBibundle:
    """A built-in bibundle between grid groupoids.

    ``pair_trivial``: M = line, G = pair groupoid of the line, H = trivial.
    ``pair_pair``: M = X x Y, G = pair(X), H = pair(Y).
    ``rotation``: M = punctured plane in polar form, G = pair(radii) x SO(2) acting on
    (radius, angle) from the left, H = SO(2) rotating the angle from the right.
    """

    kind: str
    box: tuple = (-1.0, 1.0)  # position box of M (radius range for rotation)
    num: int = 64

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unsupported family combination {self.kind!r}")

    @property
    def spacing(self) -> float:
        return (self.box[1] - self.box[0]) / (self.num - 1)

    @property
    def m_dim(self) -> int:
        return 1 if self.kind == "pair_trivial" else 2


def _rotation_left(q, t, which):
    r = np.linalg.norm(q, axis=-1, keepdims=True)
    if which == 0:
        return q * (r - t) / r
    c, s = np.cos(-t), np.sin(-t)
    return np.stack([c * q[..., 0] - s * q[..., 1], s * q[..., 0] + c * q[..., 1]], axis=-1)


def _rotation_right(q, t, which):
    c, s = np.cos(t), np.sin(t)
    return np.stack([c * q[..., 0] - s * q[..., 1], s * q[..., 0] + c * q[..., 1]], axis=-1)


@dataclass(frozen=True)
class MomentumPair:
    """Closed-form momentum maps T*M -> G* and T*M -> H*.

    Inputs are arrays q, p of shape (..., dim M); outputs have a trailing coordinate axis.
    ``left_curves[k](q, t)`` is gamma(t)^-1 q for the k-th algebroid basis vector and
    ``right_curves[k](q, t)`` is q exp(t Y_k); they feed the finite-difference oracle.
    """

    bibundle: GridBibundle
    j_G: Callable
    j_H: Callable
    base_G: Callable
    base_H: Callable
    left_curves: tuple
    right_curves: tuple
    g_coords: tuple
    h_coords: tuple
    sign: float = 1.0


def momentum_maps(b: GridBibundle, corrupt_sign: bool = False) -> MomentumPair:
    sign = -1.0 if corrupt_sign else 1.0
    if b.kind == "pair_trivial":
        return MomentumPair(
            b,
            lambda q, p: np.concatenate([q, p], axis=-1),
            lambda q, p: np.zeros(q.shape[:-1] + (1,)),
            lambda q: q,
            lambda q: np.zeros(q.shape[:-1] + (0,)),
            (lambda q, t: q - t,),
            (),
            ("q", "p"), ("pt",), sign)
    if b.kind == "pair_pair":
        return MomentumPair(
            b,
            lambda q, p: np.stack([q[..., 0], p[..., 0]], axis=-1),
            lambda q, p: np.stack([q[..., 1], -sign * p[..., 1]], axis=-1),
            lambda q: q[..., :1],
            lambda q: q[..., 1:],
            (lambda q, t: q - np.array([t, 0.0]),),
            (lambda q, t: q - np.array([0.0, t]),),
            ("x", "px"), ("y", "py"), sign)

    def jg(q, p):
        r = np.linalg.norm(q, axis=-1)
        pr = np.sum(q * p, axis=-1) / r
        ell = q[..., 0] * p[..., 1] - q[..., 1] * p[..., 0]
        return np.stack([r, pr, ell], axis=-1)

    def jh(q, p):
        return sign * (q[..., 0] * p[..., 1] - q[..., 1] * p[..., 0])[..., None]

    return MomentumPair(
        b, jg, jh,
        lambda q: np.linalg.norm(q, axis=-1, keepdims=True),
        lambda q: np.zeros(q.shape[:-1] + (0,)),
        (lambda q, t: _rotation_left(q, t, 0), lambda q, t: _rotation_left(q, t, 1)),
        (lambda q, t: _rotation_right(q, t, 0),),
        ("r", "pr", "l"), ("l",), sign)


def _curve_derivative(curve, q, step):
    def at(t):
        return curve(q, t)

    return (-at(2 * step) + 8 * at(step) - 8 * at(-step) + at(-2 * step)) / (12 * step)


def momentum_from_actions(mp: MomentumPair, q: np.ndarray, p: np.ndarray,
                          step: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Covector parts of (j_G, j_H) by differentiating the action curves:
    j_G(eta)(X) = -eta(d/dt gamma(t)^-1 q),  j_H(eta)(Y) = eta(d/dt q exp(tY))."""
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    left = [-np.sum(p * _curve_derivative(c, q, step), axis=-1) for c in mp.left_curves]
    right = [np.sum(p * _curve_derivative(c, q, step), axis=-1) for c in mp.right_curves]
    empty = np.zeros(q.shape[:-1] + (0,))
    return (np.stack(left, axis=-1) if left else empty,
            np.stack(right, axis=-1) if right else empty)


def momentum_closed_form_parts(mp: MomentumPair, q, p) -> tuple[np.ndarray, np.ndarray]:
    """Covector parts of the closed forms (base coordinates stripped)."""
    jg, jh = mp.j_G(q, p), mp.j_H(q, p)
    nb_g = mp.base_G(q).shape[-1]
    nb_h = mp.base_H(q).shape[-1]
    if mp.bibundle.kind == "pair_trivial":
        jh = jh[..., :0]
    return jg[..., nb_g:], jh[..., nb_h:]


def canonical_bracket(F: Callable, G: Callable, q: np.ndarray, p: np.ndarray,
                      step: float = FD_STEP) -> np.ndarray:
    """{F, G} on T*M for callables F(q, p), via 4th-order finite differences."""
    n = q.shape[-1]
    z = [q[..., i] for i in range(n)] + [p[..., i] for i in range(n)]

    def wrap(H):
        return lambda *zz: H(np.stack(zz[:n], axis=-1), np.stack(zz[n:], axis=-1))

    dF = _grad(wrap(F), z, step)
    dG = _grad(wrap(G), z, step)
    return sum(dF[i] * dG[n + i] - dF[n + i] * dG[i] for i in range(n))


@dataclass
class CommutationReport:
    max_bracket: float
    per_pair: list

    def to_dict(self) -> dict:
        return {"max_bracket": self.max_bracket, "per_pair": self.per_pair}


def commutation_check(mp: MomentumPair, battery: Sequence[tuple], q: np.ndarray,
                      p: np.ndarray) -> CommutationReport:
    """max |{f o j_G, g o j_H}| over the battery of (f, g) callables on coordinate arrays."""
    per = []
    for f, g in battery:
        F = lambda qq, pp, f=f: f(*np.moveaxis(mp.j_G(qq, pp), -1, 0))
        G = lambda qq, pp, g=g: g(*np.moveaxis(mp.j_H(qq, pp), -1, 0))
        per.append(float(np.max(np.abs(canonical_bracket(F, G, q, p)))))
    return CommutationReport(max(per) if per else 0.0, per)


def cotangent_samples_cartesian(num: int = 64, half_width: float = 2.0, r_min: float = 0.5,
                                momenta: Sequence[Sequence[float]] = ((0.3, -0.2), (-0.5, 0.7)),
                                ring: int = 2):
    """Interior points of a num x num position grid, |q| >= r_min, times a few momenta."""
    x = np.linspace(-half_width, half_width, num)[ring:num - ring]
    Q = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    Q = Q[np.linalg.norm(Q, axis=-1) >= r_min]
    qs = np.repeat(Q, len(momenta), axis=0)
    ps = np.tile(np.asarray(momenta, float), (len(Q), 1))
    return qs, ps


# ---------------------------------------------------------------- relations

@dataclass
class Relation:
    """Finite sample of a relation inside A x B; points are rows (a..., b...)."""

    points: np.ndarray
    dims: tuple  # (dim A, dim B)
    tolerance: float
    degenerate: bool = False

    def __post_init__(self):
        self.points = np.asarray(self.points, float).reshape(-1, sum(self.dims))
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        self.points = dedupe(self.points, self.tolerance)
        self.degenerate = self.degenerate or len(self.points) == 0

    def __len__(self):
        return len(self.points)

    @property
    def first(self) -> np.ndarray:
        return self.points[:, :self.dims[0]]

    @property
    def second(self) -> np.ndarray:
        return self.points[:, self.dims[0]:]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"a{i}" for i in range(self.dims[0])] + [f"b{i}" for i in range(self.dims[1])])
        for row in self.points:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def header(self) -> str:
        return json.dumps({"dims": list(self.dims), "tolerance": self.tolerance,
                           "count": len(self.points), "degenerate": self.degenerate})

    @classmethod
    def from_csv(cls, text: str, header: str) -> "Relation":
        h = json.loads(header)
        rows = list(csv.reader(io.StringIO(text)))[1:]
        pts = np.array([[float(v) for v in r] for r in rows]).reshape(-1, sum(h["dims"]))
        return cls(pts, tuple(h["dims"]), h["tolerance"], h["degenerate"])


def dedupe(points: np.ndarray, tol: float) -> np.ndarray:
    """Greedy thinning: keep a point unless an earlier kept point is within tol/2."""
    if len(points) == 0:
        return points
    keys = np.floor(points / (0.5 * tol)).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(idx)]


def lagrangian_relation(mp: MomentumPair, q: np.ndarray, p: np.ndarray,
                        tolerance: float | None = None) -> Relation:
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    if q.size == 0:
        raise ValueError("empty sampling")
    a, b = mp.j_G(q, p), mp.j_H(q, p)
    tol = tolerance if tolerance is not None else 2 * mp.bibundle.spacing
    return Relation(np.concatenate([a, b], axis=-1), (a.shape[-1], b.shape[-1]), tol)


def compose_relations(r1: Relation, r2: Relation) -> Relation:
    if r1.dims[1] != r2.dims[0]:
        raise ValueError("middle coordinates do not match")
    tol = max(r1.tolerance, r2.tolerance)
    dims = (r1.dims[0], r2.dims[1])
    if len(r1) == 0 or len(r2) == 0:
        return Relation(np.zeros((0, sum(dims))), dims, tol, True)
    tree = cKDTree(r2.first)
    hits = tree.query_ball_point(r1.second, tol)
    rows = [np.concatenate([r1.first[i], r2.second[j]]) for i, js in enumerate(hits) for j in js]
    if not rows:
        return Relation(np.zeros((0, sum(dims))), dims, tol, True)
    return Relation(np.array(rows), dims, tol)


def diagonal_relation(points: np.ndarray, tolerance: float) -> Relation:
    points = np.asarray(points, float)
    points = points.reshape(len(points), -1)
    d = points.shape[1]
    return Relation(np.concatenate([points, points], axis=1), (d, d), tolerance)


@dataclass
class HausdorffReport:
    forward: float  # sup over a of distance to b
    backward: float
    symmetric: float

    def to_dict(self) -> dict:
        return {"forward": self.forward, "backward": self.backward, "symmetric": self.symmetric}


def hausdorff(a: np.ndarray, b: np.ndarray, scale: Sequence[float] | None = None) -> HausdorffReport:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if scale is not None:
        s = np.asarray(scale, float)
        a, b = a / s, b / s
    if len(a) == 0 or len(b) == 0:
        inf = float("inf") if len(a) or len(b) else 0.0
        return HausdorffReport(inf, inf, inf)
    f = float(cKDTree(b).query(a)[0].max())
    g = float(cKDTree(a).query(b)[0].max())
    return HausdorffReport(f, g, max(f, g))
