"""Named experiment suites.  Each returns named checks, metrics and CSV payloads; the CLI
writes them to disk."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from . import exact as ex
from .cstar_bundle import (classical_fiber, norm_profile, section_from_symbol,
                           vanishing_at_zero)
from .dual_pair import (GridBibundle, commutation_check, compose_relations,
                        cotangent_samples_cartesian, diagonal_relation, hausdorff,
                        lagrangian_relation, momentum_closed_form_parts, momentum_from_actions,
                        momentum_maps, canonical_bracket)
from .groupoid_core import SmoothGroupoidDescriptor, algebroid_dual
from .hilbert_bimodule.grid import standard_battery, strong_nondegeneracy_check
from .hilbert_bimodule.finite import (associativity_witness, bibundle_tensor,
                                      bibundle_tensor_witness, bimodule_from_bibundle,
                                      block_irreps, check_bimodule, conjugate, direct_sum,
                                      identity_bimodule, interior_tensor, left_identity_witness,
                                      positivity_min_eig, random_chain, rieffel_induce,
                                      right_identity_witness, tensor_product_kernel,
                                      unitary_defects, validate_bibundle)
from .quantization import HbarGrid, gaussian, strict_quantization_defects
from .roundtrip import (finite_roundtrip, pair_trivial_example, roundtrip_report,
                        rotation_example, summary)

SUITES = ("dirac_convergence", "category_laws_finite", "momentum_checks",
          "roundtrip_pair_trivial", "roundtrip_so2", "bundle_limits")

DESCRIPTIONS = {
    "dirac_convergence": "von Neumann and scaled Dirac defects and the norm profile of a "
                         "Gaussian pair on PairGrid(1)",
    "category_laws_finite": "exact identity, associativity and functoriality witnesses, "
                            "kernel invariance and induction on random finite bibundles",
    "momentum_checks": "momentum maps of the rotation example: commutation, "
                       "finite-difference oracle, linearity, Poisson-map property",
    "roundtrip_pair_trivial": "kernel characterization and relation round trip for "
                              "(pair groupoid of a line grid, trivial)",
    "roundtrip_so2": "kernel characterization and relation round trip for the rotation "
                     "example; --corrupt-sign injects a sign fault in j_H",
    "bundle_limits": "K0 tests, classical fiber classes, positivity, Cauchy-Schwarz and "
                     "strong nondegeneracy on both lifts",
}


@dataclass
class ExperimentConfig:
    suite: str
    seed: int = 0
    grid: int | None = None  # per-suite default when None
    hbar_decades: float = 2.0
    hbar_samples: int = 16
    instances: int = 50
    conjugations: int = 20
    max_units: int = 8
    max_mode: int = 400
    corrupt_sign: bool = False
    rel_tol: float = 0.05
    hausdorff_tiles: float = 3.0
    membership_rel: float = 1e-2
    k0_rel: float = 1e-3
    commutation_tol: float = 1e-5
    oracle_tol: float = 1e-6
    nondegeneracy_tol: float = 1e-3
    out_dir: str = "out"

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}")
        for name in ("rel_tol", "hausdorff_tiles", "membership_rel", "k0_rel",
                     "commutation_tol", "oracle_tol", "nondegeneracy_tol", "hbar_decades"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.hbar_decades < 2:
            raise ValueError("hbar_decades must be at least 2")
        if self.hbar_samples < 8:
            raise ValueError("hbar_samples must be at least 8")
        if self.grid is not None and self.grid < 8:
            raise ValueError("grid must have at least 8 points")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**doc)

    def hbar_grid(self) -> HbarGrid:
        return HbarGrid.logspace(10.0 ** -self.hbar_decades, 1.0, self.hbar_samples)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SuiteResult:
    checks: dict
    metrics: dict
    files: dict = field(default_factory=dict)  # file name -> text
    summary: str = ""

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failed(self) -> list:
        return [k for k, v in self.checks.items() if not v]


def _csv(header: list, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _decreasing(v: np.ndarray) -> bool:
    return bool(np.all(np.diff(v) < 0))


# ---------------------------------------------------------------- suites

def dirac_convergence(cfg: ExperimentConfig) -> SuiteResult:
    n = cfg.grid or 128
    half = 1.35
    grid = cfg.hbar_grid()
    desc = SmoothGroupoidDescriptor.pair_grid(n, 2 * half / (n - 1))
    dual = algebroid_dual(desc, grid.values[-1])
    f = gaussian(dual, (0.0, 0.0), (0.5, 0.25))
    g = gaussian(dual, (0.3, 0.0), (0.5, 0.25))
    T = strict_quantization_defects(f, g, grid)
    # grid order is decreasing hbar, so "decreasing as hbar shrinks" is np.diff < 0
    idx = np.nonzero(T.hbar <= 10 * T.hbar.min() * (1 + 1e-12))[0]
    sf, sg, sb = T.scales["sup_f"], T.scales["sup_g"], T.scales["sup_bracket"]
    final = int(np.argmin(T.hbar))
    vn_rel = float(T.vn[final] / (sf * sg))
    dirac_rel = float(T.dirac_scaled[final] / sb)
    norm_rel = float(T.norm[final] / sf)
    checks = {
        "vn_monotone": _decreasing(T.vn[idx]),
        "dirac_monotone": _decreasing(T.dirac_scaled[idx]),
        "vn_final": vn_rel < cfg.rel_tol,
        "dirac_final": dirac_rel < cfg.rel_tol,
        "rieffel_endpoint": abs(norm_rel - 1) < cfg.rel_tol,
    }
    metrics = {"vn_final_rel": vn_rel, "dirac_final_rel": dirac_rel,
               "norm_endpoint_rel": norm_rel, "exponents": T.exponents, "scales": T.scales,
               "grid": n}
    return SuiteResult(checks, metrics, {"defects.csv": T.to_csv(), "defects.json": T.to_json()},
                       f"vn {vn_rel:.3g}, dirac {dirac_rel:.3g}, norm endpoint {norm_rel:.3g}")


def category_laws_finite(cfg: ExperimentConfig) -> SuiteResult:
    rng = np.random.default_rng(cfg.seed)
    rows = []
    counts = dict.fromkeys(["modules", "positivity", "identity", "associativity",
                            "functoriality", "kernel_invariance", "multiplicity",
                            "induction", "finite_roundtrip"], 0)
    for it in range(cfg.instances):
        (G, H, K, L), (M, N, P) = random_chain(rng, 3, cfg.max_units)
        E, F, Gm = map(bimodule_from_bibundle, (M, N, P))
        ok = {}
        ok["modules"] = not (check_bimodule(E) or check_bimodule(F) or check_bimodule(Gm))
        ok["positivity"] = min(map(positivity_min_eig, (E, F, Gm))) >= -1e-10
        EB = interior_tensor(E, identity_bimodule(H))
        AE = interior_tensor(identity_bimodule(G), E)
        ok["identity"] = not (unitary_defects(right_identity_witness(E, EB), EB, E)
                              or unitary_defects(left_identity_witness(E, AE), AE, E))
        EF, FG = interior_tensor(E, F), interior_tensor(F, Gm)
        A, B = interior_tensor(EF, Gm), interior_tensor(E, FG)
        ok["associativity"] = not unitary_defects(associativity_witness(EF, A, FG, B), A, B)
        C = bibundle_tensor(M, N)
        EC = bimodule_from_bibundle(C)
        ok["functoriality"] = (not validate_bibundle(C) and not unitary_defects(
            bibundle_tensor_witness(M, N, EF, EC, C), EF, EC))
        k = tensor_product_kernel(E)
        ok["kernel_invariance"] = all(
            tensor_product_kernel(conjugate(E, ex.cayley_orthogonal(rng, E.dim))) == k
            for _ in range(cfg.conjugations))
        EE = direct_sum(E, E)
        ok["multiplicity"] = tensor_product_kernel(EE) == k
        ind_ok = True
        for rep in block_irreps(H):
            a, b = rieffel_induce(E, rep), rieffel_induce(EE, rep)
            ind_ok &= not a.rep.defects() and ex.equal(a.rep.kernel(), b.rep.kernel())
        ok["induction"] = bool(ind_ok)
        fr = finite_roundtrip(M)
        ok["finite_roundtrip"] = fr["equal"] and fr["object_equal"]
        for key, v in ok.items():
            counts[key] += bool(v)
        rows.append([it, len(G.units), len(H.units), len(M.points), E.dim, EF.dim, A.dim, k.dim]
                    + [int(bool(ok[key])) for key in counts])
    checks = {key: c == cfg.instances for key, c in counts.items()}
    header = ["instance", "units_G", "units_H", "points_M", "dim_E", "dim_EF", "dim_EFG",
              "kernel_dim"] + list(counts)
    return SuiteResult(checks, {"instances": cfg.instances, "counts": counts},
                       {"instances.csv": _csv(header, rows)},
                       f"{cfg.instances} instances, " + ", ".join(
                           f"{k} {v}/{cfg.instances}" for k, v in counts.items()))


def _momentum_battery():
    f = [lambda r, pr, l: r, lambda r, pr, l: pr, lambda r, pr, l: l,
         lambda r, pr, l: r ** 2, lambda r, pr, l: r * pr,
         lambda r, pr, l: np.exp(-(r - 1) ** 2 - pr ** 2 - l ** 2),
         lambda r, pr, l: pr ** 2, lambda r, pr, l: np.exp(-r),
         lambda r, pr, l: r * pr * l, lambda r, pr, l: 1.0 + 0 * r]
    g = [lambda l: l, lambda l: l, lambda l: l, lambda l: l ** 2, lambda l: np.sin(l),
         lambda l: np.exp(-l ** 2 / 2), lambda l: l, lambda l: np.cos(l), lambda l: l ** 2,
         lambda l: l]
    return list(zip(f, g))


def momentum_checks(cfg: ExperimentConfig) -> SuiteResult:
    n = cfg.grid or 64
    b = GridBibundle("rotation", (0.5, 2.5), n)
    mp = momentum_maps(b, cfg.corrupt_sign)
    q, p = cotangent_samples_cartesian(n, 2.0, 0.5)
    comm = commutation_check(mp, _momentum_battery(), q, p)
    fd_g, fd_h = momentum_from_actions(mp, q, p)
    cf_g, cf_h = momentum_closed_form_parts(mp, q, p)
    err_h = float(np.max(np.abs(fd_h - cf_h)))
    err_g = float(np.max(np.abs(fd_g - cf_g)))
    angular = q[:, 0] * p[:, 1] - q[:, 1] * p[:, 0]
    err_formula = float(np.max(np.abs(cf_h[:, 0] - angular)))
    lin = 0.0
    for alpha in (-2.0, 0.5, 3.0):
        a_g, a_h = momentum_closed_form_parts(mp, q, alpha * p)
        lin = max(lin, float(np.max(np.abs(a_g - alpha * cf_g))),
                  float(np.max(np.abs(a_h - alpha * cf_h))))
    z_g, z_h = momentum_closed_form_parts(mp, q, 0 * p)
    zero = float(max(np.max(np.abs(z_g)), np.max(np.abs(z_h))))
    polys = [lambda l: l, lambda l: l ** 2, lambda l: 1 + l - 0.5 * l ** 2]
    pm = 0.0
    for f in polys:
        for g in polys:
            F = lambda qq, pp, f=f: f(mp.j_H(qq, pp)[..., 0])
            Gf = lambda qq, pp, g=g: g(mp.j_H(qq, pp)[..., 0])
            pm = max(pm, float(np.max(np.abs(canonical_bracket(F, Gf, q, p)))))
    pt = momentum_maps(GridBibundle("pair_trivial", (-1.0, 1.0), n))
    x = np.linspace(-1, 1, n)[2:-2]
    qq, pp = np.meshgrid(x, np.linspace(-1, 1, 9), indexing="ij")
    qq, pp = qq.reshape(-1, 1), pp.reshape(-1, 1)
    pt_comm = commutation_check(pt, [(lambda a, c: np.exp(-a ** 2 - c ** 2), lambda z: 1 + 0 * z)],
                                qq, pp).max_bracket
    pt_fd, _ = momentum_from_actions(pt, qq, pp)
    pt_err = float(np.max(np.abs(pt_fd[:, 0] - pp[:, 0])))
    rel = lagrangian_relation(mp, q, p)
    ident = compose_relations(rel, diagonal_relation(rel.second, rel.tolerance))
    id_err = hausdorff(ident.points, rel.points).symmetric
    checks = {
        "commutation": comm.max_bracket < cfg.commutation_tol,
        "j_H_oracle": err_h < cfg.oracle_tol and err_formula < cfg.oracle_tol,
        "j_G_oracle": err_g < cfg.oracle_tol,
        "linearity": lin < 1e-10,
        "zero_covector": zero < 1e-12,
        "poisson_map_j_H": pm < cfg.commutation_tol,
        "pair_trivial_commutation": pt_comm < 1e-12,
        "pair_trivial_oracle": pt_err < cfg.oracle_tol,
        "relation_identity_law": id_err <= rel.tolerance,
    }
    metrics = {"max_bracket": comm.max_bracket, "per_pair": comm.per_pair,
               "j_H_fd_error": err_h, "j_H_formula_error": err_formula, "j_G_fd_error": err_g,
               "linearity_error": lin, "poisson_map_error": pm, "pair_trivial_bracket": pt_comm,
               "pair_trivial_fd_error": pt_err, "relation_points": len(rel),
               "relation_identity_hausdorff": id_err, "samples": len(q)}
    files = {"commutation.csv": _csv(["pair", "max_bracket"], enumerate(comm.per_pair)),
             "relation.csv": rel.to_csv(), "relation.json": rel.header()}
    return SuiteResult(checks, metrics, files,
                       f"max bracket {comm.max_bracket:.3g}, j_H oracle error {err_h:.3g}")


def _roundtrip(cfg: ExperimentConfig, example) -> SuiteResult:
    rep = roundtrip_report(example, cfg.corrupt_sign, cfg.hausdorff_tiles,
                           membership_rel=cfg.membership_rel)
    rows = [[*r["f"], *r["g"], int(r["in_kernel"]), int(r["beta0_zero"]), r["limit"],
             r["intercept"], r["threshold"], int(r["agree"])] for r in rep["battery"]]
    nf = len(rep["battery"][0]["f"]) if rows else 0
    ng = len(rep["battery"][0]["g"]) if rows else 0
    header = ([f"f{i}" for i in range(nf)] + [f"g{i}" for i in range(ng)]
              + ["in_kernel", "beta0_zero", "limit", "intercept", "threshold", "agree"])
    defects = [[*r["f"], *r["g"], *r["defects"]] for r in rep["battery"]]
    hb = list(example.se.grid.values)
    files = {"battery.csv": _csv(header, rows),
             "defect_profiles.csv": _csv([f"f{i}" for i in range(nf)] + [f"g{i}" for i in range(ng)]
                                         + [f"d@{h:.6g}" for h in hb], defects)}
    metrics = {k: v for k, v in rep.items() if k not in ("battery", "checks", "failed")}
    return SuiteResult(rep["checks"], metrics, files, summary(rep))


def roundtrip_pair_trivial(cfg: ExperimentConfig) -> SuiteResult:
    return _roundtrip(cfg, pair_trivial_example(cfg.grid or 64, grid=cfg.hbar_grid()))


def roundtrip_so2(cfg: ExperimentConfig) -> SuiteResult:
    return _roundtrip(cfg, rotation_example(cfg.grid or 64, max_mode=cfg.max_mode,
                                            grid=cfg.hbar_grid()))


def bundle_limits(cfg: ExperimentConfig) -> SuiteResult:
    grid = cfg.hbar_grid()
    checks, metrics, files = {}, {}, {}
    pt = pair_trivial_example(cfg.grid or 64, grid=grid)
    desc = pt.se.fibers[0].desc
    dual = algebroid_dual(desc, grid.values[-1])
    f = gaussian(dual, (0.0, 0.0), (0.4, 0.15))
    s = section_from_symbol(f, grid)
    prof = norm_profile(s)
    files["norm_profile.csv"] = prof.to_csv()
    z = s.scale_by(lambda h: h * h)
    v_z = vanishing_at_zero(z, rel=cfg.k0_rel)
    v_s = vanishing_at_zero(s, rel=cfg.k0_rel)
    checks["k0_hbar_squared"] = bool(v_z)
    checks["k0_rejects_generated"] = not v_s
    cf = classical_fiber([s, s + z])
    checks["classical_classes"] = cf.classes() == [[0, 1]]
    metrics["norm_endpoint"] = float(prof.norms[np.argmin(prof.hbar)])
    metrics["k0_limits"] = {"hbar_squared": v_z.limit, "generated": v_s.limit}
    rows = []
    for name, ex_ in (("pair_trivial", pt),
                      ("rotation", rotation_example(max_mode=cfg.max_mode, grid=grid))):
        se = ex_.se
        gens = list(se.generators.values())
        pos = min(se.positivity(a) for a in gens)
        cs = min(float(np.min(se.cauchy_schwarz(a, b))) for a in gens for b in gens)
        nd = strong_nondegeneracy_check(se, standard_battery(se, ex_.nondeg_symbols),
                                        tol=cfg.nondegeneracy_tol)
        checks[f"{name}_positivity"] = pos >= -1e-10
        checks[f"{name}_cauchy_schwarz"] = cs >= -1e-10
        checks[f"{name}_nondegeneracy"] = nd.passed
        metrics[name] = {"positivity_min": pos, "cauchy_schwarz_min_slack": cs,
                         "nondegeneracy_worst": nd.worst,
                         "lift_warnings": [w.to_dict() for w in se.warnings]}
        rows += [[name, c.name, c.residual, c.k, int(c.a_in_k0)] for c in nd.cases]
    files["nondegeneracy.csv"] = _csv(["example", "case", "residual", "k", "a_in_k0"], rows)
    return SuiteResult(checks, metrics, files,
                       f"nondegeneracy worst {max(r[2] for r in rows):.3g}")


RUNNERS: dict[str, Callable[[ExperimentConfig], SuiteResult]] = {
    "dirac_convergence": dirac_convergence,
    "category_laws_finite": category_laws_finite,
    "momentum_checks": momentum_checks,
    "roundtrip_pair_trivial": roundtrip_pair_trivial,
    "roundtrip_so2": roundtrip_so2,
    "bundle_limits": bundle_limits,
}


def run_suite(cfg: ExperimentConfig) -> tuple[SuiteResult, float]:
    t = time.perf_counter()
    res = RUNNERS[cfg.suite](cfg)
    return res, time.perf_counter() - t
