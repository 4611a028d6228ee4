import numpy as np
import pytest

from groupoid_quant.dual_pair import GridBibundle, momentum_maps
from groupoid_quant.groupoid_core import pair_groupoid
from groupoid_quant.hilbert_bimodule.finite import identity_bibundle, random_chain
from groupoid_quant.hilbert_bimodule.grid import circle_dual, point_dual
from groupoid_quant.quantization import HbarGrid, Symbol, bump
from groupoid_quant.roundtrip import (Tile, beta0, finite_roundtrip, kernel_membership_quantum,
                                      pair_trivial_example, reconstruct_relation,
                                      rotation_example, roundtrip_report, separation_orders,
                                      summary)

GRID = HbarGrid.logspace(1e-2, 1.0, 16)


@pytest.fixture(scope="module")
def pair_ex():
    return pair_trivial_example(64, grid=GRID)


@pytest.fixture(scope="module")
def rot_ex():
    return rotation_example(32, max_mode=120, grid=GRID)


def test_beta0_constants_and_zero(pair_ex):
    mp = momentum_maps(pair_ex.bibundle)
    q, p = pair_ex.support_samples
    d = pair_ex.f_tiles[0].symbol.dual
    one_f, one_g = Symbol.constant(d, 1.0), Symbol.constant(point_dual(), 1.0)
    assert np.all(beta0(mp, one_f, one_g, q, p).values == 1.0)
    far = bump(d, (0.0, 50.0), (0.5, 0.5))
    b = beta0(mp, far, one_g, q, p)
    assert b.vanishes() and not np.any(b.values)


def test_beta0_angular_bump_outside_range(rot_ex):
    mp = momentum_maps(rot_ex.bibundle)
    q, p = rot_ex.box_samples
    ell = (q[:, 0] * p[:, 1] - q[:, 1] * p[:, 0])
    cd = circle_dual(np.linspace(-10, 10, 401))
    g = bump(cd, (8.0,), (1.0,))
    f = rot_ex.f_tiles[0].symbol
    assert ell.max() < 7.0
    assert beta0(mp, Symbol.constant(f.dual, 1.0), g, q, p).vanishes()


def test_beta0_warns_outside_symbol_grid(rot_ex):
    mp = momentum_maps(rot_ex.bibundle)
    q, p = rot_ex.support_samples
    g = Symbol(circle_dual(np.linspace(-0.5, 0.5, 11)), lambda l: 0 * l + 1.0)
    b = beta0(mp, rot_ex.f_tiles[0].symbol, g, q, p)
    assert any("j_H image" in w for w in b.warnings)


def test_membership_zero_symbol(pair_ex):
    d = pair_ex.f_tiles[0].symbol.dual
    m = kernel_membership_quantum(Symbol.constant(d, 0.0), Symbol.constant(point_dual(), 1.0),
                                  pair_ex.se)
    assert m.in_kernel and not np.any(m.defects)


def test_membership_overlapping_supports(pair_ex):
    tile = next(t for t in pair_ex.f_tiles if t.center == (0.0, 0.0))
    m = kernel_membership_quantum(tile.symbol, Symbol.constant(point_dual(), 1.0), pair_ex.se)
    assert not m.in_kernel
    assert m.fit.limit > 0.5 * m.scale
    assert m.defects.min() > 0


def test_membership_disjoint_angular_supports(rot_ex):
    f = next(t for t in rot_ex.f_tiles if t.center == (1.5, 0.0, 1.0)).symbol
    g_far = next(t for t in rot_ex.g_tiles if t.center == (-1.0,)).symbol
    g_near = next(t for t in rot_ex.g_tiles if t.center == (1.0,)).symbol
    mp = momentum_maps(rot_ex.bibundle)
    q, p = rot_ex.support_samples
    assert beta0(mp, f, g_far, q, p).vanishes(1.0)
    far = kernel_membership_quantum(f, g_far, rot_ex.se)
    near = kernel_membership_quantum(f, g_near, rot_ex.se)
    assert far.in_kernel and not near.in_kernel
    assert separation_orders([far, near]) >= 2


def test_reconstruct_flags_coarse_battery(pair_ex):
    tiles = [t for t in pair_ex.f_tiles if t.center[1] == 0.0 and t.center[0] in (0.0, 0.5)]
    g = [Tile(Symbol.constant(point_dual(), 1.0), (0.0,), (0.0,))]
    kz = reconstruct_relation(pair_ex.se, tiles, g)
    assert kz.warnings == ["battery too coarse on G axis 0"]
    assert len(kz.relation) == 2


def test_reconstruct_empty_module_is_degenerate(pair_ex):
    g = [Tile(Symbol.constant(point_dual(), 0.0), (0.0,), (0.0,))]
    kz = reconstruct_relation(pair_ex.se, pair_ex.f_tiles[:3], g)
    assert kz.relation.degenerate and all(kz.verdicts)


def test_pair_trivial_roundtrip_passes(pair_ex):
    rep = roundtrip_report(pair_ex)
    assert rep["verdict"] == "PASS", summary(rep)
    assert rep["hausdorff_tiles"]["symmetric"] < 3
    assert rep["consistency"]["agree"] == rep["consistency"]["total"] >= 40
    # with g = 1 exactly the tiles centred over the sampled position box survive
    inside = [t for t in pair_ex.f_tiles if abs(t.center[0]) <= 1.0]
    assert rep["tiles"]["surviving"] == len(inside) == 15


def test_finite_roundtrip_exact():
    assert finite_roundtrip(identity_bibundle(pair_groupoid([1, 2, 3])))["equal"]
    rng = np.random.default_rng(3)
    for _ in range(10):
        (_, _), (m,) = random_chain(rng, 1)
        out = finite_roundtrip(m)
        assert out["equal"] and out["object_equal"], out
