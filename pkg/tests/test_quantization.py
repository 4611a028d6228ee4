import numpy as np
import pytest
from scipy.integrate import quad

from groupoid_quant.convolution import op_norm
from groupoid_quant.groupoid_core import SmoothGroupoidDescriptor, algebroid_dual
from groupoid_quant.quantization import (
    CircleQuantizer, CutoffSpec, HbarGrid, Symbol, fiberwise_ft, gaussian,
    interior_mask, inverse_fiberwise_ft, poisson_bracket, poisson_bracket_grid, quantize,
    quantized_operator, strict_quantization_defects, weyl_exp)


@pytest.fixture(scope="module")
def pair64():
    desc = SmoothGroupoidDescriptor.pair_grid(64, 2.0 / 63)
    return desc, algebroid_dual(desc, hbar=0.01)


def test_canonical_bracket_of_q_and_p(pair64):
    _, dual = pair64
    q, p = Symbol.coordinate(dual, "q"), Symbol.coordinate(dual, "p")
    br = poisson_bracket(q, p).values
    assert np.max(np.abs(br - 1.0)) < 1e-8
    grid = poisson_bracket_grid(q, p)
    assert np.max(np.abs(grid[interior_mask(grid.shape)] - 1.0)) < 1e-8


def test_base_only_bracket_vanishes(pair64):
    _, dual = pair64
    f = Symbol(dual, lambda q, p: np.sin(q) + 0 * p)
    g = Symbol(dual, lambda q, p: np.exp(-q ** 2) + 0 * p)
    assert np.max(np.abs(poisson_bracket(f, g).values)) < 1e-12


def test_bracket_antisymmetry_and_jacobi(pair64):
    _, dual = pair64
    f = gaussian(dual, (0.1, 0.0), (0.4, 0.2))
    g = gaussian(dual, (-0.2, 0.1), (0.3, 0.25))
    k = gaussian(dual, (0.0, -0.1), (0.5, 0.15))
    assert np.array_equal(poisson_bracket(f, g).values, -poisson_bracket(g, f).values)
    jac = (poisson_bracket(f, poisson_bracket(g, k)) + poisson_bracket(g, poisson_bracket(k, f))
           + poisson_bracket(k, poisson_bracket(f, g)))
    assert np.max(np.abs(jac.values)) < 1e-6


def test_mismatched_duals_rejected(pair64):
    _, dual = pair64
    other = algebroid_dual(SmoothGroupoidDescriptor.action_r_on_r(16, 0.1))
    with pytest.raises(ValueError):
        poisson_bracket(Symbol.constant(dual), Symbol.constant(other))


def test_fiberwise_ft_gaussian_against_quadrature():
    desc = SmoothGroupoidDescriptor.pair_grid(64, 0.25)
    dual = algebroid_dual(desc)
    f = Symbol(dual, lambda q, p: np.exp(-p ** 2 / 2) + 0 * q)
    fh = fiberwise_ft(f)
    row = fh.values[10]
    X = fh.x_axis
    oracle = np.array([quad(lambda p: np.exp(-p ** 2 / 2) * np.cos(p * x), -np.inf, np.inf)[0]
                       for x in X[::8]])
    assert np.allclose(row[::8], oracle, atol=1e-8)
    assert row[X == 0][0].real == pytest.approx(np.sqrt(2 * np.pi), rel=1e-10)
    assert np.allclose(inverse_fiberwise_ft(fh), f.values, atol=1e-12)
    zero = fiberwise_ft(Symbol.constant(dual, 0.0))
    assert not np.any(zero.values)


def test_weyl_exp_examples():
    desc = SmoothGroupoidDescriptor.pair_grid(41, 0.1)
    tgt, src = weyl_exp(desc, 0.0, 1.0)
    assert (float(tgt), float(src)) == pytest.approx((0.5, -0.5))
    tgt, src = weyl_exp(desc, 0.3, 0.0)
    assert tgt == src == pytest.approx(0.3)
    with pytest.raises(ValueError, match="exp overflow"):
        weyl_exp(desc, 1.5, 2.0)


def test_weyl_kernel_matches_closed_form(pair64):
    desc, dual = pair64
    a, b, hb = 0.4, 0.2, 0.05
    f = gaussian(dual, (0.0, 0.0), (a, b))
    K = quantize(f, hb).kernel
    x = desc.grid.points
    X, Xp = np.meshgrid(x, x, indexing="ij")
    mid, d = (X + Xp) / 2, X - Xp
    oracle = (b * np.sqrt(2 * np.pi) / (2 * np.pi * hb)) * np.exp(-mid ** 2 / (2 * a ** 2)) \
        * np.exp(-b ** 2 * d ** 2 / (2 * hb ** 2))
    assert np.max(np.abs(K - oracle)) < 1e-9 * np.max(np.abs(oracle))


def test_quantize_zero_and_bad_hbar(pair64):
    _, dual = pair64
    zero = Symbol.constant(dual, 0.0)
    assert op_norm(quantized_operator(zero, 0.1)) == 0.0
    with pytest.raises(ValueError):
        quantize(zero, 0.0)
    with pytest.raises(ValueError):
        quantize(zero, -0.5)


def test_class_violation_is_a_warning(pair64):
    _, dual = pair64
    f = gaussian(dual, (0.0, 0.0), (0.4, 0.2))
    pw = Symbol(dual, f.func, "PaleyWiener", support_radius=0.01)
    el = quantize(pw, 0.1)
    assert el.warnings and "PaleyWiener" in el.warnings[0]
    assert not quantize(f, 0.1).warnings


def test_cutoff_spec():
    c = CutoffSpec(2.0)
    assert c(np.array([0.0, 1.0]))[1] == 1.0
    assert c(np.array([2.0, 3.0])).tolist() == [0.0, 0.0]
    v = c(np.linspace(1, 2, 50))
    assert np.all(np.diff(v) <= 0)
    with pytest.raises(ValueError):
        CutoffSpec(0.0)


def test_hbar_grid_validation():
    HbarGrid.logspace()
    with pytest.raises(ValueError):
        HbarGrid(tuple(np.geomspace(1, 0.1, 16)))
    with pytest.raises(ValueError):
        HbarGrid(tuple(np.geomspace(0.01, 1, 16)))
    with pytest.raises(ValueError):
        HbarGrid((1.0, 0.5, 0.01))


def test_base_only_symbols_have_no_defects(pair64):
    _, dual = pair64
    f = Symbol(dual, lambda q, p: np.exp(-q ** 2) + 0 * p)
    g = Symbol(dual, lambda q, p: np.cos(2 * q) + 0 * p)
    t = strict_quantization_defects(f, g, HbarGrid.logspace(1e-2, 1, 8))
    assert np.max(t.vn) < 1e-12
    assert np.max(t.dirac_scaled) < 1e-12


def test_self_defect_and_rieffel_endpoint():
    desc = SmoothGroupoidDescriptor.pair_grid(128, 2.7 / 127)
    dual = algebroid_dual(desc, hbar=0.01)
    f = gaussian(dual, (0.0, 0.0), (0.5, 0.25))
    t = strict_quantization_defects(f, f, HbarGrid.logspace(1e-2, 1, 16))
    assert t.vn[-1] < 1e-2 * f.sup_norm() ** 2
    assert abs(t.norm[-1] - f.sup_norm()) < 0.05 * f.sup_norm()
    assert "hbar,vn,dirac_scaled,dirac_raw,norm" in t.to_csv()


def test_rieffel_profile_refines_continuously(pair64):
    _, dual = pair64
    f = gaussian(dual, (0.0, 0.0), (0.4, 0.15))

    def max_jump(num):
        n = np.array([op_norm(quantized_operator(f, h)) for h in np.geomspace(1, 1e-2, num)])
        return np.max(np.abs(np.diff(n)))

    coarse, fine = max_jump(9), max_jump(17)
    assert fine < 0.6 * coarse


def test_circle_quantizer_constant_and_linear():
    cq = CircleQuantizer()
    modes = np.arange(-5, 6)
    one = cq.multipliers(lambda l: np.ones_like(l), 0.1, modes)
    assert np.allclose(one, 1.0, atol=1e-6)
    lin = cq.multipliers(lambda l: l, 0.1, modes)
    assert np.allclose(lin, 0.1 * modes, atol=1e-6)
