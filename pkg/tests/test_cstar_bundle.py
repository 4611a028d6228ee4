import numpy as np
import pytest

from groupoid_quant.convolution import op_norm
from groupoid_quant.cstar_bundle import (NoSymbolicLimit, Product, Section, classical_fiber,
                                         extrapolate_to_zero, norm_profile, section_from_symbol,
                                         sup_norm, vanishing_at_zero, zero_section)
from groupoid_quant.groupoid_core import SmoothGroupoidDescriptor, algebroid_dual
from groupoid_quant.quantization import CutoffSpec, HbarGrid, gaussian

GRID = HbarGrid.logspace(1e-2, 1.0, 16)


@pytest.fixture(scope="module")
def dual():
    desc = SmoothGroupoidDescriptor.pair_grid(64, 2.0 / 63)
    return algebroid_dual(desc, hbar=0.01)


@pytest.fixture(scope="module")
def sections(dual):
    f = gaussian(dual, (0.0, 0.0), (0.4, 0.15))
    g = gaussian(dual, (0.2, 0.05), (0.35, 0.15))
    return f, g, section_from_symbol(f, GRID), section_from_symbol(g, GRID)


def test_extrapolation_recovers_linear_intercept():
    h = GRID.array
    fit = extrapolate_to_zero(h, 0.7 + 3.0 * h)
    assert fit.limit == pytest.approx(0.7, abs=1e-12)
    assert extrapolate_to_zero(h, -0.2 + h).limit == 0.0
    assert extrapolate_to_zero(h, -0.2 + h, clamp=False).limit == pytest.approx(-0.2)
    with pytest.raises(ValueError):
        extrapolate_to_zero(h[:2], h[:2])


def test_zero_section(dual):
    z = zero_section(GRID, (64, 64))
    assert sup_norm(z) == 0.0
    assert vanishing_at_zero(z).vanishes
    zero_sym = section_from_symbol(0.0 * gaussian(dual, (0, 0), (0.4, 0.15)), GRID)
    assert sup_norm(zero_sym) == 0.0


def test_generated_profile_tends_to_sup(sections):
    f, _, sf, _ = sections
    prof = norm_profile(sf)
    assert sup_norm(sf) >= prof.norms.max() - 1e-15
    rep = vanishing_at_zero(sf)
    assert not rep.vanishes
    assert rep.limit == pytest.approx(f.sup_norm(), rel=0.05)
    assert prof.to_csv().startswith("hbar,norm\n")


def test_product_provenance(sections):
    _, _, sf, sg = sections
    p = sf @ sg
    assert isinstance(p.provenance, Product)
    assert p.provenance.factors == (sf, sg)


def test_scaled_section_sup(sections):
    _, _, sf, _ = sections
    scaled = sf.scale_by(lambda h: h)
    oracle = max(h * op_norm(a) for h, a in zip(GRID, sf.fibers))
    assert sup_norm(scaled) == pytest.approx(oracle, rel=1e-12)


def test_cutoff_difference_vanishes(sections):
    f, _, sf, _ = sections
    other = section_from_symbol(f, GRID, cutoff=CutoffSpec(0.5))
    diff = sf - other
    rep = vanishing_at_zero(diff, scale=sup_norm(sf))
    assert rep.vanishes, rep.to_json()


@pytest.mark.xfail(strict=True, reason=(
    "the linear fit over the smallest decade keeps an O(hbar^2) bias of order 1e-3 "
    "relative to the sup, above the 1e-3 threshold; see README limitations"))
def test_explicit_hbar_factor_vanishes(sections):
    _, _, sf, _ = sections
    assert vanishing_at_zero(sf.scale_by(lambda h: h)).vanishes


def test_explicit_hbar_factor_on_constant_profile():
    unit = Section(GRID, tuple(np.eye(8) for _ in GRID))
    rep = vanishing_at_zero(unit.scale_by(lambda h: h))
    assert rep.vanishes and rep.limit == 0.0
    assert not vanishing_at_zero(unit).vanishes


def test_too_few_samples():
    with pytest.raises(ValueError):
        Section(GRID, (np.eye(2),))


def test_classical_fiber_symbols(dual, sections):
    f, g, sf, sg = sections
    cf = classical_fiber([sf, sf @ sg, sf - sf])
    z = dual.mesh()
    assert np.array_equal(cf.symbol(sf)(*z), f(*z))
    assert np.allclose(cf.symbols[1](*z), f(*z) * g(*z))
    assert np.max(np.abs(cf.symbols[2](*z))) == 0.0
    assert vanishing_at_zero(sf - sf).vanishes


def test_classical_fiber_raw_is_rejected():
    with pytest.raises(NoSymbolicLimit, match="no symbolic limit available"):
        classical_fiber([zero_section(GRID, (2, 2))])


def test_classical_classes(sections):
    f, _, sf, sg = sections
    again = section_from_symbol(f, GRID, cutoff=CutoffSpec(0.5))
    cf = classical_fiber([sf, sg, again])
    assert cf.classes() == [[0, 2], [1]]


def test_von_neumann_fiber_difference():
    desc = SmoothGroupoidDescriptor.pair_grid(128, 2.7 / 127)
    d = algebroid_dual(desc, hbar=0.01)
    f = gaussian(d, (0.0, 0.0), (0.5, 0.25))
    g = gaussian(d, (0.3, 0.0), (0.5, 0.25))
    grid = HbarGrid.logspace(1e-2, 1.0, 8)
    diff = (section_from_symbol(f, grid) @ section_from_symbol(g, grid)) - section_from_symbol(f * g, grid)
    n = diff.norms()
    assert n[-1] < 0.05 * (f * g).sup_norm()
    assert n[-1] < n[0]
