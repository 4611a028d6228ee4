import numpy as np
import pytest

from groupoid_quant.groupoid_core import SmoothGroupoidDescriptor, algebroid_dual
from groupoid_quant.hilbert_bimodule.grid import (
    DUAL_HBAR, NondegeneracyNotEstablished, PairTrivialFiber, RotationFiber, gauge_dual,
    hilbert_classical_limit, pair_trivial_lift, rotation_lift, standard_battery,
    strong_nondegeneracy_check, tensor_symbol, _fiber_at)
from groupoid_quant.quantization import HbarGrid, Symbol, gaussian, taper

GRID = HbarGrid.logspace(1e-2, 1.0, 16)


@pytest.fixture(scope="module")
def pair_se():
    return pair_trivial_lift(64, grid=GRID)


@pytest.fixture(scope="module")
def pair_symbol(pair_se):
    return gaussian(algebroid_dual(pair_se.fibers[0].desc, DUAL_HBAR), (0.0, 0.0), (0.4, 0.15))


def _x(se):
    return se.fibers[0].positions()


def test_zero_element_has_zero_profile(pair_se):
    n = _x(pair_se).size
    prof = pair_se.norm_profile(lambda h: np.zeros(n, complex))
    assert not np.any(prof.norms)


def test_cauchy_schwarz_and_positivity(pair_se):
    x = _x(pair_se)
    phi = lambda h: np.exp(-x ** 2 / 0.2) + 0j
    psi = lambda h: np.exp(-(x - 0.2) ** 2 / (0.1 + h)) * np.exp(3j * x)
    slack = pair_se.cauchy_schwarz(phi, psi)
    assert slack.shape == (len(GRID),)
    assert slack.min() >= -1e-12
    assert pair_se.positivity(psi) >= -1e-10


def test_constant_family_has_flat_modulus(pair_se):
    x = _x(pair_se)
    prof = pair_se.norm_profile(lambda h: np.cos(x) + 0j)
    assert max(w for _, w in prof.modulus()) < 1e-12


def test_inner_product_is_weighted_sum(pair_se):
    fib = pair_se.fibers[0]
    x = _x(pair_se)
    a, b = np.exp(1j * x), x + 0j
    assert fib.inner(a, b)[0] == pytest.approx(fib.h * np.sum(np.conj(a) * b))


def test_lift_flags_discontinuous_generator():
    x = np.linspace(-1, 1, 32)
    se = pair_trivial_lift(32, grid=GRID, generators={
        "step": lambda h: (1.0 if h > 0.1 else 0.01) * np.exp(-x ** 2) + 0j})
    assert [w.kind for w in se.warnings] == ["norm"]
    assert se.warnings[0].generator == "step"
    smooth = pair_trivial_lift(32, grid=GRID, generators={"g": lambda h: np.exp(-x ** 2) + 0j})
    assert smooth.warnings == []


def test_lift_rejects_changing_middle_space():
    desc = SmoothGroupoidDescriptor.pair_grid(16, 0.1)
    other = SmoothGroupoidDescriptor.pair_grid(20, 0.1)
    from groupoid_quant.hilbert_bimodule.grid import lift
    with pytest.raises(ValueError):
        lift(lambda h: PairTrivialFiber(desc if h > 0.1 else other, h), GRID)


def test_nondegeneracy_trivial_cases(pair_se):
    x = _x(pair_se)
    phi = lambda h: np.exp(-x ** 2 / 0.3 + 2j * x)
    battery = [("hbar_unit", lambda h: h * np.eye(x.size), phi),
               ("zero", lambda h: 0.0 * np.eye(x.size), phi)]
    rep = strong_nondegeneracy_check(pair_se, battery)
    unit, zero = rep.cases
    assert unit.residual < 1e-6 and unit.a_in_k0
    assert zero.residual == 0.0
    assert rep.passed


def test_nondegeneracy_standard_battery(pair_se, pair_symbol):
    rep = strong_nondegeneracy_check(pair_se, standard_battery(pair_se, [pair_symbol]))
    assert rep.passed
    assert all(c.residual < 1e-3 for c in rep.cases if c.a_in_k0)
    assert {c.name.split("/")[0] for c in rep.cases} == {"hbar_unit", "zero", "hbar_sym0"}


def test_classical_limit_requires_nondegeneracy():
    se = pair_trivial_lift(16, grid=GRID)
    with pytest.raises(NondegeneracyNotEstablished):
        hilbert_classical_limit(se)


def test_classical_limit_classes_and_action(pair_se, pair_symbol):
    strong_nondegeneracy_check(pair_se, standard_battery(pair_se, [pair_symbol]))
    cl = hilbert_classical_limit(pair_se)
    x = _x(pair_se)
    phi = lambda h: np.exp(-x ** 2 / 0.2) + 0j
    assert cl.is_zero(lambda h: h * phi(h))
    assert not cl.is_zero(phi)
    assert cl.same_class(phi, lambda h: phi(h) + h * np.cos(x))
    # inner-product limit of an hbar-independent family is its value
    assert cl.inner(phi, phi)[0] == pytest.approx(pair_se.fibers[0].inner(phi(1), phi(1))[0])


def test_coherent_state_action_value():
    se = pair_trivial_lift(128, grid=GRID)
    f = gaussian(algebroid_dual(se.fibers[0].desc, DUAL_HBAR), (0.1, 0.0), (0.5, 0.3))
    strong_nondegeneracy_check(se, standard_battery(se, [f]))
    cl = hilbert_classical_limit(se)
    for q0, p0 in [(0.0, 0.0), (0.2, -0.2), (-0.3, 0.3)]:
        v = cl.action_value(f, lambda h: _fiber_at(se, h).coherent(q0, p0))
        # O(hbar^2) curvature of the Husimi smoothing leaves a bias of order 1e-2
        assert abs(v - f(np.array(q0), np.array(p0))) < 0.03 * f.sup_norm()
        assert abs(v.imag) < 1e-12


@pytest.fixture(scope="module")
def rot_se():
    return rotation_lift(num=32, max_mode=120, grid=GRID)


def test_rotation_requires_tensor_symbols(rot_se):
    fib = rot_se.fibers[0]
    gd = gauge_dual(fib.radial, np.linspace(-3, 3, 61))
    plain = Symbol(gd, lambda r, pr, l: r * 0 + 1.0)
    with pytest.raises(ValueError, match="tensor symbols"):
        fib.left_operator(plain)


def test_rotation_nondegeneracy_and_inner(rot_se):
    fib = rot_se.fibers[0]
    gd = gauge_dual(fib.radial, np.linspace(-3, 3, 61))
    f = tensor_symbol(gd, lambda r, pr: taper((r - 1.5) / 0.5) * taper(pr / 0.4),
                      lambda l: taper(l / 0.5))
    rep = strong_nondegeneracy_check(rot_se, standard_battery(rot_se, [f]))
    assert rep.passed, rep.to_dict()
    r = fib.radial.grid.points
    phi = np.exp(-(r - 1.5) ** 2)[None, :] * np.ones((fib.right_size, 1)) + 0j
    ip = fib.inner(phi, phi)
    assert ip.shape == (fib.right_size,)
    assert np.allclose(ip, fib.h * np.sum(np.exp(-2 * (r - 1.5) ** 2)))


def test_pair_trivial_fiber_rejects_other_families():
    with pytest.raises(ValueError):
        PairTrivialFiber(SmoothGroupoidDescriptor.action_r_on_r(8, 0.1), 0.1)
