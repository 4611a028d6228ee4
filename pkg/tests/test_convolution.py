from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groupoid_quant.convolution import (BlockOperator, ConvolutionElement, KernelOperator,
                                        convolve, left_regular, matrix_units_inverse,
                                        matrix_units_iso, op_norm, regular_matrix)
from groupoid_quant.groupoid_core import SmoothGroupoidDescriptor, algebroid_dual, cyclic_group, pair_groupoid
from groupoid_quant.quantization import CutoffSpec, gaussian, quantize

G4 = pair_groupoid([1, 2, 3, 4])


def _random_element(rng, g):
    return ConvolutionElement(g, {x: Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))
                                  for x in g.arrows})


def _matmul(a, b):
    n = a.shape[0]
    return np.array([[sum(a[i, k] * b[k, j] for k in range(n)) for j in range(n)]
                     for i in range(n)], dtype=object)


def test_delta_maps_to_matrix_unit():
    m = matrix_units_iso(ConvolutionElement.delta(pair_groupoid([1, 2]), (1, 2)))
    assert m.tolist() == [[0, 1], [0, 0]]


def test_convolution_matches_matrix_product_exactly():
    rng = np.random.default_rng(1)
    for _ in range(100):
        f, g = _random_element(rng, G4), _random_element(rng, G4)
        lhs = matrix_units_iso(convolve(f, g))
        rhs = _matmul(matrix_units_iso(f), matrix_units_iso(g))
        assert (lhs == rhs).all()


def test_involution_is_conjugate_transpose():
    rng = np.random.default_rng(2)
    f = ConvolutionElement(G4, {x: complex(*rng.normal(size=2)) for x in G4.arrows})
    assert np.allclose(matrix_units_iso(f.star()), matrix_units_iso(f).conj().T)


def test_iso_inverse_roundtrip():
    rng = np.random.default_rng(3)
    f = _random_element(rng, G4)
    assert matrix_units_inverse(G4, matrix_units_iso(f)) == f


def test_errors():
    with pytest.raises(ValueError):
        convolve(ConvolutionElement.unit(G4), ConvolutionElement.unit(pair_groupoid([1, 2])))
    with pytest.raises(ValueError):
        matrix_units_iso(ConvolutionElement.unit(cyclic_group(3)))
    with pytest.raises(ValueError, match="non-finite"):
        op_norm(np.array([[np.nan, 0], [0, 1]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_convolution_associative_on_cyclic_group(seed):
    rng = np.random.default_rng(seed)
    g = cyclic_group(4)
    a, b, c = (_random_element(rng, g) for _ in range(3))
    assert convolve(convolve(a, b), c) == convolve(a, convolve(b, c))


def test_regular_representation_is_multiplicative():
    rng = np.random.default_rng(4)
    f, g = _random_element(rng, G4), _random_element(rng, G4)
    assert (regular_matrix(convolve(f, g)) == _matmul(regular_matrix(f), regular_matrix(g))).all()


def test_left_regular_zero_and_units():
    assert op_norm(left_regular(ConvolutionElement(G4, {}))) == 0.0
    units = ConvolutionElement(G4, {u: i + 1 for i, u in enumerate(G4.unit_list)})
    m = matrix_units_iso(units).astype(float)
    assert np.count_nonzero(m - np.diag(np.diag(m))) == 0


def test_gaussian_kernel_trace_oracle():
    desc = SmoothGroupoidDescriptor.pair_grid(48, 2.0 / 47)
    dual = algebroid_dual(desc, hbar=0.05)
    f = gaussian(dual, (0.0, 0.0), (0.4, 0.3))
    hb = 0.05
    K = quantize(f, hb).left_regular()
    M = K.matrix
    assert np.allclose(M, M.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(M).min() > -1e-10
    # trace = sum_x K(x, x) h with K(x, x) = (2 pi hbar)^-1 int f(x, p) dp
    x = desc.grid.points
    diag = np.array([0.3 * np.sqrt(2 * np.pi) * np.exp(-xi ** 2 / (2 * 0.4 ** 2)) for xi in x])
    oracle = np.sum(diag) * desc.grid.spacing / (2 * np.pi * hb)
    assert np.trace(M).real == pytest.approx(oracle, rel=1e-6)


def test_truncation_overflow():
    desc = SmoothGroupoidDescriptor.pair_grid(32, 0.1)
    dual = algebroid_dual(desc, hbar=0.5)
    wide = gaussian(dual, (0.0, 0.0), (0.5, 50.0))
    with pytest.raises(ValueError, match="truncation overflow"):
        quantize(wide, 0.5).left_regular()


def test_op_norm_examples():
    assert op_norm(np.eye(5)) == pytest.approx(1.0)
    v = np.array([2.0, 0, 0, 0])
    assert op_norm(np.outer(v, v)) == pytest.approx(4.0)
    rng = np.random.default_rng(5)
    a = rng.normal(size=(50, 50))
    w = np.linalg.eigvalsh(a.T @ a)
    assert op_norm(a) == pytest.approx(np.sqrt(w.max()), abs=1e-8)


def test_op_norm_large_uses_iterative_path():
    rng = np.random.default_rng(6)
    a = rng.normal(size=(2100, 30)) @ rng.normal(size=(30, 2100))
    dense = np.linalg.norm(a, 2)
    assert op_norm(a) == pytest.approx(dense, rel=1e-8)


def test_block_operator_norm():
    b = BlockOperator(np.stack([np.eye(3), 3 * np.eye(3)]))
    assert op_norm(b) == pytest.approx(3.0)
    assert op_norm(b.adjoint() @ b) == pytest.approx(9.0)


def test_kernel_operator_save_load(tmp_path):
    rng = np.random.default_rng(7)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    k = KernelOperator(m, 0.5, {"hbar": 0.1})
    k.save(tmp_path / "k")
    back = KernelOperator.load(tmp_path / "k")
    assert np.array_equal(back.matrix, m)
    assert back.weight == 0.5 and back.meta["hbar"] == 0.1
