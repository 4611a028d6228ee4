import numpy as np
import pytest
from scipy.spatial.distance import directed_hausdorff

from groupoid_quant.dual_pair import (
    GridBibundle, Relation, canonical_bracket, commutation_check, compose_relations,
    cotangent_samples_cartesian, diagonal_relation, hausdorff, lagrangian_relation,
    momentum_closed_form_parts, momentum_from_actions, momentum_maps)


@pytest.fixture(scope="module")
def rotation():
    return momentum_maps(GridBibundle("rotation", (0.5, 2.5), 64))


@pytest.fixture(scope="module")
def samples():
    return cotangent_samples_cartesian(64)


def test_unsupported_kind():
    with pytest.raises(ValueError, match="unsupported family combination"):
        GridBibundle("pair_rotation")


def test_zero_covector_maps_to_zero(rotation, samples):
    q, _ = samples
    jg = rotation.j_G(q, np.zeros_like(q))
    assert not np.any(jg[:, 1:]) and not np.any(rotation.j_H(q, np.zeros_like(q)))
    pt = momentum_maps(GridBibundle("pair_trivial"))
    x = np.linspace(-1, 1, 5)[:, None]
    assert not np.any(pt.j_G(x, 0 * x)[:, 1])


def test_angular_momentum_against_action_oracle(rotation, samples):
    q, p = samples
    fd_g, fd_h = momentum_from_actions(rotation, q, p)
    cf_g, cf_h = momentum_closed_form_parts(rotation, q, p)
    assert np.max(np.abs(fd_h - cf_h)) < 1e-6
    assert np.max(np.abs(fd_g - cf_g)) < 1e-6
    assert np.allclose(cf_h[:, 0], q[:, 0] * p[:, 1] - q[:, 1] * p[:, 0], atol=0)


def test_pair_pair_oracle():
    mp = momentum_maps(GridBibundle("pair_pair"))
    rng = np.random.default_rng(0)
    q, p = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
    fd_g, fd_h = momentum_from_actions(mp, q, p)
    cf_g, cf_h = momentum_closed_form_parts(mp, q, p)
    assert np.allclose(fd_g, cf_g, atol=1e-8) and np.allclose(fd_h, cf_h, atol=1e-8)


def test_sign_fault_breaks_the_oracle(samples):
    bad = momentum_maps(GridBibundle("rotation", (0.5, 2.5), 64), corrupt_sign=True)
    q, p = samples
    fd_h = momentum_from_actions(bad, q, p)[1]
    cf_h = momentum_closed_form_parts(bad, q, p)[1]
    assert np.max(np.abs(fd_h - cf_h)) > 0.1


def test_canonical_bracket_coordinates():
    rng = np.random.default_rng(1)
    q, p = rng.normal(size=(10, 2)), rng.normal(size=(10, 2))
    br = canonical_bracket(lambda a, b: a[..., 0], lambda a, b: b[..., 0], q, p)
    assert np.allclose(br, 1.0, atol=1e-10)
    br = canonical_bracket(lambda a, b: a[..., 0], lambda a, b: b[..., 1], q, p)
    assert np.allclose(br, 0.0, atol=1e-10)


def test_commutation_on_rotation_example(rotation, samples):
    q, p = samples
    battery = [(lambda r, pr, l: r, lambda l: l),
               (lambda r, pr, l: np.exp(-pr ** 2) * np.sin(l), lambda l: np.cos(2 * l)),
               (lambda r, pr, l: r * l, lambda l: l ** 3),
               (lambda r, pr, l: 1.0 + 0 * r, lambda l: l),
               (lambda r, pr, l: r * pr, lambda l: 0 * l + 2.0)]
    rep = commutation_check(rotation, battery, q, p)
    assert rep.max_bracket < 1e-5
    assert rep.per_pair[3] < 1e-12 and rep.per_pair[4] < 1e-12


def test_commutation_on_pair_trivial_is_exact():
    mp = momentum_maps(GridBibundle("pair_trivial"))
    q = np.linspace(-1, 1, 11)[:, None]
    p = np.linspace(-0.5, 0.5, 11)[:, None]
    rep = commutation_check(mp, [(lambda a, b: np.sin(a) * b, lambda z: z + 1.0)], q, p)
    assert rep.max_bracket == 0.0


def test_rotation_relation_is_angular_momentum_graph(rotation, samples):
    q, p = samples
    rel = lagrangian_relation(rotation, q, p)
    assert rel.dims == (3, 1)
    assert np.allclose(rel.first[:, 2], rel.second[:, 0])
    assert not rel.degenerate


def test_pair_trivial_relation_is_full_sampling():
    b = GridBibundle("pair_trivial", (-1, 1), 21)
    mp = momentum_maps(b)
    x = np.linspace(-1, 1, 21)
    P = np.linspace(-0.5, 0.5, 11)
    qq, pp = np.meshgrid(x, P, indexing="ij")
    rel = lagrangian_relation(mp, qq.reshape(-1, 1), pp.reshape(-1, 1), tolerance=0.01)
    assert len(rel) == 21 * 11
    assert not np.any(rel.second)


def test_zero_section_sampling(rotation, samples):
    q, _ = samples
    rel = lagrangian_relation(rotation, q, np.zeros_like(q))
    assert not np.any(rel.points[:, 1:])


def test_empty_sampling_rejected(rotation):
    with pytest.raises(ValueError, match="empty sampling"):
        lagrangian_relation(rotation, np.zeros((0, 2)), np.zeros((0, 2)))


def test_composition_with_diagonal_and_disjoint(rotation, samples):
    q, p = samples
    rel = lagrangian_relation(rotation, q[:400], p[:400], tolerance=0.05)
    diag = diagonal_relation(rel.second, 0.05)
    comp = compose_relations(rel, diag)
    assert hausdorff(comp.points, rel.points).symmetric <= 0.05
    far = Relation(np.array([[100.0, 100.0]]), (1, 1), 0.05)
    empty = compose_relations(rel, far)
    assert empty.degenerate and len(empty) == 0
    with pytest.raises(ValueError):
        compose_relations(rel, Relation(np.zeros((1, 4)), (2, 2), 0.1))


def test_relation_csv_roundtrip(rotation, samples):
    q, p = samples
    rel = lagrangian_relation(rotation, q[:50], p[:50])
    back = Relation.from_csv(rel.to_csv(), rel.header())
    assert np.array_equal(back.points, rel.points) and back.dims == rel.dims


def test_hausdorff_matches_scipy():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(200, 3)), rng.normal(size=(150, 3)) + 0.3
    rep = hausdorff(a, b)
    assert rep.forward == pytest.approx(directed_hausdorff(a, b)[0])
    assert rep.backward == pytest.approx(directed_hausdorff(b, a)[0])
    scaled = hausdorff(a, b, (2.0, 2.0, 2.0))
    assert scaled.symmetric == pytest.approx(rep.symmetric / 2)
    assert hausdorff(a, np.zeros((0, 3))).symmetric == float("inf")
