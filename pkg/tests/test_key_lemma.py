import numpy as np
import pytest

from core.errors import PreconditionError
from core.key_lemma import (
    admissible_samples,
    decompose,
    describe_column,
    hole_action_check,
    pair_isometries,
    partial_isometry_residual,
    r_constant,
    resolution_check,
    scaling_element,
    scaling_inverse,
    scaling_product,
    scaling_product_inverse,
    sector_projection,
    sector_projections,
    subsets,
    vanishing_check,
    zf_action_check,
)

ROTATION = (1, 2, 0)
IDENTITY = (0, 1, 2)


@pytest.mark.parametrize("x", ["a", "b", "c"])
def test_pair_isometries(cyclic_dynamics, x):
    v, w = pair_isometries(cyclic_dynamics, x)
    assert partial_isometry_residual(v) < 1e-12
    assert partial_isometry_residual(w) < 1e-12
    total = v @ v.H + w @ w.H
    assert total.residual(cyclic_dynamics.space.identity()) < 1e-12
    both = cyclic_dynamics.space.basis_vector([x, "I" + x])
    assert np.allclose((v @ v.H).apply(both), both)


def test_pair_isometries_need_base_labels(cyclic_dynamics):
    with pytest.raises(PreconditionError):
        pair_isometries(cyclic_dynamics, "Ia")


def test_subsets():
    assert subsets([0, 1]) == [(), (0,), (1,), (0, 1)]


def test_sector_resolution(cyclic_dynamics):
    projections = sector_projections(cyclic_dynamics, ROTATION)
    assert len(projections) == 8
    for name, value in resolution_check(cyclic_dynamics, ROTATION).items():
        assert value < 1e-12, name


def test_sector_basis_for_singleton(cyclic_dynamics):
    proj = sector_projection(cyclic_dynamics, ROTATION, ["a"])
    assert proj.F == (0,)
    # {a, Ia} present, no other pair: 3 * 3 choices for the b and c modes
    assert len(proj.basis) == 9
    assert proj.residual() < 1e-12


def test_trivial_support_has_one_sector(cyclic_dynamics):
    projections = sector_projections(cyclic_dynamics, IDENTITY)
    assert len(projections) == 1
    assert projections[0].matrix.residual(cyclic_dynamics.space.identity()) < 1e-12
    with pytest.raises(PreconditionError):
        sector_projection(cyclic_dynamics, IDENTITY, ["a"])


def test_scaling_elements(cyclic_dynamics):
    one = cyclic_dynamics.space.identity()
    car = cyclic_dynamics.car
    c = car.car_element("a")
    # p(a) = 1/2 makes both squared scalings equal to one
    assert scaling_element(cyclic_dynamics, "a").residual(c @ c.H - c.H @ c) < 1e-12
    for x in ["a", "b", "c"]:
        assert (scaling_element(cyclic_dynamics, x) @ scaling_inverse(cyclic_dynamics, x)).residual(one) < 1e-12
    zf = scaling_product(cyclic_dynamics, ["a", "c"])
    assert (zf @ scaling_product_inverse(cyclic_dynamics, ["a", "c"])).residual(one) < 1e-12


def test_relabelled_scaling_product_is_the_automorphism_image(cyclic_dynamics):
    zf = scaling_product(cyclic_dynamics, ["b"])
    moved = scaling_product(cyclic_dynamics, ["b"], ROTATION)
    assert cyclic_dynamics.alpha(ROTATION, zf).residual(moved) < 1e-8


def test_r_constant():
    assert r_constant(0, 5) == 1.0
    assert r_constant(1, 0) == pytest.approx(np.sqrt(2))
    assert r_constant(1, 1) == pytest.approx(np.sqrt(6))
    assert r_constant(2, 1) == pytest.approx(np.sqrt(120))


def test_admissible_samples_avoid_pairs_in_the_support(cyclic_dynamics):
    samples = admissible_samples(cyclic_dynamics, ROTATION, (0,), 2)
    assert () in samples
    assert all(0 not in ys and 3 not in ys for ys in samples)
    assert (1, 4) not in samples
    assert (1, 5) in samples


@pytest.mark.parametrize("F", [["a"], ["b", "c"], ["a", "b", "c"]])
def test_scaling_product_on_wedges(cyclic_dynamics, F):
    ix = cyclic_dynamics.index_set
    base = tuple(sorted(ix.index(x) for x in F))
    samples = admissible_samples(cyclic_dynamics, ROTATION, base, 2)
    residuals = zf_action_check(cyclic_dynamics, ROTATION, F, samples)
    assert len(residuals) == len(samples)
    assert max(residuals.values()) < 1e-10


def test_inadmissible_sample_is_rejected(cyclic_dynamics):
    with pytest.raises(PreconditionError):
        zf_action_check(cyclic_dynamics, ROTATION, ["a"], [(0,)])


@pytest.mark.parametrize("ys", [(), (1,), (2, 4)])
def test_hole_projection_on_wedges(cyclic_dynamics, ys):
    for x in ["a"]:
        assert hole_action_check(cyclic_dynamics, x, ys) < 1e-12
    with pytest.raises(PreconditionError):
        hole_action_check(cyclic_dynamics, "a", (3,))


def test_vanishing_on_low_wedges(cyclic_dynamics):
    assert vanishing_check(cyclic_dynamics, ROTATION, []).residual < 1e-10
    single = vanishing_check(cyclic_dynamics, ROTATION, ["b"])
    assert not single.outside and single.residual < 1e-10
    paired = vanishing_check(cyclic_dynamics, ROTATION, ["a", "Ia"])
    assert paired.outside


def test_decomposition(cyclic_dynamics):
    cert = decompose(cyclic_dynamics, ROTATION)
    assert len(cert.terms) == 8
    assert cert.residual < 1e-8
    assert cert.spectral_residual < 1e-7
    assert cert.conjugation_residual < 1e-8
    assert all(v < 1e-12 for v in cert.shift_residuals.values())
    assert cert.worst.residual < 1e-8


def test_decomposition_of_the_identity(cyclic_dynamics):
    cert = decompose(cyclic_dynamics, IDENTITY)
    assert len(cert.terms) == 1 and cert.terms[0].F == ()
    assert cert.residual < 1e-12


def test_describe_column(cyclic_dynamics):
    assert describe_column(cyclic_dynamics, None) == "-"
    assert describe_column(cyclic_dynamics, 0b1001) == "[a,Ia]"
    assert describe_column(cyclic_dynamics, 0) == "[]"
