from fractions import Fraction

import numpy as np
import pytest

from core.car import AlmostPeriodicRep, CarAlgebra
from core.errors import PreconditionError, SolveError
from core.fock import IndexSet, anticommutator, commutator, inversion_sign, mask_members


def test_eigenvalues_and_scalings(pair_car):
    rep = pair_car.rep
    assert rep.a("a") == 1 and rep.a("b") == Fraction(1, 2)
    assert rep.a("Ib") == 2
    assert rep.p("b") == Fraction(1, 3) and rep.p("Ib") == Fraction(2, 3)
    for x in ["a", "b"]:
        assert np.isclose(rep.d(x) ** 2 + rep.d("I" + x) ** 2, 2.0)
        assert np.isclose(rep.d(x) ** 2, 2 * float(rep.p(x)))


@pytest.mark.parametrize("marginals", [[0, "1/2"], ["1/2", 1], ["3/2", "1/2"]])
def test_marginals_must_be_open_unit_interval(marginals):
    with pytest.raises(PreconditionError):
        AlmostPeriodicRep.from_marginals(IndexSet(["a", "b"]), [Fraction(p) for p in marginals])


def test_involution_and_hat(pair_car):
    xi = np.array([1, 2j, 3, 4])
    assert np.allclose(pair_car.rep.involution(xi), np.conj([3, 4, 1, 2j]))
    assert np.allclose(pair_car.rep.hat(xi), pair_car.rep.scalings() * xi)


def test_tracial_mode_reduces_to_plain_fields(pair_car):
    space = pair_car.space
    expected = (space.create_left("a").matrix + space.annihilate_left("Ia").matrix) / np.sqrt(2)
    assert np.allclose(pair_car.car_element("a").matrix, expected)


def test_partner_element_is_adjoint(pair_car):
    for x in ["a", "b"]:
        assert np.allclose(pair_car.car_element("I" + x).matrix, pair_car.car_element(x).H.matrix)


def test_car_relations(pair_car):
    cs = pair_car.car_elements()
    one = np.eye(pair_car.dim)
    for i, x in enumerate(cs):
        for j, y in enumerate(cs):
            assert np.allclose(anticommutator(x, y.H).matrix, one if i == j else 0)
            assert np.allclose(anticommutator(x, y).matrix, 0)


def test_field_operator_on_vacuum(pair_car):
    for x in pair_car.index_set.labels:
        got = pair_car.field_operator(x).apply(pair_car.space.vacuum())
        assert np.allclose(got, pair_car.rep.d(x) * pair_car.space.basis_vector([x]))


def test_self_dual_field_is_linear_over_x(pair_car, rng):
    xi = rng.normal(size=4)
    expected = sum(xi[k] * pair_car.field_operator(k).matrix for k in range(4)) / np.sqrt(2)
    assert np.allclose(pair_car.self_dual(xi).matrix, expected)


def test_two_point_function_is_marginal(pair_car):
    for x in ["a", "b"]:
        c = pair_car.car_element(x)
        assert np.isclose(pair_car.vacuum_state(c.H @ c), float(pair_car.rep.p(x)))
        assert np.isclose(pair_car.vacuum_state(c @ c.H), 1 - float(pair_car.rep.p(x)))


@pytest.mark.parametrize("n", [0, 1, 2])
def test_quasi_free_moments_match_vacuum(pair_car, rng, n):
    xis = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    etas = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    assert np.isclose(pair_car.quasi_free_moment(xis, etas), pair_car.vacuum_moment(xis, etas))


def test_quasi_free_moment_accepts_arrays_and_lists(triple_car, rng):
    xis = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    etas = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    as_array = triple_car.quasi_free_moment(xis, etas)
    assert as_array == triple_car.quasi_free_moment(list(xis), list(etas))
    assert np.isclose(as_array, triple_car.vacuum_moment(xis, etas))
    empty = np.zeros((0, 3))
    assert triple_car.quasi_free_moment(empty, empty) == 1
    assert triple_car.quasi_free_moment([], []) == 1


def test_unbalanced_moments_vanish(pair_car, rng):
    xis = rng.normal(size=(2, 2))
    etas = rng.normal(size=(1, 2))
    assert pair_car.quasi_free_moment(xis, etas) == 0
    assert np.isclose(pair_car.vacuum_moment(xis, etas), 0)


def test_matrix_units(triple_car):
    units = triple_car.matrix_units()
    assert units.relation_residual() < 1e-12
    assert units.commutation_residual() < 1e-12
    reordered = triple_car.matrix_units(["c", "a", "b"])
    assert reordered.order == ("c", "a", "b")
    assert reordered.relation_residual() < 1e-12
    with pytest.raises(PreconditionError):
        triple_car.matrix_units(["a", "b"])


def test_modular_conjugation_closed_form(triple_car):
    ix = triple_car.index_set
    j = triple_car.modular_conjugation()
    assert j.antilinear
    for mask in range(triple_car.dim):
        members = mask_members(mask)
        n = len(members)
        sign = (-1) ** (n * (n - 1) // 2) * inversion_sign([ix.partner(s) for s in members])
        assert j.matrix[ix.partner_mask(mask), mask] == sign


def test_modular_conjugation_is_an_involution_fixing_vacuum(pair_car):
    j = pair_car.modular_conjugation()
    vac = pair_car.space.vacuum()
    assert np.allclose(j.apply(vac), vac)
    assert not (j @ j).antilinear
    assert np.allclose((j @ j).matrix, np.eye(pair_car.dim))


def test_conjugation_maps_left_creators_to_right(pair_car):
    j = pair_car.modular_conjugation()
    space = pair_car.space
    for x in pair_car.index_set.labels:
        partner = space.index_set.partner(space.index_set.index(x))
        assert np.allclose((j @ space.create_left(x) @ j).matrix, space.create_right(partner).matrix)


def test_conjugated_algebra_commutes(pair_car):
    j = pair_car.modular_conjugation()
    for x in pair_car.car_elements():
        jxj = j @ x @ j
        for y in pair_car.car_elements():
            assert np.allclose(commutator(jxj, y).matrix, 0)
            assert np.allclose(commutator(jxj, y.H).matrix, 0)


def test_modular_operator(pair_car):
    delta = pair_car.modular_operator()
    vac = pair_car.space.vacuum()
    assert np.allclose(delta.apply(vac), vac)
    j = pair_car.modular_conjugation()
    assert np.allclose((j @ delta @ j).matrix, pair_car.modular_operator(-1.0).matrix)


def test_modular_flow_rotates_generators(pair_car):
    t = 0.7
    for x in ["a", "b"]:
        phase = float(pair_car.rep.a(x)) ** (-1j * t)
        flowed = pair_car.modular_flow(t, pair_car.car_element(x))
        assert np.allclose(flowed.matrix, phase * pair_car.car_element(x).matrix)


def test_tomita_relation_on_generators_and_monomials(triple_car, rng):
    for c in triple_car.car_elements():
        assert triple_car.tomita_residual(c) < 1e-10
        assert triple_car.tomita_residual(c.H) < 1e-10
    basis = triple_car.monomials
    for i in rng.choice(basis.size, size=10, replace=False):
        coef = np.zeros(basis.size)
        coef[i] = 1.0
        assert triple_car.tomita_residual(basis.combine(coef)) < 1e-10


def test_kms_condition(pair_car, rng):
    letters = [(x, bool(s)) for x in ["a", "b"] for s in (0, 1)]
    for _ in range(10):
        a = pair_car.word([letters[i] for i in rng.integers(0, 4, size=2)])
        b = pair_car.word([letters[i] for i in rng.integers(0, 4, size=2)])
        assert pair_car.kms_residual(a, b) < 1e-12


def test_monomial_basis_reconstructs_vacuum_values(pair_car, rng):
    basis = pair_car.monomials
    assert basis.size == 16
    vec = rng.normal(size=pair_car.dim)
    elem = basis.combine(basis.solve(vec))
    assert np.allclose(elem.apply(pair_car.space.vacuum()), vec)


def test_monomial_expansion_of_a_generator(pair_car):
    basis = pair_car.monomials
    coef = basis.expand(pair_car.car_element("a"))
    expected = np.zeros(16)
    expected[4] = 1.0
    assert np.allclose(coef, expected)
    assert basis.describe(4) == "c[a]"
    assert basis.describe(0) == "1"
    assert basis.is_diagonal(15)
    assert not basis.is_diagonal(4)


def test_commutant_elements_are_not_expandable(pair_car):
    j = pair_car.modular_conjugation()
    outside = j @ pair_car.car_element("a") @ j
    with pytest.raises(SolveError):
        pair_car.monomials.expand(outside)
    with pytest.raises(SolveError):
        pair_car.monomials.expand(j)
