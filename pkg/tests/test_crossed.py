import numpy as np
import pytest

from conftest import DEFAULT_MARGINALS, make_dynamics
from core.bernoulli import compose
from core.crossed import (
    DEFAULT_DIM_CAP,
    EXACT_KEYS,
    algebra_closure,
    build_crossed_rep,
    commutant_basis,
    commutation_suite,
    left_commutant_dimension,
    regular_left,
    regular_right,
    right_algebra_span,
    span_closure_residual,
    span_residual,
)
from core.errors import CapExceededError
from core.scenario import DEFAULT_CAPS

S3_GENERATORS = [[["a", "b"]], [["a", "b", "c"]]]


@pytest.fixture(scope="module")
def swap_rep(swap_dynamics):
    return build_crossed_rep(swap_dynamics)


def test_regular_representations(cyclic_dynamics):
    elements = cyclic_dynamics.action.elements
    for g in elements:
        for h in elements:
            assert np.array_equal(regular_left(cyclic_dynamics, g) @ regular_left(cyclic_dynamics, h),
                                  regular_left(cyclic_dynamics, compose(g, h)))
            assert np.array_equal(regular_right(cyclic_dynamics, g) @ regular_right(cyclic_dynamics, h),
                                  regular_right(cyclic_dynamics, compose(g, h)))
            lam, rho = regular_left(cyclic_dynamics, g), regular_right(cyclic_dynamics, h)
            assert np.array_equal(lam @ rho, rho @ lam)


def test_dimension_cap(swap_dynamics):
    with pytest.raises(CapExceededError):
        build_crossed_rep(swap_dynamics, dim_cap=16)


def test_rep_shape(swap_rep):
    assert swap_rep.group_order == 2
    assert swap_rep.fock_dim == 16
    assert swap_rep.dim == 32
    assert np.allclose(swap_rep.right_embedding(np.eye(16)), np.eye(32))
    assert swap_rep.conjugation.antilinear


def test_commutation_suite(swap_rep):
    results = commutation_suite(swap_rep, rng=np.random.default_rng(3))
    for name, value in results.items():
        if name not in EXACT_KEYS:
            assert value < 1e-8, name
    # dim(M x| G) = 4^|X0| |G|
    assert results["right-algebra-dimension"] == 32
    assert results["left-commutant-dimension"] == 32
    assert results["right-closure-dimension"] == 32


def test_right_span_matches_generated_algebra(swap_rep):
    span = right_algebra_span(swap_rep)
    assert span.dim == 32
    closure = algebra_closure(list(swap_rep.right.values()))
    assert closure.shape[0] == span.dim
    for row in closure:
        assert span.residual(row.reshape(swap_rep.dim, swap_rep.dim)) < 1e-8
    x = span.random_element(np.random.default_rng(5))
    assert span_residual(closure, x) < 1e-8 * max(np.linalg.norm(x), 1.0)


def test_right_span_rejects_left_generators(swap_rep):
    span = right_algebra_span(swap_rep)
    for name, a in swap_rep.left.items():
        assert span.relative_residual(a) > 1e-3, name
        assert span.relative_residual(swap_rep.conjugate(a)) < 1e-10, name


def test_right_span_closure_detects_missing_generator(swap_rep):
    span = right_algebra_span(swap_rep)
    rng = np.random.default_rng(11)
    assert span_closure_residual(span, list(swap_rep.right.values()), rng) < 1e-10
    outsider = next(iter(swap_rep.left.values()))
    assert span_closure_residual(span, [outsider], rng) > 1e-3


def test_default_cap_admits_s3_on_three_modes():
    assert DEFAULT_DIM_CAP == DEFAULT_CAPS["crossed_dim"] == 4096
    dyn = make_dynamics(["a", "b", "c"], DEFAULT_MARGINALS, S3_GENERATORS)
    rep = build_crossed_rep(dyn)
    assert rep.dim == 64 * 6
    assert set(rep.unitaries) == set(dyn.action.elements)


def test_left_commutant_dimension(swap_rep):
    assert left_commutant_dimension(swap_rep) == (16, 32)


def test_trivial_group_conjugation_is_fock_conjugation():
    dyn = make_dynamics(["a", "b"], ["1/2", "1/3"], [])
    rep = build_crossed_rep(dyn)
    assert rep.dim == 16
    assert np.allclose(rep.conjugation.matrix, rep.fock_conjugation.matrix)
    assert left_commutant_dimension(rep) == (16, 16)


def test_kernel_mode_cap():
    dyn = make_dynamics(["a", "b", "c", "d"], ["1/2", "1/3", "2/5", "1/4"], [])
    rep = build_crossed_rep(dyn)
    with pytest.raises(CapExceededError):
        left_commutant_dimension(rep)


def test_algebra_closure_of_a_full_matrix_algebra():
    shift = np.roll(np.eye(3), 1, axis=0)
    diag = np.diag([1.0, 2.0, 3.0])
    basis = algebra_closure([shift, diag])
    assert basis.shape == (9, 9)
    assert span_residual(basis, np.ones((3, 3))) < 1e-10
    diagonal_only = algebra_closure([diag])
    assert diagonal_only.shape[0] == 3
    assert span_residual(diagonal_only, shift) > 0.5


def test_commutant_basis_of_diagonal_matrices():
    basis = commutant_basis([np.diag([1.0, 2.0, 3.0])])
    assert basis.shape[1] == 3
    with pytest.raises(CapExceededError):
        algebra_closure([np.roll(np.eye(3), 1, axis=0), np.diag([1.0, 2.0, 3.0])], limit=4)


@pytest.mark.slow
def test_commutation_suite_for_a_cyclic_action(cyclic_dynamics):
    rep = build_crossed_rep(cyclic_dynamics)
    results = commutation_suite(rep)
    for name, value in results.items():
        if name not in EXACT_KEYS:
            assert value < 1e-8, name
    assert results["right-algebra-dimension"] == 64 * 3
    assert results["left-commutant-dimension"] == 64 * 3


@pytest.mark.slow
def test_commutation_suite_for_s3_on_three_modes():
    dyn = make_dynamics(["a", "b", "c"], DEFAULT_MARGINALS, S3_GENERATORS)
    rep = build_crossed_rep(dyn)
    results = commutation_suite(rep, 1e-10, np.random.default_rng(7))
    for name, value in results.items():
        if name not in EXACT_KEYS:
            assert value < 1e-8, name
    assert results["right-algebra-dimension"] == 64 * 6
    assert results["left-commutant-dimension"] == 64 * 6
    assert "right-closure-dimension" not in results
