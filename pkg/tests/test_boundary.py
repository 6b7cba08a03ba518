from fractions import Fraction

import numpy as np
import pytest

from core.bernoulli import GroupAction
from core.boundary import (
    ZSymbol,
    act_symbol,
    ball_count,
    build_lengths,
    check_length_axioms,
    commutation_identities,
    commutator_decay,
    equivariance_defect,
    extension_defect,
    l1,
    mu,
    mu_star,
    omega,
    paired_commutator,
    paired_symbols,
    random_symbol,
    ucp_equivariance,
)
from core.errors import PreconditionError
from core.fock import FockSpace, FockVector, IndexSet, members_mask


def cycle_action(n):
    ix = IndexSet([f"x{k}" for k in range(n)])
    return GroupAction(ix, [tuple((k + 1) % n for k in range(n))])


def trivial_action(n):
    ix = IndexSet([f"x{k}" for k in range(n)])
    return GroupAction(ix, [])


def s3_action():
    ix = IndexSet(["a", "b", "c"])
    return GroupAction.from_cycles(ix, [[["a", "b"]], [["a", "b", "c"]]])


def test_symbols_are_sorted_and_distinct():
    z = ZSymbol.of([4, 1, 2])
    assert z.elements == (1, 2, 4) and z.n == 3
    assert z.insert(3).elements == (1, 2, 3, 4)
    assert ZSymbol().empty
    assert z.mask() == members_mask([1, 2, 4])
    with pytest.raises(PreconditionError):
        ZSymbol.of([1, 1])
    with pytest.raises(PreconditionError):
        ZSymbol((2, 1))
    with pytest.raises(PreconditionError):
        z.insert(2)


def test_cycle_lengths():
    lengths = build_lengths(cycle_action(5))
    assert [lengths.x(k) for k in range(5)] == [0, 1, 2, 2, 1]
    assert [lengths.x(k) for k in range(5, 10)] == [0, 1, 2, 2, 1]
    rotation = (1, 2, 3, 4, 0)
    assert lengths.g(rotation) == 1
    assert lengths.g(lengths.action.identity) == 0
    assert lengths.weighted(ZSymbol.of([1, 2, 7])) == 5


@pytest.mark.parametrize("action", [cycle_action(5), trivial_action(3), s3_action()],
                         ids=["cycle", "trivial", "s3"])
def test_length_axioms(action):
    checks = check_length_axioms(build_lengths(action))
    assert all(checks.values()), checks


def test_lengths_from_another_generating_set():
    action = s3_action()
    lengths = build_lengths(action, [(1, 0, 2), (0, 2, 1)])
    assert all(check_length_axioms(lengths).values())
    with pytest.raises(PreconditionError):
        build_lengths(action, [(1, 0, 2)])


def test_ball_count_for_zero_lengths():
    lengths = build_lengths(trivial_action(2))
    assert [ball_count(lengths, r) for r in (-1, 0, 1, 2, 4, 9)] == [0, 1, 5, 11, 16, 16]


def test_omega_and_mu():
    lengths = build_lengths(cycle_action(5))
    z = ZSymbol.of([1, 2])
    assert omega(lengths, z) == {1: 3, 2: 4}
    assert mu(lengths, z) == {1: Fraction(3, 7), 2: Fraction(4, 7)}
    assert mu(lengths, ZSymbol()) == {0: 1}


def test_l1():
    assert l1({0: Fraction(1)}, {0: Fraction(1, 2), 1: Fraction(1, 2)}) == 1


def test_extension_defect_small_example():
    lengths = build_lengths(trivial_action(2))
    result = extension_defect(lengths, 1, ZSymbol.of([0]))
    assert omega(lengths, ZSymbol.of([0, 1])) == {0: 2, 1: 2}
    assert result.omega_defect == 3 and result.omega_bound == 3
    assert result.defect == 1 and result.bound == 6
    assert result.holds


def test_extension_defect_edge_cases():
    lengths = build_lengths(trivial_action(2))
    with pytest.raises(PreconditionError):
        extension_defect(lengths, 0, ZSymbol.of([0]))
    empty = extension_defect(lengths, 1, ZSymbol())
    assert empty.bound is None
    assert empty.holds


def test_equivariance_defect_identity_and_empty():
    lengths = build_lengths(cycle_action(5))
    z = ZSymbol.of([0, 3, 6])
    result = equivariance_defect(lengths, lengths.action.identity, z)
    assert result.defect == 0 and result.omega_defect == 0
    with pytest.raises(PreconditionError):
        equivariance_defect(lengths, lengths.action.identity, ZSymbol())


def test_equivariance_and_extension_sweep(rng):
    action = cycle_action(20)
    lengths = build_lengths(action)
    for _ in range(200):
        z = random_symbol(rng, 40, 8)
        g = action.elements[int(rng.integers(action.order))]
        assert equivariance_defect(lengths, g, z).holds
        x = int(rng.integers(40))
        if x not in z:
            assert extension_defect(lengths, x, z).holds


def test_act_symbol():
    action = cycle_action(5)
    z = ZSymbol.of([4, 9])
    assert act_symbol(action, (1, 2, 3, 4, 0), z).elements == (0, 5)


def test_mu_star_is_a_unital_average():
    lengths = build_lengths(cycle_action(5))
    z = ZSymbol.of([1, 2])
    assert mu_star(lengths, {k: 1.0 for k in range(10)}, z) == pytest.approx(1.0)
    assert mu_star(lengths, {2: 1.0}, z) == pytest.approx(4 / 7)


def test_ucp_equivariance_is_bounded(rng):
    action = cycle_action(12)
    lengths = build_lengths(action)
    for _ in range(100):
        z = random_symbol(rng, 24, 6)
        g = action.elements[int(rng.integers(action.order))]
        phi = {k: float(v) for k, v in enumerate(rng.uniform(-1, 1, size=24))}
        value, bound = ucp_equivariance(lengths, g, phi, z)
        assert value <= bound + 1e-12


@pytest.mark.parametrize("x", [0, 2, 4])
def test_commutation_identities(rng, x):
    space = FockSpace(IndexSet(["a", "b", "c"]))
    table = rng.normal(size=64)
    f = lambda s: table[members_mask(s)]
    vectors = [FockVector.basis(m) for m in range(64)]
    for name, value in commutation_identities(space, f, x, vectors).items():
        assert value < 1e-12, name


def test_commutator_decay_with_zero_lengths(rng):
    size = 200
    action = trivial_action(size // 2)
    lengths = build_lengths(action)
    space = FockSpace(action.index_set)
    phi = {k: float(rng.choice([-1.0, 1.0])) for k in range(size)}
    x = 0
    symbols = [ZSymbol.of(range(1, n + 1)) for n in range(1, 51)]
    table = commutator_decay(space, lengths, phi, x, symbols)
    assert table.dominated
    assert table.decreasing
    # 2 (2n + 1) / n^2 at n = 50
    assert table.final_bound == pytest.approx(2 * 101 / 2500)
    assert table.final_bound < 0.1
    assert table.rows[39].bound > 0.1


def test_commutator_vanishes_when_x_is_present(rng):
    action = trivial_action(10)
    lengths = build_lengths(action)
    space = FockSpace(action.index_set)
    phi = {k: float(v) for k, v in enumerate(rng.uniform(-1, 1, size=20))}
    table = commutator_decay(space, lengths, phi, 3, [ZSymbol.of([1, 3, 5])], right=True)
    assert table.rows[0].value == 0


def test_paired_symbols_and_commutators(rng):
    action = cycle_action(3)
    lengths = build_lengths(action)
    space = FockSpace(action.index_set)
    symbols = paired_symbols(lengths, 3)
    assert len(symbols) == 8
    assert len(paired_symbols(lengths, 1)) == 4
    phi = {k: float(v) for k, v in enumerate(rng.uniform(-1, 1, size=6))}
    for z in symbols:
        if z.empty:
            continue
        for x in range(3):
            value, bound = paired_commutator(space, lengths, phi, x, z)
            assert value <= bound + 1e-12
    with pytest.raises(PreconditionError):
        paired_commutator(space, lengths, phi, 0, ZSymbol.of([1]))


def test_random_symbol_ranges(rng):
    for _ in range(50):
        z = random_symbol(rng, 30, 5, min_n=2)
        assert 2 <= z.n <= 5
        assert all(0 <= k < 30 for k in z.elements)
