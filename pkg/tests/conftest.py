from fractions import Fraction

import numpy as np
import pytest

from core.bernoulli import BernoulliDynamics, BernoulliSystem, GroupAction
from core.car import AlmostPeriodicRep, CarAlgebra
from core.fock import FockSpace, IndexSet

DEFAULT_MARGINALS = [Fraction(1, 2), Fraction(1, 3), Fraction(2, 5)]


def make_dynamics(labels, marginals, generators, max_order=720):
    ix = IndexSet(labels)
    action = GroupAction.from_cycles(ix, generators, max_order=max_order)
    return BernoulliDynamics(BernoulliSystem(ix, [Fraction(p) for p in marginals], action))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def pair_set():
    return IndexSet(["a", "b"])


@pytest.fixture
def pair_space(pair_set):
    return FockSpace(pair_set)


@pytest.fixture(scope="module")
def pair_car():
    ix = IndexSet(["a", "b"])
    return CarAlgebra(AlmostPeriodicRep.from_marginals(ix, [Fraction(1, 2), Fraction(1, 3)]))


@pytest.fixture(scope="module")
def triple_car():
    ix = IndexSet(["a", "b", "c"])
    return CarAlgebra(AlmostPeriodicRep.from_marginals(ix, DEFAULT_MARGINALS))


@pytest.fixture(scope="module")
def swap_dynamics():
    """|X0| = 2, G = Z2 swapping a and b, p = (1/2, 1/3)."""
    return make_dynamics(["a", "b"], ["1/2", "1/3"], [[["a", "b"]]])


@pytest.fixture(scope="module")
def cyclic_dynamics():
    """|X0| = 3, G = <3-cycle>, p = (1/2, 1/3, 2/5)."""
    return make_dynamics(["a", "b", "c"], DEFAULT_MARGINALS, [[["a", "b", "c"]]])
