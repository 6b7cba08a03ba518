import os, sys
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)
from fractions import Fraction
import numpy as np
from core.car import AlmostPeriodicRep, CarAlgebra
from core.fock import IndexSet, anticommutator

if __name__ == "__main__":
    ix = IndexSet(["a", "b"])
    car = CarAlgebra(AlmostPeriodicRep.from_marginals(ix, [Fraction(1, 2), Fraction(1, 3)]))
    print("fock dim:", car.dim)
    c = car.car_element("a")
    print("{c, c*} - 1 :", float(np.max(np.abs(anticommutator(c, c.H).matrix - np.eye(car.dim)))))
    print("phi(c* c)   :", car.vacuum_state(c.H @ c).real, "expected", float(car.rep.p("a")))
    print("tomita      :", car.tomita_residual(c))
    print("monomials   :", car.monomials.size)
