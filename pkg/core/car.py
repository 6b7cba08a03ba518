from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import log, sqrt
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from core.errors import PreconditionError, SolveError
from core.fock import FockOperator, FockSpace, IndexSet, Label, inversion_sign, mask_members

# local factors of an ordered monomial, per mode of X0
LOCAL_WORDS = ("1", "c", "c*", "c*c")
DIAGONAL_WORDS = (0, 3)

Letter = Tuple[Label, bool]  # (label, adjoint?)


class AlmostPeriodicRep:
    """Eigenvalues a(x) of A on the basis of l2(X), and the hat scaling d(x)."""

    def __init__(self, index_set: IndexSet, eigenvalues: Sequence[Fraction]):
        if len(eigenvalues) != index_set.d:
            raise PreconditionError("one eigenvalue per label of X0 is required")
        mus = [Fraction(m) for m in eigenvalues]
        if any(m <= 0 for m in mus):
            raise PreconditionError(f"eigenvalues must be positive: {mus}")
        self.index_set = index_set
        self.mu: Tuple[Fraction, ...] = tuple(mus)

    @classmethod
    def from_marginals(cls, index_set: IndexSet, marginals: Sequence[Fraction]) -> "AlmostPeriodicRep":
        ps = [Fraction(p) for p in marginals]
        if any(not (0 < p < 1) for p in ps):
            raise PreconditionError(f"marginals must lie in (0, 1): {[str(p) for p in ps]}")
        return cls(index_set, [p / (1 - p) for p in ps])

    def a(self, x: Label) -> Fraction:
        k = self.index_set.index(x)
        mu = self.mu[k % self.index_set.d]
        return mu if self.index_set.is_base(k) else 1 / mu

    def p(self, x: Label) -> Fraction:
        a = self.a(x)
        return a / (1 + a)

    def d(self, x: Label) -> float:
        # d(x)^2 = 2 / (1 + a(x)^-1) = 2 p(x)
        return sqrt(2 * float(self.p(x)))

    def scalings(self) -> np.ndarray:
        return np.array([self.d(k) for k in range(self.index_set.size)])

    def hat(self, xi: Sequence[complex]) -> np.ndarray:
        return self.scalings() * np.asarray(xi)

    def involution(self, xi: Sequence[complex]) -> np.ndarray:
        xi = np.asarray(xi)
        ix = self.index_set
        return np.conj(np.array([xi[ix.partner(k)] for k in range(ix.size)]))

    def log_weights(self) -> np.ndarray:
        return np.array([log(float(self.a(k))) for k in range(self.index_set.size)])


@dataclass(frozen=True, eq=False)
class QuasiFreeData:
    matrix: np.ndarray  # R(A) on l2(X0), diagonal with entries p_x

    def pairing(self, xis: Sequence[Sequence[complex]], etas: Sequence[Sequence[complex]]) -> np.ndarray:
        a = np.array(xis, dtype=complex) @ self.matrix.T
        return a @ np.array(etas, dtype=complex).conj().T


@dataclass(frozen=True, eq=False)
class MatrixUnits:
    units: Dict[Tuple[int, int, int], FockOperator]
    order: Tuple[str, ...]

    def relation_residual(self) -> float:
        worst = 0.0
        dim = next(iter(self.units.values())).dim
        zero = np.zeros((dim, dim))
        for n in range(1, len(self.order) + 1):
            for i, j, k, l in np.ndindex(2, 2, 2, 2):
                lhs = self.units[(n, i + 1, j + 1)] @ self.units[(n, k + 1, l + 1)]
                rhs = self.units[(n, i + 1, l + 1)].matrix if j == k else zero
                worst = max(worst, float(np.max(np.abs(lhs.matrix - rhs))))
            total = self.units[(n, 1, 1)] + self.units[(n, 2, 2)]
            worst = max(worst, float(np.max(np.abs(total.matrix - np.eye(dim)))))
        return worst

    def commutation_residual(self) -> float:
        worst = 0.0
        keys = list(self.units)
        for a in keys:
            for b in keys:
                if a[0] < b[0]:
                    x, y = self.units[a], self.units[b]
                    worst = max(worst, float(np.max(np.abs((x @ y - y @ x).matrix))))
        return worst


class CarAlgebra:
    """Field operators, CAR elements, the vacuum (quasi-free) state and modular data."""

    def __init__(self, rep: AlmostPeriodicRep, max_dense_modes: int = 4):
        self.rep = rep
        self.index_set = rep.index_set
        self.space = FockSpace(rep.index_set, max_dense_modes=max_dense_modes)
        self._c: Dict[int, FockOperator] = {}
        self._monomials: Optional[MonomialBasis] = None

    @property
    def dim(self) -> int:
        return self.space.dim

    # -- generators --

    def field_operator(self, x: Label) -> FockOperator:
        k = self.index_set.index(x)
        ik = self.index_set.partner(k)
        return (self.rep.d(k) * self.space.create_left(k)
                + self.rep.d(ik) * self.space.annihilate_left(ik))

    def car_element(self, x: Label) -> FockOperator:
        k = self.index_set.index(x)
        if k not in self._c:
            self._c[k] = (1 / sqrt(2)) * self.field_operator(k)
        return self._c[k]

    def car_elements(self) -> List[FockOperator]:
        return [self.car_element(k) for k in range(self.index_set.d)]

    def self_dual(self, xi: Sequence[complex]) -> FockOperator:
        """B(xi) = W(hat xi) / sqrt(2) = sum_x xi(x) c_x over all of X."""
        xi = np.asarray(xi, dtype=complex)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in range(self.index_set.size):
            out += xi[k] * self.car_element(k).matrix
        return FockOperator(out)

    def c_vector(self, xi: Sequence[complex]) -> FockOperator:
        """c(xi) for xi in l2(X0)."""
        xi = np.asarray(xi, dtype=complex)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in range(self.index_set.d):
            out += xi[k] * self.car_element(k).matrix
        return FockOperator(out)

    def word(self, letters: Sequence[Letter]) -> FockOperator:
        out = self.space.identity()
        for label, star in letters:
            c = self.car_element(label)
            out = out @ (c.H if star else c)
        return out

    # -- vacuum state --

    def vacuum_state(self, a: FockOperator) -> complex:
        return complex(a.matrix[0, 0])

    def quasi_free_data(self) -> QuasiFreeData:
        ps = [float(self.rep.p(k)) for k in range(self.index_set.d)]
        return QuasiFreeData(np.diag(ps))

    def quasi_free_moment(self, xis: Sequence[Sequence[complex]], etas: Sequence[Sequence[complex]]) -> complex:
        """phi(c(eta_m)* ... c(eta_1)* c(xi_1) ... c(xi_n)) = delta_mn det[<R xi_i, eta_j>]"""
        if len(xis) != len(etas):
            return 0j
        if len(xis) == 0:
            return 1.0 + 0j
        return complex(np.linalg.det(self.quasi_free_data().pairing(xis, etas)))

    def vacuum_moment(self, xis: Sequence[Sequence[complex]], etas: Sequence[Sequence[complex]]) -> complex:
        prod = self.space.identity()
        for eta in reversed(etas):
            prod = prod @ self.c_vector(eta).H
        for xi in xis:
            prod = prod @ self.c_vector(xi)
        return self.vacuum_state(prod)

    # -- matrix units --

    def matrix_units(self, order: Optional[Sequence[Label]] = None) -> MatrixUnits:
        ix = self.index_set
        order = list(order) if order is not None else list(ix.base_labels)
        if sorted(ix.index(x) for x in order) != list(range(ix.d)):
            raise PreconditionError("matrix units need an enumeration of X0")
        one = self.space.identity()
        v = one
        units: Dict[Tuple[int, int, int], FockOperator] = {}
        for n, label in enumerate(order, start=1):
            c = self.car_element(label)
            units[(n, 1, 1)] = c.H @ c
            units[(n, 1, 2)] = v @ c.H
            units[(n, 2, 1)] = c @ v
            units[(n, 2, 2)] = c @ c.H
            v = v @ (one - 2 * (c @ c.H))
        return MatrixUnits(units, tuple(ix.label(ix.index(x)) for x in order))

    # -- modular data --

    def modular_conjugation(self) -> FockOperator:
        """J b_S: reverse the sorted tuple, apply I, re-sort; antilinear."""
        ix = self.index_set
        mat = np.zeros((self.dim, self.dim))
        for mask in range(self.dim):
            image = [ix.partner(s) for s in reversed(mask_members(mask))]
            mat[ix.partner_mask(mask), mask] = inversion_sign(image)
        return FockOperator(mat, antilinear=True)

    def _modular_exponents(self) -> np.ndarray:
        w = self.rep.log_weights()
        return np.array([sum(w[s] for s in mask_members(mask)) for mask in range(self.dim)])

    def modular_operator(self, power: complex = 1.0) -> FockOperator:
        """Delta^power, with Delta b_S = prod_{x in S} a(x)^-1 b_S."""
        values = np.exp(-power * self._modular_exponents())
        if np.isrealobj(values):
            return FockOperator(np.diag(values))
        return FockOperator(np.diag(values.astype(complex)))

    def tomita_operator(self) -> FockOperator:
        return self.modular_conjugation() @ self.modular_operator(0.5)

    def modular_flow(self, t: float, a: FockOperator) -> FockOperator:
        return self.modular_operator(1j * t) @ a @ self.modular_operator(-1j * t)

    def kms_residual(self, a: FockOperator, b: FockOperator) -> float:
        """|phi(a sigma_{-i}(b)) - phi(b a)| with sigma_{-i}(b) = Delta b Delta^-1."""
        shifted = self.modular_operator(1.0) @ b @ self.modular_operator(-1.0)
        return abs(self.vacuum_state(a @ shifted) - self.vacuum_state(b @ a))

    def tomita_residual(self, a: FockOperator) -> float:
        vac = self.space.vacuum()
        lhs = self.tomita_operator().apply(a.apply(vac))
        rhs = a.H.apply(vac)
        return float(np.max(np.abs(lhs - rhs)))

    # -- monomial basis --

    @property
    def monomials(self) -> "MonomialBasis":
        if self._monomials is None:
            self._monomials = MonomialBasis(self)
        return self._monomials


class MonomialBasis:
    """Ordered monomials prod_{x in X0} w_x, w_x in {1, c_x, c_x*, c_x*c_x}.

    Index i enumerates (i_1, ..., i_d) in C order, i_1 most significant.
    ``relabel`` substitutes c_{relabel[k]} for c_k, which is how alpha_g
    acts on a monomial.
    """

    def __init__(self, car: CarAlgebra, cond_limit: float = 1e12):
        self.car = car
        self.d = car.index_set.d
        self.size = 4 ** self.d
        self.vacuum_matrix = self.vectors(car.space.vacuum())
        cond = np.linalg.cond(self.vacuum_matrix)
        if not np.isfinite(cond) or cond > cond_limit:
            raise SolveError(f"vacuum is not separating (condition number {cond:.3g})")
        self._lu = scipy.linalg.lu_factor(self.vacuum_matrix)

    def local_operators(self, relabel: Optional[Sequence[int]] = None) -> List[List[np.ndarray]]:
        relabel = list(range(self.d)) if relabel is None else list(relabel)
        one = np.eye(self.car.dim)
        out = []
        for k in range(self.d):
            c = self.car.car_element(relabel[k]).matrix
            cs = c.conj().T
            out.append([one, c, cs, cs @ c])
        return out

    def multi_index(self, i: int) -> Tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(i, (4,) * self.d))

    def describe(self, i: int) -> str:
        parts = []
        for k, w in enumerate(self.multi_index(i)):
            if w:
                parts.append(LOCAL_WORDS[w].replace("c", f"c[{self.car.index_set.base_labels[k]}]"))
        return " ".join(parts) or "1"

    def is_diagonal(self, i: int) -> bool:
        return all(w in DIAGONAL_WORDS for w in self.multi_index(i))

    def vectors(self, start: np.ndarray, relabel: Optional[Sequence[int]] = None) -> np.ndarray:
        """Columns m_i(relabelled) @ start, shape (dim, 4^d)."""
        locs = self.local_operators(relabel)
        block = np.asarray(start)[None, :]
        for k in reversed(range(self.d)):
            block = np.concatenate([block @ locs[k][w].T for w in range(4)], axis=0)
        return block.T

    def _combine(self, locs: List[List[np.ndarray]], coef: np.ndarray, k: int) -> np.ndarray:
        if k == self.d - 1:
            return sum(coef[w] * locs[k][w] for w in range(4))
        n = 4 ** (self.d - k - 1)
        out = np.zeros((self.car.dim, self.car.dim), dtype=np.result_type(coef, float))
        for w in range(4):
            sub = coef[w * n:(w + 1) * n]
            if np.any(sub):
                out = out + locs[k][w] @ self._combine(locs, sub, k + 1)
        return out

    def combine(self, coef: np.ndarray, relabel: Optional[Sequence[int]] = None) -> FockOperator:
        return FockOperator(self._combine(self.local_operators(relabel), np.asarray(coef), 0))

    def solve(self, vec: np.ndarray) -> np.ndarray:
        """Coefficients of the unique algebra element with vacuum value ``vec``."""
        return scipy.linalg.lu_solve(self._lu, vec)

    def expand(self, a: FockOperator, tol: float = 1e-8) -> np.ndarray:
        if a.antilinear:
            raise SolveError("antilinear operators are not in the algebra")
        coef = self.solve(a.matrix[:, 0])
        residual = self.combine(coef).residual(a)
        if residual > tol:
            raise SolveError(f"operator is outside the generated algebra (residual {residual:.3g})")
        return coef
