from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from math import sqrt
from typing import Callable, Dict, Hashable, List, Mapping, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from core.car import AlmostPeriodicRep, CarAlgebra
from core.errors import CapExceededError, PreconditionError, ResolutionError
from core.fock import FockOperator, IndexSet, Label, mask_members

Perm = Tuple[int, ...]

# which projection carries the p-ratio in the Radon-Nikodym product
DENSITY_CANDIDATES = ("number-projection", "hole-projection")


def compose(g: Perm, h: Perm) -> Perm:
    """(g h)(k) = g(h(k))"""
    return tuple(g[k] for k in h)


def inverse(g: Perm) -> Perm:
    out = [0] * len(g)
    for k, v in enumerate(g):
        out[v] = k
    return tuple(out)


def perm_from_cycles(index_set: IndexSet, cycles: Sequence[Sequence[Label]]) -> Perm:
    d = index_set.d
    perm = list(range(d))
    seen = set()
    for cycle in cycles:
        idx = [index_set.index(x) for x in cycle]
        if any(k >= d for k in idx):
            raise PreconditionError(f"cycle {list(cycle)} leaves X0")
        if seen & set(idx) or len(set(idx)) != len(idx):
            raise PreconditionError(f"cycles are not disjoint: {cycles}")
        seen |= set(idx)
        for a, b in zip(idx, idx[1:] + idx[:1]):
            perm[a] = b
    return tuple(perm)


class GroupAction:
    """Finite permutation group on X0 generated by explicit permutations."""

    def __init__(self, index_set: IndexSet, generators: Sequence[Sequence[int]], max_order: int = 720):
        d = index_set.d
        gens = []
        for g in generators:
            g = tuple(int(v) for v in g)
            if len(g) != d or sorted(g) != list(range(d)):
                raise PreconditionError(f"not a permutation of X0: {g}")
            gens.append(g)
        self.index_set = index_set
        self.identity: Perm = tuple(range(d))
        self.generators: Tuple[Perm, ...] = tuple(gens)
        symmetric = []
        for g in gens + [inverse(g) for g in gens]:
            if g not in symmetric and g != self.identity:
                symmetric.append(g)
        self.symmetric_generators: Tuple[Perm, ...] = tuple(symmetric)

        elements = [self.identity]
        index = {self.identity: 0}
        queue = deque([self.identity])
        while queue:
            e = queue.popleft()
            for s in self.symmetric_generators:
                h = compose(s, e)
                if h not in index:
                    if len(elements) >= max_order:
                        raise CapExceededError(f"group order exceeds cap {max_order}")
                    index[h] = len(elements)
                    elements.append(h)
                    queue.append(h)
        self.elements: List[Perm] = elements
        self._index = index

    @classmethod
    def from_cycles(cls, index_set: IndexSet, generators: Sequence[Sequence[Sequence[Label]]],
                    max_order: int = 720) -> "GroupAction":
        return cls(index_set, [perm_from_cycles(index_set, c) for c in generators], max_order=max_order)

    @property
    def order(self) -> int:
        return len(self.elements)

    def element_index(self, g: Perm) -> int:
        return self._index[tuple(g)]

    def multiply(self, g: Perm, h: Perm) -> Perm:
        return compose(g, h)

    def inverse(self, g: Perm) -> Perm:
        return inverse(g)

    def multiplication_table(self) -> np.ndarray:
        n = self.order
        table = np.zeros((n, n), dtype=int)
        for i, g in enumerate(self.elements):
            for j, h in enumerate(self.elements):
                table[i, j] = self._index[compose(g, h)]
        return table

    def extend(self, g: Perm) -> Perm:
        """g on X, with g.(Ix) = I(g.x)."""
        d = len(g)
        return tuple(g) + tuple(v + d for v in g)

    def act(self, g: Perm, k: int) -> int:
        d = len(g)
        return g[k] if k < d else g[k - d] + d

    def describe(self, g: Perm) -> str:
        labels = self.index_set.base_labels
        moved = [f"{labels[k]}->{labels[v]}" for k, v in enumerate(g) if k != v]
        return "(" + " ".join(moved) + ")" if moved else "e"


class BernoulliSystem:
    def __init__(self, index_set: IndexSet, marginals: Sequence[Fraction], action: GroupAction):
        ps = tuple(Fraction(p) for p in marginals)
        if len(ps) != index_set.d:
            raise PreconditionError("one marginal per label of X0 is required")
        if any(not (0 < p < 1) for p in ps):
            raise PreconditionError(f"marginals must lie in (0, 1): {[str(p) for p in ps]}")
        self.index_set = index_set
        self.p = ps
        self.q = tuple(1 - p for p in ps)
        self.mu = tuple(p / (1 - p) for p in ps)
        self.action = action

    def support(self, g: Perm) -> Tuple[int, ...]:
        return tuple(k for k in range(self.index_set.d) if self.p[k] != self.p[g[k]])

    def rep(self) -> AlmostPeriodicRep:
        return AlmostPeriodicRep(self.index_set, self.mu)


# ---- windowed diagnostics ----

@dataclass(frozen=True)
class KakutaniSum:
    value: float
    terms: int
    truncated: int
    unknown: int = 0


def kakutani_partial_sum(shift: Union[Mapping[Hashable, Hashable], Callable[[Hashable], Hashable]],
                         marginals: Mapping[Hashable, Fraction],
                         window: Sequence[Hashable]) -> KakutaniSum:
    """
    sum_i (sqrt p_i - sqrt p_{g.i})^2 + (sqrt q_i - sqrt q_{g.i})^2 over the window.

    ``truncated`` counts window indices translated outside the window; their term is
    still summed when the marginal of the image is known. ``unknown`` counts terms
    dropped because the image has no marginal.
    """
    move = shift if callable(shift) else shift.get
    inside = set(window)
    total = 0.0
    terms = truncated = unknown = 0
    for i in window:
        j = move(i)
        if j is None or j not in inside:
            truncated += 1
        if j is None or j not in marginals:
            unknown += 1
            continue
        p_i, p_j = float(marginals[i]), float(marginals[j])
        total += (sqrt(p_i) - sqrt(p_j)) ** 2 + (sqrt(1 - p_i) - sqrt(1 - p_j)) ** 2
        terms += 1
    return KakutaniSum(total, terms, truncated, unknown)


def atomless_partial_sum(marginals: Mapping[Hashable, Fraction], window: Sequence[Hashable]) -> Fraction:
    return sum((min(Fraction(marginals[i]), 1 - Fraction(marginals[i])) for i in window), Fraction(0))


# ---- operators on the Fock space ----

@dataclass
class DensityResolution:
    g: Perm
    residuals: Dict[str, float]
    matches: List[str]
    decisive: bool
    winner: str


class BernoulliDynamics:
    """alpha_g, h_g, U_g, V_g and the Bernoulli subspace for a BernoulliSystem."""

    def __init__(self, system: BernoulliSystem, max_dense_modes: int = 4, tol: float = 1e-10):
        self.system = system
        self.action = system.action
        self.car = CarAlgebra(system.rep(), max_dense_modes=max_dense_modes)
        self.space = self.car.space
        self.tol = tol
        self.resolutions: Dict[Perm, DensityResolution] = {}
        self._density: Dict[Perm, FockOperator] = {}
        self._unitary: Dict[Perm, FockOperator] = {}

    @property
    def index_set(self) -> IndexSet:
        return self.system.index_set

    @property
    def d(self) -> int:
        return self.system.index_set.d

    def vacuum(self) -> np.ndarray:
        return self.space.vacuum()

    def number_projection(self, k: int) -> FockOperator:
        c = self.car.car_element(k)
        return c.H @ c

    def hole_projection(self, k: int) -> FockOperator:
        c = self.car.car_element(k)
        return c @ c.H

    # -- automorphisms --

    def alpha(self, g: Perm, a: FockOperator, tol: float = 1e-8) -> FockOperator:
        coef = self.car.monomials.expand(a, tol)
        return self.car.monomials.combine(coef, relabel=g)

    # -- Radon-Nikodym derivative --

    def _density_product(self, g: Perm, candidate: str, power: float = 1.0) -> FockOperator:
        sysm = self.system
        gi = inverse(g)
        out = self.space.identity()
        for k in range(self.d):
            p_ratio = float(sysm.p[gi[k]] / sysm.p[k]) ** power
            q_ratio = float(sysm.q[gi[k]] / sysm.q[k]) ** power
            if candidate == "hole-projection":
                p_ratio, q_ratio = q_ratio, p_ratio
            out = out @ (p_ratio * self.number_projection(k) + q_ratio * self.hole_projection(k))
        return out

    def state_identity_residual(self, g: Perm, h: FockOperator) -> float:
        """max over monomials m of |phi(alpha_g^-1(m)) - phi(m h)|"""
        mono = self.car.monomials
        vac = self.vacuum()
        lhs = mono.vectors(vac, relabel=inverse(g))[0, :]
        rhs = mono.vectors(h.apply(vac))[0, :]
        return float(np.max(np.abs(lhs - rhs)))

    def radon_nikodym_resolution(self, g: Perm) -> DensityResolution:
        g = tuple(g)
        if g not in self.resolutions:
            residuals = {name: self.state_identity_residual(g, self._density_product(g, name))
                         for name in DENSITY_CANDIDATES}
            matches = [name for name, r in residuals.items() if r < self.tol]
            decisive = bool(self.system.support(g))
            shown = ", ".join(f"{k}={v:.3g}" for k, v in residuals.items())
            if decisive and len(matches) != 1:
                raise ResolutionError(f"density assignment unresolved for {self.action.describe(g)}: {shown}")
            if not matches:
                raise ResolutionError(f"no density candidate satisfies the state identity: {shown}")
            self.resolutions[g] = DensityResolution(g, residuals, matches, decisive, matches[0])
        return self.resolutions[g]

    def radon_nikodym(self, g: Perm) -> FockOperator:
        g = tuple(g)
        if g not in self._density:
            winner = self.radon_nikodym_resolution(g).winner
            self._density[g] = self._density_product(g, winner)
        return self._density[g]

    def density_sqrt(self, g: Perm, power: float = 0.5) -> FockOperator:
        winner = self.radon_nikodym_resolution(g).winner
        return self._density_product(tuple(g), winner, power)

    def density_spectrum(self, g: Perm) -> List[float]:
        """Products of the p- and q-ratios over supp(g), one per choice of factor."""
        sysm = self.system
        gi = inverse(g)
        values = [1.0]
        for k in sysm.support(g):
            ratios = (float(sysm.p[gi[k]] / sysm.p[k]), float(sysm.q[gi[k]] / sysm.q[k]))
            values = [v * r for v in values for r in ratios]
        return sorted(values)

    # -- standard implementation --

    def standard_implementation(self, g: Perm) -> FockOperator:
        """U: x Omega -> alpha_g(x) h_g^{1/2} Omega, solved over the monomial basis."""
        g = tuple(g)
        if g not in self._unitary:
            mono = self.car.monomials
            start = self.density_sqrt(g).apply(self.vacuum())
            images = mono.vectors(start, relabel=g)
            # U V = W  <=>  V^T U^T = W^T
            ut = scipy.linalg.lu_solve(mono._lu, images.T, trans=1)
            self._unitary[g] = FockOperator(ut.T)
        return self._unitary[g]

    def modular_conjugation(self) -> FockOperator:
        return self.car.modular_conjugation()

    def commutant_density(self, g: Perm) -> FockOperator:
        """J h_g^{1/2} J"""
        j = self.modular_conjugation()
        return j @ self.density_sqrt(g) @ j

    # -- shifts --

    def permutation_operator(self, g: Perm) -> FockOperator:
        return self.space.permutation_operator(self.action.extend(g))

    def _scaling_ratio(self, g: Perm, mask: int) -> float:
        rep = self.car.rep
        value = 1.0
        for s in mask_members(mask):
            value *= rep.d(self.action.act(g, s)) / rep.d(s)
        return value

    def multiplier(self, g: Perm) -> FockOperator:
        """f on target symbols with V_g = iota(f) pi_g."""
        gi = inverse(g)
        rep = self.car.rep
        act = self.action.act

        def f(symbol):
            value = 1.0
            for y in symbol:
                value *= rep.d(y) / rep.d(act(gi, y))
            return value

        return self.space.diagonal_embed(f)

    def multiplier_literal(self, g: Perm) -> FockOperator:
        """f([x_1..x_n]) = prod d(g.x_i) / prod d(x_i); V_g = pi_g iota(f)."""
        rep = self.car.rep
        act = self.action.act

        def f(symbol):
            value = 1.0
            for x in symbol:
                value *= rep.d(act(g, x)) / rep.d(x)
            return value

        return self.space.diagonal_embed(f)

    def shift_operator(self, g: Perm) -> FockOperator:
        ext = self.action.extend(g)
        mat = np.zeros((self.car.dim, self.car.dim))
        for mask in range(self.car.dim):
            sign, target = self.space.permute_mask(ext, mask)
            mat[target, mask] = sign * self._scaling_ratio(g, mask)
        return FockOperator(mat)

    # -- Bernoulli subspace --

    def bernoulli_basis(self) -> List[int]:
        ix = self.index_set
        return [mask for mask in range(self.car.dim) if ix.is_paired(mask)]

    def bernoulli_projection(self) -> FockOperator:
        diag = np.zeros(self.car.dim)
        diag[self.bernoulli_basis()] = 1.0
        return FockOperator(np.diag(diag))

    def diagonal_span_projection(self) -> FockOperator:
        """Projection onto the span of {products of c_x* c_x} Omega."""
        vac = self.vacuum()
        vectors = []
        for subset in range(1 << self.d):
            v = vac
            for k in range(self.d):
                if subset >> k & 1:
                    v = self.number_projection(k).apply(v)
            vectors.append(v)
        basis = scipy.linalg.orth(np.array(vectors).T)
        return FockOperator(basis @ basis.conj().T)

    def boundary_identities(self, x: Label) -> Dict[str, float]:
        k = self.index_set.index(x)
        if not self.index_set.is_base(k):
            raise PreconditionError("boundary identities are indexed by X0")
        ik = self.index_set.partner(k)
        sp, rep = self.space, self.car.rep
        lx, lix = sp.create_left(k), sp.create_left(ik)
        dx, dix = rep.d(k), rep.d(ik)
        e = self.bernoulli_projection()
        c = self.car.car_element(k)

        expansion = (dx * dix) * (lx @ lix) + dx ** 2 * (lx @ lx.H) \
            + dix ** 2 * (lix.H @ lix) + (dix * dx) * (lix.H @ lx.H)
        t = lx @ lix @ e
        tt = t.H @ t
        f = lix @ lx @ e
        return {
            "hole-expansion": (2 * (c @ c.H)).residual(expansion),
            "pair-partial-isometry": max((tt @ tt).residual(tt), (t @ tt).residual(t)),
            "number-factorization": (lx @ lx.H @ e).residual(f @ f.H),
        }

    def bernoulli_shift_residual(self, g: Perm) -> float:
        u = self.standard_implementation(g)
        worst = 0.0
        for k in range(self.d):
            moved = u @ self.number_projection(k) @ u.H
            worst = max(worst, moved.residual(self.number_projection(g[k])))
        return worst

    def low_sector_intertwining_residual(self, g: Perm) -> float:
        """U_g = J h^{1/2} J V_g on the 0- and 1-particle sectors."""
        diff = self.standard_implementation(g) - self.commutant_density(g) @ self.shift_operator(g)
        cols = [m for m in range(self.car.dim) if bin(m).count("1") <= 1]
        return float(np.max(np.abs(diff.matrix[:, cols])))
