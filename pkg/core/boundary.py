from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.bernoulli import GroupAction, Perm, inverse
from core.errors import CapExceededError, PreconditionError
from core.fock import Create, Diagonal, FockSpace, FockVector, IndexSet, Symbol, members_mask

Weight = Dict[int, Fraction]


@dataclass(frozen=True)
class ZSymbol:
    """[x_1, ..., x_n] with distinct entries of X, kept sorted; () is the empty symbol."""

    elements: Tuple[int, ...] = ()

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.elements, self.elements[1:])):
            raise PreconditionError(f"symbol entries must be strictly increasing: {self.elements}")

    @classmethod
    def of(cls, items: Iterable[int]) -> "ZSymbol":
        items = [int(k) for k in items]
        if len(set(items)) != len(items):
            raise PreconditionError(f"symbol has repeated entries: {items}")
        return cls(tuple(sorted(items)))

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def empty(self) -> bool:
        return not self.elements

    def __contains__(self, k: int) -> bool:
        return k in self.elements

    def insert(self, k: int) -> "ZSymbol":
        if k in self.elements:
            raise PreconditionError(f"{k} is already in {self.elements}")
        return ZSymbol.of(self.elements + (k,))

    def mask(self) -> int:
        return members_mask(self.elements)


# ---- lengths ----

@dataclass
class LengthPair:
    """|.|_X on X and |.|_G on the group, from Schreier-graph distances."""

    action: GroupAction
    representatives: Tuple[int, ...]          # orbit representative of each base point
    distances: Dict[int, Dict[int, int]]      # base point -> distances inside its orbit
    group_lengths: Dict[Perm, int] = field(default_factory=dict)

    @property
    def index_set(self) -> IndexSet:
        return self.action.index_set

    def x(self, k: int) -> int:
        d = self.index_set.d
        base = k % d
        return self.distances[self.representatives[base]][base]

    def g(self, g: Perm) -> int:
        return self.group_lengths[tuple(g)]

    def weighted(self, z: ZSymbol) -> int:
        return sum(self.x(k) for k in z.elements)


def _orbit_distances(start: int, generators: Sequence[Perm]) -> Dict[int, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        k = queue.popleft()
        for s in generators:
            j = s[k]
            if j not in dist:
                dist[j] = dist[k] + 1
                queue.append(j)
    return dist


def build_lengths(action: GroupAction, generators: Optional[Sequence[Sequence[int]]] = None) -> LengthPair:
    if generators is None:
        gens = list(action.symmetric_generators)
    else:
        gens = [tuple(int(v) for v in s) for s in generators]
        gens = list(dict.fromkeys(gens + [inverse(s) for s in gens]))
        try:
            closure = GroupAction(action.index_set, gens, max_order=action.order)
        except CapExceededError:
            closure = None
        if closure is None or set(closure.elements) != set(action.elements):
            raise PreconditionError("the chosen set does not generate the acting group")

    d = action.index_set.d
    distances = {k: _orbit_distances(k, gens) for k in range(d)}
    reps = [0] * d
    for k in range(d):
        reps[k] = min(distances[k])
    lengths = LengthPair(action, tuple(reps), distances)
    for g in action.elements:
        lengths.group_lengths[g] = max((distances[k][g[k]] for k in range(d)), default=0)
    return lengths


def check_length_axioms(lengths: LengthPair) -> Dict[str, bool]:
    action = lengths.action
    elements = action.elements
    ix = lengths.index_set
    trivial = action.identity
    return {
        "kernel": all((lengths.g(g) == 0) == (g == trivial) for g in elements),
        "symmetry": all(lengths.g(g) == lengths.g(inverse(g)) for g in elements),
        "subadditivity": all(lengths.g(action.multiply(g, h)) <= lengths.g(g) + lengths.g(h)
                             for g in elements for h in elements),
        "point-bound": all(lengths.x(action.act(g, k)) <= lengths.g(g) + lengths.x(k)
                           for g in elements for k in range(ix.size)),
        "partner-symmetry": all(lengths.x(k) == lengths.x(ix.partner(k)) for k in range(ix.size)),
        "representatives": all(lengths.x(r) == 0 for r in lengths.representatives),
    }


def ball_count(lengths: LengthPair, radius: int) -> int:
    """Number of symbols z with |z|_0 + |z|_1 <= radius."""
    if radius < 0:
        return 0
    counts = [0] * (radius + 1)
    counts[0] = 1
    for k in range(lengths.index_set.size):
        w = 1 + lengths.x(k)
        for total in range(radius, w - 1, -1):
            counts[total] += counts[total - w]
    return sum(counts)


# ---- weights ----

def act_symbol(action: GroupAction, g: Perm, z: ZSymbol) -> ZSymbol:
    return ZSymbol.of(action.act(g, k) for k in z.elements)


def push_forward(action: GroupAction, g: Perm, weight: Weight) -> Weight:
    return {action.act(g, k): v for k, v in weight.items()}


def l1(a: Mapping[int, Fraction], b: Mapping[int, Fraction]) -> Fraction:
    keys = set(a) | set(b)
    return sum((abs(Fraction(a.get(k, 0)) - Fraction(b.get(k, 0))) for k in keys), Fraction(0))


def omega(lengths: LengthPair, z: ZSymbol) -> Weight:
    n = z.n
    return {k: Fraction(n + lengths.x(k)) for k in z.elements}


def mu(lengths: LengthPair, z: ZSymbol) -> Weight:
    if z.empty:
        # point mass at the first element of X
        return {0: Fraction(1)}
    w = omega(lengths, z)
    total = sum(w.values())
    return {k: v / total for k, v in w.items()}


@dataclass(frozen=True)
class Defect:
    defect: Fraction
    bound: Optional[Fraction]
    omega_defect: Fraction
    omega_bound: Fraction

    @property
    def holds(self) -> bool:
        if self.omega_defect > self.omega_bound:
            return False
        return self.bound is None or self.defect <= self.bound


def equivariance_defect(lengths: LengthPair, g: Perm, z: ZSymbol) -> Defect:
    if z.empty:
        raise PreconditionError("equivariance defect is defined for non-empty symbols")
    action = lengths.action
    gz = act_symbol(action, g, z)
    n, n1, lg = z.n, lengths.weighted(z), lengths.g(g)
    return Defect(
        defect=l1(push_forward(action, g, mu(lengths, z)), mu(lengths, gz)),
        bound=Fraction(2 * lg * n, n * n + n1),
        omega_defect=l1(push_forward(action, g, omega(lengths, z)), omega(lengths, gz)),
        omega_bound=Fraction(n * lg),
    )


def extension_defect(lengths: LengthPair, x: int, z: ZSymbol) -> Defect:
    if x in z:
        raise PreconditionError(f"{x} already occurs in {z.elements}")
    xz = z.insert(x)
    n, n1 = z.n, lengths.weighted(z)
    omega_bound = Fraction(2 * n + 1 + lengths.x(x))
    return Defect(
        defect=l1(mu(lengths, z), mu(lengths, xz)),
        # mu of the empty symbol is a convention, no bound is claimed there
        bound=None if z.empty else Fraction(2, n * n + n1) * omega_bound,
        omega_defect=l1(omega(lengths, z), omega(lengths, xz)),
        omega_bound=omega_bound,
    )


def sup_norm(phi: Mapping[int, Number]) -> float:
    return max((abs(v) for v in phi.values()), default=0)


def mu_star(lengths: LengthPair, phi: Mapping[int, Number], z: ZSymbol):
    return sum(phi.get(k, 0) * v for k, v in mu(lengths, z).items())


def mu_star_diagonal(lengths: LengthPair, phi: Mapping[int, Number]) -> Callable[[Symbol], complex]:
    """Symbol function of iota(mu*(phi))."""
    return lambda s: complex(mu_star(lengths, phi, ZSymbol(tuple(s))))


def ucp_equivariance(lengths: LengthPair, g: Perm, phi: Mapping[int, Number], z: ZSymbol) -> Tuple[float, float]:
    """(|(g.mu*phi)(z) - mu*(g.phi)(z)|, bound * ||phi||)"""
    if z.empty:
        raise PreconditionError("ucp equivariance is checked on non-empty symbols")
    action = lengths.action
    gi = inverse(g)
    moved_phi = {action.act(g, k): v for k, v in phi.items()}
    lhs = mu_star(lengths, phi, act_symbol(action, gi, z))
    rhs = mu_star(lengths, moved_phi, z)
    bound = equivariance_defect(lengths, gi, z).bound
    return float(abs(lhs - rhs)), float(bound) * float(sup_norm(phi))


# ---- operator identities on the Fock space ----

def _inserted(f: Callable[[Symbol], complex], x: int) -> Callable[[Symbol], complex]:
    return lambda s: 0.0 if x in s else f(tuple(sorted(s + (x,))))


def _avoiding(x: int) -> Callable[[Symbol], complex]:
    return lambda s: 0.0 if x in s else 1.0


def _distance(a: FockVector, b: FockVector) -> float:
    return (a - b).norm()


def commutation_identities(space: FockSpace, f: Callable[[Symbol], complex], x: int,
                           vectors: Sequence[FockVector]) -> Dict[str, float]:
    """Residuals of f l(x) = l(x) f([x,.]) and l(x) f = l(x) f 1_{avoid x}, plus the r(x) forms."""
    out = {}
    fx = Diagonal(f)
    shifted = Diagonal(_inserted(f, x))
    avoid = Diagonal(_avoiding(x))
    for name, right in (("left", False), ("right", True)):
        create = Create(x, right=right)
        first = second = 0.0
        for v in vectors:
            first = max(first, _distance(space.apply([fx, create], v), space.apply([create, shifted], v)))
            second = max(second, _distance(space.apply([create, fx], v), space.apply([create, fx, avoid], v)))
        out[f"{name}.shift"] = first
        out[f"{name}.restrict"] = second
    return out


@dataclass
class DecayRow:
    n: int
    weighted: int
    value: float
    bound: float


@dataclass
class DecayTable:
    x: int
    right: bool
    rows: List[DecayRow]

    @property
    def dominated(self) -> bool:
        return all(r.value <= r.bound + 1e-12 for r in self.rows)

    @property
    def decreasing(self) -> bool:
        bounds = [r.bound for r in self.rows]
        return all(b < a for a, b in zip(bounds, bounds[1:]))

    @property
    def final_bound(self) -> float:
        return self.rows[-1].bound if self.rows else float("inf")


def commutator_decay(space: FockSpace, lengths: LengthPair, phi: Mapping[int, Number], x: int,
                     symbols: Sequence[ZSymbol], right: bool = False) -> DecayTable:
    """||[iota(mu* phi), l(x)] b_z|| (or r(x)) along a sequence of non-empty symbols."""
    diag = Diagonal(mu_star_diagonal(lengths, phi))
    create = Create(x, right=right)
    norm_phi = float(sup_norm(phi))
    rows = []
    for z in symbols:
        if z.empty:
            continue
        v = FockVector.basis(z.mask())
        comm = space.apply([diag, create], v) - space.apply([create, diag], v)
        n, n1 = z.n, lengths.weighted(z)
        bound = 2.0 / (n * n + n1) * (2 * n + 1 + lengths.x(x)) * norm_phi
        rows.append(DecayRow(n, n1, comm.norm(), bound))
    return DecayTable(x, right, rows)


def paired_symbols(lengths: LengthPair, max_pairs: int) -> List[ZSymbol]:
    """I-paired symbols built from at most ``max_pairs`` base points."""
    ix = lengths.index_set
    out = []
    for mask in range(1 << ix.d):
        base = [k for k in range(ix.d) if mask >> k & 1]
        if len(base) <= max_pairs:
            out.append(ZSymbol.of(base + [ix.partner(k) for k in base]))
    return out


def paired_commutator(space: FockSpace, lengths: LengthPair, phi: Mapping[int, Number], x: int,
                      z: ZSymbol) -> Tuple[float, float]:
    """||[iota(mu* phi) e, l(x) l(Ix) e] b_z|| and the two-step extension bound."""
    ix = lengths.index_set
    if not ix.is_paired(z.mask()):
        raise PreconditionError("paired commutator needs an I-paired symbol")
    if z.empty:
        raise PreconditionError("paired commutator bound needs a non-empty symbol")
    ixx = ix.partner(x)
    paired = Diagonal(lambda s: 1.0 if ix.is_paired(members_mask(s)) else 0.0)
    diag = Diagonal(mu_star_diagonal(lengths, phi))
    word = [Create(x), Create(ixx), paired]
    v = FockVector.basis(z.mask())
    comm = space.apply([diag, paired] + word, v) - space.apply(word + [diag, paired], v)
    if x in z:
        return comm.norm(), 0.0
    step = extension_defect(lengths, ixx, z)
    second = extension_defect(lengths, x, z.insert(ixx))
    bound = (float(step.bound) + float(second.bound)) * float(sup_norm(phi))
    return comm.norm(), bound


def random_symbol(rng: np.random.Generator, size: int, max_n: int, min_n: int = 1) -> ZSymbol:
    n = int(rng.integers(min_n, max_n + 1))
    return ZSymbol.of(rng.choice(size, size=min(n, size), replace=False).tolist())
