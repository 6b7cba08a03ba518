from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse

from core.bernoulli import BernoulliDynamics, Perm, compose, inverse
from core.errors import CapExceededError
from core.fock import FockOperator

DEFAULT_DIM_CAP = 4096
# commutant kernel on B(F) has 16^|X0| unknowns
MAX_KERNEL_MODES = 3
# generic closure on dim^2-long vectors, cross-check only
CLOSURE_CHECK_DIM = 64
EXACT_KEYS = ("right-algebra-dimension", "left-commutant-dimension", "right-closure-dimension")


def regular_left(dyn: BernoulliDynamics, g: Perm) -> np.ndarray:
    """lambda_g delta_h = delta_{gh}"""
    action = dyn.action
    n = action.order
    mat = np.zeros((n, n))
    for k, h in enumerate(action.elements):
        mat[action.element_index(compose(g, h)), k] = 1.0
    return mat


def regular_right(dyn: BernoulliDynamics, g: Perm) -> np.ndarray:
    """rho_g delta_h = delta_{h g^-1}"""
    action = dyn.action
    n = action.order
    gi = inverse(g)
    mat = np.zeros((n, n))
    for k, h in enumerate(action.elements):
        mat[action.element_index(compose(h, gi)), k] = 1.0
    return mat


def matrix_unit(n: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((n, n))
    e[i, j] = 1.0
    return e


@dataclass
class CrossedRep:
    """Standard representation of the crossed product on F (x) l2(G); index f*|G| + k."""

    dyn: BernoulliDynamics
    left: Dict[str, np.ndarray]
    right: Dict[str, np.ndarray]
    conjugation: FockOperator
    fock_conjugation: FockOperator
    unitaries: Dict[Perm, np.ndarray] = field(default_factory=dict)

    @property
    def group_order(self) -> int:
        return self.dyn.action.order

    @property
    def fock_dim(self) -> int:
        return self.dyn.car.dim

    @property
    def dim(self) -> int:
        return self.fock_dim * self.group_order

    def right_embedding(self, b: np.ndarray) -> np.ndarray:
        """pi_r(b) = sum_h U_h b U_h^* (x) e_{hh}"""
        n = self.group_order
        out = np.zeros((self.dim, self.dim))
        for k, h in enumerate(self.dyn.action.elements):
            u = self.unitaries[h]
            out += np.kron(u @ b @ u.conj().T, matrix_unit(n, k, k))
        return out

    def conjugate(self, a: np.ndarray) -> np.ndarray:
        """J a J for a linear operator a."""
        j = self.conjugation.matrix
        return j @ np.conj(a) @ j


def build_crossed_rep(dyn: BernoulliDynamics, dim_cap: int = DEFAULT_DIM_CAP) -> CrossedRep:
    action = dyn.action
    n = action.order
    dim = dyn.car.dim * n
    if dim > dim_cap:
        raise CapExceededError(f"crossed product dimension {dim} exceeds cap {dim_cap}")

    unitaries = {g: dyn.standard_implementation(g).matrix for g in action.elements}
    jm = dyn.modular_conjugation()
    one_f = np.eye(dyn.car.dim)
    one_g = np.eye(n)

    left: Dict[str, np.ndarray] = {}
    right: Dict[str, np.ndarray] = {}
    for g in action.symmetric_generators:
        name = action.describe(g)
        left[f"U{name} x lambda"] = np.kron(unitaries[g], regular_left(dyn, g))
        right[f"1 x rho{name}"] = np.kron(one_f, regular_right(dyn, g))

    j = np.zeros((dim, dim))
    for k, h in enumerate(action.elements):
        j += np.kron(unitaries[h] @ jm.matrix, matrix_unit(n, k, action.element_index(inverse(h))))
    rep = CrossedRep(dyn, left, right, FockOperator(j, antilinear=True), jm, unitaries)

    for x in dyn.index_set.base_labels:
        c = dyn.car.car_element(x)
        left[f"c[{x}] x 1"] = np.kron(c.matrix, one_g)
        left[f"c[{x}]* x 1"] = np.kron(c.H.matrix, one_g)
        b = (jm @ c @ jm).matrix
        right[f"pi_r(J c[{x}] J)"] = rep.right_embedding(b)
        right[f"pi_r(J c[{x}]* J)"] = rep.right_embedding(b.conj().T)
    return rep


# ---- dimensions ----

def algebra_closure(generators: List[np.ndarray], tol: float = 1e-8, limit: Optional[int] = None) -> np.ndarray:
    """Orthonormal basis (rows, vectorised) of the unital algebra generated by ``generators``."""
    dim = generators[0].shape[0]
    width = dim * dim
    dtype = np.result_type(*generators, float)
    rows = np.empty((min(64, width), width), dtype=dtype)
    count = 0
    frontier = [np.eye(dim, dtype=dtype)]

    def add(mat: np.ndarray) -> bool:
        nonlocal rows, count
        v = mat.ravel().astype(dtype)
        scale = np.linalg.norm(v)
        if scale < tol:
            return False
        q = rows[:count]
        # two passes keep the basis orthonormal to working precision
        v = v - q.T @ (q.conj() @ v)
        v = v - q.T @ (q.conj() @ v)
        norm = np.linalg.norm(v)
        if norm <= tol * max(scale, 1.0):
            return False
        if count == rows.shape[0]:
            grown = np.empty((min(2 * count, width), width), dtype=dtype)
            grown[:count] = rows[:count]
            rows = grown
        rows[count] = v / norm
        count += 1
        return True

    add(frontier[0])
    while frontier:
        nxt = []
        for a in frontier:
            for gen in generators:
                prod = gen @ a
                if add(prod):
                    nxt.append(prod)
                    if limit is not None and count > limit:
                        raise CapExceededError(f"algebra dimension exceeds {limit}")
        frontier = nxt
    return rows[:count].copy()


def span_residual(basis: np.ndarray, mat: np.ndarray) -> float:
    v = mat.ravel()
    return float(np.linalg.norm(v - basis.T @ (basis.conj() @ v)))


def block_diagonal(a: np.ndarray, n: int) -> np.ndarray:
    """Concatenated diagonal blocks a[k::n, k::n] of an operator on F (x) l2(G)."""
    return np.concatenate([a[k::n, k::n].ravel() for k in range(n)])


@dataclass
class RightSpan:
    """Span of pi_r(b)(1 (x) rho_g), b in J_M M J_M, g in G.

    Every operator splits uniquely as sum_g X_g (1 (x) rho_g) with X_g block diagonal,
    so membership is decided blockwise against ``basis`` (orthonormal rows, vectorised
    block diagonals of the pi_r(b)).
    """

    rep: CrossedRep
    elements: List[np.ndarray]
    basis: np.ndarray
    shifts: List[np.ndarray]

    @property
    def dim(self) -> int:
        return self.basis.shape[0] * self.rep.group_order

    def residual(self, a: np.ndarray) -> float:
        n = self.rep.group_order
        total = 0.0
        for shift in self.shifts:
            v = block_diagonal(a @ shift.T, n)
            v = v - self.basis.T @ (self.basis.conj() @ v)
            total += float(np.vdot(v, v).real)
        return sqrt(total)

    def relative_residual(self, a: np.ndarray) -> float:
        return self.residual(a) / max(float(np.linalg.norm(a)), 1.0)

    def random_element(self, rng: np.random.Generator) -> np.ndarray:
        out = np.zeros((self.rep.dim, self.rep.dim), dtype=np.result_type(*self.elements, float))
        for shift in self.shifts:
            coef = rng.normal(size=len(self.elements))
            b = sum(c * e for c, e in zip(coef, self.elements))
            out = out + self.rep.right_embedding(b) @ shift
        return out


def right_algebra_span(rep: CrossedRep, tol: float = 1e-9) -> RightSpan:
    dyn = rep.dyn
    monomials = dyn.car.monomials
    jm = rep.fock_conjugation.matrix
    units = np.eye(monomials.size)
    elements = [jm @ np.conj(monomials.combine(units[i]).matrix) @ jm for i in range(monomials.size)]
    vectors = []
    for b in elements:
        blocks = [rep.unitaries[h] @ b @ rep.unitaries[h].conj().T for h in dyn.action.elements]
        vectors.append(np.concatenate([blk.ravel() for blk in blocks]))
    basis = scipy.linalg.orth(np.array(vectors).T, rcond=tol).T
    one_f = np.eye(rep.fock_dim)
    shifts = [np.kron(one_f, regular_right(dyn, g)) for g in dyn.action.elements]
    return RightSpan(rep, elements, basis, shifts)


def span_closure_residual(span: RightSpan, generators: List[np.ndarray], rng: np.random.Generator,
                          samples: int = 2) -> float:
    """Worst relative distance of s X and X s from the span, X random in the span.

    A linear map that vanishes on a Gaussian random vector vanishes identically
    with probability one, so a few samples decide closure.
    """
    worst = 0.0
    for _ in range(samples):
        x = span.random_element(rng)
        scale = max(np.linalg.norm(x), 1.0)
        for s in generators:
            worst = max(worst, span.residual(s @ x) / scale, span.residual(x @ s) / scale)
    return worst


def _commutator_operator(a: np.ndarray) -> scipy.sparse.csr_matrix:
    """vec(a T - T a) = (a (x) 1 - 1 (x) a^T) vec(T), row-major vec."""
    n = a.shape[0]
    sa = scipy.sparse.csr_matrix(a)
    one = scipy.sparse.identity(n, format="csr")
    return (scipy.sparse.kron(sa, one) - scipy.sparse.kron(one, sa.T)).tocsr()


def commutant_basis(generators: List[np.ndarray], tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (columns, vectorised) of {T : [T, a] = 0 for all generators a}."""
    n = generators[0].shape[0]
    gram = scipy.sparse.csr_matrix((n * n, n * n))
    for a in generators:
        k = _commutator_operator(a)
        gram = gram + (k.T @ k)
    values, vectors = np.linalg.eigh(gram.toarray())
    return vectors[:, values < tol]


def left_commutant_dimension(rep: CrossedRep, tol: float = 1e-9) -> Tuple[int, int]:
    """(dim M', dim of the commutant of the left crossed-product algebra).

    The commutant of {c_x (x) 1} is the set of block matrices sum t_kl (x) e_kl with
    t_kl in M'; commuting with U_g (x) lambda_g forces t_{gk,gl} = U_g t_kl U_g^*.
    """
    dyn = rep.dyn
    if dyn.index_set.d > MAX_KERNEL_MODES:
        raise CapExceededError(f"commutant kernel supports |X0| <= {MAX_KERNEL_MODES}")
    fock = [c.matrix for c in dyn.car.car_elements()]
    fock += [c.T.conj() for c in fock]
    basis = commutant_basis(fock, tol)
    m = basis.shape[1]
    action = dyn.action
    n = action.order
    fd = rep.fock_dim

    blocks = []
    for g in action.symmetric_generators:
        u = rep.unitaries[g]
        images = np.array([(u @ basis[:, i].reshape(fd, fd) @ u.conj().T).ravel() for i in range(m)]).T
        ad, *_ = np.linalg.lstsq(basis, images, rcond=None)
        constraint = np.zeros((n * n * m, n * n * m))
        for k, h in enumerate(action.elements):
            gk = action.element_index(compose(g, h))
            for l, h2 in enumerate(action.elements):
                gl = action.element_index(compose(g, h2))
                row = (gk * n + gl) * m
                col = (k * n + l) * m
                constraint[row:row + m, row:row + m] += np.eye(m)
                constraint[row:row + m, col:col + m] -= ad
        blocks.append(constraint)
    if not blocks:
        return m, n * n * m
    stacked = np.vstack(blocks)
    rank = np.linalg.matrix_rank(stacked, tol=max(tol, 1e-8) * max(1.0, np.abs(stacked).max()))
    return m, n * n * m - int(rank)


# ---- checks ----

def _max_entry(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def commutation_suite(rep: CrossedRep, tol: float = 1e-9,
                      rng: Optional[np.random.Generator] = None) -> Dict[str, float]:
    """Residuals of the commutation and conjugation identities; dimension entries are exact counts."""
    out: Dict[str, float] = {}
    dim = rep.dim
    j = rep.conjugation

    worst = 0.0
    for a in rep.left.values():
        for b in rep.right.values():
            worst = max(worst, _max_entry(a @ b - b @ a))
    out["left-right-commute"] = worst

    j2 = j @ j
    out["conjugation-involution"] = _max_entry(j2.matrix - np.eye(dim))
    out["conjugation-antiunitary"] = _max_entry(j.matrix @ j.matrix.conj().T - np.eye(dim))

    jm = rep.fock_conjugation.matrix
    n = rep.group_order
    e = rep.dyn.action.element_index(rep.dyn.action.identity)
    out["conjugation-identity-block"] = _max_entry(j.matrix[e::n, e::n] - jm)

    worst = 0.0
    for g in rep.dyn.action.elements:
        u = rep.unitaries[g]
        worst = max(worst, _max_entry(u @ jm - jm @ np.conj(u)))
    out["implementation-commutes-with-J"] = worst

    worst_field = worst_group = 0.0
    for x in rep.dyn.index_set.base_labels:
        c = rep.dyn.car.car_element(x)
        for a in (c, c.H):
            lhs = rep.conjugate(np.kron(a.matrix, np.eye(n)))
            b = (rep.fock_conjugation @ a @ rep.fock_conjugation).matrix
            worst_field = max(worst_field, _max_entry(lhs - rep.right_embedding(b)))
    for g in rep.dyn.action.symmetric_generators:
        lhs = rep.conjugate(np.kron(rep.unitaries[g], regular_left(rep.dyn, g)))
        worst_group = max(worst_group, _max_entry(lhs - np.kron(np.eye(rep.fock_dim), regular_right(rep.dyn, g))))
    out["conjugated-fields"] = worst_field
    out["conjugated-group"] = worst_group

    span = right_algebra_span(rep, tol)
    right_generators = list(rep.right.values())
    out["right-generators-in-span"] = max(span.relative_residual(s) for s in right_generators)
    out["right-span-closed"] = span_closure_residual(span, right_generators, rng or np.random.default_rng(0))
    out["conjugated-left-in-right-span"] = max(span.relative_residual(rep.conjugate(a)) for a in rep.left.values())

    _, commutant_dim = left_commutant_dimension(rep, tol)
    out["right-algebra-dimension"] = float(span.dim)
    out["left-commutant-dimension"] = float(commutant_dim)
    if rep.dim <= CLOSURE_CHECK_DIM:
        out["right-closure-dimension"] = float(algebra_closure(right_generators, max(tol, 1e-8)).shape[0])
    return out
