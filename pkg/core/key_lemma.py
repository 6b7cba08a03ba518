"""Pair isometries, sector projections, scaling elements and the sector-wise
decomposition of the standard implementation U_g."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import sqrt
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.bernoulli import BernoulliDynamics, Perm
from core.errors import PreconditionError
from core.fock import FockOperator, Label, mask_members, members_mask


def _base_index(dyn: BernoulliDynamics, x: Label) -> int:
    k = dyn.index_set.index(x)
    if not dyn.index_set.is_base(k):
        raise PreconditionError(f"{dyn.index_set.label(k)} is not in X0")
    return k


def pair_isometries(dyn: BernoulliDynamics, x: Label) -> Tuple[FockOperator, FockOperator]:
    k = _base_index(dyn, x)
    ik = dyn.index_set.partner(k)
    lx, lix = dyn.space.create_left(k), dyn.space.create_left(ik)
    v = lx @ lix
    w = lx @ lix.H + lix @ lx.H + lx.H @ lix.H
    return v, w


def partial_isometry_residual(v: FockOperator) -> float:
    return (v @ v.H @ v).residual(v)


def subsets(items: Sequence[int]) -> List[Tuple[int, ...]]:
    return [c for r in range(len(items) + 1) for c in combinations(items, r)]


@dataclass
class SectorProjection:
    g: Perm
    F: Tuple[int, ...]
    matrix: FockOperator
    basis: List[int]  # Slater masks spanning K_{g,F}

    def combinatorial(self, dim: int) -> FockOperator:
        diag = np.zeros(dim)
        diag[self.basis] = 1.0
        return FockOperator(np.diag(diag))

    def residual(self) -> float:
        return self.matrix.residual(self.combinatorial(self.matrix.dim))


def sector_basis(dyn: BernoulliDynamics, g: Perm, F: Sequence[int]) -> List[int]:
    ix = dyn.index_set
    supp = dyn.system.support(g)
    required = members_mask(list(F) + [ix.partner(k) for k in F])
    rest = [y for y in supp if y not in F]
    out = []
    for mask in range(dyn.car.dim):
        if mask & required != required:
            continue
        if any(mask >> y & 1 and mask >> ix.partner(y) & 1 for y in rest):
            continue
        out.append(mask)
    return out


def sector_projection(dyn: BernoulliDynamics, g: Perm, F: Iterable[Label]) -> SectorProjection:
    g = tuple(g)
    F = tuple(sorted(_base_index(dyn, x) for x in F))
    supp = dyn.system.support(g)
    if not set(F) <= set(supp):
        raise PreconditionError(f"F = {dyn.index_set.names(F)} is not inside supp(g) = {dyn.index_set.names(supp)}")
    out = dyn.space.identity()
    for y in supp:
        v, w = pair_isometries(dyn, y)
        out = out @ (v @ v.H if y in F else w @ w.H)
    return SectorProjection(g, F, out, sector_basis(dyn, g, F))


def sector_projections(dyn: BernoulliDynamics, g: Perm) -> List[SectorProjection]:
    return [sector_projection(dyn, g, F) for F in subsets(dyn.system.support(g))]


def resolution_check(dyn: BernoulliDynamics, g: Perm) -> Dict[str, float]:
    projections = sector_projections(dyn, g)
    total = sum((p.matrix.matrix for p in projections), np.zeros((dyn.car.dim, dyn.car.dim)))
    orth = 0.0
    for a, b in combinations(projections, 2):
        orth = max(orth, float(np.max(np.abs(a.matrix.matrix @ b.matrix.matrix))))
    return {
        "sum": float(np.max(np.abs(total - np.eye(dyn.car.dim)))),
        "orthogonality": orth,
        "projection": max((p.matrix @ p.matrix).residual(p.matrix) for p in projections),
        "combinatorial": max(p.residual() for p in projections),
        "diagonal": max(float(np.max(np.abs(p.matrix.matrix - np.diag(np.diag(p.matrix.matrix)))))
                        for p in projections),
    }


# ---- scaling elements ----

def scaling_element(dyn: BernoulliDynamics, x: Label, image: Optional[int] = None) -> FockOperator:
    """Z_x = d(x)^2 c c* - d(Ix)^2 c* c, with c = c_{image} when relabelled."""
    k = _base_index(dyn, x)
    rep = dyn.car.rep
    c = dyn.car.car_element(k if image is None else image)
    return rep.d(k) ** 2 * (c @ c.H) - rep.d(dyn.index_set.partner(k)) ** 2 * (c.H @ c)


def scaling_inverse(dyn: BernoulliDynamics, x: Label) -> FockOperator:
    k = _base_index(dyn, x)
    rep = dyn.car.rep
    c = dyn.car.car_element(k)
    return (1 / rep.d(k) ** 2) * (c @ c.H) - (1 / rep.d(dyn.index_set.partner(k)) ** 2) * (c.H @ c)


def scaling_product(dyn: BernoulliDynamics, F: Iterable[Label], g: Optional[Perm] = None) -> FockOperator:
    """Z_F, or alpha_g(Z_F) when g is given."""
    out = dyn.space.identity()
    for x in F:
        k = _base_index(dyn, x)
        out = out @ scaling_element(dyn, k, None if g is None else g[k])
    return out


def scaling_product_inverse(dyn: BernoulliDynamics, F: Iterable[Label]) -> FockOperator:
    out = dyn.space.identity()
    for x in F:
        out = out @ scaling_inverse(dyn, x)
    return out


def r_constant(n: int, m: int) -> float:
    """sqrt(m+1) ... sqrt(m+2n)"""
    value = 1.0
    for k in range(m + 1, m + 2 * n + 1):
        value *= sqrt(k)
    return value


def _delta(dyn: BernoulliDynamics, k: int, hatted: bool = False) -> np.ndarray:
    vec = np.zeros(dyn.index_set.size)
    vec[k] = dyn.car.rep.d(k) if hatted else 1.0
    return vec


def _paired_prefix(dyn: BernoulliDynamics, F: Sequence[int]) -> List[np.ndarray]:
    out = []
    for k in F:
        out.append(_delta(dyn, k, hatted=True))
        out.append(_delta(dyn, dyn.index_set.partner(k), hatted=True))
    return out


def admissible_samples(dyn: BernoulliDynamics, g: Perm, F: Sequence[int], max_m: int) -> List[Tuple[int, ...]]:
    ix = dyn.index_set
    blocked = set(F) | {ix.partner(k) for k in F}
    supp = set(dyn.system.support(g))
    free = [y for y in range(ix.size) if y not in blocked]
    out = []
    for m in range(max_m + 1):
        for ys in combinations(free, m):
            if any(y in supp and ix.partner(y) in ys for y in ys):
                continue
            out.append(ys)
    return out


def zf_action_check(dyn: BernoulliDynamics, g: Perm, F: Iterable[Label],
                    samples: Sequence[Sequence[int]]) -> Dict[Tuple[int, ...], float]:
    """Residual of Z_F (y_1^..^y_m) = r_{F,m} (x1^Ix1)^..^(xn^Ixn)^(y_1^..^y_m) per sample."""
    F = tuple(sorted(_base_index(dyn, x) for x in F))
    ix = dyn.index_set
    allowed = {tuple(s) for s in admissible_samples(dyn, g, F, ix.size)}
    zf = scaling_product(dyn, F)
    prefix = _paired_prefix(dyn, F)
    out = {}
    for ys in samples:
        ys = tuple(int(y) for y in ys)
        if tuple(sorted(ys)) not in allowed:
            raise PreconditionError(f"sample {ix.names(ys)} is not admissible for F = {ix.names(F)}")
        tail = [_delta(dyn, y) for y in ys]
        lhs = zf.apply(dyn.space.wedge(tail).to_dense(dyn.car.dim))
        rhs = r_constant(len(F), len(ys)) * dyn.space.wedge(prefix + tail).to_dense(dyn.car.dim)
        out[ys] = float(np.max(np.abs(lhs - rhs)))
    return out


def hole_action_check(dyn: BernoulliDynamics, x: Label, ys: Sequence[int]) -> float:
    """c c* xi = (sqrt(m+1) sqrt(m+2) x^Ix^xi + d(Ix)^2 xi) / 2 for xi avoiding x, Ix."""
    k = _base_index(dyn, x)
    ik = dyn.index_set.partner(k)
    if k in ys or ik in ys:
        raise PreconditionError("the sample must avoid x and Ix")
    dim = dyn.car.dim
    c = dyn.car.car_element(k)
    tail = [_delta(dyn, y) for y in ys]
    xi = dyn.space.wedge(tail).to_dense(dim)
    m = len(ys)
    wedge = dyn.space.wedge([_delta(dyn, k, True), _delta(dyn, ik, True)] + tail).to_dense(dim)
    rhs = 0.5 * (sqrt(m + 1) * sqrt(m + 2) * wedge + dyn.car.rep.d(ik) ** 2 * xi)
    return float(np.max(np.abs((c @ c.H).apply(xi) - rhs)))


# ---- vanishing on hatted wedges ----

@dataclass
class VanishingResult:
    F: Tuple[int, ...]
    residual: float
    outside: bool  # precondition fails, residual recorded only


def vanishing_check(dyn: BernoulliDynamics, g: Perm, F: Iterable[Label]) -> VanishingResult:
    ix = dyn.index_set
    F = tuple(sorted(ix.index(x) for x in F))
    supp = set(dyn.system.support(g))
    supp_x = supp | {ix.partner(k) for k in supp}
    outside = any(k in supp_x and ix.partner(k) in F for k in F)
    diff = dyn.standard_implementation(g) - dyn.commutant_density(g) @ dyn.shift_operator(g)
    vec = dyn.space.wedge([_delta(dyn, k, hatted=True) for k in F]).to_dense(dyn.car.dim)
    return VanishingResult(F, float(np.max(np.abs(diff.apply(vec)))), outside)


# ---- decomposition ----

@dataclass
class DecompositionTerm:
    F: Tuple[int, ...]
    operator: FockOperator
    residual: float           # ||U P_F - term||, max entry
    witness: Optional[int]    # worst Slater column


@dataclass
class DecompositionCertificate:
    g: Perm
    terms: List[DecompositionTerm]
    residual: float
    spectral_residual: float
    shift_residuals: Dict[str, float] = field(default_factory=dict)
    conjugation_residual: float = 0.0

    @property
    def worst(self) -> Optional[DecompositionTerm]:
        return max(self.terms, key=lambda t: t.residual, default=None)


def decompose(dyn: BernoulliDynamics, g: Perm) -> DecompositionCertificate:
    g = tuple(g)
    u = dyn.standard_implementation(g)
    jhj = dyn.commutant_density(g)
    shift = dyn.shift_operator(g)
    pi = dyn.permutation_operator(g)

    terms = []
    total = np.zeros((dyn.car.dim, dyn.car.dim))
    conj = 0.0
    for proj in sector_projections(dyn, g):
        F = proj.F
        zf = scaling_product(dyn, F)
        alpha_zf = scaling_product(dyn, F, g)
        if F:
            conj = max(conj, (u @ zf @ u.H).residual(alpha_zf))
        op = jhj @ alpha_zf @ shift @ scaling_product_inverse(dyn, F) @ proj.matrix
        diff = np.abs((u @ proj.matrix - op).matrix)
        col = int(np.argmax(diff.max(axis=0))) if diff.size else None
        terms.append(DecompositionTerm(F, op, float(diff.max()), col))
        total = total + op.matrix

    assembled = FockOperator(total)
    return DecompositionCertificate(
        g=g,
        terms=terms,
        residual=u.residual(assembled),
        spectral_residual=u.spectral_residual(assembled),
        shift_residuals={
            "target-multiplier": shift.residual(dyn.multiplier(g) @ pi),
            "source-multiplier": shift.residual(pi @ dyn.multiplier_literal(g)),
        },
        conjugation_residual=conj,
    )


def describe_column(dyn: BernoulliDynamics, column: Optional[int]) -> str:
    if column is None:
        return "-"
    return "[" + ",".join(dyn.index_set.names(mask_members(column))) + "]"
