from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial, sqrt
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.car import CarAlgebra
from core.errors import PreconditionError, ResolutionError
from core.fock import FockOperator, Label

# C(W) = norm(m) * (-1)^crossings, two candidate normalizations
NORMALIZATIONS: Dict[str, Callable[[int], float]] = {
    "inverse-sqrt-factorial": lambda m: 1.0 / sqrt(factorial(m)),
    "sqrt-factorial": lambda m: sqrt(factorial(m)),
}
DEFAULT_MAX_N = 6


def crossing_number(pairs: Sequence[Tuple[int, int]], singletons: Sequence[int]) -> int:
    pairs = sorted(pairs)
    count = 0
    for r in range(len(pairs)):
        for s in range(r + 1, len(pairs)):
            if pairs[r][0] < pairs[s][0] < pairs[r][1] < pairs[s][1]:
                count += 1
    for i, j in pairs:
        count += sum(1 for k in singletons if i < k < j)
    return count


@dataclass(frozen=True)
class WickPartition:
    """A partition of positions 0..n-1 into pairs (i < j) and singletons."""

    n: int
    pairs: Tuple[Tuple[int, int], ...]
    singletons: Tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.singletons)

    @property
    def crossings(self) -> int:
        return crossing_number(self.pairs, self.singletons)

    def coefficient(self, normalization: str = "sqrt-factorial") -> float:
        sign = -1.0 if self.crossings % 2 else 1.0
        return sign * NORMALIZATIONS[normalization](self.m)

    def __str__(self) -> str:
        pairs = ",".join(f"{{{i + 1},{j + 1}}}" for i, j in self.pairs)
        singles = ",".join(str(k + 1) for k in self.singletons)
        return f"pairs[{pairs}] singles[{singles}]"


def enumerate_partitions(n: int) -> List[WickPartition]:
    if n < 0:
        raise PreconditionError("n must be non-negative")

    def rec(remaining: Tuple[int, ...]):
        if not remaining:
            yield (), ()
            return
        first, rest = remaining[0], remaining[1:]
        for pairs, singles in rec(rest):
            yield pairs, (first,) + singles
        for idx, partner in enumerate(rest):
            for pairs, singles in rec(rest[:idx] + rest[idx + 1:]):
                yield ((first, partner),) + pairs, singles

    out = []
    for pairs, singles in rec(tuple(range(n))):
        out.append(WickPartition(n, tuple(sorted(pairs)), tuple(sorted(singles))))
    return out


def involution_number(n: int) -> int:
    a, b = 1, 1
    for k in range(2, n + 1):
        a, b = b, b + (k - 1) * a
    return b if n >= 1 else 1


def _check_labels(car: CarAlgebra, labels: Sequence[Label]) -> List[int]:
    idx = [car.index_set.index(x) for x in labels]
    if len(set(idx)) != len(idx):
        raise PreconditionError(f"labels must be distinct: {list(labels)}")
    return idx


def hatted_delta(car: CarAlgebra, k: int) -> np.ndarray:
    vec = np.zeros(car.index_set.size)
    vec[k] = car.rep.d(k)
    return vec


def wick_word(car: CarAlgebra, labels: Sequence[Label]) -> FockOperator:
    """The algebra element whose vacuum value is hat(delta_1) ^ ... ^ hat(delta_n)."""
    idx = _check_labels(car, labels)
    target = car.space.wedge([hatted_delta(car, k) for k in idx]).to_dense(car.dim)
    return car.monomials.combine(car.monomials.solve(target))


def pair_factor(car: CarAlgebra, idx: Sequence[int], partition: WickPartition) -> float:
    """prod_r <hat(I delta_{i(r)}), hat(delta_{j(r)})>"""
    ix = car.index_set
    value = 1.0
    for i, j in partition.pairs:
        partner = ix.partner(idx[i])
        if partner != idx[j]:
            return 0.0
        value *= car.rep.d(partner) * car.rep.d(idx[j])
    return value


def field_product(car: CarAlgebra, idx: Sequence[int]) -> FockOperator:
    out = car.space.identity()
    for k in idx:
        out = out @ car.field_operator(k)
    return out


def wick_word_recursive(car: CarAlgebra, labels: Sequence[Label],
                        normalization: str = "sqrt-factorial") -> FockOperator:
    """Same element as ``wick_word``, by subtracting lower-order Wick terms."""
    idx = _check_labels(car, labels)
    n = len(idx)
    if n == 0:
        return car.space.identity()
    if n == 1:
        return car.field_operator(idx[0])
    rest = field_product(car, idx)
    top = None
    for part in enumerate_partitions(n):
        if part.m == n:
            top = part
            continue
        scalar = pair_factor(car, idx, part)
        if scalar == 0.0:
            continue
        lower = wick_word_recursive(car, [idx[k] for k in part.singletons], normalization)
        rest = rest - (part.coefficient(normalization) * scalar) * lower
    return (1.0 / top.coefficient(normalization)) * rest


@dataclass
class WickExpansion:
    labels: Tuple[str, ...]
    terms: List[Tuple[WickPartition, float]]
    residuals: Dict[str, float]
    matches: List[str]
    decisive: bool
    winner: Optional[str] = None
    notes: List[str] = field(default_factory=list)


def wick_expand(car: CarAlgebra, labels: Sequence[Label], tol: float = 1e-8,
                max_n: int = DEFAULT_MAX_N) -> WickExpansion:
    idx = _check_labels(car, labels)
    n = len(idx)
    if n > max_n:
        raise PreconditionError(f"n = {n} exceeds the configured bound {max_n}")
    product = field_product(car, idx)
    partitions = enumerate_partitions(n)

    words: Dict[Tuple[int, ...], FockOperator] = {}
    scalars: List[Tuple[WickPartition, float]] = []
    for part in partitions:
        scalar = pair_factor(car, idx, part)
        scalars.append((part, scalar))
        if scalar != 0.0 and part.singletons not in words:
            words[part.singletons] = wick_word(car, [idx[k] for k in part.singletons])

    residuals: Dict[str, float] = {}
    for name in NORMALIZATIONS:
        total = np.zeros((car.dim, car.dim))
        for part, scalar in scalars:
            if scalar != 0.0:
                total = total + part.coefficient(name) * scalar * words[part.singletons].matrix
        residuals[name] = float(np.max(np.abs(product.matrix - total)))
    matches = [name for name, r in residuals.items() if r < tol]

    # for n <= 1 every partition has m <= 1 and the candidates coincide
    decisive = n >= 2
    shown = ", ".join(f"{k}={v:.3g}" for k, v in residuals.items())
    if decisive and len(matches) != 1:
        raise ResolutionError(f"Wick normalization unresolved for {list(labels)}: {shown}")
    if not decisive and len(matches) != len(NORMALIZATIONS):
        raise ResolutionError(f"Wick expansion fails for {list(labels)}: {shown}")

    winner = matches[0] if decisive else None
    chosen = winner or "sqrt-factorial"
    terms = [(part, part.coefficient(chosen) * scalar) for part, scalar in scalars if scalar != 0.0]
    return WickExpansion(
        labels=tuple(car.index_set.label(k) for k in idx),
        terms=terms,
        residuals=residuals,
        matches=matches,
        decisive=decisive,
        winner=winner,
    )
