from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial, sqrt
from numbers import Number
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import CapExceededError, PreconditionError, UnknownLabelError

Label = Union[str, int]
Symbol = Tuple[int, ...]

PARTNER_PREFIX = "I"


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def mask_members(mask: int) -> Symbol:
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return tuple(out)


def members_mask(indices: Iterable[int]) -> int:
    mask = 0
    for k in indices:
        mask |= 1 << k
    return mask


def inversion_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation that sorts ``seq`` (entries distinct)."""
    inv = 0
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                inv += 1
    return -1 if inv % 2 else 1


class IndexSet:
    """X = X0 followed by the I-partners of X0, in input order."""

    def __init__(self, labels: Sequence[Label]):
        base = [str(x) for x in labels]
        if not base:
            raise PreconditionError("X0 must contain at least one label")
        if len(set(base)) != len(base):
            raise PreconditionError(f"duplicate labels in X0: {base}")
        partners = [PARTNER_PREFIX + x for x in base]
        clash = sorted(set(base) & set(partners))
        if clash:
            raise PreconditionError(f"labels collide with partner names: {clash}")
        self.base_labels: Tuple[str, ...] = tuple(base)
        self.labels: Tuple[str, ...] = tuple(base + partners)
        self._index: Dict[str, int] = {lab: k for k, lab in enumerate(self.labels)}

    @property
    def d(self) -> int:
        return len(self.base_labels)

    @property
    def size(self) -> int:
        return 2 * len(self.base_labels)

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"IndexSet({list(self.base_labels)!r})"

    def index(self, x: Label) -> int:
        if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
            if 0 <= int(x) < self.size:
                return int(x)
            raise UnknownLabelError(x)
        try:
            return self._index[str(x)]
        except KeyError:
            raise UnknownLabelError(x) from None

    def label(self, k: int) -> str:
        return self.labels[k]

    def partner(self, k: int) -> int:
        return (k + self.d) % self.size

    def is_base(self, k: int) -> bool:
        return k < self.d

    def partner_mask(self, mask: int) -> int:
        low = mask & ((1 << self.d) - 1)
        high = mask >> self.d
        return (low << self.d) | high

    def is_paired(self, mask: int) -> bool:
        return self.partner_mask(mask) == mask

    def names(self, symbol: Iterable[int]) -> List[str]:
        return [self.labels[k] for k in symbol]


@dataclass(frozen=True, eq=False)
class FockVector:
    """Finitely supported vector over the Slater basis, keyed by subset bitmask."""

    coefficients: Dict[int, complex] = field(default_factory=dict)

    @classmethod
    def vacuum(cls) -> "FockVector":
        return cls({0: 1.0 + 0j})

    @classmethod
    def basis(cls, mask: int, coef: complex = 1.0) -> "FockVector":
        return cls({mask: complex(coef)})

    @classmethod
    def from_dense(cls, vec: np.ndarray, tol: float = 0.0) -> "FockVector":
        idx = np.nonzero(np.abs(vec) > tol)[0]
        return cls({int(i): complex(vec[i]) for i in idx})

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim, dtype=complex)
        for mask, c in self.coefficients.items():
            out[mask] = c
        return out

    def get(self, mask: int) -> complex:
        return self.coefficients.get(mask, 0j)

    def norm(self) -> float:
        return sqrt(sum(abs(c) ** 2 for c in self.coefficients.values()))

    def inner(self, other: "FockVector") -> complex:
        # linear in self, conjugate-linear in other
        return sum(c * np.conj(other.get(m)) for m, c in self.coefficients.items())

    def pruned(self, tol: float = 0.0) -> "FockVector":
        return FockVector({m: c for m, c in self.coefficients.items() if abs(c) > tol})

    def __add__(self, other: "FockVector") -> "FockVector":
        out = dict(self.coefficients)
        for m, c in other.coefficients.items():
            out[m] = out.get(m, 0j) + c
        return FockVector(out)

    def __neg__(self) -> "FockVector":
        return FockVector({m: -c for m, c in self.coefficients.items()})

    def __sub__(self, other: "FockVector") -> "FockVector":
        return self + (-other)

    def __mul__(self, scalar: complex) -> "FockVector":
        return FockVector({m: scalar * c for m, c in self.coefficients.items()})

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense matrix with a linearity flag; antilinear means v -> matrix @ conj(v)."""

    matrix: np.ndarray
    antilinear: bool = False

    @classmethod
    def identity(cls, dim: int) -> "FockOperator":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def H(self) -> "FockOperator":
        return self.adjoint()

    def adjoint(self) -> "FockOperator":
        if self.antilinear:
            # <M conj(v), w> = <M^T conj(w), v>
            return FockOperator(self.matrix.T.copy(), True)
        return FockOperator(self.matrix.conj().T.copy(), False)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ (np.conj(vec) if self.antilinear else vec)

    def compose(self, other: "FockOperator") -> "FockOperator":
        right = np.conj(other.matrix) if self.antilinear else other.matrix
        return FockOperator(self.matrix @ right, self.antilinear != other.antilinear)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            return self.compose(other)
        other = np.asarray(other)
        if other.ndim == 1:
            return self.apply(other)
        return self.compose(FockOperator(other))

    def _same_kind(self, other: "FockOperator") -> None:
        if self.antilinear != other.antilinear:
            raise PreconditionError("cannot add a linear and an antilinear operator")

    def __add__(self, other: "FockOperator") -> "FockOperator":
        self._same_kind(other)
        return FockOperator(self.matrix + other.matrix, self.antilinear)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        self._same_kind(other)
        return FockOperator(self.matrix - other.matrix, self.antilinear)

    def __neg__(self) -> "FockOperator":
        return FockOperator(-self.matrix, self.antilinear)

    def __mul__(self, scalar: Number) -> "FockOperator":
        return FockOperator(scalar * self.matrix, self.antilinear)

    __rmul__ = __mul__

    def residual(self, other: "FockOperator") -> float:
        """Max-entry distance."""
        self._same_kind(other)
        diff = self.matrix - other.matrix
        return float(np.max(np.abs(diff))) if diff.size else 0.0

    def spectral_residual(self, other: "FockOperator") -> float:
        self._same_kind(other)
        return float(np.linalg.norm(self.matrix - other.matrix, 2))


def commutator(a: FockOperator, b: FockOperator) -> FockOperator:
    return a @ b - b @ a


def anticommutator(a: FockOperator, b: FockOperator) -> FockOperator:
    return a @ b + b @ a


# ---- operator words for the matrix-free path ----

@dataclass(frozen=True)
class Create:
    label: Label
    right: bool = False


@dataclass(frozen=True)
class Annihilate:
    label: Label
    right: bool = False


@dataclass(frozen=True)
class Diagonal:
    fn: Callable[[Symbol], complex]


Factor = Union[Create, Annihilate, Diagonal]


class FockSpace:
    """Anti-symmetric Fock space over l2(X) in the Slater (bitmask) basis.

    Dense operators are available while |X0| <= max_dense_modes; the
    ``apply`` path works for any size.
    """

    def __init__(self, index_set: IndexSet, max_dense_modes: int = 4):
        self.index_set = index_set
        self.max_dense_modes = max_dense_modes
        self._cache: Dict[tuple, FockOperator] = {}
        self._popcounts: Optional[np.ndarray] = None

    @property
    def modes(self) -> int:
        return self.index_set.size

    @property
    def dim(self) -> int:
        return 1 << self.modes

    @property
    def dense(self) -> bool:
        return self.index_set.d <= self.max_dense_modes

    def _require_dense(self) -> None:
        if not self.dense:
            raise CapExceededError(
                f"dense Fock operators need |X0| <= {self.max_dense_modes}, got {self.index_set.d}"
            )

    def _popcount_table(self) -> np.ndarray:
        if self._popcounts is None:
            self._popcounts = np.array([popcount(s) for s in range(self.dim)], dtype=np.int64)
        return self._popcounts

    def vacuum(self) -> np.ndarray:
        self._require_dense()
        out = np.zeros(self.dim)
        out[0] = 1.0
        return out

    def basis_vector(self, labels: Iterable[Label]) -> np.ndarray:
        self._require_dense()
        out = np.zeros(self.dim)
        out[members_mask(self.index_set.index(x) for x in labels)] = 1.0
        return out

    def identity(self) -> FockOperator:
        self._require_dense()
        return FockOperator.identity(self.dim)

    # -- creators and annihilators --

    def _creator(self, k: int, right: bool) -> FockOperator:
        key = ("create", k, right)
        if key not in self._cache:
            self._require_dense()
            masks = np.arange(self.dim, dtype=np.int64)
            bit = 1 << k
            free = masks[(masks & bit) == 0]
            if right:
                passed = free & ~((bit << 1) - 1)
            else:
                passed = free & (bit - 1)
            signs = np.where(self._popcount_table()[passed] % 2 == 1, -1.0, 1.0)
            mat = np.zeros((self.dim, self.dim))
            mat[free | bit, free] = signs
            self._cache[key] = FockOperator(mat)
        return self._cache[key]

    def create_left(self, x: Label) -> FockOperator:
        return self._creator(self.index_set.index(x), right=False)

    def annihilate_left(self, x: Label) -> FockOperator:
        return self.create_left(x).H

    def create_right(self, x: Label) -> FockOperator:
        return self._creator(self.index_set.index(x), right=True)

    def annihilate_right(self, x: Label) -> FockOperator:
        return self.create_right(x).H

    def create_left_vector(self, xi: Sequence[complex]) -> FockOperator:
        xi = np.asarray(xi)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in range(self.modes):
            if xi[k] != 0:
                out += xi[k] * self._creator(k, right=False).matrix
        return FockOperator(out)

    def create_right_vector(self, xi: Sequence[complex]) -> FockOperator:
        xi = np.asarray(xi)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in range(self.modes):
            if xi[k] != 0:
                out += xi[k] * self._creator(k, right=True).matrix
        return FockOperator(out)

    # -- permutations and diagonals --

    def check_permutation(self, g: Sequence[int]) -> Tuple[int, ...]:
        g = tuple(int(v) for v in g)
        n = self.modes
        if len(g) != n or sorted(g) != list(range(n)):
            raise PreconditionError(f"not a bijection of X: {g}")
        ix = self.index_set
        for k in range(n):
            if g[ix.partner(k)] != ix.partner(g[k]):
                raise PreconditionError("permutation does not commute with I")
        return g

    def permute_mask(self, g: Sequence[int], mask: int) -> Tuple[int, int]:
        """(sign, g.S) for the anti-symmetric action on b_S."""
        images = [g[s] for s in mask_members(mask)]
        return inversion_sign(images), members_mask(images)

    def permutation_operator(self, g: Sequence[int]) -> FockOperator:
        self._require_dense()
        g = self.check_permutation(g)
        mat = np.zeros((self.dim, self.dim))
        for mask in range(self.dim):
            sign, target = self.permute_mask(g, mask)
            mat[target, mask] = sign
        return FockOperator(mat)

    def diagonal_embed(self, f: Callable[[Symbol], complex]) -> FockOperator:
        self._require_dense()
        values = np.array([f(mask_members(mask)) for mask in range(self.dim)])
        return FockOperator(np.diag(values))

    def sector_projection(self, n: int) -> FockOperator:
        return self.diagonal_embed(lambda s: 1.0 if len(s) == n else 0.0)

    # -- wedge products --

    def wedge(self, vectors: Sequence[Sequence[complex]]) -> FockVector:
        """xi_1 ^ ... ^ xi_n with the 1/n! convention, in Slater coordinates."""
        n = len(vectors)
        if n == 0:
            return FockVector.vacuum()
        rows = np.array([np.asarray(v, dtype=complex) for v in vectors])
        if rows.shape[1] != self.modes:
            raise PreconditionError(f"vectors must have length |X| = {self.modes}")
        if n > self.modes:
            return FockVector()
        scale = 1.0 / sqrt(factorial(n))
        out: Dict[int, complex] = {}
        for cols in itertools.combinations(range(self.modes), n):
            block = rows[:, cols]
            if not block.any():
                continue
            det = complex(np.linalg.det(block))
            if det != 0:
                out[members_mask(cols)] = scale * det
        return FockVector(out)

    @staticmethod
    def wedge_inner(xis: Sequence[Sequence[complex]], etas: Sequence[Sequence[complex]]) -> complex:
        """<xi_1^..^xi_n, eta_1^..^eta_n> = det[<xi_i, eta_j>] / n!"""
        n = len(xis)
        if n != len(etas):
            return 0j
        if n == 0:
            return 1.0 + 0j
        a = np.array(xis, dtype=complex)
        b = np.array(etas, dtype=complex)
        gram = a @ b.conj().T
        return complex(np.linalg.det(gram)) / factorial(n)

    # -- literal annihilation formulas --

    def _literal_annihilation(self, x: Label, v: FockVector, right: bool) -> FockVector:
        k0 = self.index_set.index(x)
        out = FockVector()
        for mask, coef in v.coefficients.items():
            elems = mask_members(mask)
            n = len(elems)
            if n == 0:
                continue
            # b_S = sqrt(n!) wedge, the reduced wedge is b_{S-x} / sqrt((n-1)!)
            scale = sqrt(factorial(n)) / sqrt(n) / sqrt(factorial(n - 1))
            for k in range(1, n + 1):
                pos = n - k if right else k - 1
                if elems[pos] != k0:
                    continue
                sign = -1 if (k - 1) % 2 else 1
                out = out + FockVector.basis(mask & ~(1 << k0), coef * sign * scale)
        return out

    def annihilate_left_literal(self, x: Label, v: FockVector) -> FockVector:
        return self._literal_annihilation(x, v, right=False)

    def annihilate_right_literal(self, x: Label, v: FockVector) -> FockVector:
        return self._literal_annihilation(x, v, right=True)

    # -- matrix-free action --

    def _act(self, factor: Factor, mask: int) -> Optional[Tuple[int, complex]]:
        if isinstance(factor, Diagonal):
            value = factor.fn(mask_members(mask))
            return (mask, value) if value != 0 else None
        k = self.index_set.index(factor.label)
        bit = 1 << k
        occupied = bool(mask & bit)
        if isinstance(factor, Create) and occupied:
            return None
        if isinstance(factor, Annihilate) and not occupied:
            return None
        passed = (mask >> (k + 1)) if factor.right else (mask & (bit - 1))
        sign = -1.0 if popcount(passed) % 2 else 1.0
        return mask ^ bit, sign

    def apply(self, word: Sequence[Factor], v: FockVector) -> FockVector:
        """Apply a product of factors (rightmost acts first) without dense matrices."""
        current = dict(v.coefficients)
        for factor in reversed(list(word)):
            nxt: Dict[int, complex] = {}
            for mask, coef in current.items():
                hit = self._act(factor, mask)
                if hit is None:
                    continue
                target, scale = hit
                nxt[target] = nxt.get(target, 0j) + coef * scale
            current = {m: c for m, c in nxt.items() if c != 0}
        return FockVector(current)
