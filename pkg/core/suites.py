from __future__ import annotations

import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations
from math import isfinite, sqrt
from queue import Empty
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import scipy

from core.bernoulli import BernoulliDynamics, BernoulliSystem, GroupAction, atomless_partial_sum, \
    kakutani_partial_sum
from core.boundary import ZSymbol, ball_count, build_lengths, check_length_axioms, commutation_identities, \
    commutator_decay, equivariance_defect, extension_defect, mu, mu_star, omega, \
    paired_commutator, paired_symbols, random_symbol, ucp_equivariance
from core.crossed import build_crossed_rep, commutation_suite, regular_left
from core.errors import CapExceededError, ResolutionError, VerifyError
from core.fock import Annihilate, Create, Diagonal, FockSpace, FockVector, IndexSet, anticommutator
from core.key_lemma import admissible_samples, decompose, describe_column, hole_action_check, pair_isometries, \
    partial_isometry_residual, resolution_check, scaling_element, scaling_inverse, scaling_product, subsets, \
    vanishing_check, zf_action_check
from core.scenario import SUITE_NAMES, Scenario
from core.wick import enumerate_partitions, involution_number, wick_expand, wick_word, wick_word_recursive

Post = Callable[[Dict[str, Any]], None]

FLAT_MARGINAL = Fraction(1, 3)
SPAN_ENTRIES = ("right-generators-in-span", "right-span-closed", "conjugated-left-in-right-span")


@dataclass
class ReportEntry:
    suite: str
    identity: str
    parameters: Dict[str, Any]
    value: float
    bound: float
    passed: bool
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["value"] = self.value if isfinite(self.value) else str(self.value)
        return out


@dataclass
class Report:
    scenario: Dict[str, Any]
    entries: List[ReportEntry] = field(default_factory=list)
    resolutions: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)
    environment: Dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.entries) and all(e.passed for e in self.entries) and not self.errors

    @property
    def failures(self) -> List[ReportEntry]:
        return [e for e in self.entries if not e.passed]

    def counts(self) -> Dict[str, Dict[str, int]]:
        out: Dict[str, Dict[str, int]] = {}
        for e in self.entries:
            row = out.setdefault(e.suite, {"total": 0, "passed": 0})
            row["total"] += 1
            row["passed"] += int(e.passed)
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "scenario": self.scenario,
            "environment": self.environment,
            "counts": self.counts(),
            "resolutions": self.resolutions,
            "errors": self.errors,
            "entries": [e.to_dict() for e in self.entries],
        }


def environment() -> Dict[str, str]:
    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


class SuiteContext:
    def __init__(self, suite: str, scenario: Scenario, post: Post):
        self.suite = suite
        self.scenario = scenario
        self.post = post
        self.rng = np.random.default_rng([scenario.seed, SUITE_NAMES.index(suite)])
        self.tol = float(scenario.tolerances["entry"])
        self.spectral_tol = float(scenario.tolerances["spectral"])
        self.strict_tol = float(scenario.tolerances["strict"])

    def bound(self, kind: str) -> float:
        return float(self.scenario.tolerances[kind])

    def status(self, msg: str) -> None:
        self.post({"type": "status", "msg": f"{self.suite}: {msg}"})

    def check(self, identity: str, value: float, bound: Optional[float] = None, note: str = "", **parameters) -> bool:
        bound = self.tol if bound is None else float(bound)
        value = float(value)
        passed = bool(value <= bound)
        entry = ReportEntry(self.suite, f"{self.suite}.{identity}", parameters, value, bound, passed, note)
        self.post({"type": "entry", "entry": entry.to_dict()})
        return passed

    def expect(self, identity: str, ok: bool, note: str = "", **parameters) -> bool:
        return self.check(identity, 0.0 if ok else 1.0, 0.0, note, **parameters)

    def resolution(self, name: str, record: Dict[str, Any]) -> None:
        self.post({"type": "resolution", "name": name, "record": record})


def build_system(scenario: Scenario) -> BernoulliSystem:
    index_set = IndexSet(scenario.labels)
    action = GroupAction.from_cycles(index_set, scenario.generators, max_order=scenario.caps["group_order"])
    return BernoulliSystem(index_set, scenario.marginals, action)


def build_dynamics(scenario: Scenario) -> BernoulliDynamics:
    return BernoulliDynamics(build_system(scenario), max_dense_modes=scenario.caps["dense_modes"],
                             tol=float(scenario.tolerances["entry"]))


def _max_entry(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def _random_complex(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def _random_letters(rng: np.random.Generator, labels, max_len: int = 4):
    length = int(rng.integers(1, max_len + 1))
    return [(labels[int(rng.integers(len(labels)))], bool(rng.integers(2))) for _ in range(length)]


def _random_phi(rng: np.random.Generator, size: int) -> Dict[int, float]:
    return {k: float(v) for k, v in enumerate(rng.uniform(-1, 1, size))}


# ---- car ----

def run_car(ctx: SuiteContext) -> None:
    dyn = build_dynamics(ctx.scenario)
    car, space, ix = dyn.car, dyn.space, dyn.index_set
    dim = car.dim
    one = np.eye(dim)
    a, b = ix.labels[0], ix.labels[1]

    da, db = np.eye(ix.size)[0], np.eye(ix.size)[1]
    ctx.check("wedge-repeated", space.wedge([da, da]).norm())
    swap = space.wedge([da, db]) + space.wedge([db, da])
    ctx.check("wedge-antisymmetry", swap.norm())
    ctx.check("wedge-gram", abs(space.wedge([da, db]).norm() ** 2 - 0.5), a=a, b=b)
    xis = [_random_complex(ctx.rng, ix.size) for _ in range(3)]
    etas = [_random_complex(ctx.rng, ix.size) for _ in range(3)]
    direct = space.wedge(xis).inner(space.wedge(etas))
    ctx.check("wedge-gram-random", abs(direct - space.wedge_inner(xis, etas)), n=3)

    worst_car = worst_right = 0.0
    for x in range(ix.size):
        for y in range(ix.size):
            lx, ly = space.create_left(x), space.create_left(y)
            rx, ry = space.create_right(x), space.create_right(y)
            delta = one if x == y else 0 * one
            worst_car = max(worst_car, _max_entry(anticommutator(lx.H, ly).matrix - delta),
                            _max_entry(anticommutator(lx, ly).matrix))
            worst_right = max(worst_right, _max_entry(anticommutator(rx.H, ry).matrix - delta),
                              _max_entry(anticommutator(rx, ry).matrix))
    ctx.check("left-creator-relations", worst_car, bound=ctx.bound("strict"))
    ctx.check("right-creator-relations", worst_right, bound=ctx.bound("strict"))

    worst = 0.0
    for _ in range(8):
        vec = FockVector.from_dense(ctx.rng.normal(size=dim))
        dense = vec.to_dense(dim)
        for x in range(ix.size):
            lit_l = space.annihilate_left_literal(x, vec).to_dense(dim)
            lit_r = space.annihilate_right_literal(x, vec).to_dense(dim)
            worst = max(worst, _max_entry(space.annihilate_left(x).apply(dense) - lit_l),
                        _max_entry(space.annihilate_right(x).apply(dense) - lit_r))
    ctx.check("annihilator-literal-formula", worst)

    worst_unitary = worst_cov = 0.0
    for g in dyn.action.elements:
        ext = dyn.action.extend(g)
        pi = space.permutation_operator(ext)
        worst_unitary = max(worst_unitary, _max_entry((pi @ pi.H).matrix - one))
        for x in range(ix.size):
            worst_cov = max(worst_cov, (pi @ space.create_left(x) @ pi.H).residual(space.create_left(ext[x])))
    ctx.check("permutation-unitary", worst_unitary, group_order=dyn.action.order)
    ctx.check("permutation-covariance", worst_cov)

    values_f = ctx.rng.normal(size=dim)
    values_h = ctx.rng.normal(size=dim)
    f = space.diagonal_embed(lambda s: values_f[sum(1 << k for k in s)])
    h = space.diagonal_embed(lambda s: values_h[sum(1 << k for k in s)])
    fh = space.diagonal_embed(lambda s: values_f[sum(1 << k for k in s)] * values_h[sum(1 << k for k in s)])
    ctx.check("diagonal-homomorphism", (f @ h).residual(fh))

    worst = 0.0
    for _ in range(16):
        word = []
        for _ in range(int(ctx.rng.integers(1, 5))):
            kind = int(ctx.rng.integers(3))
            k = int(ctx.rng.integers(ix.size))
            right = bool(ctx.rng.integers(2))
            word.append(Create(k, right) if kind == 0 else Annihilate(k, right) if kind == 1
                        else Diagonal(lambda s, v=values_f: v[sum(1 << j for j in s)]))
        dense = np.eye(dim)
        for factor in word:
            if isinstance(factor, Create):
                op = space.create_right(factor.label) if factor.right else space.create_left(factor.label)
            elif isinstance(factor, Annihilate):
                op = space.annihilate_right(factor.label) if factor.right else space.annihilate_left(factor.label)
            else:
                op = f
            dense = dense @ op.matrix
        vec = FockVector.from_dense(ctx.rng.normal(size=dim))
        worst = max(worst, _max_entry(space.apply(word, vec).to_dense(dim) - dense @ vec.to_dense(dim)))
    ctx.check("matrix-free-apply", worst)

    rep = car.rep
    worst_scaling = max(abs(rep.d(x) ** 2 + rep.d(ix.partner(x)) ** 2 - 2) for x in range(ix.d))
    ctx.check("scaling-sum", worst_scaling)
    ctx.expect("eigenvalue-inversion", all(rep.a(ix.partner(x)) == 1 / rep.a(x) for x in range(ix.size)))

    worst_ac = worst_adj = worst_vac = 0.0
    for x in range(ix.d):
        cx = car.car_element(x)
        for y in range(ix.d):
            cy = car.car_element(y)
            delta = one if x == y else 0 * one
            worst_ac = max(worst_ac, _max_entry(anticommutator(cx, cy.H).matrix - delta),
                           _max_entry(anticommutator(cx, cy).matrix))
    for x in range(ix.size):
        worst_adj = max(worst_adj, car.car_element(x).H.residual(car.car_element(ix.partner(x))))
        target = rep.d(x) * space.basis_vector([x])
        worst_vac = max(worst_vac, _max_entry(car.field_operator(x).apply(space.vacuum()) - target))
    ctx.check("anticommutation", worst_ac, bound=ctx.bound("strict"))
    ctx.check("adjoint-is-partner", worst_adj, bound=ctx.bound("strict"))
    ctx.check("field-on-vacuum", worst_vac)

    worst_sd = worst_sd_ac = 0.0
    for _ in range(6):
        xi, eta = _random_complex(ctx.rng, ix.size), _random_complex(ctx.rng, ix.size)
        bx, be = car.self_dual(xi), car.self_dual(eta)
        worst_sd = max(worst_sd, bx.H.residual(car.self_dual(rep.involution(xi))))
        expected = np.sum(eta * np.conj(xi)) * one
        worst_sd_ac = max(worst_sd_ac, _max_entry(anticommutator(bx.H, be).matrix - expected))
    ctx.check("self-dual-adjoint", worst_sd, bound=ctx.bound("strict"))
    ctx.check("self-dual-anticommutation", worst_sd_ac, bound=ctx.bound("strict"))

    worst = 0.0
    for _ in range(6):
        xi, eta = _random_complex(ctx.rng, ix.size), _random_complex(ctx.rng, ix.size)
        lx, le = space.create_left_vector(xi), space.create_left_vector(eta)
        worst = max(worst, _max_entry(anticommutator(lx.H, le).matrix - np.sum(eta * np.conj(xi)) * one))
    ctx.check("vector-creator-relations", worst, bound=ctx.bound("strict"))

    units = car.matrix_units()
    ctx.check("matrix-unit-relations", units.relation_residual())
    ctx.check("matrix-unit-commutation", units.commutation_residual())
    order = list(ix.base_labels)[::-1]
    ctx.check("matrix-unit-relations-reversed", car.matrix_units(order).relation_residual())


# ---- quasifree ----

def run_quasifree(ctx: SuiteContext) -> None:
    dyn = build_dynamics(ctx.scenario)
    car, ix = dyn.car, dyn.index_set
    cfg = ctx.scenario.quasifree
    ctx.check("empty-moment", abs(car.quasi_free_moment([], []) - 1))
    worst = 0.0
    for x in range(ix.d):
        delta = np.eye(ix.d)[x]
        worst = max(worst, abs(car.vacuum_moment([delta], [delta]) - float(car.rep.p(x))))
    ctx.check("one-point", worst)
    worst = 0.0
    for _ in range(cfg["samples"]):
        xi = _random_complex(ctx.rng, ix.d)
        worst = max(worst, abs(car.vacuum_moment([xi], [])), abs(car.quasi_free_moment([xi], [])))
    ctx.check("unbalanced-moment", worst)

    worst = 0.0
    scale = 1.0
    for _ in range(cfg["samples"]):
        n = int(ctx.rng.integers(1, cfg["max_degree"] + 1))
        xis = [_random_complex(ctx.rng, ix.d) for _ in range(n)]
        etas = [_random_complex(ctx.rng, ix.d) for _ in range(n)]
        exact = car.quasi_free_moment(xis, etas)
        scale = max(scale, abs(exact))
        worst = max(worst, abs(exact - car.vacuum_moment(xis, etas)))
    ctx.check("determinant-formula", worst / scale, samples=cfg["samples"], max_degree=cfg["max_degree"])


# ---- tomita ----

def run_tomita(ctx: SuiteContext) -> None:
    dyn = build_dynamics(ctx.scenario)
    car, space, ix = dyn.car, dyn.space, dyn.index_set
    vac = space.vacuum()
    j = car.modular_conjugation()
    delta = car.modular_operator()
    ctx.check("conjugation-fixes-vacuum", _max_entry(j.apply(vac) - vac))
    ctx.check("modular-fixes-vacuum", _max_entry(delta.apply(vac) - vac))
    ctx.check("conjugation-involution", _max_entry((j @ j).matrix - np.eye(car.dim)))
    ctx.check("conjugation-antiunitary", _max_entry(j.matrix @ j.matrix.T - np.eye(car.dim)))

    worst = 0.0
    for x in range(ix.size):
        worst = max(worst, (j @ space.create_left(x) @ j).residual(space.create_right(ix.partner(x))))
    ctx.check("conjugated-left-is-right", worst)

    worst = 0.0
    for x in range(ix.d):
        jcj = j @ car.car_element(x) @ j
        for y in range(ix.d):
            for c in (car.car_element(y), car.car_element(y).H):
                worst = max(worst, _max_entry((jcj @ c - c @ jcj).matrix))
    ctx.check("conjugated-commutes", worst)

    worst = max(car.tomita_residual(car.car_element(x)) for x in range(ix.d))
    ctx.check("tomita-fields", worst)

    count = ctx.scenario.tomita["monomials"]
    labels = list(range(ix.d))
    worst_s = worst_kms = 0.0
    for _ in range(count):
        m1 = car.word(_random_letters(ctx.rng, labels))
        m2 = car.word(_random_letters(ctx.rng, labels))
        worst_s = max(worst_s, car.tomita_residual(m1))
        worst_kms = max(worst_kms, car.kms_residual(m1, m2))
    ctx.check("tomita-monomials", worst_s, monomials=count)
    ctx.check("kms-condition", worst_kms, monomials=count)

    worst = 0.0
    for t in (0.3, 1.7):
        a = car.word(_random_letters(ctx.rng, labels))
        b = car.word(_random_letters(ctx.rng, labels))
        lhs = car.modular_flow(t, a @ b)
        rhs = car.modular_flow(t, a) @ car.modular_flow(t, b)
        worst = max(worst, lhs.residual(rhs), abs(car.vacuum_state(car.modular_flow(t, a)) - car.vacuum_state(a)))
    ctx.check("modular-flow-invariance", worst)


# ---- wick ----

def run_wick(ctx: SuiteContext) -> None:
    dyn = build_dynamics(ctx.scenario)
    car, ix = dyn.car, dyn.index_set
    cfg = ctx.scenario.wick
    max_n = min(int(cfg["max_n"]), ix.size)

    for n in range(0, max_n + 3):
        parts = enumerate_partitions(n)
        keys = {(p.pairs, p.singletons) for p in parts}
        ctx.expect("partition-count", len(parts) == involution_number(n) == len(keys), n=n, count=len(parts))
    crossing = [p for p in enumerate_partitions(3) if p.pairs == ((0, 2),)][0]
    ctx.expect("crossing-sign", crossing.coefficient() < 0, partition=str(crossing))

    winners: Dict[str, int] = {}
    undecided = 0
    worst: Dict[str, float] = {}
    failures = 0
    tuples = []
    for n in range(0, max_n + 1):
        tuples.append(tuple(range(n)))
    for _ in range(int(cfg["samples"])):
        n = int(ctx.rng.integers(2, max_n + 1)) if max_n >= 2 else max_n
        tuples.append(tuple(int(k) for k in ctx.rng.choice(ix.size, size=n, replace=False)))
    for labels in tuples:
        names = ix.names(labels)
        try:
            expansion = wick_expand(car, labels, tol=ctx.tol, max_n=max_n)
        except ResolutionError as e:
            failures += 1
            ctx.check("expansion", float("inf"), note=str(e), labels=names)
            continue
        for name, r in expansion.residuals.items():
            if name in expansion.matches:
                worst[name] = max(worst.get(name, 0.0), r)
        if expansion.decisive:
            winners[expansion.winner] = winners.get(expansion.winner, 0) + 1
        else:
            undecided += 1
    ctx.expect("normalization-consistent", len(winners) == 1 and failures == 0,
               note=f"winners {winners}", decisive=sum(winners.values()), indecisive=undecided)
    for name, r in sorted(worst.items()):
        ctx.check("expansion-residual", r, normalization=name)
    winner = next(iter(winners)) if len(winners) == 1 else None
    ctx.resolution("wick-normalization", {
        "winner": winner,
        "decisive_tuples": sum(winners.values()),
        "indecisive_tuples": undecided,
        "winners": winners,
        "max_matching_residual": worst,
        "max_n": max_n,
    })

    ctx.check("word-identity", wick_word(car, []).residual(car.space.identity()))
    ctx.check("word-single", max(wick_word(car, [x]).residual(car.field_operator(x)) for x in range(ix.size)))
    if winner is not None:
        rec = 0.0
        for n in range(2, min(max_n, 3) + 1):
            for labels in combinations(range(ix.size), n):
                rec = max(rec, wick_word(car, labels).residual(wick_word_recursive(car, labels, winner)))
        ctx.check("word-recursion", rec, normalization=winner)


# ---- bernoulli ----

def run_bernoulli(ctx: SuiteContext) -> None:
    dyn = build_dynamics(ctx.scenario)
    car, action = dyn.car, dyn.action
    dim = car.dim
    one = np.eye(dim)
    vac = dyn.vacuum()
    ctx.status(f"group order {action.order}, Fock dimension {dim}")

    records = {}
    for g in action.elements:
        gname = action.describe(g)
        supp = dyn.system.support(g)
        try:
            res = dyn.radon_nikodym_resolution(g)
        except ResolutionError as e:
            ctx.check("density-resolution", float("inf"), note=str(e), g=gname)
            continue
        records[gname] = {"support": dyn.index_set.names(supp), "winner": res.winner,
                          "decisive": res.decisive, "residuals": res.residuals}
        ctx.check("density-state-identity", res.residuals[res.winner], bound=ctx.bound("strict"), g=gname)
        h = dyn.radon_nikodym(g)
        ctx.check("density-normalized", abs(car.vacuum_state(h) - 1), bound=ctx.bound("exact"), g=gname)
        eig = np.linalg.eigvalsh(h.matrix)
        predicted = np.sort(np.repeat(dyn.density_spectrum(g), dim // (1 << len(supp))))
        ctx.check("density-spectrum", _max_entry(np.sort(eig) - predicted), g=gname)
        ctx.expect("density-positive", bool(eig.min() > 0), g=gname)
        coef = car.monomials.expand(h, ctx.tol)
        off = [abs(coef[i]) for i in range(car.monomials.size) if not car.monomials.is_diagonal(i)]
        ctx.check("density-diagonal-monomials", max(off, default=0.0), g=gname)

        u = dyn.standard_implementation(g)
        ctx.check("implementation-unitary", _max_entry((u @ u.H).matrix - one), bound=ctx.bound("implementation"),
                  g=gname)
        ctx.check("implementation-vacuum", _max_entry(u.apply(vac) - dyn.density_sqrt(g).apply(vac)), g=gname)
        worst = 0.0
        for x in range(dyn.d):
            worst = max(worst, (u @ car.car_element(x) @ u.H).residual(car.car_element(g[x])))
        ctx.check("implementation-covariance", worst, g=gname)
        j = dyn.modular_conjugation()
        ctx.check("implementation-commutes-with-J", _max_entry((u @ j).matrix - (j @ u).matrix),
                  bound=ctx.bound("implementation"), g=gname)
        shift = dyn.shift_operator(g)
        pi = dyn.permutation_operator(g)
        if not supp:
            ctx.check("implementation-matches-second-quantisation", u.residual(pi), bound=ctx.bound("strict"),
                      g=gname)
        ctx.check("shift-target-multiplier", shift.residual(dyn.multiplier(g) @ pi), g=gname)
        ctx.check("shift-source-multiplier", shift.residual(pi @ dyn.multiplier_literal(g)), g=gname)
        ctx.check("low-sector-intertwining", dyn.low_sector_intertwining_residual(g), g=gname)
        ctx.check("number-projection-shift", dyn.bernoulli_shift_residual(g), g=gname)
    ctx.resolution("radon-nikodym-ordering", records)

    worst_mult = worst_cocycle = 0.0
    for g in action.elements:
        for h in action.elements:
            gh = action.multiply(g, h)
            u_gh = dyn.standard_implementation(gh)
            worst_mult = max(worst_mult, (dyn.standard_implementation(g) @ dyn.standard_implementation(h)).residual(u_gh))
            rhs = dyn.alpha(g, dyn.radon_nikodym(h), ctx.tol) @ dyn.radon_nikodym(g)
            worst_cocycle = max(worst_cocycle, dyn.radon_nikodym(gh).residual(rhs))
    ctx.check("implementation-multiplicative", worst_mult)
    ctx.check("density-cocycle", worst_cocycle, bound=ctx.bound("implementation"))

    # every g preserves a product measure with equal marginals
    flat = BernoulliDynamics(BernoulliSystem(dyn.index_set, [FLAT_MARGINAL] * dyn.d, action),
                             max_dense_modes=ctx.scenario.caps["dense_modes"], tol=ctx.tol)
    worst = 0.0
    for g in action.symmetric_generators:
        worst = max(worst, flat.standard_implementation(g).residual(flat.permutation_operator(g)))
    ctx.check("measure-preserving-implementation", worst, bound=ctx.bound("strict"),
              marginal=str(FLAT_MARGINAL), generators=len(action.symmetric_generators))

    e = dyn.bernoulli_projection()
    ctx.check("bernoulli-projection-span", e.residual(dyn.diagonal_span_projection()))
    ctx.expect("bernoulli-basis-size", len(dyn.bernoulli_basis()) == 1 << dyn.d, size=len(dyn.bernoulli_basis()))
    for x in dyn.index_set.base_labels:
        for name, r in dyn.boundary_identities(x).items():
            ctx.check(f"bernoulli-{name}", r, x=x)


# ---- boundary ----

def _large_action(size: int, cyclic: bool) -> GroupAction:
    index_set = IndexSet([f"x{k}" for k in range(size // 2)])
    m = index_set.d
    generators = [tuple((k + 1) % m for k in range(m))] if cyclic and m > 1 else []
    return GroupAction(index_set, generators, max_order=max(m, 1))


def run_boundary(ctx: SuiteContext) -> None:
    cfg = ctx.scenario.boundary
    system = build_system(ctx.scenario)
    rng = ctx.rng

    small = build_lengths(system.action)
    large_action = _large_action(int(cfg["size"]), cyclic=True)
    large = build_lengths(large_action)
    for name, lengths in (("scenario", small), ("cyclic", large)):
        for axiom, ok in check_length_axioms(lengths).items():
            ctx.expect(f"length-{axiom}", ok, action=name)
    radii = [ball_count(large, r) for r in range(0, 8)]
    ctx.expect("ball-count-monotone", all(a <= b for a, b in zip(radii, radii[1:])), counts=str(radii))

    size = large.index_set.size
    max_n = min(int(cfg["max_symbol"]), size)
    norm_ok = mu_ok = True
    eq_worst = ext_worst = ucp_worst = 0.0
    eq_ok = ext_ok = True
    for _ in range(int(cfg["samples"])):
        z = random_symbol(rng, size, max_n)
        w = omega(large, z)
        norm_ok &= sum(w.values()) == z.n ** 2 + large.weighted(z)
        mu_ok &= sum(mu(large, z).values()) == 1
        g = large_action.elements[int(rng.integers(large_action.order))]
        eq = equivariance_defect(large, g, z)
        eq_ok &= eq.holds
        if eq.bound:
            eq_worst = max(eq_worst, float(eq.defect / eq.bound))
        free = [k for k in range(size) if k not in z]
        if free:
            x = free[int(rng.integers(len(free)))]
            ext = extension_defect(large, x, z)
            ext_ok &= ext.holds
            ext_worst = max(ext_worst, float(ext.defect / ext.bound))
        phi = _random_phi(rng, size)
        value, bound = ucp_equivariance(large, g, phi, z)
        ucp_worst = max(ucp_worst, value - bound)
    samples = int(cfg["samples"])
    ctx.expect("omega-norm", norm_ok, samples=samples)
    ctx.expect("mu-probability", mu_ok, samples=samples)
    ctx.expect("equivariance-bound", eq_ok, note=f"max defect/bound {eq_worst:.3f}", samples=samples)
    ctx.expect("extension-bound", ext_ok, note=f"max defect/bound {ext_worst:.3f}", samples=samples)
    ctx.check("ucp-equivariance", ucp_worst, bound=ctx.tol, samples=samples)

    ix = small.index_set
    z = ZSymbol.of([0])
    ctx.check("mu-star-unital", abs(mu_star(small, {k: 1 for k in range(ix.size)}, z) - 1))
    ctx.expect("mu-star-point", mu_star(large, {0: 1}, ZSymbol.of([0])) == 1)

    space = FockSpace(ix)
    values = rng.normal(size=1 << ix.size)
    f = lambda s: values[sum(1 << k for k in s)]
    basis = [FockVector.basis(mask) for mask in range(1 << ix.size)]
    worst = 0.0
    for x in range(ix.size):
        worst = max(worst, max(commutation_identities(space, f, x, basis).values()))
    ctx.check("commutation-identities", worst, size=ix.size)

    big_space = FockSpace(large.index_set)
    big_values: Dict[tuple, float] = {}

    def big_f(s):
        if s not in big_values:
            big_values[s] = float(rng.normal())
        return big_values[s]

    vectors = [FockVector.basis(random_symbol(rng, size, max_n).mask()) for _ in range(8)]
    worst = 0.0
    for x in rng.choice(size, size=4, replace=False):
        worst = max(worst, max(commutation_identities(big_space, big_f, int(x), vectors).values()))
    ctx.check("commutation-identities-large", worst, size=size)

    flat_action = _large_action(int(cfg["size"]), cyclic=False)
    flat = build_lengths(flat_action)
    fsize = flat.index_set.size
    phi = rng.uniform(-1, 1, fsize)
    phi = {k: float(v) for k, v in enumerate(phi / np.max(np.abs(phi)))}
    flat_space = FockSpace(flat.index_set)
    x = fsize - 1
    decay_length = min(int(cfg["decay_length"]), fsize - 1)
    symbols = [ZSymbol.of(range(n)) for n in range(1, decay_length + 1)]
    for right in (False, True):
        table = commutator_decay(flat_space, flat, phi, x, symbols, right=right)
        side = "right" if right else "left"
        ctx.expect("decay-dominated", table.dominated, side=side, length=decay_length)
        ctx.expect("decay-decreasing", table.decreasing, side=side, length=decay_length)
        ctx.check("decay-final-bound", table.final_bound, bound=0.1, side=side, length=decay_length)
    constant = {k: 1.0 for k in range(fsize)}
    const_table = commutator_decay(flat_space, flat, constant, x, symbols[:5])
    ctx.check("decay-constant", max(r.value for r in const_table.rows))
    weighted = [random_symbol(rng, size, max_n) for _ in range(16)]
    cyclic_table = commutator_decay(big_space, large, _random_phi(rng, size), int(rng.integers(size)), weighted)
    ctx.expect("decay-dominated-weighted", cyclic_table.dominated)

    worst = 0.0
    sphi = _random_phi(rng, ix.size)
    for z in paired_symbols(small, ix.d):
        if z.empty:
            continue
        for x in range(ix.d):
            value, bound = paired_commutator(space, small, sphi, x, z)
            worst = max(worst, value - bound)
    ctx.check("paired-commutator", worst, bound=ctx.tol)

    positives = {k: abs(v) for k, v in _random_phi(rng, size).items()}
    ok = all(mu_star(large, positives, random_symbol(rng, size, max_n)) >= 0 for _ in range(16))
    ctx.expect("mu-star-positive", ok)


# ---- keylemma ----

def run_keylemma(ctx: SuiteContext) -> None:
    dyn = build_dynamics(ctx.scenario)
    car, action, ix = dyn.car, dyn.action, dyn.index_set
    one = np.eye(car.dim)
    tol = ctx.tol
    if ctx.scenario.tolerances.get("stress") and any(p < Fraction(1, 10) or p > Fraction(9, 10)
                                                     for p in dyn.system.p):
        tol = max(tol, float(ctx.scenario.tolerances["stress"]))
        ctx.status(f"extreme marginals, tolerance relaxed to {tol:g}")
    exact = ctx.bound("exact") if tol == ctx.tol else tol

    worst_pi = worst_res = worst_comm = 0.0
    projections = []
    for x in range(ix.d):
        v, w = pair_isometries(dyn, x)
        worst_pi = max(worst_pi, partial_isometry_residual(v), partial_isometry_residual(w))
        worst_res = max(worst_res, _max_entry((v @ v.H + w @ w.H).matrix - one))
        projections.append(v @ v.H)
    for p, q in combinations(projections, 2):
        worst_comm = max(worst_comm, _max_entry((p @ q - q @ p).matrix))
    ctx.check("pair-partial-isometries", worst_pi)
    ctx.check("pair-resolution", worst_res)
    ctx.check("pair-projections-commute", worst_comm)

    worst_inv = worst_hole = 0.0
    for x in range(ix.d):
        z = scaling_element(dyn, x)
        worst_inv = max(worst_inv, _max_entry((z @ scaling_inverse(dyn, x)).matrix - one))
        for m in range(0, 3):
            for ys in combinations([y for y in range(ix.size) if y not in (x, ix.partner(x))], m):
                worst_hole = max(worst_hole, hole_action_check(dyn, x, ys))
    ctx.check("scaling-invertible", worst_inv)
    ctx.check("hole-projection-action", worst_hole)

    for g in action.elements:
        gname = action.describe(g)
        supp = dyn.system.support(g)
        res = resolution_check(dyn, g)
        for name, r in res.items():
            bound = exact if name in ("sum", "orthogonality") else tol
            ctx.check(f"sector-{name}", r, bound=bound, g=gname, support=len(supp))

        worst_zf = worst_alg = 0.0
        for F in subsets(supp):
            samples = admissible_samples(dyn, g, F, 2)
            worst_zf = max([worst_zf] + list(zf_action_check(dyn, g, F, samples).values()))
            zf = scaling_product(dyn, F)
            coef = car.monomials.expand(zf, 1.0)
            worst_alg = max(worst_alg, car.monomials.combine(coef).residual(zf))
        ctx.check("scaling-product-action", worst_zf, g=gname)
        ctx.check("scaling-product-in-algebra", worst_alg, g=gname)

        worst_van = 0.0
        outside = {}
        for n in range(0, 3):
            for F in combinations(range(ix.size), n):
                result = vanishing_check(dyn, g, F)
                if result.outside:
                    outside["[" + ",".join(ix.names(F)) + "]"] = result.residual
                else:
                    worst_van = max(worst_van, result.residual)
        ctx.check("hatted-wedge-vanishing", worst_van, g=gname)
        if outside:
            ctx.resolution(f"vanishing-outside-precondition {gname}", {"residuals": outside})

        cert = decompose(dyn, g)
        worst_term = cert.worst
        ctx.check("decomposition", cert.residual, bound=tol, g=gname, terms=len(cert.terms))
        ctx.check("decomposition-spectral", cert.spectral_residual,
                  bound=max(tol, ctx.spectral_tol), g=gname)
        ctx.expect("decomposition-term-count", len(cert.terms) == 1 << len(supp), g=gname)
        if worst_term is not None:
            ctx.check("decomposition-per-sector", worst_term.residual, bound=tol, g=gname,
                      witness_F=ix.names(worst_term.F), witness=describe_column(dyn, worst_term.witness))
        ctx.check("scaling-conjugation", cert.conjugation_residual, bound=tol, g=gname)
        for name, r in cert.shift_residuals.items():
            ctx.check(f"shift-{name}", r, g=gname)


# ---- crossed ----

def run_crossed(ctx: SuiteContext) -> None:
    dyn = build_dynamics(ctx.scenario)
    try:
        rep = build_crossed_rep(dyn, dim_cap=ctx.scenario.caps["crossed_dim"])
    except CapExceededError as e:
        ctx.check("cap", float("inf"), note=str(e))
        return
    ctx.status(f"crossed product dimension {rep.dim}")
    ctx.expect("dimension", rep.dim == 4 ** dyn.d * rep.group_order, dim=rep.dim)
    action = dyn.action
    worst = 0.0
    for g in action.elements:
        for h in action.elements:
            lhs = regular_left(dyn, g) @ regular_left(dyn, h)
            worst = max(worst, _max_entry(lhs - regular_left(dyn, action.multiply(g, h))))
    ctx.check("regular-representation", worst)
    try:
        results = commutation_suite(rep, ctx.strict_tol, ctx.rng)
    except CapExceededError as e:
        ctx.check("cap", float("inf"), note=str(e))
        return
    right_dim = results.pop("right-algebra-dimension")
    commutant_dim = results.pop("left-commutant-dimension")
    closure_dim = results.pop("right-closure-dimension", None)
    for name, r in results.items():
        if name in SPAN_ENTRIES:
            bound = ctx.tol
        elif name == "implementation-commutes-with-J":
            bound = ctx.bound("implementation")
        else:
            bound = ctx.bound("strict")
        ctx.check(name, r, bound=bound)
    ctx.expect("commutant-dimension", right_dim == commutant_dim,
               right=int(right_dim), commutant=int(commutant_dim))
    ctx.expect("right-algebra-dimension", right_dim == 4 ** dyn.d * rep.group_order, right=int(right_dim))
    if closure_dim is not None:
        ctx.expect("right-closure-dimension", closure_dim == right_dim, closure=int(closure_dim))


# ---- kakutani ----

def run_kakutani(ctx: SuiteContext) -> None:
    window = int(ctx.scenario.kakutani["window"])
    shift = lambda i: i + 1
    half = Fraction(1, 2)

    flat = {i: Fraction(1, 3) for i in range(window + 1)}
    ctx.check("measure-preserving", kakutani_partial_sum(shift, flat, range(window)).value, window=window)

    single = kakutani_partial_sum(shift, {0: half, 1: Fraction(2, 3)}, [0])
    expected = (sqrt(0.5) - sqrt(2 / 3)) ** 2 + (sqrt(0.5) - sqrt(1 / 3)) ** 2
    ctx.check("single-term", abs(single.value - expected))

    bumped = {i: half for i in range(-window - 1, window + 2)}
    bumped[0] = Fraction(2, 3)
    sums = [kakutani_partial_sum(shift, bumped, range(-w, w)).value for w in range(1, window + 1)]
    ctx.check("finite-support-stabilizes", max(abs(s - 2 * expected) for s in sums), window=window)

    marg = {i: Fraction(int(ctx.rng.integers(1, 99)), 100) for i in range(window + 2)}
    partial = [kakutani_partial_sum(shift, marg, range(w)) for w in range(1, window + 1)]
    ctx.expect("monotone", all(a.value <= b.value + 1e-15 for a, b in zip(partial, partial[1:])))
    edge = kakutani_partial_sum(shift, marg, range(window + 1))
    ctx.expect("truncation-reported", edge.truncated == 1 and edge.unknown == 0 and edge.terms == window + 1,
               truncated=edge.truncated, unknown=edge.unknown)
    beyond = kakutani_partial_sum(shift, marg, range(window + 2))
    ctx.expect("unknown-marginal-reported", beyond.truncated == 1 and beyond.unknown == 1,
               truncated=beyond.truncated, unknown=beyond.unknown)

    atomless = [atomless_partial_sum(flat, range(w)) for w in range(1, window + 1)]
    ctx.expect("atomless-growth", atomless[-1] == Fraction(window, 3)
               and all(a < b for a, b in zip(atomless, atomless[1:])))

    system = build_system(ctx.scenario)
    table = dict(enumerate(system.p))
    for g in system.action.elements:
        moved = dict(enumerate(g))
        value = kakutani_partial_sum(moved, table, range(system.index_set.d)).value
        ctx.expect("support-detects-shift", (value > 0) == bool(system.support(g)),
                   g=system.action.describe(g), sum_value=value)


SUITES: Dict[str, Callable[[SuiteContext], None]] = {
    "car": run_car,
    "quasifree": run_quasifree,
    "tomita": run_tomita,
    "wick": run_wick,
    "bernoulli": run_bernoulli,
    "boundary": run_boundary,
    "keylemma": run_keylemma,
    "crossed": run_crossed,
    "kakutani": run_kakutani,
}


def run_suite(suite: str, scenario: Scenario, post: Post) -> None:
    ctx = SuiteContext(suite, scenario, post)
    t0 = time.time()
    post({"type": "status", "msg": f"{suite}: started"})
    try:
        SUITES[suite](ctx)
    except Exception as e:
        post({"type": "error", "msg": f"{suite}: {type(e).__name__}: {e}"})
        ctx.check("crashed", float("inf"), note=f"{type(e).__name__}: {e}")
    finally:
        post({"type": "status", "msg": f"{suite}: finished in {time.time() - t0:.2f}s"})
        post({"type": "done", "suite": suite})


def suite_worker_main(out_q, suite: str, cfg: dict):
    """
    Subprocess suite worker (spawn-safe).
    Message types:
      - {"type":"status","msg": "..."}
      - {"type":"entry","entry": dict}
      - {"type":"resolution","name": str,"record": dict}
      - {"type":"error","msg": str}
      - {"type":"done","suite": str}
    """
    try:
        scenario = Scenario.from_dict(cfg)
    except VerifyError as e:
        out_q.put({"type": "error", "msg": f"{suite}: bad scenario: {e}"})
        out_q.put({"type": "done", "suite": suite})
        return
    run_suite(suite, scenario, out_q.put)


class SuiteRunner:
    """Runs the selected suites and assembles one Report, serially in suite order."""

    def __init__(self, scenario: Scenario, log: Callable[[str], None] = print):
        self.scenario = scenario
        self.log = log
        self._entries: Dict[str, List[ReportEntry]] = {s: [] for s in scenario.suites}
        self.report = Report(scenario=scenario.to_dict(), environment=environment())

    def _handle(self, msg: Dict[str, Any]) -> None:
        try:
            mtype = msg.get("type")
            if mtype == "status":
                self.log(f"status: {msg.get('msg', '')}")
            elif mtype == "error":
                em = msg.get("msg", "")
                self.log(f"error: {em}")
                self.report.errors.append(em)
            elif mtype == "entry":
                data = dict(msg["entry"])
                if isinstance(data["value"], str):
                    data["value"] = float(data["value"])
                entry = ReportEntry(**data)
                self._entries.setdefault(entry.suite, []).append(entry)
                if not entry.passed:
                    self.log(f"FAIL {entry.identity} value={entry.value:.3g} bound={entry.bound:.3g} {entry.note}")
            elif mtype == "resolution":
                self.report.resolutions[msg["name"]] = msg["record"]
        except Exception as e:
            self.log(f"Message handling error: {e!r}")

    def run(self) -> Report:
        if self.scenario.jobs <= 1 or len(self.scenario.suites) <= 1:
            for suite in self.scenario.suites:
                run_suite(suite, self.scenario, self._handle)
        else:
            self._run_processes()
        for suite in self.scenario.suites:
            self.report.entries.extend(self._entries.get(suite, []))
        return self.report

    def _run_processes(self) -> None:
        import multiprocessing as mp
        ctx = mp.get_context("spawn")
        out_q = ctx.Queue()
        cfg = self.scenario.to_dict()
        pending = list(self.scenario.suites)
        running: Dict[str, Any] = {}
        done = set()
        while pending or running:
            while pending and len(running) < self.scenario.jobs:
                suite = pending.pop(0)
                proc = ctx.Process(target=suite_worker_main, args=(out_q, suite, cfg), daemon=False)
                proc.start()
                running[suite] = proc
                self.log(f"suite subprocess started suite={suite} pid={proc.pid}")
            try:
                msg = out_q.get(timeout=0.2)
            except Empty:
                msg = None
            if msg is not None:
                self._handle(msg)
                if msg.get("type") == "done":
                    done.add(msg["suite"])
            for suite, proc in list(running.items()):
                if suite in done:
                    proc.join(timeout=3)
                    running.pop(suite)
                elif not proc.is_alive():
                    # drain whatever the worker posted before it died
                    self._drain(out_q, done)
                    if suite not in done:
                        em = f"{suite}: subprocess exited. exitcode={proc.exitcode}"
                        self._handle({"type": "error", "msg": em})
                        self._handle({"type": "entry", "entry": ReportEntry(
                            suite, f"{suite}.crashed", {}, float("inf"), 0.0, False, em).to_dict()})
                        done.add(suite)
                    running.pop(suite)

    def _drain(self, out_q, done: set) -> None:
        while True:
            try:
                msg = out_q.get_nowait()
            except Empty:
                break
            self._handle(msg)
            if msg.get("type") == "done":
                done.add(msg["suite"])
