from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

from core.errors import ScenarioError

SUITE_NAMES = ("car", "quasifree", "tomita", "wick", "bernoulli", "boundary", "keylemma", "crossed", "kakutani")

DEFAULT_TOLERANCES = {"entry": 1e-8, "strict": 1e-10, "exact": 1e-12, "implementation": 1e-9,
                      "spectral": 1e-7, "stress": 1e-5}
DEFAULT_CAPS = {"group_order": 720, "dense_modes": 4, "crossed_dim": 4096}
DEFAULT_WICK = {"max_n": 5, "samples": 50}
DEFAULT_QUASIFREE = {"samples": 200, "max_degree": 3}
DEFAULT_TOMITA = {"monomials": 100}
DEFAULT_BOUNDARY = {"size": 200, "samples": 1000, "max_symbol": 50, "decay_length": 50}
DEFAULT_KAKUTANI = {"window": 64}


def parse_rational(text: Any) -> Fraction:
    if isinstance(text, bool):
        raise ScenarioError(f"not a rational: {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ScenarioError(f"rationals are written as strings \"num/den\", got {text!r}")
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ScenarioError(f"malformed rational: {text!r}") from None


def _merged(defaults: Dict[str, Any], given: Any, name: str) -> Dict[str, Any]:
    if given is None:
        return dict(defaults)
    if not isinstance(given, dict):
        raise ScenarioError(f"'{name}' must be an object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ScenarioError(f"unknown keys in '{name}': {unknown}")
    out = dict(defaults)
    out.update(given)
    return out


@dataclass
class Scenario:
    labels: List[str]
    marginals: List[Fraction]
    generators: List[List[List[str]]] = field(default_factory=list)
    suites: List[str] = field(default_factory=lambda: list(SUITE_NAMES))
    seed: int = 20240611
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    caps: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_CAPS))
    wick: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_WICK))
    quasifree: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_QUASIFREE))
    tomita: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_TOMITA))
    boundary: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_BOUNDARY))
    kakutani: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_KAKUTANI))
    jobs: int = 1
    source: Optional[str] = None

    def __post_init__(self):
        self.validate()

    @staticmethod
    def load(path: str) -> "Scenario":
        try:
            with open(path, "r", encoding="utf-8") as f:
                obj = json.load(f)
        except OSError as e:
            raise ScenarioError(f"cannot read scenario {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ScenarioError(f"scenario {path} is not valid JSON: {e}") from None
        scenario = Scenario.from_dict(obj)
        scenario.source = path
        return scenario

    @staticmethod
    def from_dict(obj: Dict[str, Any]) -> "Scenario":
        if not isinstance(obj, dict):
            raise ScenarioError("scenario must be a JSON object")
        known = {"labels", "marginals", "generators", "suites", "seed", "tolerances", "caps",
                 "wick", "quasifree", "tomita", "boundary", "kakutani", "jobs"}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {unknown}")
        for key in ("labels", "marginals"):
            if key not in obj:
                raise ScenarioError(f"scenario is missing '{key}'")
        return Scenario(
            labels=[str(x) for x in obj["labels"]],
            marginals=[parse_rational(p) for p in obj["marginals"]],
            generators=obj.get("generators", []),
            suites=list(obj.get("suites", SUITE_NAMES)),
            seed=obj.get("seed", 20240611),
            tolerances=_merged(DEFAULT_TOLERANCES, obj.get("tolerances"), "tolerances"),
            caps=_merged(DEFAULT_CAPS, obj.get("caps"), "caps"),
            wick=_merged(DEFAULT_WICK, obj.get("wick"), "wick"),
            quasifree=_merged(DEFAULT_QUASIFREE, obj.get("quasifree"), "quasifree"),
            tomita=_merged(DEFAULT_TOMITA, obj.get("tomita"), "tomita"),
            boundary=_merged(DEFAULT_BOUNDARY, obj.get("boundary"), "boundary"),
            kakutani=_merged(DEFAULT_KAKUTANI, obj.get("kakutani"), "kakutani"),
            jobs=obj.get("jobs", 1),
        )

    def validate(self) -> None:
        labels = self.labels
        if not labels:
            raise ScenarioError("labels must be non-empty")
        if len(set(labels)) != len(labels):
            raise ScenarioError(f"duplicate labels: {labels}")
        clash = sorted(set(labels) & {"I" + x for x in labels})
        if clash:
            raise ScenarioError(f"labels collide with partner names: {clash}")
        if len(self.marginals) != len(labels):
            raise ScenarioError(f"{len(labels)} labels but {len(self.marginals)} marginals")
        for p in self.marginals:
            if not (0 < p < 1):
                raise ScenarioError(f"marginal {p} is outside (0, 1)")
        if not isinstance(self.generators, list):
            raise ScenarioError("generators must be a list of cycle lists")
        for gen in self.generators:
            if not isinstance(gen, list) or not all(isinstance(c, list) for c in gen):
                raise ScenarioError(f"generator {gen!r} must be a list of label cycles")
            seen: List[str] = []
            for cycle in gen:
                for x in cycle:
                    if x not in labels:
                        raise ScenarioError(f"generator {gen!r} moves unknown label {x!r}")
                    if x in seen:
                        raise ScenarioError(f"generator {gen!r} is not a permutation (repeats {x!r})")
                    seen.append(x)
        bad = [s for s in self.suites if s not in SUITE_NAMES]
        if bad:
            raise ScenarioError(f"unknown suites: {bad} (known: {', '.join(SUITE_NAMES)})")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ScenarioError(f"seed must be a non-negative integer, got {self.seed!r}")
        if isinstance(self.jobs, bool) or not isinstance(self.jobs, int) or self.jobs < 1:
            raise ScenarioError(f"jobs must be a positive integer, got {self.jobs!r}")
        for name, value in self.tolerances.items():
            if not isinstance(value, (int, float)) or value <= 0:
                raise ScenarioError(f"tolerance '{name}' must be positive")

    def with_overrides(self, suites: Optional[Sequence[str]] = None, seed: Optional[int] = None,
                       tol: Optional[float] = None, n: Optional[int] = None,
                       jobs: Optional[int] = None) -> "Scenario":
        tolerances = dict(self.tolerances)
        wick = dict(self.wick)
        if tol is not None:
            tolerances["entry"] = tol
        if n is not None:
            if n < 0:
                raise ScenarioError("--n must be non-negative")
            wick["max_n"] = n
        return replace(
            self,
            suites=list(suites) if suites else list(self.suites),
            seed=self.seed if seed is None else seed,
            tolerances=tolerances,
            wick=wick,
            jobs=self.jobs if jobs is None else jobs,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "labels": list(self.labels),
            "marginals": [str(p) for p in self.marginals],
            "generators": self.generators,
            "suites": list(self.suites),
            "seed": self.seed,
            "tolerances": dict(self.tolerances),
            "caps": dict(self.caps),
            "wick": dict(self.wick),
            "quasifree": dict(self.quasifree),
            "tomita": dict(self.tomita),
            "boundary": dict(self.boundary),
            "kakutani": dict(self.kakutani),
            "jobs": self.jobs,
        }
