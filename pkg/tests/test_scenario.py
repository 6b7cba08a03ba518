import json
from fractions import Fraction
from pathlib import Path

import pytest

from core.errors import ScenarioError
from core.scenario import SUITE_NAMES, Scenario, parse_rational

ASSETS = Path(__file__).resolve().parent.parent / "assets"


def base(**overrides):
    obj = {"labels": ["a", "b"], "marginals": ["1/2", "1/3"], "generators": [[["a", "b"]]]}
    obj.update(overrides)
    return obj


@pytest.mark.parametrize("name", ["scenario_default.json", "scenario_stress.json", "scenario_s4.json"])
def test_bundled_scenarios_load(name):
    scenario = Scenario.load(str(ASSETS / name))
    assert scenario.source.endswith(name)
    assert all(s in SUITE_NAMES for s in scenario.suites)


def test_default_scenario_values():
    scenario = Scenario.load(str(ASSETS / "scenario_default.json"))
    assert scenario.labels == ["a", "b", "c"]
    assert scenario.marginals == [Fraction(1, 2), Fraction(1, 3), Fraction(2, 5)]
    assert scenario.suites == list(SUITE_NAMES)
    assert scenario.tolerances["entry"] == 1e-8
    assert scenario.tolerances["strict"] == 1e-10
    assert scenario.tolerances["exact"] == 1e-12
    assert scenario.tolerances["implementation"] == 1e-9
    assert scenario.caps["crossed_dim"] == 4096
    assert scenario.wick == {"max_n": 5, "samples": 50}
    assert scenario.quasifree["samples"] == 200


def test_defaults_fill_missing_sections():
    scenario = Scenario.from_dict(base())
    assert scenario.seed == 20240611
    assert scenario.jobs == 1
    assert scenario.boundary["decay_length"] == 50
    assert scenario.tomita["monomials"] == 100
    assert scenario.wick == {"max_n": 5, "samples": 50}
    assert scenario.caps["crossed_dim"] == 4096


@pytest.mark.parametrize("text,value", [("1/2", Fraction(1, 2)), (" 2/5 ", Fraction(2, 5)), ("0.25", Fraction(1, 4)), (1, Fraction(1))])
def test_parse_rational(text, value):
    assert parse_rational(text) == value


@pytest.mark.parametrize("text", ["1/x", "1/0", 0.5, True, None])
def test_parse_rational_rejects(text):
    with pytest.raises(ScenarioError):
        parse_rational(text)


@pytest.mark.parametrize("obj", [
    base(marginals=["0/1", "1/3"]),
    base(marginals=["1/2", "1"]),
    base(marginals=["1/2"]),
    base(labels=["a", "a"]),
    base(labels=["a", "Ia"]),
    base(labels=[]),
    base(generators=[[["a", "z"]]]),
    base(generators=[[["a", "b"], ["b", "a"]]]),
    base(generators=["ab"]),
    base(suites=["car", "nope"]),
    base(seed=-1),
    base(seed="7"),
    base(jobs=0),
    base(tolerances={"entry": -1.0}),
    base(tolerances={"bogus": 1.0}),
    base(extra=1),
    {"labels": ["a"]},
    ["a"],
])
def test_invalid_scenarios(obj):
    with pytest.raises(ScenarioError):
        Scenario.from_dict(obj)


def test_load_reports_bad_files(tmp_path):
    with pytest.raises(ScenarioError):
        Scenario.load(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ScenarioError):
        Scenario.load(str(broken))


def test_overrides():
    scenario = Scenario.from_dict(base())
    changed = scenario.with_overrides(suites=["car"], seed=7, tol=1e-6, n=3, jobs=2)
    assert changed.suites == ["car"]
    assert changed.seed == 7
    assert changed.tolerances["entry"] == 1e-6
    assert changed.tolerances["strict"] == scenario.tolerances["strict"]
    assert changed.wick["max_n"] == 3
    assert changed.jobs == 2
    # the original is untouched
    assert scenario.tolerances["entry"] == 1e-8
    assert scenario.with_overrides().suites == scenario.suites


@pytest.mark.parametrize("kwargs", [{"suites": ["nope"]}, {"n": -1}, {"jobs": 0}, {"tol": 0.0}])
def test_invalid_overrides(kwargs):
    with pytest.raises(ScenarioError):
        Scenario.from_dict(base()).with_overrides(**kwargs)


def test_to_dict_is_json_and_reloads(tmp_path):
    scenario = Scenario.from_dict(base(seed=11))
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario.to_dict()), encoding="utf-8")
    again = Scenario.load(str(path))
    assert again.to_dict() == scenario.to_dict()
