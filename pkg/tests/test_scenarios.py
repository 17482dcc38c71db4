import copy
import json

import numpy as np
import pytest

from singherm.metric import ClosedFormDualMetric, PointwiseMetric, SectionInducedMetric
from singherm.scenarios import (BUILTIN_SCENARIOS, Check, RunReport, ScenarioError,
                                apply_dual_shift, canonical_json, load_scenario,
                                scenario_from_dict)


def doc(**changes):
    d = copy.deepcopy(BUILTIN_SCENARIOS["example42"])
    for path, value in changes.items():
        node = d
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return d


@pytest.mark.parametrize("name", sorted(BUILTIN_SCENARIOS))
def test_builtins_load_and_build(name):
    sc = load_scenario(name)
    assert sc.name == name
    m = sc.build_metric()
    assert m.n == sc.n
    assert sc.grid_points().shape[-1] == sc.n


def test_metric_kinds():
    assert isinstance(load_scenario("example42").build_metric(), SectionInducedMetric)
    assert isinstance(load_scenario("euclidean_r2").build_metric(), ClosedFormDualMetric)
    d = doc(metric={"kind": "pointwise_builtin", "builtin": "concave_weight_r1"},
            chart={"n": 1, "center": [[0, 0]], "radius": [1.0]})
    assert isinstance(scenario_from_dict(d).build_metric(), PointwiseMetric)


def test_example_scenario_metric_matches_fixture(example_h):
    m = load_scenario("example42").build_metric()
    x = np.array([[0.3 + 0.1j, 0.2 - 0.4j]])
    np.testing.assert_allclose(m.evaluate_batch(x)[0], example_h.evaluate_batch(x)[0])


@pytest.mark.parametrize("change,pointer", [
    ({"schema_version": 2}, "/schema_version"),
    ({"metric__kind": "spline"}, "/metric/kind"),
    ({"chart__radius": [1.0, -1.0]}, "/chart/radius/1"),
    ({"grid__per_axis": 0}, "/grid/per_axis"),
    ({"extra": 1}, ""),
    ({"chart__center": [[0, 0]]}, "/chart/center"),
    ({"grid__margin": 2.0}, "/grid/margin"),
    ({"metric__sections": [["1", "0"], ["z", "w+"]]}, "/metric/sections/1/1"),
])
def test_invalid_scenarios_report_a_pointer(change, pointer):
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(doc(**change))
    assert info.value.pointer == pointer


def test_missing_required_field():
    d = doc()
    del d["chart"]
    with pytest.raises(ScenarioError):
        scenario_from_dict(d)


def test_dimension_and_rank_mismatches_are_rejected():
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc(metric={"kind": "sections", "sections": [["1", "0"], ["z"]]}))
    with pytest.raises((ScenarioError, ValueError)):
        scenario_from_dict(doc(metric={"kind": "sections", "sections": [["u", "0"]]}))
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc(metric={"kind": "pointwise_builtin", "builtin": "nope"}))


def test_missing_files_and_bad_json(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_defaults_are_filled():
    d = doc()
    del d["grid"], d["seed"], d["tolerances"]
    sc = scenario_from_dict(d)
    assert sc.grid == {"per_axis": 5, "margin": 0.0}
    assert sc.seed == 0


@pytest.mark.parametrize("name", sorted(BUILTIN_SCENARIOS))
def test_round_trip_is_byte_identical(name, tmp_path):
    sc = load_scenario(name)
    path = tmp_path / "s.json"
    sc.save(path)
    again = load_scenario(path)
    assert again.dumps() == sc.dumps() == path.read_text()
    assert sc.dumps() == canonical_json(json.loads(sc.dumps()))


def test_dual_shift_extension():
    d = doc(metric__dual_shift={"eps": 0.1, "diagonal": [1.0, 1.0]})
    m = scenario_from_dict(d).build_metric()
    x = np.array([0.0, 0.0])
    np.testing.assert_allclose(np.diag(m.evaluate(x).entries).real, [1 / 1.1, 1 / 0.1])
    base = load_scenario("example42").build_metric()
    shifted = apply_dual_shift(base, 0.1, [1.0, 1.0])
    np.testing.assert_allclose(shifted.evaluate(x).entries, m.evaluate(x).entries)
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc(metric__dual_shift={"eps": 0.1, "diagonal": [1.0]}))


def test_report_round_trip(tmp_path):
    rep = RunReport("reproduce", load_scenario("example42").to_dict(),
                    [Check("a", "op", 1e-8, True, 0.5, {"x": [1, 2]}),
                     Check("b", "op", "equal", False, None, {})], wall_time=1.25)
    assert not rep.passed
    path = tmp_path / "r.json"
    path.write_text(rep.dumps())
    back = RunReport.load(path)
    assert back.dumps() == rep.dumps()
    assert [c.name for c in back.checks] == ["a", "b"]
