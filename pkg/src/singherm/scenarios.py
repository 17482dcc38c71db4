"""Scenario files, built-in scenarios and run reports.

A scenario is a JSON document naming a chart, a metric backend, a probe
grid, a seed and tolerances. Built-in scenarios are stored as the same
dictionaries and go through the same validation as user files.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import __version__
from .metric import (Chart, ClosedFormDualMetric, HolomorphicSection, MetricField,
                     PointwiseMetric, SectionInducedMetric)
from .parse import ParseError, parse

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Invalid scenario; ``pointer`` is the JSON pointer of the offending value."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


_EXPR = {"type": ["string", "number"]}
_MATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _EXPR}}
_CPLX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "name", "chart", "metric"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "minLength": 1},
        "chart": {
            "type": "object",
            "required": ["n", "center", "radius"],
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "center": {"type": "array", "items": _CPLX},
                "radius": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        "metric": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["sections", "dual_closed_form", "pointwise_builtin"]},
                "sections": _MATRIX,
                "base": {"oneOf": [{"const": "euclidean"},
                                   {"type": "array", "items": {"type": "array", "items": {
                                       "oneOf": [{"type": "number"}, _CPLX]}}}]},
                "entries": _MATRIX,
                "builtin": {"type": "string"},
                "dual_shift": {
                    "type": "object",
                    "required": ["eps", "diagonal"],
                    "additionalProperties": False,
                    "properties": {"eps": {"type": "number", "minimum": 0},
                                   "diagonal": {"type": "array", "items": {"type": "number"}}},
                },
            },
            "allOf": [
                {"if": {"properties": {"kind": {"const": "sections"}}},
                 "then": {"required": ["sections"]}},
                {"if": {"properties": {"kind": {"const": "dual_closed_form"}}},
                 "then": {"required": ["entries"]}},
                {"if": {"properties": {"kind": {"const": "pointwise_builtin"}}},
                 "then": {"required": ["builtin"]}},
            ],
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"per_axis": {"type": "integer", "minimum": 1},
                           "margin": {"type": "number", "minimum": 0}},
        },
        "seed": {"type": "integer", "minimum": 0},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}

DEFAULT_GRID = {"per_axis": 5, "margin": 0.0}


# -- pointwise builtins -----------------------------------------------------

def _example_pointwise(X):
    z, w = X[..., 0], X[..., 1]
    D = np.empty(X.shape[:-1] + (2, 2), dtype=complex)
    D[..., 0, 0] = abs(z) ** 2 + 1
    D[..., 0, 1] = z * np.conj(w)
    D[..., 1, 0] = w * np.conj(z)
    D[..., 1, 1] = abs(w) ** 2
    det = np.real(np.linalg.det(D))
    ok = det > 1e-12 * np.max(np.abs(D), axis=(-1, -2)) ** 2
    safe = np.where(ok[..., None, None], D, np.eye(2))
    return np.swapaxes(np.linalg.inv(safe), -1, -2), ok


def _concave_weight(X):
    return (1 - np.abs(X[..., 0]) ** 2 / 2)[..., None, None].astype(complex)


def _exp_weight(X):
    return np.exp(np.abs(X[..., 0]) ** 2)[..., None, None].astype(complex)


POINTWISE_BUILTINS: dict[str, tuple[Any, int, int]] = {
    # name: (vectorized evaluator, n, rank)
    "example42_pointwise": (_example_pointwise, 2, 2),
    "concave_weight_r1": (_concave_weight, 1, 1),
    "exp_weight_r1": (_exp_weight, 1, 1),
}


# -- built-in scenarios -----------------------------------------------------

def _chart(n, center, radius):
    return {"n": n, "center": [list(c) for c in center], "radius": list(radius)}


BUILTIN_SCENARIOS: dict[str, dict] = {
    "example42": {
        "schema_version": 1,
        "name": "example42",
        "chart": _chart(2, [(0.0, 0.0), (0.0, 0.0)], [1.0, 1.0]),
        "metric": {"kind": "sections", "sections": [["1", "0"], ["z", "w"]], "base": "euclidean"},
        "grid": {"per_axis": 5, "margin": 0.1},
        "seed": 0,
        "tolerances": {},
    },
    "euclidean_r2": {
        "schema_version": 1,
        "name": "euclidean_r2",
        "chart": _chart(2, [(0.0, 0.0), (0.0, 0.0)], [1.0, 1.0]),
        "metric": {"kind": "dual_closed_form", "entries": [["1", "0"], ["0", "1"]]},
        "grid": {"per_axis": 3, "margin": 0.0},
        "seed": 0,
        "tolerances": {},
    },
    "toric_torus_chart": {
        "schema_version": 1,
        "name": "toric_torus_chart",
        "chart": _chart(2, [(1.0, 0.0), (1.0, 0.0)], [0.5, 0.5]),
        "metric": {"kind": "sections", "sections": [["z", "0"], ["0", "w"]], "base": "euclidean"},
        "grid": {"per_axis": 3, "margin": 0.0},
        "seed": 0,
        "tolerances": {},
    },
}


# -- scenario ---------------------------------------------------------------

@dataclass
class Scenario:
    name: str
    chart: Chart
    metric_spec: dict
    grid: dict
    seed: int
    tolerances: dict
    raw: dict = field(repr=False)

    @property
    def n(self) -> int:
        return self.chart.n

    def build_metric(self) -> MetricField:
        return _build_metric(self.metric_spec, self.chart.n)

    def grid_points(self) -> np.ndarray:
        return self.chart.grid(self.grid["per_axis"], self.grid["margin"])

    def tolerance(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def dumps(self) -> str:
        return canonical_json(self.raw)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def _parse_matrix(rows, n, pointer):
    out = []
    for i, row in enumerate(rows):
        prow = []
        for j, e in enumerate(row):
            try:
                prow.append(parse(str(e), n))
            except ParseError as exc:
                raise ScenarioError(str(exc), f"{pointer}/{i}/{j}") from exc
        out.append(prow)
    return out


def _base_matrix(base, N):
    if base is None or base == "euclidean":
        return None
    mat = np.array([[complex(*v) if isinstance(v, list) else complex(v) for v in row]
                    for row in base])
    if mat.shape != (N, N):
        raise ScenarioError(f"base must be {N}x{N}", "/metric/base")
    return mat


def _build_metric(spec: dict, n: int) -> MetricField:
    kind = spec["kind"]
    if kind == "sections":
        polys = _parse_matrix(spec["sections"], n, "/metric/sections")
        ranks = {len(row) for row in polys}
        if len(ranks) != 1:
            raise ScenarioError("all sections must have the same rank", "/metric/sections")
        try:
            sections = [HolomorphicSection(tuple(row)) for row in polys]
        except (TypeError, ValueError) as exc:
            raise ScenarioError(str(exc), "/metric/sections") from exc
        try:
            m: MetricField = SectionInducedMetric(sections, _base_matrix(spec.get("base"), len(sections)))
        except ValueError as exc:
            raise ScenarioError(str(exc), "/metric") from exc
    elif kind == "dual_closed_form":
        entries = _parse_matrix(spec["entries"], n, "/metric/entries")
        try:
            m = ClosedFormDualMetric(entries)
        except ValueError as exc:
            raise ScenarioError(str(exc), "/metric/entries") from exc
    else:
        name = spec["builtin"]
        if name not in POINTWISE_BUILTINS:
            raise ScenarioError(f"unknown builtin {name!r}", "/metric/builtin")
        func, bn, br = POINTWISE_BUILTINS[name]
        if bn != n:
            raise ScenarioError(f"builtin {name!r} lives on C^{bn}, chart has n={n}", "/chart/n")
        m = PointwiseMetric(func, bn, br, label=name)
    shift = spec.get("dual_shift")
    if shift is not None:
        m = apply_dual_shift(m, shift["eps"], shift["diagonal"])
    return m


def apply_dual_shift(m: MetricField, eps: float, diagonal) -> ClosedFormDualMetric:
    """The metric whose dual is ``dual(m) + eps * diag(diagonal)``."""
    from .sesqui import SesquiPolynomial

    if isinstance(m, SectionInducedMetric):
        m = m.dual_metric()
    if not isinstance(m, ClosedFormDualMetric) or m.scale is not None:
        raise ScenarioError("dual_shift needs a closed-form dual", "/metric/dual_shift")
    if len(diagonal) != m.rank:
        raise ScenarioError(f"diagonal must have {m.rank} entries", "/metric/dual_shift/diagonal")
    E = [list(row) for row in m.entries]
    for a, c in enumerate(diagonal):
        E[a][a] = E[a][a] + SesquiPolynomial.constant(m.n, float(eps) * float(c))
    return ClosedFormDualMetric(E, label=f"{m.label}+{eps}*diag")


def scenario_from_dict(doc: dict) -> Scenario:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ScenarioError(err.message, _pointer(err.absolute_path))
    raw = copy.deepcopy(doc)
    raw.setdefault("grid", {})
    for key, val in DEFAULT_GRID.items():
        raw["grid"].setdefault(key, val)
    raw.setdefault("seed", 0)
    raw.setdefault("tolerances", {})
    ch = raw["chart"]
    n = ch["n"]
    if len(ch["center"]) != n:
        raise ScenarioError(f"center needs {n} coordinates", "/chart/center")
    if len(ch["radius"]) != n:
        raise ScenarioError(f"radius needs {n} entries", "/chart/radius")
    chart = Chart(n, [complex(*c) for c in ch["center"]], ch["radius"], label=raw["name"])
    if raw["grid"]["margin"] >= float(np.min(chart.radius)):
        raise ScenarioError("grid margin exceeds the chart radius", "/grid/margin")
    sc = Scenario(raw["name"], chart, raw["metric"], raw["grid"], raw["seed"],
                  raw["tolerances"], raw)
    sc.build_metric()  # validate expressions, dimensions and ranks up front
    return sc


def load_scenario(path_or_name) -> Scenario:
    """Load a built-in scenario by name or a JSON file by path."""
    key = str(path_or_name)
    if key in BUILTIN_SCENARIOS and not os.path.exists(key):
        return scenario_from_dict(copy.deepcopy(BUILTIN_SCENARIOS[key]))
    try:
        text = Path(key).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {key!r}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg} at line {exc.lineno}") from exc
    return scenario_from_dict(doc)


# -- reports ----------------------------------------------------------------

@dataclass
class Check:
    name: str
    operation: str
    tolerance: float | str
    passed: bool
    value: float | None = None
    details: dict = field(default_factory=dict)


@dataclass
class RunReport:
    command: str
    scenario: dict
    checks: list[Check]
    wall_time: float = 0.0
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def dumps(self) -> str:
        return canonical_json(_jsonable(self.to_dict()))

    @classmethod
    def from_dict(cls, d: dict) -> RunReport:
        checks = [Check(**c) for c in d["checks"]]
        return cls(d["command"], d["scenario"], checks, d.get("wall_time", 0.0),
                   d.get("version", __version__))

    @classmethod
    def load(cls, path) -> RunReport:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _jsonable(obj):
    """Convert numpy scalars/arrays and complex numbers into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.floating):
        return float(obj)
    return obj
