"""Scenario configuration: strict JSON schema plus semantic validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field as dc_field
from enum import Enum
from typing import Any

import jsonschema

from .errors import SchemaError
from .model import DistributionKind
from .solver import DEFAULT_TOL, MAX_ENUMERATE_SPINS, ParentState
from .observables import DEFAULT_DELTA_FACTORS


class Scenario(str, Enum):
    STATE_PROFILE = "state_profile"
    PURITY_VS_G = "purity_vs_g"
    ANGLE_SWEEP = "angle_sweep"
    SIZE_SWEEP = "size_sweep"
    DISTRIBUTION_SWEEP = "distribution_sweep"
    ED_CHECK = "ed_check"


_NUMBER = {"type": "number"}
_DIST_PROPS = {
    "kind": {"enum": [k.value for k in DistributionKind]},
    "total": {"type": "number", "exclusiveMinimum": 0},
    "jitter": {"type": ["number", "null"], "exclusiveMinimum": 0},
    "values": {"type": "array", "items": _NUMBER, "minItems": 1},
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario"],
    "properties": {
        "scenario": {"enum": [s.value for s in Scenario]},
        "description": {"type": "string"},
        "n_spins": {"type": "integer", "minimum": 2},
        "distribution": {
            "type": "object",
            "additionalProperties": False,
            "properties": _DIST_PROPS,
        },
        "field": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "norm": {"type": "number", "exclusiveMinimum": 0},
                "theta": _NUMBER,
                "components": {"type": "array", "items": _NUMBER, "minItems": 3, "maxItems": 3},
            },
        },
        "parents": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "g_grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "min": _NUMBER,
                "max": _NUMBER,
                "points": {"type": "integer"},
                "spacing": {"enum": ["linear", "log"]},
                "axis": {"enum": ["g_tilde", "g"]},
            },
        },
        "thetas": {"type": "array", "items": _NUMBER, "minItems": 1},
        "sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "distributions": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    **_DIST_PROPS,
                    "n_spins": {"type": "integer", "minimum": 2},
                    "label": {"type": "string"},
                },
            },
        },
        "bath_sz": {"type": "boolean"},
        "steps_hint": {"type": "integer", "minimum": 1},
        "delta_factors": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 5},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "newton": {"type": "number", "exclusiveMinimum": 0},
                "gamma": {"type": "number", "minimum": 0},
                "match": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {"type": "string"},
    },
}


@dataclass(frozen=True)
class DistributionSpec:
    kind: str = DistributionKind.SQRT_DECREASING.value
    total: float = 1.0
    jitter: float | None = None
    values: tuple[float, ...] | None = None
    n_spins: int | None = None
    label: str | None = None


@dataclass(frozen=True)
class FieldSpec:
    norm: float = 1.0
    theta: float = math.pi / 4
    components: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class GridSpec:
    min: float = 0.0
    max: float = 20.0
    points: int = 101
    spacing: str = "linear"
    axis: str = "g_tilde"


@dataclass(frozen=True)
class Tolerances:
    newton: float = DEFAULT_TOL
    gamma: float = 1e-6
    match: float = 1e-7


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    n_spins: int = 12
    distribution: DistributionSpec = dc_field(default_factory=DistributionSpec)
    field: FieldSpec = dc_field(default_factory=FieldSpec)
    parents: tuple[str, ...] = ("--+",)
    g_grid: GridSpec = dc_field(default_factory=GridSpec)
    thetas: tuple[float, ...] = ()
    sizes: tuple[int, ...] = ()
    distributions: tuple[DistributionSpec, ...] = ()
    bath_sz: bool = True
    steps_hint: int = 20
    delta_factors: tuple[float, ...] = DEFAULT_DELTA_FACTORS
    tolerances: Tolerances = dc_field(default_factory=Tolerances)
    output: str | None = None
    description: str = ""

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["scenario"] = self.scenario.value
        return out


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def _check_schema(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    err = errors[0]
    pointer = _pointer(err.absolute_path)
    if err.validator == "additionalProperties":
        known = set(err.schema.get("properties", {}))
        extra = sorted(set(err.instance) - known)
        if extra:
            raise SchemaError(f"{pointer}/{extra[0]}", f"unknown key {extra[0]!r}")
    raise SchemaError(pointer, err.message)


def _dist(d: dict[str, Any]) -> DistributionSpec:
    values = d.get("values")
    return DistributionSpec(
        kind=d.get("kind", DistributionKind.SQRT_DECREASING.value),
        total=float(d.get("total", 1.0)),
        jitter=d.get("jitter"),
        values=tuple(float(v) for v in values) if values is not None else None,
        n_spins=d.get("n_spins"),
        label=d.get("label"),
    )


def _validate_distribution(spec: DistributionSpec, where: str) -> None:
    if spec.kind == DistributionKind.CUSTOM.value and spec.values is None:
        raise ValueError(f"{where}: custom distributions need 'values'")
    if spec.kind != DistributionKind.CUSTOM.value and spec.values is not None:
        raise ValueError(f"{where}: 'values' is only allowed with kind 'custom'")


def _validate_theta(theta: float, name: str) -> None:
    if not 0.0 <= theta <= math.pi / 2:
        raise ValueError(f"{name}: theta must lie in [0, pi/2], got {theta!r}")


def parse_config(text: bytes | str) -> ScenarioConfig:
    """Parse and validate a UTF-8 JSON scenario document.

    Structural problems raise SchemaError carrying a JSON pointer; value
    constraints raise ValueError naming the field.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError("", f"config is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    _check_schema(doc)

    grid_doc = doc.get("g_grid", {})
    grid = GridSpec(**{k: grid_doc[k] for k in grid_doc})
    grid = GridSpec(float(grid.min), float(grid.max), int(grid.points), grid.spacing, grid.axis)
    if grid.min < 0:
        raise ValueError(f"g_grid.min must be >= 0, got {grid.min!r}")
    if grid.points < 2:
        raise ValueError(f"g_grid.points must be >= 2, got {grid.points!r}")
    if not grid.max > grid.min:
        raise ValueError("g_grid.max must exceed g_grid.min")
    if grid.spacing == "log" and grid.min <= 0:
        raise ValueError("g_grid.min must be > 0 for log spacing")

    field_doc = doc.get("field", {})
    if "components" in field_doc and ("theta" in field_doc or "norm" in field_doc):
        raise ValueError("field: give either components or (norm, theta), not both")
    comps = field_doc.get("components")
    fspec = FieldSpec(
        norm=float(field_doc.get("norm", 1.0)),
        theta=float(field_doc.get("theta", math.pi / 4)),
        components=tuple(float(c) for c in comps) if comps is not None else None,
    )
    if comps is None:
        _validate_theta(fspec.theta, "field.theta")
    elif not any(comps):
        raise ValueError("field.components must not all vanish")

    parents = tuple(doc.get("parents", ["--+"]))
    for i, motif in enumerate(parents):
        try:
            ParentState.from_motif(motif, 1)
        except ValueError as exc:
            raise ValueError(f"parents[{i}]: {exc}") from None

    dist = _dist(doc.get("distribution", {}))
    _validate_distribution(dist, "distribution")
    distributions = tuple(_dist(d) for d in doc.get("distributions", []))
    for i, d in enumerate(distributions):
        _validate_distribution(d, f"distributions[{i}]")
    thetas = tuple(float(t) for t in doc.get("thetas", []))
    for i, t in enumerate(thetas):
        _validate_theta(t, f"thetas[{i}]")

    tol_doc = doc.get("tolerances", {})
    scenario = Scenario(doc["scenario"])
    n_spins = int(doc.get("n_spins", 5 if scenario is Scenario.ED_CHECK else 12))
    if dist.values is not None and len(dist.values) != n_spins - 1:
        raise ValueError(f"distribution.values must hold n_spins - 1 = {n_spins - 1} couplings")

    required = {
        Scenario.ANGLE_SWEEP: ("thetas", thetas),
        Scenario.SIZE_SWEEP: ("sizes", doc.get("sizes")),
        Scenario.DISTRIBUTION_SWEEP: ("distributions", distributions),
    }
    if scenario in required and not required[scenario][1]:
        raise ValueError(f"scenario {scenario.value!r} requires a non-empty {required[scenario][0]!r}")
    if scenario is Scenario.ED_CHECK and n_spins > MAX_ENUMERATE_SPINS:
        raise ValueError(f"n_spins must be <= {MAX_ENUMERATE_SPINS} for ed_check")
    if scenario is Scenario.ED_CHECK and "parents" in doc:
        raise ValueError("parents: ed_check always enumerates every parent state")

    delta_factors = tuple(float(x) for x in doc.get("delta_factors", DEFAULT_DELTA_FACTORS))
    if not all(f > 0 for f in delta_factors) or any(b >= a for a, b in zip(delta_factors, delta_factors[1:])):
        raise ValueError("delta_factors must be positive and strictly decreasing")

    return ScenarioConfig(
        scenario=scenario,
        n_spins=n_spins,
        distribution=dist,
        field=fspec,
        parents=parents,
        g_grid=grid,
        thetas=thetas,
        sizes=tuple(int(n) for n in doc.get("sizes", [])),
        distributions=distributions,
        bath_sz=bool(doc.get("bath_sz", True)),
        steps_hint=int(doc.get("steps_hint", 20)),
        delta_factors=delta_factors,
        tolerances=Tolerances(**{k: float(v) for k, v in tol_doc.items()}),
        output=doc.get("output"),
        description=doc.get("description", ""),
    )
