"""Scenario configuration: JSON schema, validation and canonical serialization."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Any

import jsonschema

from .errors import ConfigReferenceError, ConfigSyntaxError, FlorasimError, SchemaError
from .node import NodeParams
from .plant import PlantParams
from .vmc import VmcParams
from .world import LIGHT_KINDS, REGION_LABELS, LightSource, Region, vec3

_NUM = {"type": "number"}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj(
    {
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "ticks": {"type": "integer", "minimum": 1},
        "vmc_period": {"type": "integer", "minimum": 1},
        "theta_repair": {"type": "number", "minimum": 0, "maximum": 1},
        "scaffold": {"type": ["object", "null"]},
        "braid": {
            "oneOf": [
                {"type": "null"},
                _obj(
                    {"layout": {"type": "object"}, "program": {"type": "object"}, "pitch_mm": {"type": "number", "exclusiveMinimum": 0}},
                    ["layout", "program"],
                ),
            ]
        },
        "regions": {
            "type": "array",
            "items": _obj(
                {
                    "id": {"type": "string", "minLength": 1},
                    "label": {"enum": list(REGION_LABELS)},
                    "min": _VEC3,
                    "max": _VEC3,
                    "occupancy": {"type": "number", "minimum": 0, "maximum": 1},
                },
                ["id", "label", "min", "max"],
            ),
        },
        "plant": _obj(
            {
                "seeds": {
                    "type": "array",
                    "items": _obj(
                        {
                            "id": {"type": "integer"},
                            "segment": {"type": "integer"},
                            "fraction": {"type": "number", "minimum": 0, "maximum": 1},
                        },
                        ["id", "segment"],
                    ),
                },
                "params": _obj(
                    {
                        "k_blue": {"type": "number", "minimum": 0},
                        "k_fr": {"type": "number", "minimum": 0},
                        "g_fr": {"type": "number", "minimum": 0},
                        "F_norm": {"type": "number", "exclusiveMinimum": 0},
                        "deterministic": {"type": "boolean"},
                        "base_rate": {"type": "number", "exclusiveMinimum": 0},
                        "probe_mm": {"type": "number", "minimum": 0},
                    }
                ),
            }
        ),
        "nodes": {
            "type": "array",
            "items": _obj(
                {
                    "id": {"type": "string", "pattern": r"^[A-Za-z0-9_.-]+$"},
                    "position": _VEC3,
                    "segment": {"type": ["integer", "null"]},
                    "neighbors": {"type": ["array", "null"], "items": {"type": "string"}},
                },
                ["id", "position"],
            ),
        },
        "node_params": _obj(
            {
                "N": {"type": "integer", "minimum": 1},
                "weights": {"type": ["array", "null"], "items": {"type": "number", "minimum": 0}},
                "A": {"type": "number", "minimum": 0},
                "sigma": {"type": "number", "minimum": 0},
                "d_detect": {"type": "number", "exclusiveMinimum": 0},
                "d_overlap": {"type": "number", "minimum": 0},
                "threshold": {"type": ["number", "null"]},
                "relay_threshold": {"type": "number", "minimum": 0},
                "d_min": {"type": "number", "minimum": 0},
                "led_intensity": {"type": "number", "minimum": 0},
            }
        ),
        "vmc": _obj(
            {
                "R_total": {"type": "number", "minimum": 0},
                "alpha": {"type": "number", "minimum": 0},
                "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "theta_branch": {"type": "number", "minimum": 0},
                "theta_prune": {"type": "number", "minimum": 0},
                "f_min": {"type": "integer", "minimum": 1},
                "V_init": {"type": "number", "minimum": 0},
            }
        ),
        "events": {
            "type": "array",
            "items": _obj({"tick": {"type": "integer", "minimum": 0}, "region": {"type": "string"}}, ["tick", "region"]),
        },
        "ambient": _obj({k: {"type": "number", "minimum": 0} for k in LIGHT_KINDS}),
        "lights": {
            "type": "array",
            "items": _obj(
                {"position": _VEC3, "kind": {"enum": list(LIGHT_KINDS)}, "intensity": {"type": "number", "minimum": 0}},
                ["position", "kind", "intensity"],
            ),
        },
        "engine": _obj(
            {
                "branch_length_mm": {"type": "number", "exclusiveMinimum": 0},
                "branch_angle_deg": {"type": "number"},
                "plane_normal": _VEC3,
                "root_filaments": {"type": ["integer", "null"], "minimum": 1},
                "neighbor_radius_mm": {"type": "number", "minimum": 0},
            }
        ),
    },
    ["ticks"],
)


@dataclass(frozen=True)
class EngineParams:
    branch_length_mm: float = 50.0
    branch_angle_deg: float = 30.0
    plane_normal: tuple[float, float, float] = (0.0, 1.0, 0.0)
    root_filaments: int | None = None  # defaults to the initial root filament total
    neighbor_radius_mm: float = 45.0


@dataclass(frozen=True)
class DamageEvent:
    tick: int
    region: str


@dataclass(frozen=True)
class SeedTip:
    id: int
    segment: int
    fraction: float = 0.0


@dataclass(frozen=True)
class NodePlacement:
    id: str
    position: tuple[float, float, float]
    segment: int | None = None
    neighbors: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    ticks: int
    seed: int = 0
    vmc_period: int = 10
    theta_repair: float = 0.95
    scaffold: dict | None = None
    braid: dict | None = None
    regions: tuple[Region, ...] = ()
    seeds: tuple[SeedTip, ...] = ()
    plant: PlantParams = field(default_factory=PlantParams)
    nodes: tuple[NodePlacement, ...] = ()
    node_params: NodeParams = field(default_factory=NodeParams)
    vmc: VmcParams = field(default_factory=VmcParams)
    events: tuple[DamageEvent, ...] = ()
    ambient: dict = field(default_factory=lambda: {"blue": 0.0, "far-red": 0.0, "ambient-red": 1.0})
    lights: tuple[LightSource, ...] = ()
    engine: EngineParams = field(default_factory=EngineParams)

    def region(self, region_id: str) -> Region:
        for r in self.regions:
            if r.id == region_id:
                return r
        raise KeyError(region_id)

    def to_dict(self) -> dict:
        """Canonical document with every default spelled out."""
        return {
            "seed": self.seed,
            "ticks": self.ticks,
            "vmc_period": self.vmc_period,
            "theta_repair": self.theta_repair,
            "scaffold": copy.deepcopy(self.scaffold),
            "braid": copy.deepcopy(self.braid),
            "regions": [
                {"id": r.id, "label": r.label, "min": list(r.lo), "max": list(r.hi), "occupancy": r.occupancy}
                for r in self.regions
            ],
            "plant": {
                "seeds": [{"id": s.id, "segment": s.segment, "fraction": s.fraction} for s in self.seeds],
                "params": asdict(self.plant),
            },
            "nodes": [
                {
                    "id": n.id,
                    "position": list(n.position),
                    "segment": n.segment,
                    "neighbors": None if n.neighbors is None else list(n.neighbors),
                }
                for n in self.nodes
            ],
            "node_params": {**asdict(self.node_params), "weights": list(self.node_params.weights)},
            "vmc": asdict(self.vmc),
            "events": [{"tick": e.tick, "region": e.region} for e in self.events],
            "ambient": dict(self.ambient),
            "lights": [{"position": list(s.position), "kind": s.kind, "intensity": s.intensity} for s in self.lights],
            "engine": {**asdict(self.engine), "plane_normal": list(self.engine.plane_normal)},
        }

    def with_overrides(self, **changes) -> "ScenarioConfig":
        doc = self.to_dict()
        doc.update(changes)
        return config_from_dict(doc)


def serialize_config(config: ScenarioConfig) -> str:
    return json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n"


def config_digest(config: ScenarioConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()


def parse_config(text: str) -> ScenarioConfig:
    """Parse and fully validate a JSON scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(exc.lineno, exc.colno, exc.msg) from None
    return config_from_dict(doc)


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def config_from_dict(doc: Any) -> ScenarioConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    error = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if error is not None:
        path = list(error.absolute_path)
        if error.validator == "additionalProperties":
            extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
            path += extra[:1]
        if error.validator == "required":
            missing = [k for k in error.validator_value if k not in error.instance]
            path += missing[:1]
        raise SchemaError(_path(path) or "$", error.message)

    def build(path, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, TypeError) as exc:
            raise SchemaError(path, str(exc)) from None

    if (doc.get("scaffold") is None) == (doc.get("braid") is None):
        raise SchemaError("scaffold", "exactly one of 'scaffold' and 'braid' must be given")

    regions = []
    for i, r in enumerate(doc.get("regions", [])):
        regions.append(build(f"regions[{i}]", Region, r["id"], r["label"], vec3(r["min"]), vec3(r["max"]), float(r.get("occupancy", 1.0))))
    ids = [r.id for r in regions]
    if len(set(ids)) != len(ids):
        raise SchemaError("regions", "region ids must be unique")

    plant_doc = doc.get("plant", {})
    seeds = tuple(SeedTip(int(s["id"]), int(s["segment"]), float(s.get("fraction", 0.0))) for s in plant_doc.get("seeds", []))
    if len({s.id for s in seeds}) != len(seeds):
        raise SchemaError("plant.seeds", "seed ids must be unique")
    params_doc = dict(plant_doc.get("params", {}))
    plant = build("plant.params", PlantParams, **params_doc)

    nodes = tuple(
        NodePlacement(
            n["id"],
            vec3(n["position"]),
            n.get("segment"),
            None if n.get("neighbors") is None else tuple(n["neighbors"]),
        )
        for n in doc.get("nodes", [])
    )
    node_ids = [n.id for n in nodes]
    if len(set(node_ids)) != len(node_ids):
        raise SchemaError("nodes", "node ids must be unique")
    np_doc = dict(doc.get("node_params", {}))
    if np_doc.get("weights") is not None:
        np_doc["weights"] = tuple(np_doc["weights"])
    node_params = build("node_params", NodeParams, **np_doc)
    vmc = build("vmc", VmcParams, **doc.get("vmc", {}))
    eng_doc = dict(doc.get("engine", {}))
    if "plane_normal" in eng_doc:
        eng_doc["plane_normal"] = vec3(eng_doc["plane_normal"])
        if not any(eng_doc["plane_normal"]):
            raise SchemaError("engine.plane_normal", "plane normal must be nonzero")
    engine = EngineParams(**eng_doc)

    ticks = int(doc["ticks"])
    events = []
    for i, e in enumerate(doc.get("events", [])):
        if e["region"] not in ids:
            raise ConfigReferenceError(f"events[{i}].region", f"event {i} references unknown region {e['region']!r}")
        if regions[ids.index(e["region"])].label != "damage":
            raise ConfigReferenceError(f"events[{i}].region", f"event {i} region {e['region']!r} is not a damage region")
        if e["tick"] >= ticks:
            raise SchemaError(f"events[{i}].tick", f"event {i} tick {e['tick']} is outside the run of {ticks} ticks")
        events.append(DamageEvent(int(e["tick"]), e["region"]))

    ambient = {"blue": 0.0, "far-red": 0.0, "ambient-red": 1.0}
    ambient.update({k: float(v) for k, v in doc.get("ambient", {}).items()})
    lights = tuple(LightSource(vec3(s["position"]), s["kind"], float(s["intensity"])) for s in doc.get("lights", []))

    braid = doc.get("braid")
    if braid is not None:
        braid = {"layout": braid["layout"], "program": braid["program"], "pitch_mm": float(braid.get("pitch_mm", 2.0))}

    config = ScenarioConfig(
        ticks=ticks,
        seed=int(doc.get("seed", 0)),
        vmc_period=int(doc.get("vmc_period", 10)),
        theta_repair=float(doc.get("theta_repair", 0.95)),
        scaffold=copy.deepcopy(doc.get("scaffold")),
        braid=copy.deepcopy(braid),
        regions=tuple(regions),
        seeds=seeds,
        plant=plant,
        nodes=nodes,
        node_params=node_params,
        vmc=vmc,
        events=tuple(events),
        ambient=ambient,
        lights=lights,
        engine=engine,
    )
    _check_references(config)
    return config


def _check_references(config: ScenarioConfig) -> None:
    from .engine import config_scaffold  # late import: engine depends on this module

    try:
        graph = config_scaffold(config)
    except FlorasimError as exc:
        raise SchemaError("scaffold" if config.scaffold is not None else "braid", str(exc)) from None
    for i, s in enumerate(config.seeds):
        if s.segment not in graph.segments:
            raise ConfigReferenceError(f"plant.seeds[{i}].segment", f"unknown segment {s.segment}")
    ids = {n.id for n in config.nodes}
    for i, n in enumerate(config.nodes):
        if n.segment is not None and n.segment not in graph.segments:
            raise ConfigReferenceError(f"nodes[{i}].segment", f"unknown segment {n.segment}")
        for j, other in enumerate(n.neighbors or ()):
            if other not in ids or other == n.id:
                raise ConfigReferenceError(f"nodes[{i}].neighbors[{j}]", f"unknown neighbor {other!r}")
