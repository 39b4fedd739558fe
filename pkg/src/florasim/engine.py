"""Discrete-time orchestration of scaffold, plant, nodes and controller.

Each tick runs a fixed pipeline:

1. every node samples its IR sensor, filters and detects (nodes by id);
2. every node runs its policy against last tick's neighbor LEDs;
3. the light field is rebuilt from the new LED states plus ambient light;
4. on ticks divisible by the controller period the vascular controller
   steps, accepted branch proposals grow the scaffold and filaments are
   reallocated;
5. plant tips grow (tips by id);
6. damage events scheduled for this tick strip plant material;
7. metrics and the log record are appended.

One ``numpy.random.Generator`` seeded from the config feeds every draw, in
exactly that order.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .braid import (
    Load,
    Merge,
    Split,
    Tube,
    _Compiler,
    build_layout,
    parse_program,
    SetSwitch,
    Unload,
)
from .config import ScenarioConfig, config_digest
from .errors import FlorasimError, NoValidSamples, SimulationError
from .node import (
    NodeParams,
    RoboticNode,
    derive_neighbors,
    detect,
    filtered_reading,
    policy_step,
    raw_ir_sample,
    sense_neighbors,
)
from .plant import PlantBody, PlantTip, grow_step, region_samples
from .vmc import VmcState, allocate_filaments, vmc_step
from .world import (
    LightSource,
    Region,
    ScaffoldGraph,
    Segment,
    StimulusField,
    Vec3,
    build_scaffold,
    natural_key,
    nearest_segment,
    project_onto_segment,
)

LOG_FORMAT = "florasim-runlog"
LOG_VERSION = 1


# -- geometry helpers ---------------------------------------------------------


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def rotate(v, axis, angle_deg: float) -> np.ndarray:
    """Rodrigues rotation of ``v`` about ``axis``."""
    k = _unit(axis)
    v = np.asarray(v, dtype=float)
    a = math.radians(angle_deg)
    return v * math.cos(a) + np.cross(k, v) * math.sin(a) + k * np.dot(k, v) * (1 - math.cos(a))


def _vec(a) -> Vec3:
    return (float(a[0]), float(a[1]), float(a[2]))


# -- scaffold sources ---------------------------------------------------------


def scaffold_from_program(
    layout_spec: Mapping,
    program_spec: Mapping,
    pitch_mm: float = 2.0,
    angle_deg: float = 30.0,
    plane_normal: Vec3 = (0.0, 1.0, 0.0),
) -> ScaffoldGraph:
    """Scaffold produced by running a braid program on a machine.

    Every tube tick lays ``pitch_mm`` of braid along the current axis of the
    tube; a split forks the tube into two axes rotated by ``±angle_deg`` about
    the plane normal; a merge joins the second tube into the first with a
    fusion segment. The root sits at the origin and the first axis is +z.
    """
    layout = build_layout(layout_spec)
    program = parse_program(program_spec)
    comp = _Compiler(layout)
    nodes: dict[int, Vec3] = {0: (0.0, 0.0, 0.0)}
    segments: list[Segment] = []
    # each active tube: frozenset of ring ids -> (end node, direction)
    tubes: dict[frozenset, tuple[int, np.ndarray]] = {}

    def new_node(p) -> int:
        nid = len(nodes)
        nodes[nid] = _vec(p)
        return nid

    def tube_for(rings) -> frozenset:
        key = frozenset(rings)
        if key not in tubes:
            for other in list(tubes):
                if key <= other or other <= key:
                    tubes[key] = tubes.pop(other)
                    return key
            tubes[key] = (0, np.array([0.0, 0.0, 1.0]))
        return key

    for ph in program.phases:
        if isinstance(ph, Tube):
            groups = [k for k in tubes if k <= frozenset(ph.rings)] or [tube_for(ph.rings)]
            for key in groups:
                before = comp._count_on(key)
                end, axis = tubes[key]
                if ph.ticks and before:
                    dst = new_node(np.asarray(nodes[end]) + axis * pitch_mm * ph.ticks)
                    segments.append(Segment(len(segments), end, dst, before, pitch_mm * ph.ticks))
                    tubes[key] = (dst, axis)
        elif isinstance(ph, Split):
            key = tube_for(ph.group)
            end, axis = tubes.pop(key)
            for into, sign in zip(ph.into, (1, -1)):
                tubes[frozenset(into)] = (end, rotate(axis, plane_normal, sign * angle_deg))
        elif isinstance(ph, Merge):
            k1, k2 = tube_for(ph.groups[0]), tube_for(ph.groups[1])
            (e1, a1), (e2, _) = tubes.pop(k1), tubes.pop(k2)
            n1, n2 = comp._count_on(k1), comp._count_on(k2)
            p1, p2 = np.asarray(nodes[e1]), np.asarray(nodes[e2])
            join = new_node((p1 + p2) / 2 + a1 * pitch_mm)
            segments.append(Segment(len(segments), e1, join, max(n1 + n2, 1), float(np.linalg.norm(np.asarray(nodes[join]) - p1))))
            segments.append(
                Segment(len(segments), e2, join, max(n2, 1), float(np.linalg.norm(np.asarray(nodes[join]) - p2)), fusion=True)
            )
            tubes[k1 | k2] = (join, a1)
        handler = {
            Load: comp.load, Unload: comp.unload, SetSwitch: comp.switch, Tube: comp.tube, Merge: comp.merge, Split: comp.split,
        }[type(ph)]
        handler(ph)
    return ScaffoldGraph.from_parts(nodes, segments, 0)


def config_scaffold(config: ScenarioConfig) -> ScaffoldGraph:
    if config.scaffold is not None:
        return build_scaffold(config.scaffold)
    b = config.braid
    e = config.engine
    return scaffold_from_program(b["layout"], b["program"], b["pitch_mm"], e.branch_angle_deg, e.plane_normal)


# -- world --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WorldState:
    tick: int
    graph: ScaffoldGraph
    vmc: VmcState
    tips: tuple[PlantTip, ...]
    body: PlantBody
    nodes: Mapping[str, RoboticNode]
    field: StimulusField
    rng: np.random.Generator = field(repr=False)
    root_filaments: int = 1
    next_tip_id: int = 0
    readings: Mapping[str, float | None] = field(default_factory=dict)
    detections: Mapping[str, bool] = field(default_factory=dict)

    def validate(self) -> None:
        for t in self.tips:
            if t.segment not in self.graph.segments:
                raise ValueError(f"tip {t.id} sits on unknown segment {t.segment}")
        for n in self.nodes.values():
            if n.segment not in self.graph.segments:
                raise ValueError(f"node {n.id} is mounted on unknown segment {n.segment}")


def target_path_segments(graph: ScaffoldGraph, regions) -> set[int]:
    """Segments on a root-to-target path."""
    out: set[int] = set()
    for seg in graph.tree_segments():
        if any(r.label == "target" and r.clip(graph.nodes[seg.src], graph.nodes[seg.dst]) for r in regions):
            out.update(graph.path_segments(seg.dst))
    return out


def node_role(position: Vec3, segment: int, graph: ScaffoldGraph, regions, target_path: set[int]) -> str:
    if any(r.label == "window" and r.contains(position) for r in regions):
        return "repeller"
    if segment in target_path:
        return "attractor"
    return "idle"


def _mount_depth(graph: ScaffoldGraph, segment: int, position: Vec3) -> float:
    seg = graph.segments[segment]
    t, _ = project_onto_segment(graph.nodes[seg.src], graph.nodes[seg.dst], position)
    return graph.depth_mm(segment, t)


def build_nodes(config: ScenarioConfig, graph: ScaffoldGraph) -> dict[str, RoboticNode]:
    mounted = []
    for p in config.nodes:
        sid = p.segment if p.segment is not None else nearest_segment(graph, p.position)[0]
        mounted.append(RoboticNode(p.id, p.position, sid))
    derived = derive_neighbors(mounted, config.engine.neighbor_radius_mm)
    target = target_path_segments(graph, config.regions)
    depth = {n.id: _mount_depth(graph, n.segment, n.position) for n in mounted}
    out = {}
    for p, n in zip(config.nodes, mounted):
        neighbors = tuple(p.neighbors) if p.neighbors is not None else derived[n.id]
        upstream = tuple(m for m in neighbors if depth[m] < depth[n.id])
        role = node_role(n.position, n.segment, graph, config.regions, target)
        out[n.id] = replace(n, role=role, neighbors=neighbors, upstream=upstream)
    return dict(sorted(out.items(), key=lambda kv: natural_key(kv[0])))


def light_field(nodes: Mapping[str, RoboticNode], config: ScenarioConfig) -> StimulusField:
    sources = list(config.lights)
    gain = config.node_params.led_intensity
    for n in nodes.values():
        blue, far_red = n.led
        if blue > 0:
            sources.append(LightSource(n.position, "blue", blue * gain))
        if far_red > 0:
            sources.append(LightSource(n.position, "far-red", far_red * gain))
    return StimulusField(tuple(sources), dict(config.ambient))


def initial_world(config: ScenarioConfig) -> WorldState:
    graph = config_scaffold(config)
    nodes = build_nodes(config, graph)
    tips = tuple(
        PlantTip(s.id, s.segment, s.fraction, "growing", config.plant.base_rate) for s in sorted(config.seeds, key=lambda s: s.id)
    )
    root_filaments = config.engine.root_filaments
    if root_filaments is None:
        root_filaments = sum(graph.segments[s].filaments for s in graph.children[graph.root]) or 1
    world = WorldState(
        tick=0,
        graph=graph,
        vmc=VmcState.initial(graph, config.vmc),
        tips=tips,
        body=PlantBody(),
        nodes=nodes,
        field=light_field(nodes, config),
        rng=np.random.default_rng(config.seed),
        root_filaments=int(root_filaments),
        next_tip_id=max((t.id for t in tips), default=-1) + 1,
    )
    world.validate()
    return world


# -- pipeline stages ----------------------------------------------------------


def leaf_scores(graph: ScaffoldGraph, regions) -> dict[int, float]:
    """Free-space score per leaf: 1 minus the occupancy around it."""
    scores = {}
    for leaf in graph.leaves():
        occ = [r.occupancy for r in regions if r.label == "occupied-space" and r.contains(graph.nodes[leaf])]
        scores[leaf] = 1.0 - max(occ) if occ else 1.0
    return scores


def apply_branches(graph: ScaffoldGraph, proposals, root_filaments: int, config: ScenarioConfig):
    """Grow two children at each proposed leaf while filaments allow it."""
    eng, f_min = config.engine, config.vmc.f_min
    added_nodes: dict[int, Vec3] = {}
    added_segments: list[Segment] = []
    grown = []
    leaves = len(graph.leaves())
    next_node, next_seg = graph.next_node_id(), graph.next_segment_id()
    for p in proposals:
        if p.kind != "branch-at":
            continue
        if (leaves + 1) * f_min > root_filaments:
            break
        sid = graph.parent_segment[p.node_id]
        seg = graph.segments[sid]
        origin = np.asarray(graph.nodes[p.node_id])
        axis = np.asarray(graph.nodes[seg.dst]) - np.asarray(graph.nodes[seg.src])
        axis = axis / np.linalg.norm(axis)
        for sign in (1, -1):
            end = origin + rotate(axis, eng.plane_normal, sign * eng.branch_angle_deg) * eng.branch_length_mm
            added_nodes[next_node] = _vec(end)
            added_segments.append(Segment(next_seg, p.node_id, next_node, f_min, eng.branch_length_mm))
            next_node += 1
            next_seg += 1
        leaves += 1
        grown.append(p.node_id)
    if not grown:
        return graph, []
    return graph.with_additions(added_nodes, added_segments), grown


def reallocate(graph: ScaffoldGraph, vmc: VmcState, root_filaments: int, f_min: int) -> ScaffoldGraph:
    """Top-down largest-remainder split of filaments by child vessel strength."""
    leaves = graph.subtree_leaf_counts()
    counts: dict[int, int] = {}
    for n in graph.preorder():
        kids = graph.children[n]
        if not kids:
            continue
        total = root_filaments if n == graph.root else counts[graph.parent_segment[n]]
        dsts = [graph.segments[s].dst for s in kids]
        alloc = allocate_filaments(total, [vmc.vessel[d] for d in dsts], minimums=[leaves[d] * f_min for d in dsts])
        counts.update(zip(kids, alloc))
    return graph.with_filaments(counts)


def damage(world: WorldState, region: Region, base_rate: float) -> WorldState:
    """Strip plant material inside ``region``.

    Tips inside are removed; a regrowth tip sprouts at the lower end of every
    stripped span so that living tissue below the wound can grow back.
    """
    graph, body = world.graph, world.body
    sprouts = []
    for sid in sorted(body.spans):
        seg = graph.segments[sid]
        window = region.clip(graph.nodes[seg.src], graph.nodes[seg.dst])
        if window is None:
            continue
        lo, hi = window
        for a, b in body.spans[sid]:
            cut = (max(a, lo), min(b, hi))
            if cut[1] > cut[0]:
                sprouts.append((sid, cut[0]))
        body = body.remove(sid, lo, hi)
    tips = [
        replace(t, status="removed") if t.status != "removed" and region.contains(graph.point_at(t.segment, t.fraction)) else t
        for t in world.tips
    ]
    next_id = world.next_tip_id
    for sid, f in sprouts:
        tips.append(PlantTip(next_id, sid, f, "growing", base_rate))
        next_id += 1
    return replace(world, body=body, tips=tuple(tips), next_tip_id=next_id)


class _RegionCache:
    """Per-graph 1 mm sample points of every region, reused across ticks."""

    def __init__(self, regions):
        self.regions = regions
        self.graph = None
        self.samples: dict[str, list[tuple[int, float]]] = {}

    def coverage(self, graph: ScaffoldGraph, body: PlantBody) -> dict[str, float]:
        if graph is not self.graph:
            self.graph = graph
            self.samples = {r.id: region_samples(graph, r) for r in self.regions}
        out = {}
        for r in self.regions:
            pts = self.samples[r.id]
            out[r.id] = sum(body.covered(s, t) for s, t in pts) / len(pts) if pts else 0.0
        return out


def step(world: WorldState, config: ScenarioConfig, _cache: _RegionCache | None = None) -> tuple[WorldState, dict]:
    """Advance one tick; returns the new world and the tick's log record."""
    tick = world.tick
    try:
        rng = copy.deepcopy(world.rng)
        graph = world.graph
        params: NodeParams = config.node_params
        tip_points = [graph.point_at(t.segment, t.fraction) for t in world.tips if t.status == "growing"]

        sensed, readings, detections = {}, {}, {}
        for nid, node in world.nodes.items():
            value, valid = raw_ir_sample(node, tip_points, rng, params)
            node = node.with_sample(value, valid, params.N)
            try:
                readings[nid] = filtered_reading(node.buffer, params.weights)
                detections[nid] = detect(readings[nid], params)
            except NoValidSamples:
                readings[nid], detections[nid] = None, False
            sensed[nid] = node

        nodes = {}
        for nid, node in sensed.items():
            inputs = sense_neighbors(node, world.nodes, params)
            led = policy_step(node, detections[nid], inputs, node.role, params)
            nodes[nid] = replace(node, led=led)
        field_ = light_field(nodes, config)

        vmc, vmc_record = world.vmc, None
        tips = list(world.tips)
        if tick % config.vmc_period == 0 and graph.segments:
            vmc, proposals = vmc_step(graph, vmc, leaf_scores(graph, config.regions), config.vmc)
            graph, grown = apply_branches(graph, proposals, world.root_filaments, config)
            if grown:
                vmc = vmc.with_nodes([n for n in graph.nodes if n not in vmc.vessel], config.vmc)
                parked = {graph.parent_segment[n] for n in grown}
                tips = [replace(t, status="growing") if t.status == "stopped" and t.fraction == 1.0 and t.segment in parked else t for t in tips]
            graph = reallocate(graph, vmc, world.root_filaments, config.vmc.f_min)
            vmc_record = {str(n): vmc.vessel[n] for n in graph.nodes}

        tips, body = grow_step(tips, world.body, graph, field_, config.plant, rng)
        world = replace(
            world, tick=tick, graph=graph, vmc=vmc, tips=tuple(tips), body=body, nodes=nodes, field=field_,
            rng=rng, readings=readings, detections=detections,
        )

        applied = []
        for ev in config.events:
            if ev.tick == tick:
                world = damage(world, config.region(ev.region), config.plant.base_rate)
                applied.append(ev.region)
    except FlorasimError as exc:
        raise SimulationError(tick, exc) from exc

    cache = _cache or _RegionCache(config.regions)
    record = {
        "tick": tick,
        "coverage": cache.coverage(world.graph, world.body),
        "detections": dict(detections),
        "readings": dict(readings),
        "leds": {nid: list(n.led) for nid, n in nodes.items()},
        "tips": [[t.id, t.segment, t.fraction, t.status] for t in world.tips],
        "filaments": {str(s.id): s.filaments for s in world.graph.segments.values()},
        "events": applied,
    }
    if vmc_record is not None:
        record["vmc"] = vmc_record
    return replace(world, tick=tick + 1), record


# -- runs ---------------------------------------------------------------------


@dataclass(frozen=True)
class RunLog:
    header: dict
    records: tuple[dict, ...]


@dataclass(frozen=True)
class BenchmarkResult:
    passed: bool
    window_clear: bool
    window_violations: int
    repair_tick: int | None
    pre_damage: Mapping[str, float]
    final_coverage: Mapping[str, float]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "window_clear": self.window_clear,
            "window_violations": self.window_violations,
            "repair_tick": self.repair_tick,
            "pre_damage": dict(self.pre_damage),
            "final_coverage": dict(self.final_coverage),
        }


@dataclass(frozen=True)
class Metrics:
    coverage: tuple[Mapping[str, float], ...]
    window_violations: tuple[int, ...]
    active_tips: tuple[int, ...]
    filaments: tuple[Mapping[str, int], ...]
    result: BenchmarkResult | None = None


def log_header(config: ScenarioConfig) -> dict:
    return {
        "format": LOG_FORMAT,
        "version": LOG_VERSION,
        "seed": config.seed,
        "config_digest": config_digest(config),
        "config": config.to_dict(),
    }


def metrics_from_records(records, config: ScenarioConfig) -> Metrics:
    windows = [r.id for r in config.regions if r.label == "window"]
    violations, running = [], 0
    for rec in records:
        running += any(rec["coverage"][w] > 0 for w in windows)
        violations.append(running)
    return Metrics(
        coverage=tuple(rec["coverage"] for rec in records),
        window_violations=tuple(violations),
        active_tips=tuple(sum(1 for t in rec["tips"] if t[3] == "growing") for rec in records),
        filaments=tuple(rec["filaments"] for rec in records),
    )


def evaluate_benchmark(metrics: Metrics, config: ScenarioConfig) -> BenchmarkResult:
    """Window kept clear at every tick and every damaged region grown back.

    Recovery of a region means coverage at least ``theta_repair`` times its
    coverage on the tick before its (last) damage event. The repair tick is
    the first tick from the last event on at which every region recovered.
    """
    cov = metrics.coverage
    violations = metrics.window_violations[-1] if metrics.window_violations else 0
    window_clear = violations == 0
    final = dict(cov[-1]) if cov else {}
    if not config.events:
        return BenchmarkResult(window_clear, window_clear, violations, None, {}, final)
    last_tick = max(e.tick for e in config.events)
    last_event = {e.region: e.tick for e in sorted(config.events, key=lambda e: e.tick)}
    pre = {r: (cov[t - 1][r] if t >= 1 else 0.0) for r, t in last_event.items()}
    repair = None
    for t in range(last_tick, len(cov)):
        if all(cov[t][r] >= config.theta_repair * pre[r] for r in pre):
            repair = t
            break
    return BenchmarkResult(window_clear and repair is not None, window_clear, violations, repair, pre, final)


def iterate(config: ScenarioConfig, until: int | None = None):
    """Yield ``(world, record)`` after each tick."""
    world = initial_world(config)
    cache = _RegionCache(config.regions)
    for _ in range(config.ticks if until is None else min(until, config.ticks)):
        world, rec = step(world, config, cache)
        yield world, rec


def run(config: ScenarioConfig, until: int | None = None) -> tuple[RunLog, Metrics, WorldState]:
    """Simulate ``config.ticks`` ticks (or the first ``until``)."""
    world, records = initial_world(config), []
    for world, rec in iterate(config, until):
        records.append(rec)
    metrics = metrics_from_records(records, config)
    metrics = replace(metrics, result=evaluate_benchmark(metrics, config))
    return RunLog(log_header(config), tuple(records)), metrics, world
