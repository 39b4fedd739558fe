"""Ready-made scenarios: the windowed-wall benchmark, a steering Y and sensor approach runs."""

from __future__ import annotations

import math

import numpy as np

from .config import ScenarioConfig, config_from_dict
from .node import NodeParams, RoboticNode, detect, filtered_reading, raw_ir_sample
from .errors import NoValidSamples

WALL_COLUMNS = (0.0, 100.0, 200.0, 300.0)


def wall_scaffold() -> dict:
    """Braided wall in the x-z plane: a base rail, four columns and a diagonal.

    Every column rises from the rail in three 100 mm segments. Column 1 has a
    diagonal offshoot into the window; column 2 has one that steers away from
    the target. Offshoots get the lower segment id so a tip only avoids them
    when light tells it to.
    """
    nodes = [{"id": 0, "pos": [0, 0, 0]}]
    segments = []
    base = {0.0: 0}
    for x in WALL_COLUMNS[1:]:
        nid = len(nodes)
        nodes.append({"id": nid, "pos": [x, 0, 0]})
        base[x] = nid
    prev = 0
    for x in WALL_COLUMNS[1:]:
        segments.append({"from": prev, "to": base[x]})
        prev = base[x]
    column_nodes = {}
    for x in WALL_COLUMNS:
        chain = [base[x]]
        for z in (100, 200, 300):
            nid = len(nodes)
            nodes.append({"id": nid, "pos": [x, 0, z]})
            chain.append(nid)
        column_nodes[x] = chain
    offshoots = {100.0: (1, [150, 0, 150]), 200.0: (2, [250, 0, 250])}
    for x in WALL_COLUMNS:
        chain = column_nodes[x]
        for level, (a, b) in enumerate(zip(chain, chain[1:])):
            if x in offshoots and offshoots[x][0] == level:
                nid = len(nodes)
                nodes.append({"id": nid, "pos": offshoots[x][1]})
                segments.append({"from": a, "to": nid})
            segments.append({"from": a, "to": b})
    # ids in insertion order; filaments sized so each leaf can keep two
    for i, s in enumerate(segments):
        s["id"] = i
    children: dict[int, list[int]] = {}
    for s in segments:
        children.setdefault(s["from"], []).append(s["to"])

    def leaves(n):
        kids = children.get(n, [])
        return sum(leaves(k) for k in kids) if kids else 1

    for s in segments:
        s["filaments"] = 2 * leaves(s["to"])
    return {"nodes": nodes, "segments": segments, "root": 0}


def _segment_id(scaffold: dict, src_pos, dst_pos) -> int:
    pos = {n["id"]: n["pos"] for n in scaffold["nodes"]}
    for s in scaffold["segments"]:
        if pos[s["from"]] == list(src_pos) and pos[s["to"]] == list(dst_pos):
            return s["id"]
    raise KeyError((src_pos, dst_pos))


def benchmark_config(seed: int = 0, deterministic: bool = True, ticks: int = 400) -> ScenarioConfig:
    """Windowed wall: grow over the wall, keep the window clear, heal a wound.

    A repeller inside the window drives far-red when a tip approaches the
    diagonal into it; attractors along column 2 relay blue upwards towards
    the target. Plant material on column 3 is cut away at tick 250.
    """
    scaffold = wall_scaffold()
    first = [_segment_id(scaffold, [x, 0, 0], [x, 0, 100]) for x in WALL_COLUMNS]
    nodes = [{"id": "r1", "position": [125, 0, 125]}]
    nodes += [{"id": f"a{i}", "position": [200, 0, 35 * i]} for i in range(1, 9)]
    doc = {
        "seed": seed,
        "ticks": ticks,
        "vmc_period": 10,
        "theta_repair": 0.95,
        "scaffold": scaffold,
        "regions": [
            {"id": "window", "label": "window", "min": [110, -10, 110], "max": [190, 10, 290]},
            {"id": "furniture", "label": "occupied-space", "min": [105, -10, 105], "max": [195, 10, 295], "occupancy": 1.0},
            {"id": "target", "label": "target", "min": [190, -10, 280], "max": [210, 10, 320]},
            {"id": "wound", "label": "damage", "min": [280, -10, 130], "max": [320, 10, 170]},
        ],
        "plant": {
            "seeds": [{"id": i, "segment": sid, "fraction": 0.0} for i, sid in enumerate(first)],
            "params": {"deterministic": deterministic},
        },
        "nodes": nodes,
        "events": [{"tick": 250, "region": "wound"}],
        "engine": {"root_filaments": sum(s["filaments"] for s in scaffold["segments"] if s["from"] == 0)},
    }
    return config_from_dict(doc)


def y_scaffold() -> dict:
    """100 mm trunk forking into two 50 mm branches at ±30° from vertical."""
    dx, dz = 50 * math.sin(math.radians(30)), 100 + 50 * math.cos(math.radians(30))
    return {
        "nodes": [
            {"id": 0, "pos": [0, 0, 0]},
            {"id": 1, "pos": [0, 0, 100]},
            {"id": 2, "pos": [-dx, 0, dz]},
            {"id": 3, "pos": [dx, 0, dz]},
        ],
        "segments": [
            {"id": 0, "from": 0, "to": 1, "filaments": 2},
            {"id": 1, "from": 1, "to": 2, "filaments": 1},
            {"id": 2, "from": 1, "to": 3, "filaments": 1},
        ],
        "root": 0,
    }


def steering_config(seed: int = 0, deterministic: bool = True, ticks: int = 130) -> ScenarioConfig:
    """Y scaffold with an attractor node halfway up the right branch (segment 2).

    The target region sits at the right branch's tip, so the node is an
    attractor and lights blue once it detects the approaching shoot.
    """
    scaffold = y_scaffold()
    tip = scaffold["nodes"][3]["pos"]
    mid = [tip[0] / 2, 0, (100 + tip[2]) / 2]
    doc = {
        "seed": seed,
        "ticks": ticks,
        "scaffold": scaffold,
        "regions": [
            {"id": "goal", "label": "target", "min": [tip[0] - 5, -5, tip[2] - 5], "max": [tip[0] + 5, 5, tip[2] + 5]},
        ],
        "plant": {"seeds": [{"id": 0, "segment": 0}], "params": {"deterministic": deterministic}},
        "nodes": [{"id": "n1", "position": mid, "segment": 2}],
    }
    return config_from_dict(doc)


def approach_run(seed: int, params: NodeParams = NodeParams(), start_cm: float = 20.0, step_mm: float = 1.0):
    """A tip walks straight at a lone node; returns ``(first_detection_cm, trace)``.

    ``trace`` lists ``(distance_cm, detected)`` for every tick.
    """
    rng = np.random.default_rng(seed)
    node = RoboticNode("n", (0.0, 0.0, 0.0), 0)
    first, trace = None, []
    d_mm = start_cm * 10.0
    while d_mm >= 0:
        value, valid = raw_ir_sample(node, [(d_mm, 0.0, 0.0)], rng, params)
        node = node.with_sample(value, valid, params.N)
        try:
            hit = detect(filtered_reading(node.buffer, params.weights), params)
        except NoValidSamples:
            hit = False
        trace.append((d_mm / 10.0, hit))
        if hit and first is None:
            first = d_mm / 10.0
        d_mm -= step_mm
    return first, trace
