"""Spatial substrate: scaffold graph, labelled regions and the light field.

All distances are millimetres except where a light or sensor law asks for
centimetres; conversion happens inside the law itself.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .errors import (
    BadFilamentCount,
    BadSegment,
    CycleWithoutFusionMark,
    DisconnectedGraph,
    EmptyGraph,
    MissingRoot,
)

Vec3 = tuple[float, float, float]

LIGHT_KINDS = ("blue", "far-red", "ambient-red")
REGION_LABELS = ("window", "target", "damage", "occupied-space")

# Stimulus attenuation clamp, centimetres.
STIMULUS_D_MIN_CM = 0.2
LENGTH_RTOL = 1e-6


def natural_key(text) -> list:
    """Sort key that orders embedded integers numerically ("n2" < "n10")."""
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", str(text))]


def vec3(values) -> Vec3:
    x, y, z = (float(v) for v in values)
    return (x, y, z)


def distance(a: Vec3, b: Vec3) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def lerp(a: Vec3, b: Vec3, t: float) -> Vec3:
    return (a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t)


@dataclass(frozen=True)
class Segment:
    id: int
    src: int
    dst: int
    filaments: int
    length: float
    fusion: bool = False


@dataclass(frozen=True, eq=False)
class ScaffoldGraph:
    """Rooted tree of braided segments plus optional fusion edges.

    Tree segments always point away from the root (``src`` is the parent).
    Use :func:`build_scaffold` or :meth:`from_parts` rather than the
    constructor; both validate the invariants.
    """

    nodes: Mapping[int, Vec3]
    segments: Mapping[int, Segment]
    root: int
    children: Mapping[int, tuple[int, ...]] = field(repr=False)
    parent_segment: Mapping[int, int] = field(repr=False)

    @classmethod
    def from_parts(cls, nodes: Mapping[int, Vec3], segments: Iterable[Segment], root: int) -> "ScaffoldGraph":
        nodes = {int(k): vec3(v) for k, v in sorted(nodes.items())}
        seg_map: dict[int, Segment] = {}
        for seg in segments:
            if seg.id in seg_map:
                raise BadSegment(f"duplicate segment id {seg.id}", [seg.id])
            seg_map[seg.id] = seg
        seg_map = dict(sorted(seg_map.items()))
        if root not in nodes:
            raise MissingRoot(f"root {root!r} is not a node", [root])
        for seg in seg_map.values():
            missing = [n for n in (seg.src, seg.dst) if n not in nodes]
            if missing:
                raise BadSegment(f"segment {seg.id} references unknown node(s) {missing}", [seg.id, *missing])
            if not isinstance(seg.filaments, int) or seg.filaments < 1:
                raise BadFilamentCount(f"segment {seg.id} has filament count {seg.filaments!r}", [seg.id])
            geometric = distance(nodes[seg.src], nodes[seg.dst])
            if geometric <= 0.0:
                raise BadSegment(f"segment {seg.id} has zero length", [seg.id])
            if abs(seg.length - geometric) > LENGTH_RTOL * geometric:
                raise BadSegment(
                    f"segment {seg.id} length {seg.length} disagrees with endpoint distance {geometric}", [seg.id]
                )

        adjacency: dict[int, list[tuple[int, int]]] = {n: [] for n in nodes}
        for seg in seg_map.values():
            if not seg.fusion:
                adjacency[seg.src].append((seg.id, seg.dst))
                adjacency[seg.dst].append((seg.id, seg.src))
        via: dict[int, int | None] = {root: None}
        queue = deque([root])
        while queue:
            n = queue.popleft()
            for sid, other in adjacency[n]:
                if sid == via[n]:
                    continue
                if other in via:
                    raise CycleWithoutFusionMark(
                        f"segment {sid} closes a cycle but is not marked as fusion", [sid]
                    )
                via[other] = sid
                queue.append(other)
        unreachable = [n for n in nodes if n not in via]
        if unreachable:
            raise DisconnectedGraph(f"nodes {unreachable} are not connected to root {root}", unreachable)

        children: dict[int, list[int]] = {n: [] for n in nodes}
        parent_segment: dict[int, int] = {}
        for n, sid in via.items():
            if sid is None:
                continue
            seg = seg_map[sid]
            if seg.dst != n:
                raise BadSegment(f"segment {sid} points towards the root", [sid])
            parent_segment[n] = sid
            children[seg.src].append(sid)
        return cls(
            nodes=nodes,
            segments=seg_map,
            root=root,
            children={n: tuple(sorted(c)) for n, c in children.items()},
            parent_segment=parent_segment,
        )

    # -- queries --------------------------------------------------------------

    def position(self, node_id: int) -> Vec3:
        return self.nodes[node_id]

    def point_at(self, segment_id: int, fraction: float) -> Vec3:
        seg = self.segments[segment_id]
        return lerp(self.nodes[seg.src], self.nodes[seg.dst], fraction)

    def tree_segments(self) -> list[Segment]:
        return [s for s in self.segments.values() if not s.fusion]

    def leaves(self) -> list[int]:
        return [n for n in self.nodes if not self.children[n]]

    def child_nodes(self, node_id: int) -> list[int]:
        return [self.segments[s].dst for s in self.children[node_id]]

    def parent(self, node_id: int) -> int | None:
        sid = self.parent_segment.get(node_id)
        return None if sid is None else self.segments[sid].src

    def preorder(self) -> list[int]:
        """Nodes in depth-first order from the root, children by segment id."""
        out, stack = [], [self.root]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(reversed(self.child_nodes(n)))
        return out

    def path_segments(self, node_id: int) -> list[int]:
        """Tree segments from the root down to ``node_id``."""
        path = []
        while node_id in self.parent_segment:
            sid = self.parent_segment[node_id]
            path.append(sid)
            node_id = self.segments[sid].src
        return path[::-1]

    def depth_mm(self, segment_id: int, fraction: float) -> float:
        """Arclength from the root to a point on a tree segment."""
        seg = self.segments[segment_id]
        upstream = sum(self.segments[s].length for s in self.path_segments(seg.src))
        return upstream + fraction * seg.length

    def subtree_leaf_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for n in reversed(self.preorder()):
            kids = self.child_nodes(n)
            counts[n] = sum(counts[k] for k in kids) if kids else 1
        return counts

    def next_node_id(self) -> int:
        return max(self.nodes) + 1

    def next_segment_id(self) -> int:
        return max(self.segments, default=-1) + 1

    # -- derived snapshots ----------------------------------------------------

    def with_filaments(self, counts: Mapping[int, int]) -> "ScaffoldGraph":
        segs = [replace(s, filaments=int(counts.get(s.id, s.filaments))) for s in self.segments.values()]
        return ScaffoldGraph.from_parts(self.nodes, segs, self.root)

    def with_additions(self, nodes: Mapping[int, Vec3], segments: Iterable[Segment]) -> "ScaffoldGraph":
        merged = dict(self.nodes)
        merged.update(nodes)
        return ScaffoldGraph.from_parts(merged, [*self.segments.values(), *segments], self.root)

    def to_spec(self) -> dict:
        return {
            "nodes": [{"id": n, "pos": list(p)} for n, p in self.nodes.items()],
            "segments": [
                {"id": s.id, "from": s.src, "to": s.dst, "filaments": s.filaments, **({"fusion": True} if s.fusion else {})}
                for s in self.segments.values()
            ],
            "root": self.root,
        }

    def __eq__(self, other):
        if not isinstance(other, ScaffoldGraph):
            return NotImplemented
        return (self.root, dict(self.nodes), dict(self.segments)) == (other.root, dict(other.nodes), dict(other.segments))


def build_scaffold(spec: Mapping) -> ScaffoldGraph:
    """Validate a scaffold spec (``{"nodes", "segments", "root"}``) into a graph.

    Segment lengths are derived from node positions; an explicit ``length``
    is accepted but must agree with the endpoint distance.
    """
    try:
        raw_nodes = spec["nodes"]
        raw_segments = spec.get("segments", [])
    except (KeyError, TypeError, AttributeError) as exc:
        raise BadSegment(f"malformed scaffold spec: {exc}") from None
    if "root" not in spec:
        raise MissingRoot("scaffold spec has no root")
    nodes: dict[int, Vec3] = {}
    for entry in raw_nodes:
        nid = entry["id"]
        if nid in nodes:
            raise BadSegment(f"duplicate node id {nid}", [nid])
        nodes[nid] = vec3(entry["pos"])
    segments = []
    for entry in raw_segments:
        src, dst = entry["from"], entry["to"]
        for n in (src, dst):
            if n not in nodes:
                raise BadSegment(f"segment {entry['id']} references unknown node {n!r}", [entry["id"], n])
        length = entry.get("length")
        if length is None:
            length = distance(nodes[src], nodes[dst])
        segments.append(
            Segment(
                id=entry["id"],
                src=src,
                dst=dst,
                filaments=entry.get("filaments", 1),
                length=float(length),
                fusion=bool(entry.get("fusion", False)),
            )
        )
    return ScaffoldGraph.from_parts(nodes, segments, spec["root"])


# -- regions ------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    id: str
    label: str
    lo: Vec3
    hi: Vec3
    occupancy: float = 1.0

    def __post_init__(self):
        if self.label not in REGION_LABELS:
            raise ValueError(f"region {self.id}: unknown label {self.label!r}")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"region {self.id}: box min exceeds max")

    def contains(self, p: Vec3) -> bool:
        return all(lo <= v <= hi for v, lo, hi in zip(p, self.lo, self.hi))

    def clip(self, a: Vec3, b: Vec3) -> tuple[float, float] | None:
        """Parameter interval of segment a->b inside the box, or None."""
        t0, t1 = 0.0, 1.0
        for i in range(3):
            d = b[i] - a[i]
            if d == 0.0:
                if not (self.lo[i] <= a[i] <= self.hi[i]):
                    return None
                continue
            u0 = (self.lo[i] - a[i]) / d
            u1 = (self.hi[i] - a[i]) / d
            if u0 > u1:
                u0, u1 = u1, u0
            t0, t1 = max(t0, u0), min(t1, u1)
            if t0 > t1:
                return None
        return (t0, t1)


# -- light field --------------------------------------------------------------


@dataclass(frozen=True)
class LightSource:
    position: Vec3
    kind: str
    intensity: float


@dataclass(frozen=True)
class StimulusField:
    sources: tuple[LightSource, ...] = ()
    ambient: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for s in self.sources:
            if s.kind not in LIGHT_KINDS:
                raise ValueError(f"unknown light kind {s.kind!r}")
            if not s.intensity >= 0.0 or not all(math.isfinite(v) for v in s.position):
                raise ValueError(f"invalid light source {s}")
        for kind, value in self.ambient.items():
            if kind not in LIGHT_KINDS or not value >= 0.0:
                raise ValueError(f"invalid ambient {kind}={value}")


def sample_stimulus(field: StimulusField, point: Vec3, kind: str) -> float:
    """Ambient level plus inverse-square contributions of every source of ``kind``."""
    total = field.ambient.get(kind, 0.0)
    floor = STIMULUS_D_MIN_CM**2
    for s in field.sources:
        if s.kind != kind or s.intensity == 0.0:
            continue
        d_cm = distance(s.position, point) / 10.0
        total += s.intensity / max(d_cm * d_cm, floor)
    return total


# -- geometry queries ---------------------------------------------------------


def project_onto_segment(a: Vec3, b: Vec3, p: Vec3) -> tuple[float, float]:
    """Clamped projection parameter of ``p`` on a->b and the distance to it."""
    d = (b[0] - a[0], b[1] - a[1], b[2] - a[2])
    dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
    if dd == 0.0:
        t = 0.0
    else:
        t = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1] + (p[2] - a[2]) * d[2]) / dd
        t = min(1.0, max(0.0, t))
    return t, distance(lerp(a, b, t), p)


def nearest_segment(graph: ScaffoldGraph, point: Vec3) -> tuple[int, float, float]:
    """Return ``(segment_id, fraction, distance_mm)``; ties go to the lowest id."""
    if not graph.segments:
        raise EmptyGraph("graph has no segments")
    best = None
    for sid, seg in graph.segments.items():
        t, d = project_onto_segment(graph.nodes[seg.src], graph.nodes[seg.dst], point)
        if best is None or d < best[2]:
            best = (sid, t, d)
    return best
