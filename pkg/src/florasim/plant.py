"""Climbing plant tips on a scaffold: elongation, branch choice and coverage."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .errors import NoOptions
from .world import Region, ScaffoldGraph, StimulusField, sample_stimulus

TIP_STATUSES = ("growing", "stopped", "removed")
_EPS = 1e-12


@dataclass(frozen=True)
class PlantParams:
    k_blue: float = 2.0
    k_fr: float = 2.0
    g_fr: float = 0.5
    F_norm: float = 1.0
    deterministic: bool = False
    base_rate: float = 1.0
    probe_mm: float = 20.0  # how far into a candidate segment its stimuli are sampled

    def __post_init__(self):
        for name in ("k_blue", "k_fr", "g_fr"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.F_norm > 0:
            raise ValueError("F_norm must be positive")
        if not self.base_rate > 0:
            raise ValueError("base_rate must be positive")
        if not self.probe_mm >= 0:
            raise ValueError("probe_mm must be nonnegative")


@dataclass(frozen=True)
class PlantTip:
    id: int
    segment: int
    fraction: float = 0.0
    status: str = "growing"
    base_rate: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"tip {self.id}: fraction {self.fraction} outside [0, 1]")
        if self.status not in TIP_STATUSES:
            raise ValueError(f"tip {self.id}: unknown status {self.status!r}")
        if not self.base_rate > 0:
            raise ValueError(f"tip {self.id}: base rate must be positive")


Intervals = tuple[tuple[float, float], ...]


def _merge(intervals) -> Intervals:
    out: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if hi <= lo:
            continue
        if out and lo <= out[-1][1] + _EPS:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return tuple((lo, hi) for lo, hi in out)


def _subtract(intervals: Intervals, lo: float, hi: float) -> Intervals:
    out = []
    for a, b in intervals:
        if b <= lo or a >= hi:
            out.append((a, b))
            continue
        if a < lo:
            out.append((a, lo))
        if b > hi:
            out.append((hi, b))
    return tuple(out)


@dataclass(frozen=True)
class PlantBody:
    """Covered spans per segment, as merged fraction intervals."""

    spans: Mapping[int, Intervals] = field(default_factory=dict)

    def fraction(self, segment_id: int) -> float:
        return math.fsum(b - a for a, b in self.spans.get(segment_id, ()))

    @property
    def coverage(self) -> dict[int, float]:
        return {sid: self.fraction(sid) for sid in sorted(self.spans)}

    def covered(self, segment_id: int, t: float) -> bool:
        return any(a <= t <= b for a, b in self.spans.get(segment_id, ()))

    def add(self, segment_id: int, lo: float, hi: float) -> "PlantBody":
        if hi <= lo:
            return self
        spans = dict(self.spans)
        spans[segment_id] = _merge(spans.get(segment_id, ()) + ((lo, hi),))
        return PlantBody(spans)

    def remove(self, segment_id: int, lo: float, hi: float) -> "PlantBody":
        if segment_id not in self.spans:
            return self
        spans = dict(self.spans)
        left = _subtract(spans[segment_id], lo, hi)
        if left:
            spans[segment_id] = left
        else:
            del spans[segment_id]
        return PlantBody(spans)


def elongation_rate(base: float, F: float, params: PlantParams) -> float:
    """Shade-avoidance stretch: far-red speeds elongation up to ``1 + g_fr`` times."""
    if base < 0 or F < 0:
        raise ValueError("base rate and far-red level must be nonnegative")
    return base * (1.0 + params.g_fr * min(F / params.F_norm, 1.0))


def branch_weights(options: Sequence[tuple[int, float, float]], params: PlantParams) -> list[float]:
    exps = [params.k_blue * B - params.k_fr * F for _, B, F in options]
    top = max(exps)
    return [math.exp(e - top) for e in exps]


def choose_branch(tip: PlantTip | None, options: Sequence[tuple[int, float, float]], params: PlantParams, rng) -> int:
    """Pick one of ``(segment_id, B, F)``.

    Stochastic mode draws exactly one ``rng.random()`` when there are two or
    more options, and none otherwise.
    """
    if not options:
        raise NoOptions(f"tip {getattr(tip, 'id', None)} has no branch options")
    weights = branch_weights(options, params)
    if params.deterministic:
        best = max(weights)
        return min(sid for (sid, _, _), w in zip(options, weights) if w == best)
    if len(options) == 1:
        return options[0][0]
    u = rng.random() * math.fsum(weights)
    acc = 0.0
    for (sid, _, _), w in zip(options, weights):
        acc += w
        if u < acc:
            return sid
    return options[-1][0]


def branch_options(graph: ScaffoldGraph, node_id: int, field: StimulusField, params: PlantParams):
    out = []
    for sid in graph.children[node_id]:
        seg = graph.segments[sid]
        probe = graph.point_at(sid, min(params.probe_mm, seg.length) / seg.length)
        out.append((sid, sample_stimulus(field, probe, "blue"), sample_stimulus(field, probe, "far-red")))
    return out


def _blocking(body: PlantBody, segment_id: int, f: float) -> float | None:
    """Fraction at which a tip at ``f`` would run into existing growth."""
    block = None
    for a, b in body.spans.get(segment_id, ()):
        if b <= f + _EPS:
            continue
        if a <= f + _EPS:
            return f
        block = a if block is None else min(block, a)
    return block


def grow_step(
    tips: Sequence[PlantTip],
    body: PlantBody,
    graph: ScaffoldGraph,
    field: StimulusField,
    params: PlantParams,
    rng,
    dt: float = 1.0,
) -> tuple[list[PlantTip], PlantBody]:
    """Advance every growing tip, in ascending id order, by one step of ``dt`` ticks.

    A tip reaching the end of its segment picks a child segment and carries
    the overshoot into it; at a leaf it stops. A tip that runs into span
    already covered by the plant stops there, joining the existing growth.
    """
    out = []
    for tip in sorted(tips, key=lambda t: t.id):
        if tip.status != "growing":
            out.append(tip)
            continue
        F = sample_stimulus(field, graph.point_at(tip.segment, tip.fraction), "far-red")
        remaining = elongation_rate(tip.base_rate, F, params) * dt
        sid, f, status = tip.segment, tip.fraction, "growing"
        while remaining > 0:
            length = graph.segments[sid].length
            block = _blocking(body, sid, f)
            limit = 1.0 if block is None else block
            room = (limit - f) * length
            if remaining < room:
                nf = f + remaining / length
                body = body.add(sid, f, nf)
                f = nf
                break
            body = body.add(sid, f, limit)
            remaining -= room
            f = limit
            if block is not None:
                status = "stopped"
                break
            node = graph.segments[sid].dst
            if not graph.children[node]:
                status = "stopped"
                break
            sid = choose_branch(tip, branch_options(graph, node, field, params), params, rng)
            f = 0.0
        out.append(replace(tip, segment=sid, fraction=min(max(f, 0.0), 1.0), status=status))
    return out, body


def region_samples(graph: ScaffoldGraph, region: Region) -> list[tuple[int, float]]:
    """``(segment, fraction)`` midpoints of 1 mm steps that fall inside ``region``."""
    pts = []
    for sid, seg in graph.segments.items():
        n = max(1, math.ceil(seg.length))
        for i in range(n):
            t = (i + 0.5) / n
            if region.contains(graph.point_at(sid, t)):
                pts.append((sid, t))
    return pts


def region_coverage(body: PlantBody, graph: ScaffoldGraph, region: Region) -> float:
    """Covered share of the scaffold inside ``region``, sampled every millimetre."""
    pts = region_samples(graph, region)
    return sum(body.covered(s, t) for s, t in pts) / len(pts) if pts else 0.0
