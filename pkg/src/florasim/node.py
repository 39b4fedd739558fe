"""Immobile steering robots: IR sensing, filtering, photoresistors and LED policy.

Sensor and optical laws work in centimetres; node positions are millimetres
like the rest of the world.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import NoValidSamples
from .world import Vec3, distance, natural_key

ROLES = ("attractor", "repeller", "idle")
BEACON_DUTY = 0.2


def geometric_weights(n: int, ratio: float = 0.7) -> tuple[float, ...]:
    raw = [ratio**i for i in range(n)]
    total = math.fsum(raw)
    return tuple(w / total for w in raw)


@dataclass(frozen=True)
class NodeParams:
    N: int = 8
    weights: tuple[float, ...] | None = None  # newest first; defaults to 0.7**i normalized
    A: float = 4.0
    sigma: float = 0.02
    d_detect: float = 5.0  # cm
    d_overlap: float = 0.2  # cm
    threshold: float | None = None  # defaults to A / d_detect**2
    relay_threshold: float = 0.05
    d_min: float = 1.0  # photoresistor distance clamp, cm
    led_intensity: float = 10.0  # light-source intensity of a fully driven LED

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if self.weights is None:
            object.__setattr__(self, "weights", geometric_weights(self.N))
        else:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != self.N:
            raise ValueError("weights must have exactly N entries")
        if any(w < 0 for w in self.weights) or abs(math.fsum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.threshold is None:
            object.__setattr__(self, "threshold", self.A / self.d_detect**2)
        for name in ("A", "sigma", "d_overlap", "relay_threshold", "d_min", "led_intensity"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0 <= self.d_overlap < self.d_detect:
            raise ValueError("d_overlap must be smaller than d_detect")


@dataclass(frozen=True)
class RoboticNode:
    id: str
    position: Vec3
    segment: int
    role: str = "idle"
    neighbors: tuple[str, ...] = ()
    upstream: tuple[str, ...] = ()  # neighbors mounted closer to the root
    led: tuple[float, float] = (0.0, 0.0)  # (blue, far_red) duties
    buffer: tuple[tuple[float, bool], ...] = ()  # newest first

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"node {self.id}: unknown role {self.role!r}")
        if not all(0.0 <= d <= 1.0 for d in self.led):
            raise ValueError(f"node {self.id}: LED duty outside [0, 1]")
        if not set(self.upstream) <= set(self.neighbors):
            raise ValueError(f"node {self.id}: upstream ids must be neighbors")

    def with_sample(self, value: float, valid: bool, N: int) -> "RoboticNode":
        return replace(self, buffer=((value, valid),) + self.buffer[: N - 1])


@dataclass(frozen=True)
class NeighborReading:
    neighbor: str
    blue: float
    far_red: float


def raw_ir_sample(node: RoboticNode, tip_points: Iterable[Vec3], rng, params: NodeParams) -> tuple[float, bool]:
    """One noisy proximity reading against the nearest growing tip.

    Exactly one normal variate is drawn per call, even when ``sigma`` is 0.
    """
    noise = float(rng.normal(0.0, params.sigma))
    d_cm = min((distance(node.position, p) / 10.0 for p in tip_points), default=None)
    if d_cm is None:
        return noise, True
    value = params.A / max(d_cm * d_cm, params.d_overlap**2) + noise
    valid = not (node.led[1] > 0.0 and d_cm <= params.d_overlap)
    return value, valid


def filtered_reading(buffer: Sequence, weights: Sequence[float]) -> float:
    """Weighted mean of the valid samples, newest first.

    ``buffer`` holds plain values or ``(value, valid)`` pairs; weights of
    invalid samples are dropped and the rest renormalized.
    """
    pairs = [(s, True) if not isinstance(s, tuple) else s for s in buffer]
    used = [(w, v) for w, (v, ok) in zip(weights, pairs) if ok]
    total = math.fsum(w for w, _ in used)
    if not used or total <= 0.0:
        raise NoValidSamples("no valid samples with positive weight in the buffer")
    return math.fsum(w * v for w, v in used) / total


def detect(filtered: float, params: NodeParams) -> bool:
    return filtered >= params.threshold


def sense_neighbors(node: RoboticNode, nodes: Mapping[str, RoboticNode], params: NodeParams) -> list[NeighborReading]:
    out = []
    for nid in node.neighbors:
        other = nodes[nid]
        d_cm = distance(node.position, other.position) / 10.0
        gain = 1.0 / max(d_cm * d_cm, params.d_min**2)
        out.append(NeighborReading(nid, other.led[0] * gain, other.led[1] * gain))
    return out


def policy_step(
    node: RoboticNode, detection: bool, readings: Sequence[NeighborReading], role: str, params: NodeParams
) -> tuple[float, float]:
    """LED command ``(blue, far_red)`` from purely local inputs.

    Attractors light fully on their own detection or when an upstream
    neighbor is lit, which relays the signal away from the root along the
    path. Otherwise they keep a dim beacon while any neighbor is visibly lit.
    """
    if role == "repeller":
        return (0.0, 1.0 if detection else 0.0)
    if role == "attractor":
        lit = [r for r in readings if r.blue > params.relay_threshold]
        if detection or any(r.neighbor in node.upstream for r in lit):
            return (1.0, 0.0)
        return (BEACON_DUTY if lit else 0.0, 0.0)
    return (0.0, 0.0)


def derive_neighbors(nodes: Sequence[RoboticNode], radius_mm: float) -> dict[str, tuple[str, ...]]:
    """Nodes within ``radius_mm`` of each other, sorted by id."""
    out = {}
    for n in nodes:
        near = [m.id for m in nodes if m.id != n.id and distance(m.position, n.position) <= radius_mm]
        out[n.id] = tuple(sorted(near, key=natural_key))
    return out
