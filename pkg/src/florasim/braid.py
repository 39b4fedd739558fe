"""Modular braiding machine: layout, program compiler, verifier and executor.

Geometry
--------
Modules sit on an integer grid. A driver is a rotor with four carrier slots
at the diagonal quarter positions (slot 0 = NE, 1 = NW, 2 = SW, 3 = SE). A
switch sits between exactly two drivers and carries two crossing transfer
rails (an X), each joining one slot of either driver. The rail graph is the
union of rotor rings and switch rails, so tracks of one switch intersect.

Rings are the minimal cycles of the driver/switch adjacency graph; a driver
on no cycle is a ring by itself. Each ring has a circulation: a cyclic order
over all its positions in which a carrier rides three quarter steps on a
driver and then crosses a switch, so a ring of ``d`` drivers has period
``4 * d``. Rings joined by a switch in ``transfer`` state are spliced into a
single figure-of-eight circuit in which that switch is crossed in both
directions every tick; those simultaneous opposite crossings are what
produce interlacement.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .errors import (
    DanglingSwitch,
    InvalidSchedule,
    OpenRing,
    OverlappingModules,
    ProgramLayoutMismatch,
    ScheduleFormatError,
    UnroutableSplit,
)
from .world import natural_key

SLOTS = 4
SLOT_RADIUS = 0.35
MODULE_KINDS = ("driver", "switch", "support")
SWITCH_STATES = ("pass", "transfer")

_MODULE_ID = re.compile(r"^[A-Za-z0-9_-]+$")
_TOKEN_ID = re.compile(r"^[A-Za-z0-9_.-]+$")

Position = tuple[str, int]
Cell = tuple[int, int]


def pos_str(p: Position) -> str:
    return f"{p[0]}.{p[1]}"


def parse_pos(text: str) -> Position:
    module, _, slot = text.rpartition(".")
    if not module or not slot.isdigit():
        raise ValueError(f"bad position {text!r}")
    return (module, int(slot))


def _slot_xy(cell: Cell, slot: int) -> tuple[float, float]:
    angle = math.radians(45 + 90 * slot)
    return (cell[0] + SLOT_RADIUS * math.cos(angle), cell[1] + SLOT_RADIUS * math.sin(angle))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    return (
        orient(p1, p2, q1) * orient(p1, p2, q2) < 0
        and orient(q1, q2, p1) * orient(q1, q2, p2) < 0
    )


# -- layout -------------------------------------------------------------------


@dataclass(frozen=True)
class Module:
    id: str
    kind: str
    cell: Cell


@dataclass(frozen=True)
class Ring:
    id: int
    drivers: tuple[str, ...]
    switches: tuple[str, ...]
    cycle: tuple[Position, ...]

    @property
    def modules(self) -> tuple[str, ...]:
        return self.drivers + self.switches

    @property
    def period(self) -> int:
        return len(self.cycle)


@dataclass(frozen=True, eq=False)
class MachineLayout:
    modules: Mapping[str, Module]
    rings: tuple[Ring, ...]
    gates: Mapping[str, tuple[tuple[Position, Position], tuple[Position, Position]]]
    switch_drivers: Mapping[str, tuple[str, str]]
    adjacency: Mapping[Position, frozenset[Position]] = field(repr=False)
    gate_switch: Mapping[frozenset, str] = field(repr=False)

    @property
    def drivers(self) -> list[str]:
        return [m.id for m in self.modules.values() if m.kind == "driver"]

    @property
    def switches(self) -> list[str]:
        return [m.id for m in self.modules.values() if m.kind == "switch"]

    @property
    def positions(self) -> list[Position]:
        return list(self.adjacency)

    def ring(self, ring_id: int) -> Ring:
        for r in self.rings:
            if r.id == ring_id:
                return r
        raise ProgramLayoutMismatch(f"no ring {ring_id!r}")

    def rings_of_driver(self, driver: str) -> list[int]:
        return [r.id for r in self.rings if driver in r.drivers]

    def bridges_between(self, rings_a: Iterable[int], rings_b: Iterable[int]) -> list[str]:
        """Switches joining a driver of one ring set to a driver of the other."""
        da = {d for r in rings_a for d in self.ring(r).drivers}
        db = {d for r in rings_b for d in self.ring(r).drivers}
        ring_switches = {s for r in self.rings for s in r.switches}
        out = []
        for s, (a, b) in self.switch_drivers.items():
            if s in ring_switches:
                continue
            if (a in da and b in db) or (a in db and b in da):
                out.append(s)
        return sorted(out, key=natural_key)

    def slot_xy(self, p: Position) -> tuple[float, float]:
        return _slot_xy(self.modules[p[0]].cell, p[1])


def build_layout(spec: Mapping) -> MachineLayout:
    """Validate a layout spec and derive its rail graph and rings.

    ``spec`` is ``{"modules": [{"id", "kind", "cell": [x, y]}, ...]}``.
    """
    modules: dict[str, Module] = {}
    by_cell: dict[Cell, str] = {}
    for entry in spec.get("modules", []):
        mid, kind = str(entry["id"]), entry["kind"]
        cell = (int(entry["cell"][0]), int(entry["cell"][1]))
        if not _MODULE_ID.match(mid):
            raise OverlappingModules(f"module id {mid!r} must match {_MODULE_ID.pattern}")
        if kind not in MODULE_KINDS:
            raise OverlappingModules(f"module {mid}: unknown kind {kind!r}")
        if mid in modules:
            raise OverlappingModules(f"duplicate module id {mid}")
        if cell in by_cell:
            raise OverlappingModules(f"modules {by_cell[cell]} and {mid} both occupy cell {cell}")
        modules[mid] = Module(mid, kind, cell)
        by_cell[cell] = mid
    modules = dict(sorted(modules.items(), key=lambda kv: natural_key(kv[0])))

    drivers = [m for m in modules.values() if m.kind == "driver"]
    if not drivers:
        raise OpenRing("layout has no driver, hence no ring")

    adjacency: dict[Position, set[Position]] = {}
    for d in drivers:
        for k in range(SLOTS):
            adjacency[(d.id, k)] = {(d.id, (k + 1) % SLOTS), (d.id, (k - 1) % SLOTS)}

    gates, switch_drivers, gate_switch = {}, {}, {}
    graph = nx.Graph()
    for m in modules.values():
        if m.kind != "support":
            graph.add_node(m.id)
    for s in (m for m in modules.values() if m.kind == "switch"):
        neighbours = []
        for dx, dy in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            other = by_cell.get((s.cell[0] + dx, s.cell[1] + dy))
            if other is not None and modules[other].kind == "driver":
                neighbours.append(other)
        if len(neighbours) != 2:
            raise DanglingSwitch(f"switch {s.id} touches {len(neighbours)} driver(s), needs exactly 2")
        a, b = sorted(neighbours, key=natural_key)
        switch_drivers[s.id] = (a, b)
        gates[s.id] = _switch_rails(s, modules[a], modules[b])
        for p, q in gates[s.id]:
            adjacency[p].add(q)
            adjacency[q].add(p)
            gate_switch[frozenset((p, q))] = s.id
        graph.add_edge(s.id, a)
        graph.add_edge(s.id, b)

    rings = _detect_rings(graph, modules, gates, switch_drivers)
    return MachineLayout(
        modules=modules,
        rings=rings,
        gates=gates,
        switch_drivers=switch_drivers,
        adjacency={p: frozenset(v) for p, v in sorted(adjacency.items(), key=lambda kv: (natural_key(kv[0][0]), kv[0][1]))},
        gate_switch=gate_switch,
    )


def _switch_rails(switch: Module, a: Module, b: Module):
    def facing(d: Module):
        cx, cy = switch.cell[0] - d.cell[0], switch.cell[1] - d.cell[1]
        out = []
        for k in range(SLOTS):
            x, y = _slot_xy((0, 0), k)
            if x * cx + y * cy > 0:
                out.append(k)
        return out

    fa, fb = facing(a), facing(b)
    for pairing in (((fa[0], fb[0]), (fa[1], fb[1])), ((fa[0], fb[1]), (fa[1], fb[0]))):
        (i, j), (k, l) = pairing
        if _segments_cross(_slot_xy(a.cell, i), _slot_xy(b.cell, j), _slot_xy(a.cell, k), _slot_xy(b.cell, l)):
            return (((a.id, i), (b.id, j)), ((a.id, k), (b.id, l)))
    (i, j), (k, l) = ((fa[0], fb[0]), (fa[1], fb[1]))
    return (((a.id, i), (b.id, j)), ((a.id, k), (b.id, l)))


def _detect_rings(graph, modules, gates, switch_drivers) -> tuple[Ring, ...]:
    cycles = []
    for nodes in nx.minimum_cycle_basis(graph):
        sub = graph.subgraph(nodes)
        start = min((n for n in nodes if modules[n].kind == "driver"), key=lambda n: modules[n].cell)
        order = [start]
        prev = None
        while True:
            nxt = sorted((n for n in sub.neighbors(order[-1]) if n != prev), key=natural_key)[0]
            if nxt == start:
                break
            prev = order[-1]
            order.append(nxt)
        cells = [modules[n].cell for n in order]
        area = sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(cells, cells[1:] + cells[:1]))
        if area < 0:
            order = [order[0]] + order[1:][::-1]
        cycles.append(order)

    on_cycle = {n for c in cycles for n in c}
    for d in (m for m in modules.values() if m.kind == "driver"):
        if d.id not in on_cycle:
            cycles.append([d.id])

    def key(order):
        return min(modules[n].cell for n in order if modules[n].kind == "driver")

    rings = []
    for rid, order in enumerate(sorted(cycles, key=key)):
        drivers = tuple(n for n in order if modules[n].kind == "driver")
        switches = tuple(n for n in order if modules[n].kind == "switch")
        if len(drivers) == 1:
            cycle = tuple((drivers[0], k) for k in range(SLOTS))
        else:
            cycle = _route_ring(order, modules, gates, switch_drivers)
        rings.append(Ring(rid, drivers, switches, cycle))
    return tuple(rings)


def _route_ring(order, modules, gates, switch_drivers) -> tuple[Position, ...]:
    """Circulation visiting every slot of every driver in ``order`` once."""
    drivers = order[0::2]
    switches = order[1::2]
    n = len(drivers)

    def rails_to(switch, driver):
        return {p: q for p, q in itertools.chain(gates[switch], ((q, p) for p, q in gates[switch])) if p[0] == driver}

    first_in = rails_to(switches[-1], drivers[0])
    for entry in sorted(first_in):
        e = entry[1]
        cycle: list[Position] = []
        ok = True
        for i in range(n):
            d, out_switch = drivers[i], switches[i]
            exits = rails_to(out_switch, d)
            sense = next((s for s in (1, -1) if (d, (e - s) % SLOTS) in exits), None)
            if sense is None:
                ok = False
                break
            cycle.extend((d, (e + j * sense) % SLOTS) for j in range(SLOTS))
            x = (d, (e - sense) % SLOTS)
            nxt = exits[x]
            if nxt[0] != drivers[(i + 1) % n]:
                ok = False
                break
            e = nxt[1]
        if ok and e == entry[1]:
            return tuple(cycle)
    raise OpenRing(f"ring through {order} admits no closed circulation")


def ring_layout_spec(d: int) -> dict:
    """Layout of one closed ring of ``d`` drivers (``d`` = 1 or even >= 4)."""
    if d == 1:
        return {"modules": [{"id": "D1", "kind": "driver", "cell": [0, 0]}]}
    if d < 4 or d % 2:
        raise ValueError("a multi-driver ring needs an even driver count >= 4")
    a = math.ceil(d / 4)
    b = d // 2 - a
    corners = [(0, 0), (2 * a, 0), (2 * a, 2 * b), (0, 2 * b)]
    perimeter = []
    for (x0, y0), (x1, y1) in zip(corners, corners[1:] + corners[:1]):
        steps = max(abs(x1 - x0), abs(y1 - y0))
        for t in range(steps):
            perimeter.append((x0 + (x1 - x0) * t // steps, y0 + (y1 - y0) * t // steps))
    modules, nd, ns = [], 0, 0
    for x, y in perimeter:
        if x % 2 == 0 and y % 2 == 0:
            nd += 1
            modules.append({"id": f"D{nd}", "kind": "driver", "cell": [x, y]})
        else:
            ns += 1
            modules.append({"id": f"S{ns}", "kind": "switch", "cell": [x, y]})
    return {"modules": modules}

    """Two four-driver rings side by side, linked through bridge switch X1."""
def twin_ring_layout_spec() -> dict:
    """Two rings of eight modules joined over two drivers by one shared switch."""
    modules = []
    for ring, dx in (("A", 0), ("B", 4)):
        for i, (x, y) in enumerate(((0, 0), (2, 0), (2, 2), (0, 2))):
            modules.append({"id": f"{ring}D{i + 1}", "kind": "driver", "cell": [x + dx, y]})
        for i, (x, y) in enumerate(((1, 0), (2, 1), (1, 2), (0, 1))):
            modules.append({"id": f"{ring}S{i + 1}", "kind": "switch", "cell": [x + dx, y]})
    modules.append({"id": "X1", "kind": "switch", "cell": [3, 0]})
    return {"modules": modules}


def figure_eight_layout_spec() -> dict:
    """Two single-driver rings joined by one switch."""
    return {
        "modules": [
            {"id": "D1", "kind": "driver", "cell": [0, 0]},
            {"id": "S1", "kind": "switch", "cell": [1, 0]},
            {"id": "D2", "kind": "driver", "cell": [2, 0]},
        ]
    }


# -- programs -----------------------------------------------------------------


@dataclass(frozen=True)
class Load:
    carrier: str
    position: Position
    filament: str


@dataclass(frozen=True)
class Unload:
    carrier: str


@dataclass(frozen=True)
class Tube:
    rings: tuple[int, ...]
    ticks: int


@dataclass(frozen=True)
class SetSwitch:
    switch: str
    state: str


@dataclass(frozen=True)
class Split:
    group: tuple[int, ...]
    into: tuple[tuple[int, ...], tuple[int, ...]]
    counts: tuple[int, int]


@dataclass(frozen=True)
class Merge:
    groups: tuple[tuple[int, ...], tuple[int, ...]]


Phase = Load | Unload | Tube | SetSwitch | Split | Merge


@dataclass(frozen=True)
class BraidProgram:
    phases: tuple[Phase, ...]

    def to_spec(self) -> dict:
        out = []
        for ph in self.phases:
            if isinstance(ph, Load):
                out.append({"op": "load", "carrier": ph.carrier, "position": pos_str(ph.position), "filament": ph.filament})
            elif isinstance(ph, Unload):
                out.append({"op": "unload", "carrier": ph.carrier})
            elif isinstance(ph, Tube):
                out.append({"op": "tube", "rings": list(ph.rings), "ticks": ph.ticks})
            elif isinstance(ph, SetSwitch):
                out.append({"op": "switch", "switch": ph.switch, "state": ph.state})
            elif isinstance(ph, Split):
                out.append({"op": "split", "group": list(ph.group), "into": [list(g) for g in ph.into], "counts": list(ph.counts)})
            else:
                out.append({"op": "merge", "groups": [list(g) for g in ph.groups]})
        return {"phases": out}


def parse_program(spec: Mapping) -> BraidProgram:
    phases = []
    for i, entry in enumerate(spec.get("phases", [])):
        try:
            op = entry["op"]
            if op == "load":
                carrier = str(entry["carrier"])
                filament = str(entry.get("filament", carrier))
                for token in (carrier, filament):
                    if not _TOKEN_ID.match(token):
                        raise ValueError(f"identifier {token!r} must match {_TOKEN_ID.pattern}")
                phases.append(Load(carrier, parse_pos(entry["position"]), filament))
            elif op == "unload":
                phases.append(Unload(str(entry["carrier"])))
            elif op == "tube":
                ticks = int(entry["ticks"])
                if ticks < 0:
                    raise ValueError("ticks must be nonnegative")
                phases.append(Tube(tuple(int(r) for r in entry["rings"]), ticks))
            elif op == "switch":
                if entry["state"] not in SWITCH_STATES:
                    raise ValueError(f"unknown switch state {entry['state']!r}")
                phases.append(SetSwitch(str(entry["switch"]), entry["state"]))
            elif op == "split":
                into = tuple(tuple(int(r) for r in g) for g in entry["into"])
                counts = tuple(int(c) for c in entry["counts"])
                if len(into) != 2 or len(counts) != 2:
                    raise ValueError("split needs exactly two target groups and two counts")
                phases.append(Split(tuple(int(r) for r in entry["group"]), into, counts))
            elif op == "merge":
                groups = tuple(tuple(int(r) for r in g) for g in entry["groups"])
                if len(groups) != 2:
                    raise ValueError("merge needs exactly two groups")
                phases.append(Merge(groups))
            else:
                raise ValueError(f"unknown op {op!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise ProgramLayoutMismatch(f"phase {i}: {exc}") from None
    return BraidProgram(tuple(phases))


# -- schedules ----------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleTick:
    switches: tuple[tuple[str, str], ...] = ()
    loads: tuple[tuple[str, str, Position], ...] = ()  # (carrier, filament, position)
    unloads: tuple[tuple[str, Position], ...] = ()
    moves: tuple[tuple[str, Position, Position], ...] = ()


@dataclass(frozen=True)
class CarrierSchedule:
    ticks: tuple[ScheduleTick, ...] = ()

    def __len__(self):
        return len(self.ticks)


def write_schedule(schedule: CarrierSchedule) -> str:
    """One line per tick: ``tick <n>: <item>; <item>; ...``.

    Items are applied in the written order kind by kind: ``switch``,
    ``unload``, ``load`` at the start of the tick, then all ``move`` items
    simultaneously.
    """
    lines = []
    for n, t in enumerate(schedule.ticks):
        items = [f"switch {s} {state}" for s, state in t.switches]
        items += [f"unload {c} {pos_str(p)}" for c, p in t.unloads]
        items += [f"load {c} {f} {pos_str(p)}" for c, f, p in t.loads]
        items += [f"move {c} {pos_str(a)} {pos_str(b)}" for c, a, b in t.moves]
        lines.append(f"tick {n}: " + "; ".join(items) if items else f"tick {n}:")
    return "".join(line + "\n" for line in lines)


def read_schedule(text: str) -> CarrierSchedule:
    ticks = []
    for number, line in enumerate(text.splitlines(), start=1):
        head, sep, body = line.partition(":")
        words = head.split()
        if not sep or len(words) != 2 or words[0] != "tick" or words[1] != str(len(ticks)):
            raise ScheduleFormatError(number, f"expected 'tick {len(ticks)}:'")
        switches, loads, unloads, moves = [], [], [], []
        body = body.strip()
        for item in body.split(";") if body else []:
            parts = item.split()
            try:
                if parts[0] == "switch" and len(parts) == 3 and parts[2] in SWITCH_STATES:
                    switches.append((parts[1], parts[2]))
                elif parts[0] == "unload" and len(parts) == 3:
                    unloads.append((parts[1], parse_pos(parts[2])))
                elif parts[0] == "load" and len(parts) == 4:
                    loads.append((parts[1], parts[2], parse_pos(parts[3])))
                elif parts[0] == "move" and len(parts) == 4:
                    moves.append((parts[1], parse_pos(parts[2]), parse_pos(parts[3])))
                else:
                    raise ValueError(item)
            except (IndexError, ValueError):
                raise ScheduleFormatError(number, f"bad item {item.strip()!r}") from None
        ticks.append(ScheduleTick(tuple(switches), tuple(loads), tuple(unloads), tuple(moves)))
    return CarrierSchedule(tuple(ticks))


# -- compiler -----------------------------------------------------------------


def _ring_successors(ring: Ring, reverse: bool = False) -> dict[Position, Position]:
    cyc = ring.cycle[::-1] if reverse else ring.cycle
    return {p: cyc[(i + 1) % len(cyc)] for i, p in enumerate(cyc)}


def group_circuit(layout: MachineLayout, rings: Sequence[int], switch_state: Mapping[str, str]) -> dict[Position, Position]:
    """Successor map over every position of the group's drivers.

    Rings of the group joined by a bridge switch in ``transfer`` state are
    spliced together; other bridges leave their rings independent.
    """
    ring_objs = [layout.ring(r) for r in dict.fromkeys(rings)]
    seen: dict[str, int] = {}
    for r in ring_objs:
        for d in r.drivers:
            if d in seen:
                raise ProgramLayoutMismatch(f"rings {seen[d]} and {r.id} share driver {d}; they cannot circulate together")
            seen[d] = r.id

    succ: dict[Position, Position] = {}
    component = {r.id: r.id for r in ring_objs}
    members = {r.id: [r.id] for r in ring_objs}
    for r in ring_objs:
        succ.update(_ring_successors(r))

    ids = [r.id for r in ring_objs]
    bridges = layout.bridges_between(ids, ids)
    for s in bridges:
        if switch_state.get(s, "pass") != "transfer":
            continue
        a, b = layout.switch_drivers[s]
        if a not in seen or b not in seen:
            continue
        ca, cb = component[seen[a]], component[seen[b]]
        if ca == cb:
            continue
        rails = {frozenset(g) for g in layout.gates[s]}
        spliced = None
        for reverse in (False, True):
            trial = dict(succ)
            if reverse:
                comp_positions = [p for rid in members[cb] for p in layout.ring(rid).cycle]
                inv = {trial[p]: p for p in comp_positions}
                for p in comp_positions:
                    trial[p] = inv[p]
            for p, q in itertools.product(
                sorted((g for rail in layout.gates[s] for g in rail if g[0] == a)),
                sorted((g for rail in layout.gates[s] for g in rail if g[0] == b)),
            ):
                sp, sq = trial[p], trial[q]
                if sp[0] != p[0] or sq[0] != q[0]:
                    continue
                if {frozenset((p, sq)), frozenset((q, sp))} == rails:
                    trial[p], trial[q] = sq, sp
                    spliced = trial
                    break
            if spliced:
                break
        if spliced is None:
            continue
        succ = spliced
        for rid in members[cb]:
            component[rid] = ca
        members[ca] += members.pop(cb)
    return succ


class _Compiler:
    def __init__(self, layout: MachineLayout):
        self.layout = layout
        self.carriers: dict[str, Position] = {}
        self.filaments: dict[str, str] = {}
        self.occupied: dict[Position, str] = {}
        self.switch_state = {s: "pass" for s in layout.switches}
        self._emitted_state = dict(self.switch_state)
        self.ticks: list[ScheduleTick] = []
        self._pending = {"switches": [], "loads": [], "unloads": []}

    def _set_switch(self, switch: str, state: str):
        if self.switch_state[switch] != state:
            self.switch_state[switch] = state
            self._pending["switches"].append((switch, state))

    def _emit(self, moves):
        moves = sorted(moves, key=lambda m: natural_key(m[0]))
        # a switch flipped and flipped back within one tick needs no entry
        last = dict(self._pending["switches"])
        switches = [(s, st) for s, st in last.items() if self._emitted_state[s] != st]
        self._emitted_state.update(switches)
        self.ticks.append(
            ScheduleTick(
                tuple(switches),
                tuple(self._pending["loads"]),
                tuple(self._pending["unloads"]),
                tuple(moves),
            )
        )
        self._pending = {"switches": [], "loads": [], "unloads": []}
        for c, a, _ in moves:
            del self.occupied[a]
        for c, _, b in moves:
            self.occupied[b] = c
            self.carriers[c] = b

    def _rotate(self, succ: Mapping[Position, Position]):
        moves = [(c, p, succ[p]) for p, c in self.occupied.items() if p in succ and succ[p] != p]
        self._emit(moves)

    def _drivers(self, rings) -> set[str]:
        return {d for r in rings for d in self.layout.ring(r).drivers}

    def _count_on(self, rings) -> int:
        drivers = self._drivers(rings)
        return sum(1 for p in self.occupied if p[0] in drivers)

    def _check_rings(self, rings):
        for r in rings:
            self.layout.ring(r)

    def load(self, ph: Load):
        if ph.position not in self.layout.adjacency:
            raise ProgramLayoutMismatch(f"load {ph.carrier}: no position {pos_str(ph.position)}")
        if ph.carrier in self.carriers:
            raise ProgramLayoutMismatch(f"carrier {ph.carrier} is already loaded")
        if ph.filament in self.filaments.values():
            raise ProgramLayoutMismatch(f"filament {ph.filament} is already on a carrier")
        if ph.position in self.occupied:
            raise ProgramLayoutMismatch(f"position {pos_str(ph.position)} is occupied")
        self.carriers[ph.carrier] = ph.position
        self.filaments[ph.carrier] = ph.filament
        self.occupied[ph.position] = ph.carrier
        self._pending["loads"].append((ph.carrier, ph.filament, ph.position))

    def unload(self, ph: Unload):
        if ph.carrier not in self.carriers:
            raise ProgramLayoutMismatch(f"carrier {ph.carrier} is not loaded")
        p = self.carriers.pop(ph.carrier)
        del self.filaments[ph.carrier]
        del self.occupied[p]
        self._pending["unloads"].append((ph.carrier, p))

    def switch(self, ph: SetSwitch):
        if ph.switch not in self.switch_state:
            raise ProgramLayoutMismatch(f"no switch {ph.switch}")
        self._set_switch(ph.switch, ph.state)

    def tube(self, ph: Tube):
        self._check_rings(ph.rings)
        succ = group_circuit(self.layout, ph.rings, self.switch_state)
        for _ in range(ph.ticks):
            self._rotate(succ)

    def merge(self, ph: Merge):
        g1, g2 = ph.groups
        self._check_rings(g1 + g2)
        bridges = self.layout.bridges_between(g1, g2)
        if not bridges:
            raise ProgramLayoutMismatch(f"no switch joins ring groups {list(g1)} and {list(g2)}")
        for s in bridges:
            self._set_switch(s, "transfer")

    def split(self, ph: Split):
        g1, g2 = ph.into
        self._check_rings(ph.group + g1 + g2)
        if set(self._drivers(g1)) & set(self._drivers(g2)):
            raise ProgramLayoutMismatch("split target groups share drivers")
        n1, n2 = ph.counts
        if min(n1, n2) < 0:
            raise UnroutableSplit("split counts must be nonnegative")
        total = self._count_on(set(ph.group) | set(g1) | set(g2))
        if n1 + n2 != total:
            raise UnroutableSplit(f"split counts {n1}+{n2} do not match the group's {total} carriers")
        cap1, cap2 = 4 * len(self._drivers(g1)), 4 * len(self._drivers(g2))
        if n1 > cap1 or n2 > cap2:
            raise UnroutableSplit(f"split counts {n1}, {n2} exceed ring capacities {cap1}, {cap2}")
        bridges = self.layout.bridges_between(g1, g2)
        for s in bridges:
            self._set_switch(s, "pass")
        stray = total - self._count_on(set(g1) | set(g2))
        if stray:
            raise UnroutableSplit(f"{stray} carrier(s) of the group sit outside both target groups")

        excess = self._count_on(g1) - n1
        if excess == 0:
            return
        if not bridges:
            raise UnroutableSplit(f"no switch joins ring groups {list(g1)} and {list(g2)}")
        src, dst = (g1, g2) if excess > 0 else (g2, g1)
        src_drivers = self._drivers(src)
        succ = {}
        succ.update(group_circuit(self.layout, g1, self.switch_state))
        succ.update(group_circuit(self.layout, g2, self.switch_state))
        need = abs(excess)
        budget = need * (len(succ) + 2) + len(succ)
        while need:
            if budget <= 0:
                raise UnroutableSplit("carriers could not be routed across the switch gates")
            budget -= 1
            move = None
            for s in bridges:
                for p, q in self.layout.gates[s]:
                    if p[0] not in src_drivers:
                        p, q = q, p
                    if p in self.occupied and q not in self.occupied:
                        move = (s, p, q)
                        break
                if move:
                    break
            if move is None:
                self._rotate(succ)
                continue
            s, p, q = move
            self._set_switch(s, "transfer")
            self._emit([(self.occupied[p], p, q)])
            self._set_switch(s, "pass")
            need -= 1

    def finish(self) -> CarrierSchedule:
        net = {s: st for s, st in dict(self._pending["switches"]).items() if self._emitted_state[s] != st}
        if net or self._pending["loads"] or self._pending["unloads"]:
            self._emit([])
        return CarrierSchedule(tuple(self.ticks))


def compile_program(program: BraidProgram, layout: MachineLayout) -> CarrierSchedule:
    comp = _Compiler(layout)
    handlers = {
        Load: comp.load,
        Unload: comp.unload,
        SetSwitch: comp.switch,
        Tube: comp.tube,
        Merge: comp.merge,
        Split: comp.split,
    }
    for ph in program.phases:
        handlers[type(ph)](ph)
    return comp.finish()


# -- verification -------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Violation:
    tick: int
    kind: str  # DoubleOccupancy | SwapConflict | TeleportMove
    detail: tuple[str, ...]

    def __str__(self):
        if self.kind == "DoubleOccupancy":
            return f"DoubleOccupancy tick={self.tick} position={self.detail[0]}"
        if self.kind == "SwapConflict":
            return f"SwapConflict tick={self.tick} a={self.detail[0]} b={self.detail[1]}"
        return f"TeleportMove tick={self.tick} carrier={self.detail[0]}"


@dataclass(frozen=True)
class VerificationReport:
    ticks: int
    violations: tuple[Violation, ...]

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        head = f"ticks {self.ticks}: {'valid' if self.valid else 'invalid'}, {len(self.violations)} violation(s)\n"
        return head + "".join(f"{v}\n" for v in self.violations)


def verify_schedule(schedule: CarrierSchedule, layout: MachineLayout) -> VerificationReport:
    """Replay the schedule and collect every collision or illegal move."""
    where: dict[str, Position] = {}
    found: set[Violation] = set()

    def flag(tick, kind, *detail):
        found.add(Violation(tick, kind, tuple(detail)))

    for t, tick in enumerate(schedule.ticks):
        for c, p in tick.unloads:
            if where.get(c) != p:
                flag(t, "TeleportMove", c)
            where.pop(c, None)
        for c, _f, p in tick.loads:
            if p not in layout.adjacency or c in where:
                flag(t, "TeleportMove", c)
                continue
            if p in where.values():
                flag(t, "DoubleOccupancy", pos_str(p))
            where[c] = p

        seen_carriers = set()
        edges: dict[frozenset, list[tuple[str, Position]]] = {}
        for c, a, b in tick.moves:
            if c in seen_carriers or where.get(c) != a or b not in layout.adjacency.get(a, ()):
                flag(t, "TeleportMove", c)
            seen_carriers.add(c)
            edges.setdefault(frozenset((a, b)), []).append((c, a))
        for users in edges.values():
            for (c1, a1), (c2, a2) in itertools.combinations(users, 2):
                if a1 != a2:
                    x, y = sorted((c1, c2), key=natural_key)
                    flag(t, "SwapConflict", x, y)
        for c, a, b in tick.moves:
            where[c] = b
        counts: dict[Position, int] = {}
        for p in where.values():
            counts[p] = counts.get(p, 0) + 1
        for p, k in counts.items():
            if k > 1:
                flag(t, "DoubleOccupancy", pos_str(p))
    kind_order = {"DoubleOccupancy": 0, "SwapConflict": 1, "TeleportMove": 2}
    ordered = sorted(found, key=lambda v: (v.tick, kind_order[v.kind], [natural_key(d) for d in v.detail]))
    return VerificationReport(len(schedule.ticks), tuple(ordered))


# -- execution ----------------------------------------------------------------


@dataclass(frozen=True)
class Crossing:
    tick: int
    filament_a: str
    filament_b: str
    sense: str  # "over" when filament_a passes over filament_b
    strands: tuple[int, int]


@dataclass(frozen=True)
class BraidTrace:
    crossings: tuple[Crossing, ...]
    history: Mapping[str, tuple[str | None, ...]]

    @property
    def length(self) -> int:
        return len(next(iter(self.history.values()), (None,))) - 1


def execute_schedule(schedule: CarrierSchedule, layout: MachineLayout) -> BraidTrace:
    """Run a verified schedule and record every crossing.

    Two carriers cross when, in one tick, they ride the two rails of the
    same switch in opposite directions. The one starting on an even slot
    passes over; equal parities fall back to the lower filament id.
    Strand indices are 1-based ranks of the live filaments (natural sort of
    filament ids) at the tick of the crossing.
    """
    report = verify_schedule(schedule, layout)
    if not report.valid:
        raise InvalidSchedule(report)

    where: dict[str, Position] = {}
    filament_of: dict[str, str] = {}
    ever = []
    for tick in schedule.ticks:
        for c, f, _ in tick.loads:
            if f not in ever:
                ever.append(f)
    snapshots: list[dict[str, str]] = []
    crossings: list[Crossing] = []

    def snapshot():
        snapshots.append({filament_of[c]: pos_str(p) for c, p in where.items()})

    for t, tick in enumerate(schedule.ticks):
        for c, _ in tick.unloads:
            where.pop(c)
            filament_of.pop(c)
        for c, f, p in tick.loads:
            where[c] = p
            filament_of[c] = f
        if t == 0:
            snapshot()
        live = sorted(filament_of.values(), key=natural_key)
        rank = {f: i + 1 for i, f in enumerate(live)}
        by_switch: dict[str, list[tuple[int, str, Position]]] = {}
        for c, a, b in tick.moves:
            if a[0] != b[0]:
                s = layout.gate_switch[frozenset((a, b))]
                direction = 1 if natural_key(a[0]) < natural_key(b[0]) else -1
                by_switch.setdefault(s, []).append((direction, c, a))
        for s in sorted(by_switch, key=natural_key):
            for (d1, c1, a1), (d2, c2, a2) in itertools.combinations(by_switch[s], 2):
                if d1 == d2:
                    continue
                f1, f2 = filament_of[c1], filament_of[c2]
                if a1[1] % 2 != a2[1] % 2:
                    over = f1 if a1[1] % 2 == 0 else f2
                else:
                    over = min(f1, f2, key=natural_key)
                fa, fb = sorted((f1, f2), key=lambda f: rank[f])
                crossings.append(Crossing(t, fa, fb, "over" if over == fa else "under", (rank[fa], rank[fb])))
        for c, _, b in tick.moves:
            where[c] = b
        snapshot()
    if not schedule.ticks:
        snapshot()

    history = {f: tuple(s.get(f) for s in snapshots) for f in sorted(ever, key=natural_key)}
    return BraidTrace(tuple(crossings), history)


def trace_to_word(trace: BraidTrace) -> str:
    tokens = []
    for c in trace.crossings:
        i = min(c.strands)
        tokens.append(f"s{i}" if c.sense == "over" else f"s{i}^-1")
    return " ".join(tokens)
