"""Vascular morphogenesis controller on a scaffold tree.

Resource flows from the root towards the leaves in proportion to vessel
strength, success flows back up as a sum, and vessels adapt to the product
of the two. Fusion edges take no part in either flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import InsufficientFilaments, MissingLeafScore
from .world import ScaffoldGraph


@dataclass(frozen=True)
class VmcParams:
    R_total: float = 1.0
    alpha: float = 0.1
    beta: float = 0.05
    theta_branch: float = 0.4
    theta_prune: float = 0.02
    f_min: int = 1
    V_init: float = 1.0

    def __post_init__(self):
        for name in ("R_total", "alpha", "theta_branch", "theta_prune", "V_init"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if int(self.f_min) != self.f_min or self.f_min < 1:
            raise ValueError("f_min must be an integer >= 1")


@dataclass(frozen=True)
class VmcState:
    """Per-node vessel (V), resource (R) and success (S) values."""

    vessel: Mapping[int, float]
    resource: Mapping[int, float]
    success: Mapping[int, float]

    @classmethod
    def initial(cls, graph: ScaffoldGraph, params: VmcParams = VmcParams()) -> "VmcState":
        return cls(
            vessel={n: params.V_init for n in graph.nodes},
            resource={n: 0.0 for n in graph.nodes},
            success={n: 0.0 for n in graph.nodes},
        )

    def validate(self, graph: ScaffoldGraph) -> None:
        for table in (self.vessel, self.resource, self.success):
            if set(table) != set(graph.nodes):
                raise ValueError("state does not cover exactly the graph nodes")
            for n, v in table.items():
                if not (math.isfinite(v) and v >= 0.0):
                    raise ValueError(f"node {n}: invalid value {v}")

    def with_nodes(self, new_nodes, params: VmcParams) -> "VmcState":
        """Extend the state with fresh records for newly created nodes."""
        vessel, resource, success = dict(self.vessel), dict(self.resource), dict(self.success)
        for n in new_nodes:
            vessel[n] = params.V_init
            resource[n] = 0.0
            success[n] = 0.0
        return VmcState(vessel, resource, success)

    def record(self, node_id: int) -> tuple[float, float, float]:
        return (self.vessel[node_id], self.resource[node_id], self.success[node_id])


@dataclass(frozen=True)
class StructureProposal:
    kind: str  # "branch-at" | "prune" | "fuse"
    node_id: int
    children: int = 0


def _shares(weights: Sequence[float]) -> list[float]:
    total = math.fsum(weights)
    if total <= 0.0:
        return [1.0 / len(weights)] * len(weights)
    return [w / total for w in weights]


def distribute_resource(graph: ScaffoldGraph, state: VmcState, params: VmcParams) -> VmcState:
    resource = {graph.root: params.R_total}
    for n in graph.preorder():
        kids = graph.child_nodes(n)
        if not kids:
            continue
        for k, share in zip(kids, _shares([state.vessel[k] for k in kids])):
            resource[k] = resource[n] * share
    return VmcState(dict(state.vessel), resource, dict(state.success))


def propagate_success(
    graph: ScaffoldGraph, leaf_scores: Mapping[int, float], state: VmcState | None = None
) -> VmcState:
    """Leaves take their score, internal nodes the sum over their children.

    When ``state`` is omitted the vessel and resource tables are zero.
    """
    success: dict[int, float] = {}
    for n in reversed(graph.preorder()):
        kids = graph.child_nodes(n)
        if kids:
            success[n] = math.fsum(success[k] for k in kids)
        else:
            if n not in leaf_scores:
                raise MissingLeafScore(n)
            success[n] = float(leaf_scores[n])
    if state is None:
        zeros = {n: 0.0 for n in graph.nodes}
        return VmcState(zeros, dict(zeros), success)
    return VmcState(dict(state.vessel), dict(state.resource), success)


def update_vessels(state: VmcState, params: VmcParams) -> VmcState:
    vessel = {}
    for n, v in state.vessel.items():
        grown = v + params.alpha * state.success[n] * state.resource[n] - params.beta * v
        vessel[n] = max(0.0, grown)
    return VmcState(vessel, dict(state.resource), dict(state.success))


def allocate_filaments(
    f_parent: int,
    vessels: Sequence[float],
    params: VmcParams = VmcParams(),
    minimums: Sequence[int] | None = None,
) -> list[int]:
    """Largest-remainder split of ``f_parent`` filaments by vessel proportions.

    Remainder ties go to the lowest index. Entries below their minimum
    (``f_min`` unless ``minimums`` is given) are topped up one filament at a
    time from the currently largest entry that can spare one.
    """
    n = len(vessels)
    if n == 0:
        raise ValueError("vessels must be nonempty")
    floors = list(minimums) if minimums is not None else [params.f_min] * n
    if f_parent < sum(floors):
        raise InsufficientFilaments(f"{f_parent} filaments cannot give {n} branches their minimum {floors}")
    quotas = [f_parent * s for s in _shares(vessels)]
    alloc = [int(math.floor(q)) for q in quotas]
    left = f_parent - sum(alloc)
    order = sorted(range(n), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[:left]:
        alloc[i] += 1
    for i in range(n):
        while alloc[i] < floors[i]:
            donor = max(
                (j for j in range(n) if alloc[j] > floors[j]),
                key=lambda j: (alloc[j] - floors[j], -j),
            )
            alloc[donor] -= 1
            alloc[i] += 1
    return alloc


def propose_structure(graph: ScaffoldGraph, state: VmcState, params: VmcParams) -> list[StructureProposal]:
    proposals = []
    for n in graph.nodes:
        if n == graph.root:
            continue
        if not graph.children[n] and state.resource[n] > params.theta_branch:
            proposals.append(StructureProposal("branch-at", n, 2))
        parent = graph.parent(n)
        has_sibling = parent is not None and len(graph.children[parent]) > 1
        if has_sibling and state.vessel[n] < params.theta_prune:
            proposals.append(StructureProposal("prune", n))
    return sorted(proposals, key=lambda p: (p.node_id, p.kind))


def vmc_step(
    graph: ScaffoldGraph, state: VmcState, leaf_scores: Mapping[int, float], params: VmcParams
) -> tuple[VmcState, list[StructureProposal]]:
    state = distribute_resource(graph, state, params)
    state = propagate_success(graph, leaf_scores, state)
    state = update_vessels(state, params)
    return state, propose_structure(graph, state, params)


def leaf_vessel_shares(graph: ScaffoldGraph, state: VmcState) -> dict[int, float]:
    leaves = graph.leaves()
    return dict(zip(leaves, _shares([state.vessel[n] for n in leaves])))
