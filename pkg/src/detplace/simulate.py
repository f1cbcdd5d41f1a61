"""Scripted reconfiguration of a deployed topology.

A scenario is a list of ordinal events.  Events sharing the same ``at``
value form one phase: they are applied together and the placement is then
recomputed for every connected component of the resulting topology.

* ``disconnect`` cuts nodes loose.  Each cut node runs as a one-node system
  (a leaf keeps its data types, a standard node gets nothing to work on).
  Layers left without nodes disappear, and the subtrees below them become
  systems of their own.
* ``reconnect`` puts nodes back into their original layers.
* ``resource_delta`` changes a node's ``t_max`` / ``cpu_max`` / ``ram_max``
  from the next phase on, until another delta changes it again.
"""
from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field, replace
from itertools import groupby
from typing import Mapping, Sequence

from detplace.errors import InvalidDelta, ParseError, UnknownNode, ValidationError
from detplace.model import (
    DeploymentPlan,
    Layer,
    LayerKind,
    NodeSpec,
    Pool,
    SolverConfig,
    Topology,
    Violation,
    plan_to_dict,
    validate_plan,
)
from detplace.system import OptimizationReport, merge_reports, optimize_system


class EventKind(str, enum.Enum):
    DISCONNECT = "disconnect"
    RECONNECT = "reconnect"
    RESOURCE_DELTA = "resource_delta"


@dataclass(frozen=True)
class ScenarioEvent:
    at: int
    kind: EventKind
    nodes: tuple[str, ...]
    dt_max_ms: float = 0.0
    dcpu_pct: float = 0.0
    dram_mb: float = 0.0
    note: str = ""

    def to_dict(self) -> dict:
        out = {"at": self.at, "kind": self.kind.value, "nodes": list(self.nodes), "note": self.note}
        if self.kind is EventKind.RESOURCE_DELTA:
            out.update(dt_max_ms=self.dt_max_ms, dcpu_pct=self.dcpu_pct, dram_mb=self.dram_mb)
        return out


@dataclass(frozen=True)
class NodeDiff:
    added: frozenset[str] = frozenset()
    removed: frozenset[str] = frozenset()


@dataclass(frozen=True, eq=False)
class Phase:
    events: tuple[ScenarioEvent, ...]
    report: OptimizationReport
    components: tuple[Topology, ...]
    reconfig_wall_time: float  # milliseconds
    plan_diff: Mapping[str, NodeDiff]

    @property
    def plan(self) -> DeploymentPlan:
        return self.report.plan


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    phases: list[Phase] = field(default_factory=list)

    @property
    def final(self) -> Phase:
        return self.phases[-1]


def load_scenario(path) -> list[ScenarioEvent]:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return scenario_from_list(raw)


def scenario_from_list(raw) -> list[ScenarioEvent]:
    if not isinstance(raw, list):
        raise ParseError("scenario must be a JSON list of events")
    events = []
    for i, item in enumerate(raw):
        try:
            events.append(
                ScenarioEvent(
                    at=int(item["at"]),
                    kind=EventKind(item["kind"]),
                    nodes=tuple(item.get("nodes", ())),
                    dt_max_ms=float(item.get("dt_max_ms", 0.0)),
                    dcpu_pct=float(item.get("dcpu_pct", 0.0)),
                    dram_mb=float(item.get("dram_mb", 0.0)),
                    note=str(item.get("note", "")),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"scenario[{i}]: {exc}") from exc
    return events


def apply_delta(node: NodeSpec, event: ScenarioEvent) -> NodeSpec:
    try:
        return replace(
            node,
            t_max=node.t_max + event.dt_max_ms,
            cpu_max=node.cpu_max + event.dcpu_pct,
            ram_max=node.ram_max + event.dram_mb,
        )
    except ValidationError as exc:
        raise InvalidDelta(f"delta on {node.id!r} leaves an invalid budget: {exc}") from None


def effective_components(
    topology: Topology, specs: Mapping[str, NodeSpec], isolated: set[str]
) -> list[Topology]:
    """Connected systems after applying budgets and cutting ``isolated`` nodes.

    The component holding the original root (if it survives) comes first,
    then orphaned subtrees by root id, then one-node systems by node id.
    """
    kept: dict[str, Layer] = {}
    for lid, layer in topology.layers.items():
        nodes = tuple(specs[n.id] for n in layer.nodes if n.id not in isolated)
        if nodes:
            kept[lid] = replace(layer, nodes=nodes)
    for lid, layer in list(kept.items()):
        if layer.is_leaf:
            continue
        children = tuple(c for c in layer.children if c in kept)
        if children:
            kept[lid] = replace(layer, children=children)
        else:
            # nothing feeds this layer any more
            kept[lid] = replace(layer, kind=LayerKind.LEAF, children=(), data_types=frozenset())

    roots = sorted(lid for lid in kept if lid == topology.root or topology.parent(lid) not in kept)
    roots.sort(key=lambda lid: lid != topology.root)
    components = []
    for root in roots:
        ids, stack = [], [root]
        while stack:
            cur = stack.pop()
            ids.append(cur)
            stack.extend(kept[cur].children)
        components.append(Topology({i: kept[i] for i in sorted(ids)}, root))

    for nid in sorted(isolated):
        layer = topology.layer_of(nid)
        lid = layer.id if len(layer.nodes) == 1 else f"{layer.id}@{nid}"
        solo = Layer(
            id=lid,
            kind=LayerKind.LEAF,
            nodes=(specs[nid],),
            data_types=layer.data_types if layer.is_leaf else frozenset(),
            hardware=layer.hardware,
        )
        components.append(Topology({lid: solo}, lid))
    return components


def diff_plans(before: DeploymentPlan | None, after: DeploymentPlan) -> dict[str, NodeDiff]:
    prev = before.selections() if before is not None else {}
    cur = after.selections()
    out = {}
    for nid in list(cur) + [n for n in prev if n not in cur]:
        a, b = cur.get(nid, frozenset()), prev.get(nid, frozenset())
        out[nid] = NodeDiff(added=a - b, removed=b - a)
    return out


def run_scenario(
    topology: Topology,
    pool: Pool,
    config: SolverConfig,
    events: Sequence[ScenarioEvent],
    scheduler_config: SolverConfig | None = None,
) -> ScenarioResult:
    """Optimise, then replay ``events`` phase by phase, re-optimising every
    component after each phase."""
    known = set(topology.node_ids)
    for ev in events:
        for nid in ev.nodes:
            if nid not in known:
                raise UnknownNode(nid)

    specs = {n.id: n for _, n in topology.iter_nodes()}
    isolated: set[str] = set()
    order = topology.node_ids

    def optimise(components):
        started = time.perf_counter()
        reports = [optimize_system(c, pool, config, scheduler_config) for c in components]
        report = merge_reports(reports, order=order)
        return report, (time.perf_counter() - started) * 1000.0

    report, wall = optimise([topology])
    result = ScenarioResult([Phase((), report, (topology,), wall, diff_plans(None, report.plan))])

    for _, group in groupby(sorted(events, key=lambda e: e.at), key=lambda e: e.at):
        group = tuple(group)
        for ev in group:
            if ev.kind is EventKind.DISCONNECT:
                isolated.update(ev.nodes)
            elif ev.kind is EventKind.RECONNECT:
                isolated.difference_update(ev.nodes)
            else:
                for nid in ev.nodes:
                    specs[nid] = apply_delta(specs[nid], ev)
        components = tuple(effective_components(topology, specs, isolated))
        report, wall = optimise(components)
        prev = result.phases[-1].plan
        result.phases.append(Phase(group, report, components, wall, diff_plans(prev, report.plan)))
    return result


def validate_phase(phase: Phase, pool: Pool) -> list[Violation]:
    """Plan violations of one phase, checked component by component."""
    out = []
    for comp in phase.components:
        nodes = set(comp.node_ids)
        sub = DeploymentPlan.from_assignments(
            {nid: a for nid, a in phase.plan.assignments.items() if nid in nodes}
        )
        out.extend(validate_plan(sub, comp, pool))
    return out


def result_to_dict(result: ScenarioResult) -> dict:
    phases = []
    for i, ph in enumerate(result.phases):
        phases.append(
            {
                "phase": i,
                "events": [e.to_dict() for e in ph.events],
                "components": [
                    {"root": c.root, "layers": sorted(c.layers), "nodes": c.node_ids} for c in ph.components
                ],
                "plan": plan_to_dict(ph.plan),
                "leftovers": {k: sorted(v) for k, v in ph.report.per_layer_leftovers.items()},
                "reconfig_wall_time_ms": ph.reconfig_wall_time,
                "plan_diff": {
                    nid: {"added": sorted(d.added), "removed": sorted(d.removed)}
                    for nid, d in ph.plan_diff.items()
                },
            }
        )
    return {"phases": phases}
