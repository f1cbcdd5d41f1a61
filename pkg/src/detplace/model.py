"""Domain types shared by the optimizer, simulator and benchmark.

Everything here is an immutable value object.  JSON (de)serialization for
topology, detector pool and deployment plan files lives at the bottom of the
module together with :func:`validate_plan`, the plan checker used by the CLI
and the test-suite.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

from detplace.errors import (
    ConfigError,
    ParseError,
    UnknownDetector,
    UnknownLayer,
    UnknownNode,
    ValidationError,
)

#: absolute slack used for every resource / time comparison
EPS = 1e-9


# =============================================================================
# Detectors and nodes
# =============================================================================

@dataclass(frozen=True)
class DetectorProfile:
    """Declared footprint of one intrusion detector.

    ``score`` is a generic performance value (F1 by default), ``exec_time`` is
    milliseconds per input, ``cpu_peak`` is percent of one node's CPU and
    ``ram_peak`` megabytes.  Peaks are held for the whole run.
    """

    id: str
    data_type: str
    score: float
    exec_time: float
    cpu_peak: float
    ram_peak: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"detector {self.id!r}: score {self.score} outside [0, 1]")
        if not self.exec_time > 0:
            raise ValidationError(f"detector {self.id!r}: exec_time must be positive")
        if not 0.0 < self.cpu_peak <= 100.0:
            raise ValidationError(f"detector {self.id!r}: cpu_peak {self.cpu_peak} outside (0, 100]")
        if not self.ram_peak >= 0:
            raise ValidationError(f"detector {self.id!r}: ram_peak must be non-negative")


@dataclass(frozen=True)
class NodeSpec:
    """Resource budgets of one node.

    ``t_max`` is the end-to-end alert budget and ``ingest_delay`` the delay
    before the node sees its input, both in milliseconds.  A node whose delay
    already exceeds its budget is legal; it simply cannot run anything.
    """

    id: str
    cpu_max: float
    ram_max: float
    t_max: float
    ingest_delay: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.cpu_max <= 100.0:
            raise ValidationError(f"node {self.id!r}: cpu_max {self.cpu_max} outside (0, 100]")
        if not self.ram_max > 0:
            raise ValidationError(f"node {self.id!r}: ram_max must be positive")
        if not self.t_max > 0:
            raise ValidationError(f"node {self.id!r}: t_max must be positive")
        if not self.ingest_delay >= 0:
            raise ValidationError(f"node {self.id!r}: ingest_delay must be non-negative")

    def budget_signature(self):
        return (self.cpu_max, self.ram_max, self.t_max, self.ingest_delay)


Pool = Sequence[DetectorProfile]


def pool_index(pool: Iterable[DetectorProfile]) -> dict[str, DetectorProfile]:
    """Map detector id to profile, rejecting duplicate ids."""
    index: dict[str, DetectorProfile] = {}
    for det in pool:
        if det.id in index:
            raise ValidationError(f"duplicate detector id {det.id!r}")
        index[det.id] = det
    return index


# =============================================================================
# Topology
# =============================================================================

class LayerKind(str, enum.Enum):
    LEAF = "leaf"
    STANDARD = "standard"


@dataclass(frozen=True)
class Layer:
    id: str
    kind: LayerKind
    nodes: tuple[NodeSpec, ...]
    children: tuple[str, ...] = ()
    data_types: frozenset[str] = frozenset()
    # opaque hardware class label, e.g. "Raspberry Pi 4"
    hardware: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.kind is LayerKind.LEAF


@dataclass(frozen=True, eq=False)
class Topology:
    """Tree of layers rooted at ``root``.

    Construction validates the tree: no cycles, every non-root layer has
    exactly one parent, every layer is reachable from the root, leaf layers
    have no children and standard layers have at least one.
    """

    layers: Mapping[str, Layer]
    root: str
    _parent: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", dict(self.layers))
        object.__setattr__(self, "_parent", _check_tree(self.layers, self.root))

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return self.root == other.root and self.layers == other.layers

    def layer(self, layer_id: str) -> Layer:
        try:
            return self.layers[layer_id]
        except KeyError:
            raise UnknownLayer(layer_id) from None

    def parent(self, layer_id: str) -> str | None:
        self.layer(layer_id)
        return self._parent.get(layer_id)

    def depth(self, layer_id: str) -> int:
        depth = 0
        cur = self._parent.get(layer_id)
        while cur is not None:
            depth += 1
            cur = self._parent.get(cur)
        return depth

    def iter_nodes(self) -> Iterator[tuple[Layer, NodeSpec]]:
        for layer in self.layers.values():
            for node in layer.nodes:
                yield layer, node

    def node(self, node_id: str) -> NodeSpec:
        for _, node in self.iter_nodes():
            if node.id == node_id:
                return node
        raise UnknownNode(node_id)

    def layer_of(self, node_id: str) -> Layer:
        for layer, node in self.iter_nodes():
            if node.id == node_id:
                return layer
        raise UnknownNode(node_id)

    @property
    def node_ids(self) -> list[str]:
        return [node.id for _, node in self.iter_nodes()]

    def descendants(self, layer_id: str) -> list[str]:
        """Layer ids of the subtree rooted at ``layer_id`` (pre-order)."""
        out, stack = [], [layer_id]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(reversed(self.layer(cur).children))
        return out

    def subtree(self, layer_id: str) -> "Topology":
        ids = self.descendants(layer_id)
        return Topology({i: self.layers[i] for i in ids}, layer_id)

    def max_depth(self) -> int:
        return max(self.depth(i) for i in self.layers)

    def bottom_up_order(self) -> list[str]:
        """Children before parents; ready siblings are taken by layer id."""
        import heapq

        pending = {i: len(layer.children) for i, layer in self.layers.items()}
        ready = [i for i, n in pending.items() if n == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            cur = heapq.heappop(ready)
            order.append(cur)
            parent = self._parent.get(cur)
            if parent is not None:
                pending[parent] -= 1
                if pending[parent] == 0:
                    heapq.heappush(ready, parent)
        return order


def _check_tree(layers: Mapping[str, Layer], root: str) -> dict[str, str]:
    if root not in layers:
        raise ValidationError(f"root layer {root!r} is not defined", root)
    seen_nodes: set[str] = set()
    for lid, layer in layers.items():
        if lid != layer.id:
            raise ValidationError(f"layer key {lid!r} does not match id {layer.id!r}", lid)
        if not layer.nodes:
            raise ValidationError(f"layer {lid} has no nodes", lid)
        if layer.is_leaf and layer.children:
            raise ValidationError(f"leaf layer {lid} has children", lid)
        if not layer.is_leaf and not layer.children:
            raise ValidationError(f"standard layer {lid} has no children", lid)
        for node in layer.nodes:
            if node.id in seen_nodes:
                raise ValidationError(f"duplicate node id {node.id!r} in layer {lid}", lid)
            seen_nodes.add(node.id)
        for child in layer.children:
            if child not in layers:
                raise ValidationError(f"layer {lid} references unknown child {child!r}", lid)

    parent: dict[str, str] = {}
    state: dict[str, int] = {}  # 1 = on stack, 2 = finished
    stack = [(root, iter(layers[root].children))]
    state[root] = 1
    while stack:
        lid, it = stack[-1]
        child = next(it, None)
        if child is None:
            state[lid] = 2
            stack.pop()
            continue
        st = state.get(child)
        if st == 1:
            raise ValidationError(f"cycle at {child}", child)
        if st == 2 or child in parent:
            raise ValidationError(f"layer {child} has more than one parent", child)
        parent[child] = lid
        state[child] = 1
        stack.append((child, iter(layers[child].children)))
    for lid in layers:
        if lid not in state:
            raise ValidationError(f"orphan layer {lid} is not reachable from root", lid)
    return parent


# =============================================================================
# Schedules and plans
# =============================================================================

class ScheduleEntry(NamedTuple):
    detector: str
    start: float


@dataclass(frozen=True)
class Schedule:
    """Start times (ms) for a detector set on one node.

    ``makespan`` is the finish time of the last detector, 0 when empty.
    """

    entries: tuple[ScheduleEntry, ...] = ()
    makespan: float = 0.0

    @property
    def detector_ids(self) -> list[str]:
        return [e.detector for e in self.entries]


@dataclass(frozen=True)
class NodeAssignment:
    detectors: tuple[str, ...]
    schedule: Schedule
    objective: float


@dataclass(frozen=True, eq=False)
class DeploymentPlan:
    assignments: Mapping[str, NodeAssignment] = field(default_factory=dict)
    total_objective: float = 0.0

    def __eq__(self, other):
        if not isinstance(other, DeploymentPlan):
            return NotImplemented
        return dict(self.assignments) == dict(other.assignments) and math.isclose(
            self.total_objective, other.total_objective, rel_tol=1e-12, abs_tol=1e-12
        )

    def selected(self, node_id: str) -> frozenset[str]:
        a = self.assignments.get(node_id)
        return frozenset(a.detectors) if a is not None else frozenset()

    def selections(self) -> dict[str, frozenset[str]]:
        return {nid: frozenset(a.detectors) for nid, a in self.assignments.items()}

    @classmethod
    def from_assignments(cls, assignments: Mapping[str, NodeAssignment]) -> "DeploymentPlan":
        assignments = dict(assignments)
        return cls(assignments, math.fsum(a.objective for a in assignments.values()))


# =============================================================================
# Solver configuration
# =============================================================================

class Method(str, enum.Enum):
    LOCAL_SEARCH = "local"
    TABU_SEARCH = "tabu"
    ANT_COLONY = "aco"
    BRUTE_FORCE = "brute"


@dataclass(frozen=True)
class AcoParams:
    ants: int = 10
    evaporation: float = 0.1
    alpha: float = 1.0
    beta: float = 1.0


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.TABU_SEARCH
    max_iterations: int = 10
    patience: int = 2
    seed: int = 0
    tabu_tenure: int = 5
    aco: AcoParams = AcoParams()
    # slot width of the discrete scheduling grid
    time_resolution_ms: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be positive")
        if not 1 <= self.patience <= self.max_iterations:
            raise ConfigError("patience must be in [1, max_iterations]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.tabu_tenure < 1:
            raise ConfigError("tabu_tenure must be positive")
        if self.aco.ants < 1:
            raise ConfigError("aco.ants must be positive")
        if not 0.0 < self.aco.evaporation < 1.0:
            raise ConfigError("aco.evaporation must be in (0, 1)")
        if not self.time_resolution_ms > 0:
            raise ConfigError("time_resolution_ms must be positive")

    def with_method(self, method) -> "SolverConfig":
        from dataclasses import replace

        return replace(self, method=Method(method))


# =============================================================================
# Plan validation
# =============================================================================

class Rule(str, enum.Enum):
    DISJOINTNESS = "DisjointnessViolation"
    CPU = "CpuViolation"
    RAM = "RamViolation"
    TIME_BUDGET = "TimeBudgetViolation"
    DUPLICATE = "DuplicateDetectorViolation"
    SCHEDULE_COVERAGE = "ScheduleCoverageViolation"
    NEGATIVE_START = "NegativeStartViolation"
    MAKESPAN = "MakespanViolation"
    OBJECTIVE = "ObjectiveViolation"
    TOTAL = "TotalObjectiveViolation"


class Violation(NamedTuple):
    node_id: str | None
    rule: Rule
    detail: str = ""


def _close(a, b):
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)


def check_schedule(schedule: Schedule, node: NodeSpec, index: Mapping[str, DetectorProfile]) -> list[Violation]:
    """Schedule invariants for one node: uniqueness, makespan, caps at event points."""
    out = []
    nid = node.id
    ids = schedule.detector_ids
    if len(set(ids)) != len(ids):
        dups = sorted({i for i in ids if ids.count(i) > 1})
        out.append(Violation(nid, Rule.DUPLICATE, ",".join(dups)))
    intervals = []
    for entry in schedule.entries:
        if entry.detector not in index:
            raise UnknownDetector(entry.detector)
        det = index[entry.detector]
        if entry.start < -EPS:
            out.append(Violation(nid, Rule.NEGATIVE_START, entry.detector))
        intervals.append((entry.start, entry.start + det.exec_time, det))
    expected = max((end for _, end, _ in intervals), default=0.0)
    if not _close(expected, schedule.makespan):
        out.append(Violation(nid, Rule.MAKESPAN, f"declared {schedule.makespan}, actual {expected}"))
    cpu_bad = ram_bad = None
    for t in sorted({s for s, _, _ in intervals}):
        running = [d for s, e, d in intervals if s <= t < e]
        cpu = math.fsum(d.cpu_peak for d in running)
        ram = math.fsum(d.ram_peak for d in running)
        if cpu_bad is None and cpu > node.cpu_max + EPS:
            cpu_bad = f"cpu {cpu:g} > {node.cpu_max:g} at t={t:g}"
        if ram_bad is None and ram > node.ram_max + EPS:
            ram_bad = f"ram {ram:g} > {node.ram_max:g} at t={t:g}"
    if cpu_bad:
        out.append(Violation(nid, Rule.CPU, cpu_bad))
    if ram_bad:
        out.append(Violation(nid, Rule.RAM, ram_bad))
    return out


def validate_plan(plan: DeploymentPlan, topology: Topology, pool: Pool) -> list[Violation]:
    """Return every invariant breach of ``plan`` against ``topology``.

    Raises :class:`UnknownNode` / :class:`UnknownDetector` for references that
    cannot be resolved at all.  An empty list means the plan is clean.
    """
    index = pool_index(pool)
    node_layer = {node.id: (layer, node) for layer, node in topology.iter_nodes()}
    out: list[Violation] = []
    for nid, assignment in plan.assignments.items():
        if nid not in node_layer:
            raise UnknownNode(nid)
        _, node = node_layer[nid]
        for did in assignment.detectors:
            if did not in index:
                raise UnknownDetector(did)
        out.extend(check_schedule(assignment.schedule, node, index))
        selected = set(assignment.detectors)
        if selected != set(assignment.schedule.detector_ids) or len(selected) != len(assignment.detectors):
            out.append(Violation(nid, Rule.SCHEDULE_COVERAGE))
        if selected and assignment.schedule.makespan + node.ingest_delay > node.t_max + EPS:
            out.append(
                Violation(
                    nid,
                    Rule.TIME_BUDGET,
                    f"{assignment.schedule.makespan:g} + {node.ingest_delay:g} > {node.t_max:g}",
                )
            )
        score = math.fsum(index[d].score for d in selected)
        if not _close(score, assignment.objective):
            out.append(Violation(nid, Rule.OBJECTIVE, f"declared {assignment.objective}, actual {score}"))

    for layer in topology.layers.values():
        if layer.is_leaf:
            continue
        owner: dict[str, str] = {}
        for node in layer.nodes:
            for did in plan.selected(node.id):
                if did in owner:
                    out.append(
                        Violation(node.id, Rule.DISJOINTNESS, f"{did} also selected by {owner[did]}")
                    )
                else:
                    owner[did] = node.id

    total = math.fsum(a.objective for a in plan.assignments.values())
    if not _close(total, plan.total_objective):
        out.append(Violation(None, Rule.TOTAL, f"declared {plan.total_objective}, actual {total}"))
    return out


# =============================================================================
# JSON I/O
# =============================================================================

def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _field(obj, key, path, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{path}: missing field {key!r}")
    value = obj[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{path}.{key}: expected a number")
        return float(value)
    if kind is not None and not isinstance(value, kind):
        raise ParseError(f"{path}.{key}: expected {kind.__name__}")
    return value


def node_from_dict(obj, where="node") -> NodeSpec:
    return NodeSpec(
        id=_field(obj, "id", where, str),
        cpu_max=_field(obj, "cpu_max", where, float),
        ram_max=_field(obj, "ram_max", where, float),
        t_max=_field(obj, "t_max", where, float),
        ingest_delay=float(obj.get("ingest_delay", 0.0)),
    )


def node_to_dict(node: NodeSpec) -> dict:
    return {
        "id": node.id,
        "cpu_max": node.cpu_max,
        "ram_max": node.ram_max,
        "t_max": node.t_max,
        "ingest_delay": node.ingest_delay,
    }


def topology_from_dict(obj) -> Topology:
    root = _field(obj, "root", "topology", str)
    raw_layers = _field(obj, "layers", "topology", list)
    layers: dict[str, Layer] = {}
    for i, raw in enumerate(raw_layers):
        where = f"layers[{i}]"
        lid = _field(raw, "id", where, str)
        kind = _field(raw, "kind", where, str)
        try:
            kind = LayerKind(kind)
        except ValueError:
            raise ParseError(f"{where}.kind: expected 'leaf' or 'standard', got {kind!r}") from None
        nodes = tuple(node_from_dict(n, f"{where}.nodes[{j}]") for j, n in enumerate(_field(raw, "nodes", where, list)))
        if lid in layers:
            raise ValidationError(f"duplicate layer id {lid}", lid)
        layers[lid] = Layer(
            id=lid,
            kind=kind,
            nodes=nodes,
            children=tuple(raw.get("children", [])),
            data_types=frozenset(raw.get("data_types", [])),
            hardware=raw.get("hardware"),
        )
    return Topology(layers, root)


def topology_to_dict(topology: Topology) -> dict:
    layers = []
    for layer in topology.layers.values():
        item = {
            "id": layer.id,
            "kind": layer.kind.value,
            "children": list(layer.children),
            "data_types": sorted(layer.data_types),
            "nodes": [node_to_dict(n) for n in layer.nodes],
        }
        if layer.hardware is not None:
            item["hardware"] = layer.hardware
        layers.append(item)
    return {"root": topology.root, "layers": layers}


def load_topology(path) -> Topology:
    return topology_from_dict(_read_json(path))


def dump_topology(topology: Topology, path) -> None:
    _write_json(topology_to_dict(topology), path)


def pool_from_list(items) -> tuple[DetectorProfile, ...]:
    if not isinstance(items, list):
        raise ParseError("detector pool must be a JSON list")
    pool = tuple(
        DetectorProfile(
            id=_field(raw, "id", f"pool[{i}]", str),
            data_type=_field(raw, "data_type", f"pool[{i}]", str),
            score=_field(raw, "score", f"pool[{i}]", float),
            exec_time=_field(raw, "exec_time_ms", f"pool[{i}]", float),
            cpu_peak=_field(raw, "cpu_peak_pct", f"pool[{i}]", float),
            ram_peak=_field(raw, "ram_peak_mb", f"pool[{i}]", float),
        )
        for i, raw in enumerate(items)
    )
    pool_index(pool)
    return pool


def pool_to_list(pool: Pool) -> list:
    return [
        {
            "id": d.id,
            "data_type": d.data_type,
            "score": d.score,
            "exec_time_ms": d.exec_time,
            "cpu_peak_pct": d.cpu_peak,
            "ram_peak_mb": d.ram_peak,
        }
        for d in pool
    ]


def load_pool(path) -> tuple[DetectorProfile, ...]:
    return pool_from_list(_read_json(path))


def dump_pool(pool: Pool, path) -> None:
    _write_json(pool_to_list(pool), path)


def schedule_to_dict(schedule: Schedule) -> dict:
    return {
        "makespan_ms": schedule.makespan,
        "entries": [{"detector": e.detector, "start_ms": e.start} for e in schedule.entries],
    }


def schedule_from_dict(obj) -> Schedule:
    entries = tuple(
        ScheduleEntry(_field(e, "detector", "entry", str), _field(e, "start_ms", "entry", float))
        for e in _field(obj, "entries", "schedule", list)
    )
    return Schedule(entries, _field(obj, "makespan_ms", "schedule", float))


def plan_to_dict(plan: DeploymentPlan) -> dict:
    return {
        "total_objective": plan.total_objective,
        "assignments": {
            nid: {
                "detectors": list(a.detectors),
                "objective": a.objective,
                "schedule": schedule_to_dict(a.schedule),
            }
            for nid, a in plan.assignments.items()
        },
    }


def plan_from_dict(obj) -> DeploymentPlan:
    raw = _field(obj, "assignments", "plan", dict)
    assignments = {
        nid: NodeAssignment(
            detectors=tuple(_field(a, "detectors", nid, list)),
            schedule=schedule_from_dict(_field(a, "schedule", nid, dict)),
            objective=_field(a, "objective", nid, float),
        )
        for nid, a in raw.items()
    }
    return DeploymentPlan(assignments, _field(obj, "total_objective", "plan", float))


def load_plan(path) -> DeploymentPlan:
    return plan_from_dict(_read_json(path))


def dump_plan(plan: DeploymentPlan, path) -> None:
    _write_json(plan_to_dict(plan), path)
