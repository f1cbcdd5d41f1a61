"""Layer-by-layer placement across a whole topology.

Layers are visited children first.  A leaf layer keeps the pool detectors
matching the data it emits, optimises its first node and copies that
selection to every node of the layer (leaf hardware is homogeneous; if a
budget change breaks that, each distinct budget gets its own run).  A
standard layer takes the union of what its child layers left over and lets
its nodes pick in declaration order, each from what earlier siblings did not
take.  Whatever a layer does not use is forwarded to its parent.

The procedure is greedy per layer; it does not promise a global optimum or
that every detector ends up deployed.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Mapping

from detplace.errors import UnknownLayer
from detplace.model import (
    DeploymentPlan,
    DetectorProfile,
    Method,
    NodeAssignment,
    Pool,
    SolverConfig,
    Topology,
    pool_index,
)
from detplace.selection import SelectionProblem, SelectionResult, solve

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OptimizationReport:
    plan: DeploymentPlan
    per_layer_leftovers: Mapping[str, frozenset[str]]
    per_node_results: Mapping[str, SelectionResult]
    # candidate ids each layer started from
    per_layer_candidates: Mapping[str, frozenset[str]] = field(default_factory=dict)
    # candidate ids each node was offered (the node's SelectionProblem)
    per_node_candidates: Mapping[str, frozenset[str]] = field(default_factory=dict)
    total_wall_time: float = 0.0  # milliseconds

    def selections(self) -> dict[str, frozenset[str]]:
        return self.plan.selections()


def _assignment(result: SelectionResult) -> NodeAssignment:
    return NodeAssignment(tuple(sorted(result.selected)), result.schedule, result.objective)


def optimize_system(
    topology: Topology,
    pool: Pool,
    config: SolverConfig,
    scheduler_config: SolverConfig | None = None,
) -> OptimizationReport:
    """Place detectors on every node of ``topology`` with the backend named
    by ``config.method``.

    ``scheduler_config`` drives the inner makespan heuristic; by default it
    reuses the iteration limits and time resolution of ``config``.
    """
    started = time.perf_counter()
    index = pool_index(pool)
    sched_cfg = scheduler_config or config.with_method(Method.LOCAL_SEARCH)

    leftovers: dict[str, frozenset[str]] = {}
    layer_cands: dict[str, frozenset[str]] = {}
    node_cands: dict[str, frozenset[str]] = {}
    results: dict[str, SelectionResult] = {}
    assignments: dict[str, NodeAssignment] = {}

    def run(node, cand_ids):
        problem = SelectionProblem(tuple(index[d] for d in sorted(cand_ids)), node, sched_cfg)
        return solve(problem, config)

    for lid in topology.bottom_up_order():
        layer = topology.layer(lid)
        if layer.is_leaf:
            cands = frozenset(d.id for d in pool if d.data_type in layer.data_types)
            # one run per distinct budget; a homogeneous layer needs exactly one
            by_budget: dict[tuple, SelectionResult] = {}
            used = frozenset()
            for node in layer.nodes:
                sig = node.budget_signature()
                if sig not in by_budget:
                    if by_budget:
                        log.warning("leaf layer %s has heterogeneous nodes; extra run for %s", lid, node.id)
                    by_budget[sig] = run(node, cands)
                result = by_budget[sig]
                results[node.id] = result
                node_cands[node.id] = cands
                assignments[node.id] = _assignment(result)
                used |= result.selected
        else:
            cands = frozenset().union(*(leftovers[c] for c in layer.children))
            remaining = cands
            used = frozenset()
            for node in layer.nodes:
                result = run(node, remaining)
                results[node.id] = result
                node_cands[node.id] = remaining
                assignments[node.id] = _assignment(result)
                used |= result.selected
                remaining = remaining - result.selected
        layer_cands[lid] = cands
        leftovers[lid] = cands - used

    order = [n.id for _, n in topology.iter_nodes()]
    plan = DeploymentPlan.from_assignments({nid: assignments[nid] for nid in order})
    return OptimizationReport(
        plan=plan,
        per_layer_leftovers=leftovers,
        per_node_results=results,
        per_layer_candidates=layer_cands,
        per_node_candidates=node_cands,
        total_wall_time=(time.perf_counter() - started) * 1000.0,
    )


def merge_reports(reports, order=None) -> OptimizationReport:
    """Combine reports of disjoint node sets into one."""
    assignments, leftovers, results, lc, nc = {}, {}, {}, {}, {}
    wall = 0.0
    for rep in reports:
        assignments.update(rep.plan.assignments)
        leftovers.update(rep.per_layer_leftovers)
        results.update(rep.per_node_results)
        lc.update(rep.per_layer_candidates)
        nc.update(rep.per_node_candidates)
        wall += rep.total_wall_time
    if order is not None:
        assignments = {nid: assignments[nid] for nid in order if nid in assignments}
    return OptimizationReport(DeploymentPlan.from_assignments(assignments), leftovers, results, lc, nc, wall)


def reoptimize_subtree(
    topology: Topology,
    pool: Pool,
    config: SolverConfig,
    root_layer: str,
    prior: OptimizationReport,
    scheduler_config: SolverConfig | None = None,
) -> OptimizationReport:
    """Re-run the placement on the subtree under ``root_layer`` as if it were
    a stand-alone system; nodes outside it keep their ``prior`` assignment."""
    if root_layer not in topology.layers:
        raise UnknownLayer(root_layer)
    started = time.perf_counter()
    sub = topology.subtree(root_layer)
    fresh = optimize_system(sub, pool, config, scheduler_config)
    inside = set(sub.node_ids)
    inside_layers = set(sub.layers)
    kept = OptimizationReport(
        plan=DeploymentPlan.from_assignments(
            {nid: a for nid, a in prior.plan.assignments.items() if nid not in inside}
        ),
        per_layer_leftovers={k: v for k, v in prior.per_layer_leftovers.items() if k not in inside_layers},
        per_node_results={k: v for k, v in prior.per_node_results.items() if k not in inside},
        per_layer_candidates={k: v for k, v in prior.per_layer_candidates.items() if k not in inside_layers},
        per_node_candidates={k: v for k, v in prior.per_node_candidates.items() if k not in inside},
    )
    merged = merge_reports([kept, fresh], order=topology.node_ids)
    object.__setattr__(merged, "total_wall_time", (time.perf_counter() - started) * 1000.0)
    return merged


def report_to_dict(report: OptimizationReport) -> dict:
    from detplace.model import plan_to_dict

    return {
        "plan": plan_to_dict(report.plan),
        "leftovers": {k: sorted(v) for k, v in report.per_layer_leftovers.items()},
        "node_wall_time_ms": {k: r.wall_time for k, r in report.per_node_results.items()},
        "node_evaluations": {k: r.evaluations for k, r in report.per_node_results.items()},
        "total_wall_time_ms": report.total_wall_time,
    }
