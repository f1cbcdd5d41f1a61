"""Benchmark the selection backends on generated architectures.

For every (architecture seed, pool size, backend) the harness runs the whole
layered placement ``repeats`` times, keeps the mean wall time, and scores
each node against the brute-force optimum of the exact problem that node
was given: the ratio of objectives, clamped to [0, 1].  Rows go to a CSV.
"""
from __future__ import annotations

import csv
import logging
import math
import statistics
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

from detplace.errors import InstanceTooLarge, MismatchedProblem
from detplace.model import Method, SolverConfig, Topology, pool_index
from detplace.selection import SelectionProblem, SelectionResult, solve_brute_force
from detplace.system import OptimizationReport, optimize_system
from detplace.topogen import GeneratorConfig, generate_pool, generate_topology

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "seed",
    "n_layers",
    "n_nodes",
    "n_ids",
    "backend",
    "mean_node_metric",
    "total_objective",
    "wall_time_ms",
    "n_excluded_nodes",
    "n_oracle_skipped",
)


@dataclass(frozen=True)
class BenchConfig:
    n_architectures: int = 20
    ids_counts: tuple[int, ...] = tuple(range(20, 41))
    # target node counts; when set, architectures are picked by size
    node_sweep: tuple[int, ...] = ()
    repeats: int = 3
    backends: tuple[Method, ...] = tuple(Method)
    seed: int = 0
    output: Path | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    # seeds scanned per node_sweep target
    sweep_search: int = 400

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.n_architectures < 0:
            raise ValueError("n_architectures must be >= 0")
        object.__setattr__(self, "backends", tuple(Method(b) for b in self.backends))
        object.__setattr__(self, "ids_counts", tuple(self.ids_counts))
        object.__setattr__(self, "node_sweep", tuple(self.node_sweep))


@dataclass(frozen=True)
class BenchRow:
    seed: int
    n_layers: int
    n_nodes: int
    n_ids: int
    backend: str
    mean_node_metric: float | None
    total_objective: float | None
    wall_time_ms: float | None
    n_excluded_nodes: int
    n_oracle_skipped: int

    def as_csv(self) -> list:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append("" if v is None else (repr(v) if isinstance(v, float) else v))
        return out


def quality_metric(meta_result: SelectionResult, oracle_result: SelectionResult) -> float:
    """Objective of ``meta_result`` relative to the optimum, in [0, 1].

    When nothing is deployable (optimum 0) the metaheuristic cannot do worse
    and scores 1.
    """
    if (
        meta_result.problem_key is not None
        and oracle_result.problem_key is not None
        and meta_result.problem_key != oracle_result.problem_key
    ):
        raise MismatchedProblem("results belong to different selection problems")
    if oracle_result.objective <= 0:
        return 1.0
    return min(1.0, max(0.0, meta_result.objective / oracle_result.objective))


class OracleCache:
    """Brute-force results keyed by selection problem; None marks oversize."""

    def __init__(self):
        self._store: dict = {}

    def get(self, problem: SelectionProblem) -> SelectionResult | None:
        key = problem.key()
        if key not in self._store:
            try:
                self._store[key] = solve_brute_force(problem)
            except InstanceTooLarge:
                self._store[key] = None
        return self._store[key]


def node_metrics(report: OptimizationReport, topology: Topology, pool, config: SolverConfig, oracle: OracleCache):
    """Per-node quality against the oracle.

    Returns ``(metrics, n_excluded, n_skipped)``: nodes with an empty
    candidate pool are excluded, nodes whose pool exceeds the brute-force
    guard are skipped.
    """
    index = pool_index(pool)
    sched_cfg = config.with_method(Method.LOCAL_SEARCH)
    metrics, excluded, skipped = [], 0, 0
    for _, node in topology.iter_nodes():
        cands = report.per_node_candidates[node.id]
        if not cands:
            excluded += 1
            continue
        problem = SelectionProblem(tuple(index[c] for c in sorted(cands)), node, sched_cfg)
        best = oracle.get(problem)
        if best is None:
            skipped += 1
            continue
        metrics.append(quality_metric(report.per_node_results[node.id], best))
    return metrics, excluded, skipped


def _row_metric(metrics, skipped):
    if metrics:
        return statistics.fmean(metrics)
    # no node had anything to place: nothing deployable, same as a 0 optimum
    return None if skipped else 1.0


def sweep_seeds(target: int, count: int, cfg: BenchConfig) -> list[int]:
    """The ``count`` seeds whose architecture size is closest to ``target``."""
    scored = []
    for s in range(cfg.seed, cfg.seed + cfg.sweep_search):
        topo = generate_topology(replace(cfg.generator, seed=s))
        scored.append((abs(len(topo.node_ids) - target), s))
    scored.sort()
    return sorted(s for _, s in scored[:count])


def architecture_seeds(cfg: BenchConfig) -> list[int]:
    if not cfg.node_sweep:
        return [cfg.seed + i for i in range(cfg.n_architectures)]
    seeds: list[int] = []
    for target in cfg.node_sweep:
        seeds.extend(s for s in sweep_seeds(target, cfg.n_architectures, cfg) if s not in seeds)
    return seeds


def bench_one(seed: int, n_ids: int, cfg: BenchConfig, oracle: OracleCache | None = None) -> list[BenchRow]:
    """Rows for one architecture and pool size, one per backend."""
    oracle = oracle or OracleCache()
    gen = replace(cfg.generator, seed=seed)
    topo = generate_topology(gen)
    # pool streams depend on both seed and size
    pool = generate_pool(n_ids, replace(gen, seed=seed * 1000 + n_ids))
    rows = []
    for backend in cfg.backends:
        solver = cfg.solver.with_method(backend)
        times, report = [], None
        try:
            for _ in range(cfg.repeats):
                t0 = time.perf_counter()
                report = optimize_system(topo, pool, solver)
                times.append((time.perf_counter() - t0) * 1000.0)
        except InstanceTooLarge as exc:
            log.info("seed %s, %s ids, %s: %s", seed, n_ids, backend.value, exc)
            rows.append(
                BenchRow(seed, len(topo.layers), len(topo.node_ids), n_ids, backend.value, None, None, None, 0, 1)
            )
            continue
        metrics, excluded, skipped = node_metrics(report, topo, pool, solver, oracle)
        rows.append(
            BenchRow(
                seed=seed,
                n_layers=len(topo.layers),
                n_nodes=len(topo.node_ids),
                n_ids=n_ids,
                backend=backend.value,
                mean_node_metric=_row_metric(metrics, skipped),
                total_objective=report.plan.total_objective,
                wall_time_ms=statistics.fmean(times),
                n_excluded_nodes=excluded,
                n_oracle_skipped=skipped,
            )
        )
    return rows


def run_benchmark(config: BenchConfig, progress: bool = False) -> list[BenchRow]:
    rows: list[BenchRow] = []
    for seed in architecture_seeds(config):
        oracle = OracleCache()
        for n_ids in config.ids_counts:
            rows.extend(bench_one(seed, n_ids, config, oracle))
            if progress:
                log.warning("seed %d, %d ids done", seed, n_ids)
    if config.output is not None:
        write_csv(rows, config.output)
    return rows


def write_csv(rows: Iterable[BenchRow], dest) -> None:
    """Write rows with a header to a path or an open text stream."""
    if hasattr(dest, "write"):
        _write_rows(rows, dest)
        return
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        _write_rows(rows, fh)


def _write_rows(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.as_csv())


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def summarize(rows: Sequence[BenchRow]) -> dict[str, dict[str, float]]:
    """Mean metric and wall time per backend, over rows with a metric."""
    out = {}
    for backend in dict.fromkeys(r.backend for r in rows):
        mine = [r for r in rows if r.backend == backend]
        metrics = [r.mean_node_metric for r in mine if r.mean_node_metric is not None]
        walls = [r.wall_time_ms for r in mine if r.wall_time_ms is not None]
        out[backend] = {
            "mean_metric": statistics.fmean(metrics) if metrics else math.nan,
            "mean_wall_time_ms": statistics.fmean(walls) if walls else math.nan,
            "rows": len(mine),
        }
    return out
