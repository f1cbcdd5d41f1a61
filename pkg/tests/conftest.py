"""Shared builders and independent oracles for the test suite."""
from __future__ import annotations

import itertools
import math
import random

import pytest

from detplace import fixtures
from detplace.model import (
    DetectorProfile,
    Layer,
    LayerKind,
    Method,
    NodeSpec,
    SolverConfig,
    Topology,
)
from detplace.scheduler import fits_alone, feasible_time
from detplace.selection import SelectionProblem


def det(id, score=0.5, exec_time=1.0, cpu=10.0, ram=10.0, data_type="a"):
    return DetectorProfile(id, data_type, score, exec_time, cpu, ram)


def node(id="n", cpu=100.0, ram=1000.0, t_max=100.0, delay=0.0):
    return NodeSpec(id, cpu, ram, t_max, delay)


def leaf(id, nodes, types=("a",)):
    return Layer(id, LayerKind.LEAF, tuple(nodes), (), frozenset(types))


def standard(id, nodes, children):
    return Layer(id, LayerKind.STANDARD, tuple(nodes), tuple(children))


def topo(*layers, root=None):
    return Topology({l.id: l for l in layers}, root or layers[0].id)


LS = SolverConfig(method=Method.LOCAL_SEARCH)


def random_problem(seed: int, n: int | None = None, max_n: int = 12) -> SelectionProblem:
    """A selection problem with a budget tight enough to make choices matter."""
    rng = random.Random(seed)
    n = rng.randint(0, max_n) if n is None else n
    cands = tuple(
        DetectorProfile(
            f"d{i:02d}",
            "a",
            round(rng.uniform(0.1, 1.0), 3),
            float(rng.randint(1, 10)),
            float(rng.randint(5, 60)),
            float(rng.randint(20, 600)),
        )
        for i in range(n)
    )
    nd = NodeSpec(
        "n",
        float(rng.randint(40, 100)),
        float(rng.randint(300, 1500)),
        float(rng.randint(6, 25)),
        float(rng.choice([0, 0, 0, 1, 2])),
    )
    return SelectionProblem(cands, nd, LS)


def exhaustive_best(problem: SelectionProblem) -> tuple[float, tuple[str, ...]]:
    """Enumerate all 2^n subsets with the same heuristic feasibility test."""
    cands = problem.candidates
    cfg = problem.scheduler_config
    best = (0.0, ())
    for r in range(1, len(cands) + 1):
        for combo in itertools.combinations(cands, r):
            if not all(fits_alone(d, problem.node) for d in combo):
                continue
            if not feasible_time(combo, problem.node, cfg)[1]:
                continue
            obj = math.fsum(d.score for d in combo)
            ids = tuple(d.id for d in combo)
            if obj > best[0] + 1e-9 or (abs(obj - best[0]) <= 1e-9 and ids < best[1]):
                best = (obj, ids)
    return best


def grid_makespan(durations, cpus, rams, cpu_cap, ram_cap) -> int:
    """Minimal makespan by trying every start vector on the integer grid."""
    horizon = sum(durations)
    best = horizon
    n = len(durations)
    for starts in itertools.product(range(horizon), repeat=n):
        span = max(s + d for s, d in zip(starts, durations))
        if span >= best:
            continue
        ok = True
        for t in range(span):
            run = [i for i in range(n) if starts[i] <= t < starts[i] + durations[i]]
            if sum(cpus[i] for i in run) > cpu_cap + 1e-9 or sum(rams[i] for i in run) > ram_cap + 1e-9:
                ok = False
                break
        if ok:
            best = span
    return best


@pytest.fixture
def scenario():
    return fixtures.scenario_topology(), fixtures.scenario_pool(), fixtures.scenario_events()


@pytest.fixture
def deceptive():
    """One high-score detector blocking two medium ones at a tight budget."""
    cands = (
        det("h", 0.9, 4, cpu=60),
        det("m1", 0.6, 4, cpu=40),
        det("m2", 0.6, 4, cpu=40),
        det("x1", 0.9, 5, cpu=10),
        det("x2", 0.8, 3, cpu=90),
        det("x3", 0.3, 4, cpu=45),
    )
    return SelectionProblem(cands, node(cpu=80, t_max=4), LS)


# --- acceptance reporting ----------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
