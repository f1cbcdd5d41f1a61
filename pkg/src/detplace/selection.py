"""Single-node detector selection.

Choose the subset of candidate detectors with the largest total score whose
heuristic makespan plus the node's ingest delay stays within ``t_max``.  The
problem is a knapsack whose capacity test is itself a scheduling problem, so
every backend goes through :class:`_Evaluator`, which memoises makespans per
subset (subsets are bitmasks over candidates sorted by id).

Backends: local search, tabu search, ant colony and an exact breadth-first
enumeration used as the benchmark oracle.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable

from detplace.errors import ConfigError, InstanceTooLarge
from detplace.model import (
    EPS,
    DetectorProfile,
    Method,
    NodeSpec,
    Schedule,
    SolverConfig,
    ValidationError,
)
from detplace.scheduler import ScheduleInstance, _build, fits_alone, heuristic_slots

BRUTE_FORCE_MAX = 24
# objectives closer than this are treated as ties
TIE = 1e-9


@dataclass(frozen=True)
class SelectionProblem:
    candidates: tuple[DetectorProfile, ...]
    node: NodeSpec
    scheduler_config: SolverConfig = field(default_factory=lambda: SolverConfig(method=Method.LOCAL_SEARCH))

    def __post_init__(self):
        cands = tuple(sorted(self.candidates, key=lambda d: d.id))
        ids = [d.id for d in cands]
        if len(set(ids)) != len(ids):
            raise ValidationError("candidate ids must be unique")
        object.__setattr__(self, "candidates", cands)
        cfg = self.scheduler_config
        if cfg.method is not Method.LOCAL_SEARCH:
            object.__setattr__(self, "scheduler_config", cfg.with_method(Method.LOCAL_SEARCH))

    def key(self):
        """Hashable identity used to share oracle runs between callers."""
        cfg = self.scheduler_config
        return (
            self.node.budget_signature(),
            tuple(self.candidates),
            cfg.max_iterations,
            cfg.time_resolution_ms,
        )


@dataclass(frozen=True)
class SelectionResult:
    selected: frozenset[str]
    objective: float
    schedule: Schedule
    evaluations: int
    wall_time: float  # milliseconds
    # False only when the node cannot host anything (ingest delay > t_max)
    fits: bool = True
    method: Method | None = None
    problem_key: tuple | None = field(default=None, repr=False, compare=False)


class _Evaluator:
    """Feasibility oracle f(S) + t <= T_max with a per-problem memo."""

    def __init__(self, problem: SelectionProblem):
        self.problem = problem
        self.node = problem.node
        self.cands = problem.candidates
        self.cfg = problem.scheduler_config
        self.res = self.cfg.time_resolution_ms
        self.budget = self.node.t_max - self.node.ingest_delay
        # detectors that could be part of some feasible selection
        self.usable = [
            i
            for i, d in enumerate(self.cands)
            if fits_alone(d, self.node) and d.exec_time <= self.budget + EPS
        ]
        self.cpu_energy = [d.cpu_peak * d.exec_time for d in self.cands]
        self.ram_energy = [d.ram_peak * d.exec_time for d in self.cands]
        self.cpu_cap = self.node.cpu_max * max(self.budget, 0.0) + EPS
        self.ram_cap = self.node.ram_max * max(self.budget, 0.0) + EPS
        self.cache: dict[int, tuple[bool, list[int]]] = {0: (True, [])}
        self.evaluations = 0

    @property
    def hopeless(self) -> bool:
        return self.budget < -EPS

    def members(self, mask: int) -> list[int]:
        return [i for i in range(len(self.cands)) if mask >> i & 1]

    def objective(self, mask: int) -> float:
        return math.fsum(self.cands[i].score for i in self.members(mask))

    def ids(self, mask: int) -> tuple[str, ...]:
        return tuple(self.cands[i].id for i in self.members(mask))

    def energy_ok(self, mask: int) -> bool:
        """Work-conservation bound; failing it rules out every superset."""
        idx = self.members(mask)
        return (
            math.fsum(self.cpu_energy[i] for i in idx) <= self.cpu_cap
            and math.fsum(self.ram_energy[i] for i in idx) <= self.ram_cap
        )

    def feasible(self, mask: int) -> bool:
        hit = self.cache.get(mask)
        if hit is not None:
            return hit[0]
        if self.hopeless or not self.energy_ok(mask):
            self.cache[mask] = (False, [])
            return False
        idx = self.members(mask)
        if any(not fits_alone(self.cands[i], self.node) for i in idx):
            self.cache[mask] = (False, [])
            return False
        inst = ScheduleInstance(tuple(self.cands[i] for i in idx), self.node, self.res)
        starts, _ = heuristic_slots(inst, self.cfg.max_iterations)
        self.evaluations += 1
        makespan = max(s * self.res + self.cands[i].exec_time for i, s in zip(idx, starts))
        ok = makespan + self.node.ingest_delay <= self.node.t_max + EPS
        self.cache[mask] = (ok, starts)
        return ok

    def result(self, mask: int, started: float, method: Method) -> SelectionResult:
        if not self.feasible(mask):
            raise AssertionError("backend returned an infeasible selection")
        idx = self.members(mask)
        inst = ScheduleInstance(tuple(self.cands[i] for i in idx), self.node, self.res)
        schedule = _build(inst, self.cache[mask][1])
        return SelectionResult(
            selected=frozenset(self.ids(mask)),
            objective=self.objective(mask),
            schedule=schedule,
            evaluations=self.evaluations,
            wall_time=(time.perf_counter() - started) * 1000.0,
            fits=not self.hopeless,
            method=method,
            problem_key=self.problem.key(),
        )


def _require(config: SolverConfig, method: Method) -> None:
    if config.method is not method:
        raise ConfigError(f"expected method {method.value!r}, got {config.method.value!r}")


def _best_flip(ev: _Evaluator, mask: int, allowed: Callable[[int, float], bool]):
    """Best feasible single-bit flip of ``mask`` passing ``allowed``.

    Ties go to the lowest candidate index, i.e. the smallest detector id.
    """
    best = None
    best_obj = -math.inf
    for i in ev.usable:
        nxt = mask ^ (1 << i)
        if not ev.feasible(nxt):
            continue
        obj = ev.objective(nxt)
        if obj > best_obj + TIE and allowed(i, obj):
            best, best_obj = i, obj
    return best, best_obj


def _greedy(ev: _Evaluator, max_moves: int | None = None) -> int:
    mask, obj = 0, 0.0
    moves = 0
    while max_moves is None or moves < max_moves:
        i, new_obj = _best_flip(ev, mask, lambda i, o: True)
        if i is None or new_obj <= obj + TIE:
            break
        mask, obj = mask ^ (1 << i), new_obj
        moves += 1
    return mask


def solve_local_search(problem: SelectionProblem, config: SolverConfig) -> SelectionResult:
    """Steepest-ascent bit-flip search from the empty selection."""
    _require(config, Method.LOCAL_SEARCH)
    started = time.perf_counter()
    ev = _Evaluator(problem)
    mask = 0 if ev.hopeless else _greedy(ev, config.max_iterations)
    return ev.result(mask, started, Method.LOCAL_SEARCH)


def solve_tabu(problem: SelectionProblem, config: SolverConfig) -> SelectionResult:
    """Tabu search over single-bit flips.

    Always moves to the best admissible neighbour, improving or not.  A
    flipped detector stays tabu for ``tabu_tenure`` iterations unless the
    move would beat the best selection seen so far; when every move is tabu
    the best of them is taken anyway.  Stops after
    ``max_iterations`` moves or once ``patience`` consecutive moves failed to
    improve the best.
    """
    _require(config, Method.TABU_SEARCH)
    started = time.perf_counter()
    ev = _Evaluator(problem)
    cur = best = 0
    best_obj = 0.0
    tabu_until: dict[int, int] = {}
    stall = 0
    if not ev.hopeless:
        for it in range(config.max_iterations):

            def admissible(i, obj, it=it):
                return tabu_until.get(i, -1) < it or obj > best_obj + TIE

            i, obj = _best_flip(ev, cur, admissible)
            if i is None:
                # aspiration by default: every feasible move is tabu
                i, obj = _best_flip(ev, cur, lambda i, o: True)
            if i is None:
                break
            cur ^= 1 << i
            tabu_until[i] = it + config.tabu_tenure
            if obj > best_obj + TIE:
                best, best_obj, stall = cur, obj, 0
            else:
                stall += 1
                if stall > config.patience:
                    break
    return ev.result(best, started, Method.TABU_SEARCH)


def solve_aco(problem: SelectionProblem, config: SolverConfig) -> SelectionResult:
    """Ant colony search for the 0-1 selection.

    Each ant includes detector ``i`` with probability ``w / (w + 1)`` where
    ``w = tau_i**alpha * eta_i**beta`` and ``eta`` is score per millisecond.
    Infeasible selections are repaired by dropping the lowest-``eta``
    members, then completed greedily in decreasing ``eta`` order.
    Pheromone evaporates by ``evaporation`` each iteration and the
    iteration-best ant deposits its objective on its members.
    """
    _require(config, Method.ANT_COLONY)
    started = time.perf_counter()
    ev = _Evaluator(problem)
    params = config.aco
    rng = random.Random(config.seed)
    usable = ev.usable
    eta = {i: ev.cands[i].score / ev.cands[i].exec_time for i in usable}
    # drop order for repair / add order for completion; ties by id
    by_eta = sorted(usable, key=lambda i: (-eta[i], i))
    tau = {i: 1.0 for i in usable}

    best, best_obj = 0, 0.0
    stall = 0
    if not ev.hopeless and usable:
        for _ in range(config.max_iterations):
            it_best, it_obj = None, -math.inf
            for _ant in range(params.ants):
                mask = 0
                for i in usable:
                    w = tau[i] ** params.alpha * eta[i] ** params.beta
                    if rng.random() < w / (w + 1.0):
                        mask |= 1 << i
                for i in reversed(by_eta):
                    if ev.feasible(mask):
                        break
                    mask &= ~(1 << i)
                for i in by_eta:
                    if not mask >> i & 1 and ev.feasible(mask | 1 << i):
                        mask |= 1 << i
                obj = ev.objective(mask)
                if obj > it_obj + TIE:
                    it_best, it_obj = mask, obj
            for i in usable:
                tau[i] *= 1.0 - params.evaporation
                if it_best >> i & 1:
                    tau[i] += it_obj
            if it_obj > best_obj + TIE:
                best, best_obj, stall = it_best, it_obj, 0
            else:
                stall += 1
                if stall > config.patience:
                    break
    return ev.result(best, started, Method.ANT_COLONY)


def _fractional_bound(order, weight, cap, score, start_pos, pos_of):
    """LP-relaxation bound on the score obtainable from candidates whose
    position exceeds ``start_pos`` within residual capacity ``cap``."""
    total = 0.0
    for i in order:
        if pos_of[i] <= start_pos:
            continue
        w = weight[i]
        if w <= cap:
            total += score[i]
            cap -= w
        else:
            total += score[i] * cap / w
            break
    return total


def solve_brute_force(problem: SelectionProblem, config: SolverConfig | None = None) -> SelectionResult:
    """Exact optimum relative to the heuristic makespan.

    Breadth-first over subsets in canonical order (each level adds one
    detector with a larger index).  A branch is cut when its work content
    cannot fit the time budget (no superset can fit either) or when an LP
    bound on its best completion falls below the incumbent.  Both cuts are
    sound for the heuristic scheduler, so the result equals exhaustive
    enumeration.  Ties go to the lexicographically smallest id set.
    """
    if config is not None:
        _require(config, Method.BRUTE_FORCE)
    started = time.perf_counter()
    ev = _Evaluator(problem)
    usable = ev.usable
    if len(usable) > BRUTE_FORCE_MAX:
        raise InstanceTooLarge(
            f"brute force is limited to {BRUTE_FORCE_MAX} usable candidates, got {len(usable)}"
        )
    if ev.hopeless or not usable:
        return ev.result(0, started, Method.BRUTE_FORCE)

    score = [d.score for d in ev.cands]
    pos_of = {i: p for p, i in enumerate(usable)}

    def density_order(weight):
        return sorted(usable, key=lambda i: (-(score[i] / weight[i]) if weight[i] > 0 else -math.inf, i))

    cpu_order = density_order(ev.cpu_energy)
    ram_order = density_order(ev.ram_energy)

    # greedy incumbent: only tightens the bound, the search still visits
    # every selection that could tie or beat it
    best_mask = _greedy(ev)
    best_obj, best_ids = ev.objective(best_mask), ev.ids(best_mask)
    # state: (mask, position of last added usable candidate, cpu work, ram work, objective)
    frontier = [(0, -1, 0.0, 0.0, 0.0)]
    while frontier:
        nxt = []
        for mask, last, cw, rw, obj in frontier:
            for p in range(last + 1, len(usable)):
                i = usable[p]
                ncw = cw + ev.cpu_energy[i]
                nrw = rw + ev.ram_energy[i]
                if ncw > ev.cpu_cap or nrw > ev.ram_cap:
                    continue
                nobj = obj + score[i]
                bound = nobj + min(
                    _fractional_bound(cpu_order, ev.cpu_energy, ev.cpu_cap - ncw, score, p, pos_of),
                    _fractional_bound(ram_order, ev.ram_energy, ev.ram_cap - nrw, score, p, pos_of),
                )
                if bound < best_obj - TIE:
                    continue
                nmask = mask | 1 << i
                nxt.append((nmask, p, ncw, nrw, nobj))
                if nobj < best_obj - TIE or not ev.feasible(nmask):
                    continue
                exact_obj = ev.objective(nmask)
                ids = ev.ids(nmask)
                if exact_obj > best_obj + TIE:
                    best_mask, best_obj, best_ids = nmask, exact_obj, ids
                elif exact_obj >= best_obj - TIE and ids < best_ids:
                    best_mask, best_obj, best_ids = nmask, max(best_obj, exact_obj), ids
        frontier = nxt
    return ev.result(best_mask, started, Method.BRUTE_FORCE)


SOLVERS = {
    Method.LOCAL_SEARCH: solve_local_search,
    Method.TABU_SEARCH: solve_tabu,
    Method.ANT_COLONY: solve_aco,
    Method.BRUTE_FORCE: solve_brute_force,
}


def solve(problem: SelectionProblem, config: SolverConfig) -> SelectionResult:
    """Run the backend named by ``config.method``."""
    return SOLVERS[config.method](problem, config)
