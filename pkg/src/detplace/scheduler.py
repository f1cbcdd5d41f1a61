"""Makespan of a detector set on one node under CPU and RAM caps.

Time is discretised into slots of ``time_resolution`` ms and execution times
are rounded up to whole slots, so a schedule that fits on the grid also fits
with the true durations.  Each detector holds its peak CPU and RAM for its
whole (non-preemptive) run.

:func:`schedule_heuristic` is the production path (list scheduling refined by
local search over priority lists, run in the compiled kernel when
available).  :func:`schedule_exact` enumerates every priority list and is used
as an oracle on small instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from detplace import kernels
from detplace.errors import ConfigError, DetectorTooLarge, InstanceTooLarge
from detplace.model import (
    EPS,
    DetectorProfile,
    Method,
    NodeSpec,
    Schedule,
    ScheduleEntry,
    SolverConfig,
    ValidationError,
)

EXACT_MAX_DETECTORS = 8


@dataclass(frozen=True)
class ScheduleInstance:
    detectors: tuple[DetectorProfile, ...]
    node: NodeSpec
    time_resolution: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(sorted(self.detectors, key=lambda d: d.id)))
        if not self.time_resolution > 0:
            raise ValidationError("time_resolution must be positive")
        ids = [d.id for d in self.detectors]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate detector in schedule instance")

    def oversize(self) -> list[str]:
        """Ids of detectors that break a cap even when running alone."""
        return [
            d.id
            for d in self.detectors
            if d.cpu_peak > self.node.cpu_max + EPS or d.ram_peak > self.node.ram_max + EPS
        ]

    def slots(self) -> list[int]:
        return [to_slots(d.exec_time, self.time_resolution) for d in self.detectors]


def to_slots(duration: float, resolution: float) -> int:
    # the epsilon keeps exact multiples (e.g. 3.0 / 1.0) from rounding up
    return max(1, math.ceil(duration / resolution - 1e-9))


def fits_alone(det: DetectorProfile, node: NodeSpec) -> bool:
    return det.cpu_peak <= node.cpu_max + EPS and det.ram_peak <= node.ram_max + EPS


def _check(instance: ScheduleInstance) -> None:
    bad = instance.oversize()
    if bad:
        raise DetectorTooLarge(bad, instance.node.id)


def _build(instance: ScheduleInstance, start_slots: Sequence[int]) -> Schedule:
    res = instance.time_resolution
    entries = sorted(
        (ScheduleEntry(d.id, s * res) for d, s in zip(instance.detectors, start_slots)),
        key=lambda e: (e.start, e.detector),
    )
    makespan = max((s * res + d.exec_time for d, s in zip(instance.detectors, start_slots)), default=0.0)
    return Schedule(tuple(entries), makespan)


def heuristic_slots(instance: ScheduleInstance, max_iterations: int) -> tuple[list[int], int]:
    """Start slots chosen by the kernel plus the number of list evaluations."""
    if not instance.detectors:
        return [], 0
    dets = instance.detectors
    starts, _, evals = kernels.ls_schedule(
        instance.slots(),
        [d.cpu_peak for d in dets],
        [d.ram_peak for d in dets],
        instance.node.cpu_max,
        instance.node.ram_max,
        max_iterations,
    )
    return starts, evals


def schedule_heuristic(instance: ScheduleInstance, config: SolverConfig | None = None) -> Schedule:
    """Near-minimal makespan schedule.

    List scheduling from detectors ordered by decreasing duration, improved
    by local search over adjacent swaps of the priority list for at most
    ``config.max_iterations`` moves.  Deterministic.
    """
    config = config or SolverConfig(method=Method.LOCAL_SEARCH)
    if config.method is not Method.LOCAL_SEARCH:
        raise ConfigError(f"scheduling runs with local search only, got {config.method.value!r}")
    _check(instance)
    starts, _ = heuristic_slots(instance, config.max_iterations)
    return _build(instance, starts)


def schedule_exact(instance: ScheduleInstance) -> Schedule:
    """Globally minimal makespan on the slot grid.

    Every active schedule is produced by placing jobs one at a time at their
    earliest feasible start for some job order, so a depth-first walk over all
    orders (with makespan pruning) finds the optimum.  Among optimal schedules
    the lexicographically smallest start vector (detectors in id order) wins.
    """
    n = len(instance.detectors)
    if n > EXACT_MAX_DETECTORS:
        raise InstanceTooLarge(f"exact scheduling is limited to {EXACT_MAX_DETECTORS} detectors, got {n}")
    _check(instance)
    if n == 0:
        return Schedule()
    dur = instance.slots()
    cpu = [d.cpu_peak for d in instance.detectors]
    ram = [d.ram_peak for d in instance.detectors]
    cap_c, cap_r = instance.node.cpu_max + EPS, instance.node.ram_max + EPS

    best = [sum(dur) + 1, None]
    starts = [-1] * n
    placed: list[int] = []

    def load_at(t):
        c = r = 0.0
        for i in placed:
            if starts[i] <= t < starts[i] + dur[i]:
                c += cpu[i]
                r += ram[i]
        return c, r

    def earliest(j):
        cands = sorted({0, *(starts[i] + dur[i] for i in placed)})
        for s in cands:
            e = s + dur[j]
            points = [s] + [starts[i] for i in placed if s < starts[i] < e]
            if all(
                c + cpu[j] <= cap_c and r + ram[j] <= cap_r
                for c, r in map(load_at, points)
            ):
                return s
        raise AssertionError("unreachable: sequential placement always fits")

    def walk(makespan):
        if makespan > best[0]:
            return
        if len(placed) == n:
            vec = tuple(starts)
            if makespan < best[0] or vec < best[1]:
                best[0], best[1] = makespan, vec
            return
        for j in range(n):
            if starts[j] >= 0:
                continue
            starts[j] = earliest(j)
            placed.append(j)
            walk(max(makespan, starts[j] + dur[j]))
            placed.pop()
            starts[j] = -1

    walk(0)
    return _build(instance, best[1])


def feasible_time(
    detectors: Sequence[DetectorProfile],
    node: NodeSpec,
    config: SolverConfig | None = None,
) -> tuple[float, bool]:
    """Heuristic makespan of ``detectors`` on ``node`` and whether it meets
    the node's end-to-end budget once the ingest delay is added."""
    config = config or SolverConfig(method=Method.LOCAL_SEARCH)
    if config.method is not Method.LOCAL_SEARCH:
        config = config.with_method(Method.LOCAL_SEARCH)
    instance = ScheduleInstance(tuple(detectors), node, config.time_resolution_ms)
    schedule = schedule_heuristic(instance, config)
    return schedule.makespan, schedule.makespan + node.ingest_delay <= node.t_max + EPS
