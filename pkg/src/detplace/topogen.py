"""Random layered architectures and detector pools.

A layer at depth ``x`` is a standard (aggregating) layer with probability
``exp(-alpha * x)`` while ``x <= x_max`` and a leaf beyond that, so the
tree thins out with depth and can never grow past ``x_max + 1`` levels.  The
root (depth 0) is therefore always a standard layer.

Hardware budgets and detector profiles are drawn uniformly from the ranges
in :class:`Ranges`.  Times are configured in seconds and emitted in
milliseconds.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from detplace.errors import ConfigError
from detplace.model import DetectorProfile, Layer, LayerKind, NodeSpec, Topology


@dataclass(frozen=True)
class Ranges:
    children: tuple[int, int] = (1, 3)
    nodes: tuple[int, int] = (1, 4)
    hardware: tuple[str, ...] = ("Raspberry Pi 4", "Orange pi", "Banana pi")
    cpu_max: tuple[float, float] = (1.0, 100.0)
    ram_max_mb: tuple[float, float] = (512.0, 8191.0)
    t_max_s: tuple[float, float] = (10.0, 21.0)
    score: tuple[float, float] = (0.1, 1.0)
    det_cpu: tuple[float, float] = (1.0, 31.0)
    det_ram_mb: tuple[float, float] = (64.0, 4096.0)
    det_time_s: tuple[float, float] = (1.0, 10.0)

    def check(self):
        for name in ("children", "nodes", "cpu_max", "ram_max_mb", "t_max_s", "score", "det_cpu", "det_ram_mb", "det_time_s"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"range {name}: low {lo} > high {hi}")
        if self.children[0] < 1 or self.nodes[0] < 1:
            raise ConfigError("children and nodes ranges must start at 1 or more")
        if not self.hardware:
            raise ConfigError("hardware tag set is empty")


@dataclass(frozen=True)
class GeneratorConfig:
    alpha: float = 0.2
    x_max: int = 30
    seed: int = 0
    n_data_types: int = 6
    ranges: Ranges = field(default_factory=Ranges)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.x_max < 0 or self.n_data_types < 1:
            raise ConfigError("x_max must be >= 0 and n_data_types >= 1")
        self.ranges.check()

    @property
    def data_types(self) -> list[str]:
        return [f"t{i}" for i in range(self.n_data_types)]


def standard_probability(depth: int, config: GeneratorConfig = GeneratorConfig()) -> float:
    """Chance that a layer at ``depth`` aggregates children."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if depth > config.x_max:
        return 0.0
    return math.exp(-config.alpha * depth)


def _node(rng: random.Random, r: Ranges, node_id: str) -> NodeSpec:
    return NodeSpec(
        id=node_id,
        cpu_max=rng.uniform(*r.cpu_max),
        ram_max=rng.uniform(*r.ram_max_mb),
        t_max=rng.uniform(*r.t_max_s) * 1000.0,
    )


def generate_topology(config: GeneratorConfig = GeneratorConfig()) -> Topology:
    rng = random.Random(config.seed)
    r = config.ranges
    tags = config.data_types
    layers: dict[str, Layer] = {}
    counter = {"layer": 0, "node": 0}

    def next_id(kind):
        n = counter[kind]
        counter[kind] += 1
        return f"L{n}" if kind == "layer" else f"n{n}"

    def build(depth: int) -> str:
        lid = next_id("layer")
        standard = rng.random() < standard_probability(depth, config)
        hardware = rng.choice(r.hardware)
        n_nodes = rng.randint(*r.nodes)
        if standard:
            nodes = tuple(_node(rng, r, next_id("node")) for _ in range(n_nodes))
            children = tuple(build(depth + 1) for _ in range(rng.randint(*r.children)))
            layers[lid] = Layer(lid, LayerKind.STANDARD, nodes, children, frozenset(), hardware)
        else:
            # leaf hardware is homogeneous: one draw copied to every node
            proto = _node(rng, r, "")
            nodes = tuple(
                NodeSpec(next_id("node"), proto.cpu_max, proto.ram_max, proto.t_max) for _ in range(n_nodes)
            )
            types = frozenset(rng.sample(tags, rng.randint(1, len(tags))))
            layers[lid] = Layer(lid, LayerKind.LEAF, nodes, (), types, hardware)
        return lid

    root = build(0)
    return Topology(layers, root)


def generate_pool(n: int, config: GeneratorConfig = GeneratorConfig()) -> list[DetectorProfile]:
    if n < 0:
        raise ValueError("pool size must be non-negative")
    rng = random.Random(f"pool-{config.seed}")
    r = config.ranges
    tags = config.data_types
    return [
        DetectorProfile(
            id=f"d{i}",
            data_type=rng.choice(tags),
            score=rng.uniform(*r.score),
            exec_time=rng.uniform(*r.det_time_s) * 1000.0,
            cpu_peak=rng.uniform(*r.det_cpu),
            ram_peak=rng.uniform(*r.det_ram_mb),
        )
        for i in range(n)
    ]
