"""Bundled five-node reconfiguration scenario.

Node budgets and detector profiles are the measured values of the UAV / UGV /
infrastructure-log testbed.  Wiring: ``Node 1`` (root) has children
``Node 2`` (UAV leaf) and ``Node 3``; ``Node 3`` has children ``Node 4`` (UGV
leaf) and ``Node 5`` (infrastructure-log leaf).
"""
from importlib import resources

from detplace.model import load_pool, load_topology


def _path(name):
    return resources.files("detplace") / "data" / name


def scenario_topology():
    with resources.as_file(_path("scenario_topology.json")) as p:
        return load_topology(p)


def scenario_pool():
    with resources.as_file(_path("scenario_pool.json")) as p:
        return load_pool(p)


def scenario_events():
    from detplace.simulate import load_scenario

    with resources.as_file(_path("scenario_events.json")) as p:
        return load_scenario(p)
