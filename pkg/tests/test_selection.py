from dataclasses import replace

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from detplace.errors import ConfigError, InstanceTooLarge
from detplace.model import (
    DeploymentPlan,
    Layer,
    LayerKind,
    Method,
    NodeAssignment,
    SolverConfig,
    Topology,
    validate_plan,
)
from detplace.selection import (
    BRUTE_FORCE_MAX,
    SelectionProblem,
    solve,
    solve_aco,
    solve_brute_force,
    solve_local_search,
    solve_tabu,
)

from conftest import LS, det, exhaustive_best, node, random_problem

ALL = list(Method)


def cfg(method, **kw):
    return SolverConfig(method=method, **kw)


@pytest.fixture
def textbook():
    cands = (
        det("d1", 0.6, 2, cpu=20),
        det("d2", 0.98, 5),
        det("d3", 0.7, 2, cpu=20),
    )
    return SelectionProblem(cands, node(cpu=50, t_max=4), LS)


def one_node_valid(problem, result):
    plan = DeploymentPlan.from_assignments(
        {problem.node.id: NodeAssignment(tuple(sorted(result.selected)), result.schedule, result.objective)}
    )
    layer = Layer("L", LayerKind.LEAF, (problem.node,), (), frozenset())
    return validate_plan(plan, Topology({"L": layer}, "L"), problem.candidates)


@pytest.mark.parametrize("method", ALL)
def test_empty_candidates(method):
    r = solve(SelectionProblem((), node(), LS), cfg(method))
    assert r.selected == frozenset() and r.objective == 0
    assert r.schedule.makespan == 0


@pytest.mark.parametrize("method", ALL)
def test_textbook_instance(method, textbook):
    r = solve(textbook, cfg(method))
    assert r.selected == {"d1", "d3"}
    assert r.objective == pytest.approx(1.3)
    assert r.schedule.makespan == 2
    assert one_node_valid(textbook, r) == []


@pytest.mark.parametrize("method", ALL)
def test_unconstrained_takes_everything(method):
    cands = tuple(det(f"d{i}", 0.1 * (i + 1), 1, cpu=5, ram=5) for i in range(6))
    r = solve(SelectionProblem(cands, node(), LS), cfg(method))
    assert r.selected == {d.id for d in cands}
    assert r.objective == pytest.approx(sum(d.score for d in cands))


@pytest.mark.parametrize("method", ALL)
def test_single_fitting_candidate(method):
    r = solve(SelectionProblem((det("x", 0.42),), node(), LS), cfg(method))
    assert r.selected == {"x"} and r.objective == pytest.approx(0.42)


@pytest.mark.parametrize("method", ALL)
def test_starved_node_reports_no_fit(method):
    r = solve(SelectionProblem((det("x"),), node(t_max=5, delay=9), LS), cfg(method))
    assert r.selected == frozenset() and r.objective == 0 and r.fits is False


def test_backend_checks_method(textbook):
    with pytest.raises(ConfigError):
        solve_tabu(textbook, cfg(Method.LOCAL_SEARCH))
    with pytest.raises(ConfigError):
        solve_aco(textbook, cfg(Method.TABU_SEARCH))
    with pytest.raises(ConfigError):
        solve_brute_force(textbook, cfg(Method.ANT_COLONY))


def test_scheduler_config_forced_to_local_search():
    p = SelectionProblem((), node(), SolverConfig(method=Method.TABU_SEARCH))
    assert p.scheduler_config.method is Method.LOCAL_SEARCH


def test_deceptive_instance(deceptive):
    best, ids = exhaustive_best(deceptive)
    assert ids == ("m1", "m2") and best == pytest.approx(1.2)
    ls = solve_local_search(deceptive, cfg(Method.LOCAL_SEARCH))
    ts = solve_tabu(deceptive, cfg(Method.TABU_SEARCH))
    assert ls.selected == {"h"} and ls.objective < best
    assert ts.objective == pytest.approx(best)
    assert solve_brute_force(deceptive).selected == {"m1", "m2"}


def test_brute_force_guard_counts_usable_candidates():
    many = tuple(det(f"d{i:02d}", 0.5, 1, cpu=1, ram=1) for i in range(BRUTE_FORCE_MAX + 1))
    with pytest.raises(InstanceTooLarge):
        solve_brute_force(SelectionProblem(many, node(), LS))
    # oversize detectors do not count toward the guard
    padded = many[:BRUTE_FORCE_MAX] + tuple(det(f"z{i}", cpu=90) for i in range(5))
    r = solve_brute_force(SelectionProblem(padded, node(cpu=50), LS))
    assert len(r.selected) == BRUTE_FORCE_MAX


def test_aco_is_bounded_by_oracle():
    for seed in range(20):
        p = random_problem(seed, n=10)
        opt = solve_brute_force(p).objective
        for s in range(3):
            assert solve_aco(p, cfg(Method.ANT_COLONY, seed=s)).objective <= opt + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_brute_force_matches_enumeration(seed):
    p = random_problem(seed, max_n=9)
    best, ids = exhaustive_best(p)
    r = solve_brute_force(p)
    assert r.objective == best
    assert tuple(sorted(r.selected)) == ids


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.integers(0, 2**32))
def test_every_backend_feasible_and_below_oracle(seed, rng_seed):
    p = random_problem(seed, max_n=10)
    opt = solve_brute_force(p).objective
    for method in ALL:
        r = solve(p, cfg(method, seed=rng_seed))
        assert one_node_valid(p, r) == []
        assert r.objective <= opt + 1e-9
        assert sorted(r.schedule.detector_ids) == sorted(r.selected)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_tabu_never_below_local_search(seed):
    p = random_problem(seed, max_n=10)
    assert solve_tabu(p, cfg(Method.TABU_SEARCH)).objective >= solve_local_search(p, cfg(Method.LOCAL_SEARCH)).objective - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(0, 11))
def test_brute_force_monotone_in_candidates(seed, drop):
    p = random_problem(seed, n=10)
    smaller = replace(p, candidates=p.candidates[:drop] + p.candidates[drop + 1:])
    assert solve_brute_force(p).objective >= solve_brute_force(smaller).objective


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([0.5, 0.25, 0.1, 0.37, 0.9]))
def test_brute_force_scale_invariant(seed, c):
    p = random_problem(seed, max_n=10)
    scaled = replace(p, candidates=tuple(replace(d, score=d.score * c) for d in p.candidates))
    a, b = solve_brute_force(p), solve_brute_force(scaled)
    assert a.selected == b.selected
    assert b.objective == pytest.approx(a.objective * c)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 100_000), st.sampled_from(ALL), st.integers(0, 1000))
def test_deterministic_per_seed(seed, method, rng_seed):
    p = random_problem(seed, max_n=10)
    c = cfg(method, seed=rng_seed)
    a, b = solve(p, c), solve(p, c)
    assert (a.selected, a.objective, a.schedule) == (b.selected, b.objective, b.schedule)


def test_result_carries_problem_key(textbook):
    r = solve_tabu(textbook, cfg(Method.TABU_SEARCH))
    assert r.problem_key == textbook.key()
    assert r.method is Method.TABU_SEARCH
    assert r.evaluations >= 1 and r.wall_time >= 0
