import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import path_graph, star, triangle
from dysparse.generators import random_connected_graph, random_tree
from dysparse.graph_store import DynamicGraph, GraphError, laplacian
from dysparse.spectral import all_pairs_resistance
from dysparse.walk_engine import (
    BUDGET_EXCEEDED,
    DEAD_END,
    REACHED_TARGET,
    STEP_CAP,
    IsolatedStart,
    Query,
    WalkConfig,
    loop_erase,
    min_path_search,
    nbrw_min_path,
    nbrw_reach,
    path_resistance,
    run_batch,
    single_walk,
    walker_seed,
)


def tree_path(g, p, q):
    """Unique p-q path in a tree by DFS."""
    stack = [(p, [p])]
    seen = {p}
    while stack:
        x, path = stack.pop()
        if x == q:
            return path
        for y, _ in g.neighbors(x):
            if y not in seen:
                seen.add(y)
                stack.append((y, path + [y]))
    return None


def test_walk_on_path_reaches_target():
    tr = single_walk(path_graph(3), 0, 2, 1.0, 10.0, 10, random.Random(0))
    assert tr.terminal == REACHED_TARGET
    assert tr.resistance == 2.0
    assert tr.path == [0, 1, 2]


def test_budget_checked_before_target():
    tr = single_walk(path_graph(3), 0, 2, 1.0, 1.5, 10, random.Random(0))
    assert tr.terminal == BUDGET_EXCEEDED
    assert tr.resistance == 2.0


def test_dead_end_on_star():
    g = star(3)
    # leaf 1 -> center -> leaf x; if x is not the target the only move back is forbidden
    for seed in range(20):
        tr = single_walk(g, 1, 3, 1.0, 100.0, 10, random.Random(seed))
        if tr.path[-1] == 2:
            assert tr.terminal == DEAD_END
            assert tr.steps == 2
            break
    else:
        pytest.fail("no walker took the dead-end branch")


def test_step_cap():
    g = DynamicGraph.from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0)])
    tr = single_walk(g, 0, 3, 1.0, 1e18, 1, random.Random(0))
    assert tr.terminal == STEP_CAP
    assert tr.steps == 1


def test_isolated_start_raises():
    g = DynamicGraph(3)
    g.insert_edge(1, 2, 1.0)
    with pytest.raises(IsolatedStart):
        nbrw_reach(g, 0, 2, 1.0, WalkConfig(), 0)


def test_invalid_queries():
    g = path_graph(3)
    with pytest.raises(GraphError):
        nbrw_reach(g, 1, 1, 1.0, WalkConfig(), 0)
    with pytest.raises(GraphError):
        nbrw_reach(g, 0, 7, 1.0, WalkConfig(), 0)
    with pytest.raises(ValueError):
        WalkConfig(K=-1.0)
    with pytest.raises(ValueError):
        WalkConfig(T=0)
    with pytest.raises(ValueError):
        WalkConfig(s=0)


def test_tree_estimate_is_exact(rng):
    g = random_tree(40, seed=2, wmin=0.5, wmax=4.0)
    R = all_pairs_resistance(laplacian(g))
    for _ in range(30):
        p, q = (int(x) for x in rng.choice(40, 2, replace=False))
        v = nbrw_reach(g, p, q, 1.0, WalkConfig(K=1e18, T=100, s=1), 0)
        if v.reached:
            assert abs(v.best_estimate - R[p, q]) < 1e-12


def test_triangle_indirect_route_upper_bounds():
    g = triangle()
    g.delete_edge(0, 1)
    v = nbrw_reach(g, 0, 1, 1.0, WalkConfig(K=1e18, s=8), 0)
    assert v.reached and v.best_estimate == 2.0
    assert v.best_estimate > 2.0 / 3.0


def test_estimates_upper_bound_oracle(rng):
    g = random_connected_graph(100, 150, seed=11)
    R = all_pairs_resistance(laplacian(g))
    cfg = WalkConfig(K=1e18, T=100, s=16)
    for k in range(200):
        p, q = (int(x) for x in rng.choice(100, 2, replace=False))
        v = nbrw_reach(g, p, q, 1.0, cfg, k)
        if v.reached:
            assert v.best_estimate >= R[p, q] - 1e-9


def test_steps_bounded_by_s_times_T():
    g = random_connected_graph(200, 400, seed=4)
    cfg = WalkConfig(K=1e18, T=50, s=16)
    for k in range(50):
        assert nbrw_reach(g, 0, 199 - k, 1.0, cfg, k).steps_used <= cfg.s * cfg.T


def test_budget_monotone_in_K():
    g = random_connected_graph(60, 90, seed=8)
    reached_small = [nbrw_reach(g, 0, q, 1.0, WalkConfig(K=2.0), q).reached for q in range(1, 60)]
    reached_big = [nbrw_reach(g, 0, q, 1.0, WalkConfig(K=20.0), q).reached for q in range(1, 60)]
    assert all(b or not a for a, b in zip(reached_small, reached_big))


def test_walker_seed_mixes_all_inputs():
    seeds = {walker_seed(a, b, c) for a in range(3) for b in range(3) for c in range(3)}
    assert len(seeds) == 27


def test_loop_erase_example():
    assert loop_erase([0, 1, 2, 3, 1, 4]) == [0, 1, 4]
    assert loop_erase([0, 1, 2]) == [0, 1, 2]
    assert loop_erase([0, 1, 2, 0, 3, 4, 3, 5]) == [0, 3, 5]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=40))
def test_loop_erase_is_simple_and_keeps_endpoints(walk):
    out = loop_erase(walk)
    assert len(set(out)) == len(out)
    assert out[0] == walk[0] and out[-1] == walk[-1]


def test_min_path_on_tree_is_the_tree_path():
    g = random_tree(30, seed=9)
    for q in (5, 17, 29):
        rp = nbrw_min_path(g, 0, q, WalkConfig(K=math.inf, T=100, s=16), q)
        if rp is not None:
            assert rp.path == tree_path(g, 0, q)
            assert rp.resistance == pytest.approx(path_resistance(g, rp.path))


def test_min_path_none_when_unreachable():
    g = DynamicGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    assert nbrw_min_path(g, 0, 3, WalkConfig(), 0) is None


def test_min_path_is_loop_free_and_valid():
    g = random_connected_graph(50, 100, seed=13)
    for q in range(1, 20):
        v = min_path_search(g, 0, q, WalkConfig(K=math.inf), q)
        if v.reached:
            path = v.path.path
            assert path[0] == 0 and path[-1] == q
            assert len(set(path)) == len(path)
            assert all(g.has_edge(a, b) for a, b in zip(path, path[1:]))


def test_batch_of_one_matches_direct_call():
    g = random_connected_graph(40, 60, seed=2)
    cfg = WalkConfig()
    assert run_batch(g, [Query("reach", 0, 9, 3, 1.5)], cfg) == [nbrw_reach(g, 0, 9, 1.5, cfg, 3)]


def test_batch_identical_across_worker_counts():
    g = random_connected_graph(300, 600, seed=21)
    cfg = WalkConfig(K=30.0)
    qs = [Query("reach" if k % 2 else "min_path", k % 300, (7 * k + 1) % 300, k)
          for k in range(120) if k % 300 != (7 * k + 1) % 300]
    assert run_batch(g, qs, cfg, workers=1) == run_batch(g, qs, cfg, workers=4)


def test_batch_reports_isolated_start_in_place():
    g = DynamicGraph.from_edges(4, [(1, 2, 1.0), (2, 3, 1.0)])
    out = run_batch(g, [Query("reach", 1, 3, 0), Query("reach", 0, 3, 1)], WalkConfig())
    assert out[0].reached
    assert isinstance(out[1], IsolatedStart)
