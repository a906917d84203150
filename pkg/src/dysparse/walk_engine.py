"""Seeded non-backtracking random walks for local resistance estimates.

A walker leaves ``p`` and at every step moves to a neighbor other than the
vertex it just came from, chosen with probability proportional to edge
weight.  It accumulates the resistance ``1/w`` of every traversed edge and
stops on the first of:

* ``w_pq * resistance > K``  (budget_exceeded, checked right after each edge)
* the current vertex is ``q`` (reached_target)
* ``T`` steps taken (step_cap)
* no neighbor other than the previous vertex (dead_end)

The budget test runs before the target test, so a walker whose final edge
overflows the budget does not count as reaching ``q``.

Every walker draws from its own ``random.Random`` seeded by a splitmix64 hash
of ``(global_seed, update_id, walker_index)``, which makes verdicts a pure
function of the graph, the query and the config no matter how walkers are
scheduled.  The sampler inverts the cumulative weight over the adjacency array
in storage order, so reproducibility holds for a fixed graph construction
history (swap-remove deletions permute those arrays).
"""

from __future__ import annotations

import math
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .graph_store import DynamicGraph, GraphError

REACHED_TARGET = "reached_target"
BUDGET_EXCEEDED = "budget_exceeded"
STEP_CAP = "step_cap"
DEAD_END = "dead_end"

_MASK64 = (1 << 64) - 1


class IsolatedStart(GraphError):
    """The walk start vertex has no neighbors."""


@dataclass(frozen=True)
class WalkConfig:
    """Walker parameters.

    ``K`` is the distortion budget, ``T`` the per-walker step cap, ``s`` the
    number of walkers per query.
    """

    K: float = 10.0
    T: int = 100
    s: int = 16
    seed: int = 0

    def __post_init__(self):
        if not self.K >= 0 or math.isnan(self.K):
            raise ValueError(f"K must be nonnegative, got {self.K}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")


@dataclass
class WalkTrace:
    path: list[int]
    resistance: float
    terminal: str

    @property
    def steps(self) -> int:
        return len(self.path) - 1


@dataclass
class ReachVerdict:
    reached: bool
    best_estimate: float | None
    steps_used: int


@dataclass
class RecoveredPath:
    """Loop-erased minimum-resistance walk from p to q."""

    path: list[int]
    resistance: float
    steps_used: int = 0

    def edges(self):
        return list(zip(self.path[:-1], self.path[1:]))


@dataclass(frozen=True)
class Query:
    """One batched request.  ``kind`` is ``"reach"`` or ``"min_path"``."""

    kind: str
    p: int
    q: int
    update_id: int
    w_pq: float = 1.0
    cfg: WalkConfig | None = field(default=None, compare=False)


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def walker_seed(global_seed: int, update_id: int, walker_index: int) -> int:
    h = splitmix64(global_seed & _MASK64)
    h = splitmix64(h ^ (update_id & _MASK64))
    return splitmix64(h ^ (walker_index & _MASK64))


def walker_rng(cfg: WalkConfig, update_id: int, walker_index: int) -> random.Random:
    return random.Random(walker_seed(cfg.seed, update_id, walker_index))


def single_walk(g: DynamicGraph, p: int, q: int, w_pq: float, K: float, T: int,
                rng: random.Random) -> WalkTrace:
    if p == q:
        raise GraphError("walk endpoints must differ")
    nbrs, wts = g._nbr, g._wt
    if not nbrs[p]:
        raise IsolatedStart(f"vertex {p} has no neighbors")
    rand = rng.random
    path = [p]
    acc = 0.0
    prev = -1
    cur = p
    for _ in range(T):
        nb = nbrs[cur]
        wt = wts[cur]
        d = len(nb)
        # choose among neighbors except prev, weight-proportional
        if prev < 0:
            total = sum(wt)
            skip = -1
        else:
            skip = g._pos[cur][prev]
            if d == 1:
                return WalkTrace(path, acc, DEAD_END)
            total = sum(wt) - wt[skip]
        r = rand() * total
        nxt = -1
        for i in range(d):
            if i == skip:
                continue
            nxt = i
            r -= wt[i]
            if r < 0.0:
                break
        v = nb[nxt]
        acc += 1.0 / wt[nxt]
        path.append(v)
        prev, cur = cur, v
        if w_pq * acc > K:
            return WalkTrace(path, acc, BUDGET_EXCEEDED)
        if cur == q:
            return WalkTrace(path, acc, REACHED_TARGET)
    return WalkTrace(path, acc, STEP_CAP)


def _check_query(g: DynamicGraph, p: int, q: int) -> None:
    n = g.vertex_count
    if not (0 <= p < n and 0 <= q < n):
        raise GraphError(f"query ({p}, {q}) outside [0, {n})")
    if p == q:
        raise GraphError("walk endpoints must differ")


def nbrw_reach(g: DynamicGraph, p: int, q: int, w_pq: float, cfg: WalkConfig,
               update_id: int) -> ReachVerdict:
    """Launch ``cfg.s`` walkers from p; report whether any reached q within budget."""
    _check_query(g, p, q)
    best = None
    steps = 0
    for i in range(cfg.s):
        tr = single_walk(g, p, q, w_pq, cfg.K, cfg.T, walker_rng(cfg, update_id, i))
        steps += tr.steps
        if tr.terminal == REACHED_TARGET and (best is None or tr.resistance < best):
            best = tr.resistance
    return ReachVerdict(best is not None, best, steps)


def loop_erase(path: list[int]) -> list[int]:
    """Chronological loop erasure: whenever a vertex recurs, drop the cycle."""
    out: list[int] = []
    where: dict[int, int] = {}
    for v in path:
        j = where.get(v)
        if j is not None:
            for x in out[j + 1:]:
                del where[x]
            del out[j + 1:]
        else:
            where[v] = len(out)
            out.append(v)
    return out


def path_resistance(g: DynamicGraph, path: list[int]) -> float:
    return sum(1.0 / g.weight(a, b) for a, b in zip(path[:-1], path[1:]))


@dataclass
class PathVerdict:
    path: RecoveredPath | None
    steps_used: int

    @property
    def reached(self) -> bool:
        return self.path is not None


def min_path_search(g: DynamicGraph, p: int, q: int, cfg: WalkConfig,
                    update_id: int) -> PathVerdict:
    """Like :func:`nbrw_min_path` but also reports the steps spent."""
    _check_query(g, p, q)
    best: WalkTrace | None = None
    steps = 0
    for i in range(cfg.s):
        tr = single_walk(g, p, q, 1.0, cfg.K, cfg.T, walker_rng(cfg, update_id, i))
        steps += tr.steps
        if tr.terminal == REACHED_TARGET and (best is None or tr.resistance < best.resistance):
            best = tr
    if best is None:
        return PathVerdict(None, steps)
    path = loop_erase(best.path)
    return PathVerdict(RecoveredPath(path, path_resistance(g, path), steps), steps)


def nbrw_min_path(g: DynamicGraph, p: int, q: int, cfg: WalkConfig,
                  update_id: int) -> RecoveredPath | None:
    """Minimum-resistance p-q walk among ``cfg.s`` walkers, loop-erased.

    The budget is applied to the raw resistance (``w_pq = 1``).  Ties keep the
    lowest walker index.  Returns None when no walker reaches q.
    """
    return min_path_search(g, p, q, cfg, update_id).path


def default_workers() -> int:
    env = os.environ.get("DYSPARSE_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cap))
        except ValueError:
            pass
    return cap


def _run_query(g: DynamicGraph, query: Query, cfg: WalkConfig):
    c = query.cfg or cfg
    if query.kind == "reach":
        return nbrw_reach(g, query.p, query.q, query.w_pq, c, query.update_id)
    if query.kind == "min_path":
        return min_path_search(g, query.p, query.q, c, query.update_id)
    raise ValueError(f"unknown query kind {query.kind!r}")


def run_batch(g: DynamicGraph, queries, cfg: WalkConfig, workers: int | None = None) -> list:
    """Answer queries against one read-only snapshot of ``g``.

    Reach queries yield :class:`ReachVerdict`, min-path queries
    :class:`PathVerdict`.  Results come back in query order and are identical
    for any worker count.
    A query whose start vertex is isolated yields the IsolatedStart exception
    object in its slot instead of aborting the batch.
    """
    queries = list(queries)
    if workers is None:
        workers = default_workers()

    def one(qr):
        try:
            return _run_query(g, qr, cfg)
        except IsolatedStart as exc:
            return exc

    if workers <= 1 or len(queries) <= 1:
        return [one(qr) for qr in queries]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, queries))
