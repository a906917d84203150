"""Maintain a spectral sparsifier H of a graph G under streamed edge updates.

Insertions go into G unconditionally; the new edge enters H only when no
non-backtracking walker on H gets from u to v within the distortion budget.
Deleting an H edge triggers a path search on the updated G, and the
minimum-resistance path found is copied into H.  When no walker gets through,
endpoints left without any H edge receive their heaviest G edge.
"""

from __future__ import annotations

import heapq
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .graph_store import (
    DynamicGraph,
    EdgeEvent,
    GraphError,
    connected_components,
    density,
    load_matrix_market,
)
from .walk_engine import (
    PathVerdict,
    Query,
    ReachVerdict,
    WalkConfig,
    min_path_search,
    nbrw_reach,
    run_batch,
)

KEPT = "kept"
PRUNED = "pruned"

G_ONLY = "g_only"
PATH_RECOVERED = "path_recovered"
LOCAL_FALLBACK = "local_fallback"

IMMEDIATE = "immediate"
BATCHED = "batched"

K_MIN = 1.0
K_MAX = 1e6


class ReplayError(GraphError):
    def __init__(self, position: int, event, reason: str):
        super().__init__(f"event #{position} {event}: {reason}")
        self.position = position
        self.event = event


@dataclass
class DeletionOutcome:
    kind: str
    edges_added: int = 0
    steps_used: int = 0


@dataclass
class SparsifierState:
    G: DynamicGraph
    H: DynamicGraph
    cfg: WalkConfig = field(default_factory=WalkConfig)
    update_counter: int = 0
    mode: str = IMMEDIATE
    deletion_K: float = math.inf
    freeze_h: bool = False
    workers: int | None = 1
    verdict_log: list | None = None

    def __post_init__(self):
        if self.G.vertex_count != self.H.vertex_count:
            raise GraphError("G and H must share the vertex set")
        if self.mode not in (IMMEDIATE, BATCHED):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def deletion_cfg(self) -> WalkConfig:
        return replace(self.cfg, K=self.deletion_K)

    def check_subgraph(self) -> None:
        """Assert every H edge is a G edge with the same weight."""
        for u, v, w in self.H.edges():
            assert self.G.has_edge(u, v), f"H edge ({u}, {v}) missing from G"
            assert self.G.weight(u, v) == w, f"H edge ({u}, {v}) weight differs from G"


@dataclass
class BatchStats:
    batch: int
    insertions: int = 0
    kept: int = 0
    pruned: int = 0
    deletions: int = 0
    deletions_in_h: int = 0
    paths_recovered: int = 0
    edges_recovered: int = 0
    fallbacks: int = 0
    fallback_edges: int = 0
    walker_steps: int = 0
    max_event_steps: int = 0
    wall_time: float = 0.0
    d_G: float = 0.0
    d_H: float = 0.0


@dataclass
class UpdateReport:
    batches: list[BatchStats] = field(default_factory=list)
    d_G: float = 0.0
    d_H: float = 0.0

    def total(self, name: str):
        return sum(getattr(b, name) for b in self.batches)

    @property
    def max_event_steps(self) -> int:
        return max((b.max_event_steps for b in self.batches), default=0)


# -- initial sparsifier ------------------------------------------------------

def max_weight_spanning_tree(g: DynamicGraph, root: int = 0) -> list[tuple[int, int, float]]:
    """Prim's algorithm on ``-w``.  Equal weights are taken first-in first-out,
    so on unit-weight graphs the tree is a breadth-first tree from ``root``."""
    n = g.vertex_count
    seen = [False] * n
    seen[root] = True
    heap: list[tuple[float, int, int, int]] = []
    tick = 0
    for v, w in zip(*g.adjacency_lists(root)):
        heap.append((-w, tick, root, v))
        tick += 1
    heapq.heapify(heap)
    tree = []
    while heap:
        negw, _, a, b = heapq.heappop(heap)
        if seen[b]:
            continue
        seen[b] = True
        tree.append((a, b, -negw))
        for v, w in zip(*g.adjacency_lists(b)):
            if not seen[v]:
                heapq.heappush(heap, (-w, tick, b, v))
                tick += 1
    if len(tree) != n - 1:
        raise GraphError("graph is disconnected")
    return tree


def tree_path_resistance(n: int, tree, root: int, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Resistance of the tree path between each pair ``(us[i], vs[i])``."""
    parent = np.full(n, -1, dtype=np.int64)
    depth = np.zeros(n, dtype=np.int64)
    dist = np.zeros(n)
    children: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for a, b, w in tree:
        children[a].append((b, w))
        children[b].append((a, w))
    parent[root] = root
    stack = [root]
    visited = np.zeros(n, dtype=bool)
    visited[root] = True
    while stack:
        a = stack.pop()
        for b, w in children[a]:
            if not visited[b]:
                visited[b] = True
                parent[b] = a
                depth[b] = depth[a] + 1
                dist[b] = dist[a] + 1.0 / w
                stack.append(b)
    levels = max(1, int(depth.max()).bit_length())
    up = [parent]
    for _ in range(levels - 1):
        up.append(up[-1][up[-1]])
    a = np.asarray(us, dtype=np.int64).copy()
    b = np.asarray(vs, dtype=np.int64).copy()
    swap = depth[a] < depth[b]
    a[swap], b[swap] = b[swap], a[swap].copy()
    diff = depth[a] - depth[b]
    for k in range(levels):
        sel = (diff >> k) & 1 == 1
        a[sel] = up[k][a[sel]]
    for k in range(levels - 1, -1, -1):
        differ = up[k][a] != up[k][b]
        a[differ] = up[k][a[differ]]
        b[differ] = up[k][b[differ]]
    lca = np.where(a == b, a, parent[a])
    return dist[us] + dist[vs] - 2 * dist[lca]


def _ball(g: DynamicGraph, x: int, radius: int) -> list[int]:
    seen = {x}
    frontier = [x]
    for _ in range(radius):
        nxt = []
        for a in frontier:
            for b in g._nbr[a]:
                if b not in seen:
                    seen.add(b)
                    nxt.append(b)
        frontier = nxt
    return list(seen)


def build_initial_sparsifier(G: DynamicGraph, target_density: float, seed: int = 0,
                             similarity_radius: int = 2) -> DynamicGraph:
    """Maximum-weight spanning tree plus the off-tree edges of largest stretch.

    Off-tree edges are scanned by decreasing ``w_e * R_tree(e)`` and added
    until the off-tree density ``m/n - 1`` reaches ``target_density``.  During
    the scan a candidate is deferred when its endpoints lie within
    ``similarity_radius`` hops of the two endpoints of an edge already taken,
    since both would patch the same stretch of tree; deferred edges fill any
    remaining budget in scan order.  ``similarity_radius=0`` gives the plain
    ranking.  The tree root is drawn from ``seed``.
    """
    if target_density < 0:
        raise ValueError("target_density must be >= 0")
    n = G.vertex_count
    H = DynamicGraph(n)
    if n <= 1:
        return H
    root = int(np.random.default_rng(seed).integers(n))
    tree = max_weight_spanning_tree(G, root)
    for a, b, w in tree:
        H.insert_edge(a, b, w)
    rows, cols, w = G.edge_arrays()
    off = np.array([not H.has_edge(int(a), int(b)) for a, b in zip(rows, cols)], dtype=bool)
    rows, cols, w = rows[off], cols[off], w[off]
    if len(w) == 0:
        return H
    stretch = w * tree_path_resistance(n, tree, root, rows, cols)
    order = np.lexsort((cols, rows, -stretch))
    # a zero target means no off-tree edges at all, even though a tree sits at -1/n
    need = 0 if target_density == 0 else max(0, math.ceil((1.0 + target_density) * n - 1e-9) - H.edge_count)
    # marks[x][j]: bit 1 if x is near the first endpoint of taken edge j, bit 2 the second
    marks: list[dict[int, int]] = [dict() for _ in range(n)]
    deferred = []
    taken = 0
    for i in order:
        if need == 0:
            break
        u, v = int(rows[i]), int(cols[i])
        if similarity_radius > 0:
            mu, mv = marks[u], marks[v]
            if len(mu) > len(mv):
                mu, mv = mv, mu
            if any((m & 1 and mv.get(j, 0) & 2) or (m & 2 and mv.get(j, 0) & 1)
                   for j, m in mu.items()):
                deferred.append(i)
                continue
            for x in _ball(G, u, similarity_radius):
                marks[x][taken] = marks[x].get(taken, 0) | 1
            for x in _ball(G, v, similarity_radius):
                marks[x][taken] = marks[x].get(taken, 0) | 2
        H.insert_edge(u, v, float(w[i]))
        taken += 1
        need -= 1
    for i in deferred[:need]:
        H.insert_edge(int(rows[i]), int(cols[i]), float(w[i]))
    return H


def import_sparsifier(G: DynamicGraph, path) -> DynamicGraph:
    """Load H from a MatrixMarket file or a ``u v w`` edge list (0-based).

    H must be a connected subgraph of G on the same vertex set.  Weights come
    from the file; a mismatch with G only warns.
    """
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
    if first.lower().startswith("%%matrixmarket"):
        H = load_matrix_market(path)
    else:
        H = read_edge_list(path, G.vertex_count)
    if H.vertex_count != G.vertex_count:
        raise GraphError(f"sparsifier has {H.vertex_count} vertices, graph has {G.vertex_count}")
    mismatched = 0
    for u, v, w in H.edges():
        if not G.has_edge(u, v):
            raise GraphError(f"sparsifier edge ({u}, {v}) is not in the graph")
        if not math.isclose(G.weight(u, v), w, rel_tol=1e-9):
            mismatched += 1
    if mismatched:
        warnings.warn(f"{mismatched} sparsifier edge weights differ from the graph", stacklevel=2)
    if H.vertex_count > 1 and connected_components(H)[0] != 1:
        raise GraphError("sparsifier is disconnected")
    return H


def read_edge_list(path, n: int) -> DynamicGraph:
    g = DynamicGraph(n)
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            tok = s.split()
            try:
                u, v = int(tok[0]), int(tok[1])
                w = float(tok[2]) if len(tok) > 2 else 1.0
            except (ValueError, IndexError) as exc:
                raise GraphError(f"{path}:{lineno}: cannot parse {s!r}") from exc
            g.insert_edge(u, v, w)
    return g


# -- single updates ------------------------------------------------------------

def _log(st: SparsifierState, *entry) -> None:
    if st.verdict_log is not None:
        st.verdict_log.append(entry)


def apply_insertion(st: SparsifierState, u: int, v: int, w: float) -> str:
    """Insert (u, v, w) into G and decide whether H keeps it."""
    G, H = st.G, st.H
    G.insert_edge(u, v, w)
    uid = st.update_counter
    st.update_counter += 1
    wt = G.weight(u, v)
    if st.freeze_h:
        st._last_steps = 0
        return PRUNED
    if H.has_edge(u, v):
        # coalesced re-insertion of an H edge: keep H in step with G
        H.set_weight(u, v, wt)
        st._last_steps = 0
        _log(st, "insertion", u, v, wt, None, KEPT)
        return KEPT
    if H.degree(u) == 0 or H.degree(v) == 0:
        verdict = ReachVerdict(False, None, 0)
    else:
        verdict = nbrw_reach(H, u, v, wt, st.cfg, uid)
    st._last_steps = verdict.steps_used
    decision = PRUNED if verdict.reached else KEPT
    if decision == KEPT:
        H.insert_edge(u, v, wt)
    _log(st, "insertion", u, v, wt, verdict, decision)
    return decision


def _local_fallback(G: DynamicGraph, H: DynamicGraph, endpoints) -> int:
    added = 0
    for x in endpoints:
        if H.degree(x) > 0:
            continue
        best = None
        for y, w in G.neighbors(x):
            if H.has_edge(x, y):
                continue
            if best is None or w > best[1] or (w == best[1] and y < best[0]):
                best = (y, w)
        if best is not None:
            H.insert_edge(x, best[0], best[1])
            added += 1
    return added


def _recover(G: DynamicGraph, H: DynamicGraph, u: int, v: int,
             verdict: PathVerdict | None) -> DeletionOutcome:
    steps = verdict.steps_used if verdict is not None else 0
    if verdict is not None and verdict.path is not None:
        added = 0
        for a, b in verdict.path.edges():
            if G.has_edge(a, b) and not H.has_edge(a, b):
                H.insert_edge(a, b, G.weight(a, b))
                added += 1
        # a path edge that vanished in the same batch can leave an endpoint bare
        added += _local_fallback(G, H, (u, v))
        return DeletionOutcome(PATH_RECOVERED, added, steps)
    return DeletionOutcome(LOCAL_FALLBACK, _local_fallback(G, H, (u, v)), steps)


def apply_deletion(st: SparsifierState, u: int, v: int) -> DeletionOutcome:
    """Delete (u, v) from G; if it was an H edge, repair H from the updated G."""
    G, H = st.G, st.H
    G.delete_edge(u, v)
    uid = st.update_counter
    st.update_counter += 1
    if st.freeze_h or not H.has_edge(u, v):
        _log(st, "deletion", u, v, None, G_ONLY)
        return DeletionOutcome(G_ONLY)
    H.delete_edge(u, v)
    verdict = None
    if G.degree(u) > 0:
        verdict = min_path_search(G, u, v, st.deletion_cfg, uid)
    out = _recover(G, H, u, v, verdict)
    _log(st, "deletion", u, v, verdict, out.kind)
    return out


# -- streams -------------------------------------------------------------------

def read_stream(path) -> list[list[EdgeEvent]]:
    """Parse ``i u v w`` / ``d u v`` lines; ``#batch`` closes a batch."""
    batches: list[list[EdgeEvent]] = []
    cur: list[EdgeEvent] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                if s.split()[0] == "#batch":
                    batches.append(cur)
                    cur = []
                continue
            tok = s.split()
            try:
                if tok[0] == "i" and len(tok) == 4:
                    ev = EdgeEvent("insertion", int(tok[1]), int(tok[2]), float(tok[3]), len(batches))
                elif tok[0] == "d" and len(tok) == 3:
                    ev = EdgeEvent("deletion", int(tok[1]), int(tok[2]), None, len(batches))
                else:
                    raise GraphError(f"unrecognized event {s!r}")
            except (ValueError, GraphError) as exc:
                raise GraphError(f"{path}:{lineno}: {exc}") from exc
            cur.append(ev)
    if cur:
        batches.append(cur)
    return batches


def write_stream(batches, path) -> None:
    with open(path, "w") as fh:
        fh.write("# dysparse update stream: i u v w | d u v ; #batch closes a batch\n")
        for batch in batches:
            for ev in batch:
                if ev.kind == "insertion":
                    fh.write(f"i {ev.u} {ev.v} {float(ev.weight)!r}\n")
                else:
                    fh.write(f"d {ev.u} {ev.v}\n")
            fh.write("#batch\n")


def _validate(st: SparsifierState, batch, offset: int) -> None:
    n = st.G.vertex_count
    added: dict[tuple[int, int], int] = {}
    removed: set[tuple[int, int]] = set()
    for k, ev in enumerate(batch):
        if not (0 <= ev.u < n and 0 <= ev.v < n):
            raise ReplayError(offset + k, ev, f"vertex out of range [0, {n})")
        key = (min(ev.u, ev.v), max(ev.u, ev.v))
        if ev.kind == "insertion":
            added[key] = added.get(key, 0) + 1
            removed.discard(key)
        else:
            present = (st.G.has_edge(*key) and key not in removed) or added.get(key, 0) > 0
            if not present:
                raise ReplayError(offset + k, ev, "edge absent at deletion time")
            added.pop(key, None)
            removed.add(key)


def _apply_batch_immediate(st: SparsifierState, batch, stats: BatchStats) -> None:
    for ev in batch:
        if ev.kind == "insertion":
            stats.insertions += 1
            decision = apply_insertion(st, ev.u, ev.v, ev.weight)
            stats.kept += decision == KEPT
            stats.pruned += decision == PRUNED
            steps = st._last_steps
        else:
            stats.deletions += 1
            out = apply_deletion(st, ev.u, ev.v)
            _count_deletion(stats, out)
            steps = out.steps_used
        stats.walker_steps += steps
        stats.max_event_steps = max(stats.max_event_steps, steps)


def _count_deletion(stats: BatchStats, out: DeletionOutcome) -> None:
    if out.kind == G_ONLY:
        return
    stats.deletions_in_h += 1
    if out.kind == PATH_RECOVERED:
        stats.paths_recovered += 1
        stats.edges_recovered += out.edges_added
    else:
        stats.fallbacks += 1
        stats.fallback_edges += out.edges_added


def _apply_batch_deferred(st: SparsifierState, batch, stats: BatchStats) -> None:
    """Walk against batch-start snapshots, then commit all mutations in order."""
    G, H = st.G, st.H
    shadow = None
    if any(ev.kind == "deletion" for ev in batch) and not st.freeze_h:
        shadow = G.copy()
        for ev in batch:
            if ev.kind == "deletion" and shadow.has_edge(ev.u, ev.v):
                shadow.delete_edge(ev.u, ev.v)

    pending: dict[tuple[int, int], float] = {}
    plans = []
    reach_q, path_q = [], []
    for ev in batch:
        uid = st.update_counter
        st.update_counter += 1
        key = (min(ev.u, ev.v), max(ev.u, ev.v))
        if ev.kind == "insertion":
            base = pending.get(key, G.weight(ev.u, ev.v) if G.has_edge(ev.u, ev.v) else 0.0)
            wt = base + ev.weight
            pending[key] = wt
            if st.freeze_h:
                plans.append(("frozen", None))
            elif H.has_edge(ev.u, ev.v):
                plans.append(("sync", None))
            elif H.degree(ev.u) == 0 or H.degree(ev.v) == 0:
                plans.append(("verdict", ReachVerdict(False, None, 0)))
            else:
                plans.append(("reach", len(reach_q)))
                reach_q.append(Query("reach", ev.u, ev.v, uid, wt))
        else:
            pending.pop(key, None)
            if st.freeze_h or not H.has_edge(ev.u, ev.v):
                plans.append(("delete", None))
            elif shadow.degree(ev.u) == 0:
                plans.append(("delete", PathVerdict(None, 0)))
            else:
                plans.append(("path", len(path_q)))
                path_q.append(Query("min_path", ev.u, ev.v, uid, 1.0, st.deletion_cfg))

    reach_v = run_batch(H, reach_q, st.cfg, st.workers)
    path_v = run_batch(shadow, path_q, st.cfg, st.workers) if path_q else []

    for ev, (kind, ref) in zip(batch, plans):
        if ev.kind == "insertion":
            stats.insertions += 1
            G.insert_edge(ev.u, ev.v, ev.weight)
            wt = G.weight(ev.u, ev.v)
            steps = 0
            if kind == "frozen":
                decision = PRUNED
            elif kind == "sync" or H.has_edge(ev.u, ev.v):
                H.set_weight(ev.u, ev.v, wt)
                decision = KEPT
            else:
                verdict = ref if kind == "verdict" else reach_v[ref]
                steps = verdict.steps_used
                decision = PRUNED if verdict.reached else KEPT
                if decision == KEPT:
                    H.insert_edge(ev.u, ev.v, wt)
                _log(st, "insertion", ev.u, ev.v, wt, verdict, decision)
            stats.kept += decision == KEPT
            stats.pruned += decision == PRUNED
        else:
            stats.deletions += 1
            G.delete_edge(ev.u, ev.v)
            if st.freeze_h or not H.has_edge(ev.u, ev.v):
                out = DeletionOutcome(G_ONLY)
                _log(st, "deletion", ev.u, ev.v, None, G_ONLY)
            else:
                H.delete_edge(ev.u, ev.v)
                verdict = path_v[ref] if kind == "path" else ref
                out = _recover(G, H, ev.u, ev.v, verdict)
                _log(st, "deletion", ev.u, ev.v, verdict, out.kind)
            _count_deletion(stats, out)
            steps = out.steps_used
        stats.walker_steps += steps
        stats.max_event_steps = max(stats.max_event_steps, steps)


def replay_stream(st: SparsifierState, stream, on_batch=None) -> UpdateReport:
    """Apply every batch of ``stream`` to ``st`` and collect per-batch stats.

    ``on_batch(state, stats)`` runs after each batch commits, e.g. to attach
    spectral measurements.
    """
    report = UpdateReport()
    offset = 0
    for b, batch in enumerate(stream):
        batch = list(batch)
        _validate(st, batch, offset)
        stats = BatchStats(batch=b)
        t0 = time.perf_counter()
        if st.mode == IMMEDIATE:
            _apply_batch_immediate(st, batch, stats)
        else:
            _apply_batch_deferred(st, batch, stats)
        stats.wall_time = time.perf_counter() - t0
        stats.d_G = density(st.G)
        stats.d_H = density(st.H)
        report.batches.append(stats)
        if on_batch is not None:
            on_batch(st, stats)
        offset += len(batch)
    report.d_G = density(st.G)
    report.d_H = density(st.H)
    return report


def calibrate_K(st: SparsifierState, probe_fraction: float = 1.0, rho: float = 0.1,
                k_min: float = K_MIN, k_max: float = K_MAX, max_iter: int = 300) -> float:
    """Distortion budget ``rho * kappa(L_G, L_H)`` clamped to ``[k_min, k_max]``.

    ``probe_fraction`` scales the Lanczos iteration budget for large graphs;
    below 1 the estimate may stop short of convergence, and the current Ritz
    bracket is used.
    """
    from .spectral import NotConverged, condition_number

    if not 0 < probe_fraction <= 1:
        raise ValueError("probe_fraction must lie in (0, 1]")
    iters = max(3, math.ceil(probe_fraction * max_iter))
    try:
        kappa = condition_number(st.G, st.H, max_iter=iters, tol=1e-4, seed=st.cfg.seed).kappa
    except NotConverged as exc:
        if probe_fraction >= 1:
            raise
        kappa = exc.estimate.kappa
    return float(min(max(rho * kappa, k_min), k_max))
