"""Seeded synthetic graphs and update streams."""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from .graph_store import DynamicGraph, EdgeEvent, GraphError


def random_tree(n: int, seed: int = 0, wmin: float = 1.0, wmax: float = 1.0) -> DynamicGraph:
    rng = np.random.default_rng(seed)
    g = DynamicGraph(n)
    for v in range(1, n):
        g.insert_edge(v, int(rng.integers(v)), float(rng.uniform(wmin, wmax)))
    return g


def random_connected_graph(n: int, extra_edges: int, seed: int = 0, wmin: float = 0.1,
                           wmax: float = 10.0, pendant: bool = False) -> DynamicGraph:
    """Random recursive tree plus ``extra_edges`` uniformly random chords.

    With ``pendant`` the last vertex is guaranteed to be a leaf.
    """
    rng = np.random.default_rng(seed)
    g = DynamicGraph(n)
    for v in range(1, n):
        g.insert_edge(v, int(rng.integers(v)), float(rng.uniform(wmin, wmax)))
    core = n - 1 if pendant else n
    added = 0
    tries = 0
    while added < extra_edges and tries < 50 * (extra_edges + 1):
        tries += 1
        a, b = (int(x) for x in rng.integers(core, size=2))
        if a == b or g.has_edge(a, b):
            continue
        g.insert_edge(a, b, float(rng.uniform(wmin, wmax)))
        added += 1
    return g


def grid_graph(rows: int, cols: int, diagonals: bool = False, seed: int | None = None,
               wmin: float = 1.0, wmax: float = 1.0) -> DynamicGraph:
    """2-D lattice; ``diagonals`` adds one diagonal per cell (a triangulated grid)."""
    rng = np.random.default_rng(seed)
    g = DynamicGraph(rows * cols)

    def w():
        return 1.0 if wmin == wmax == 1.0 else float(rng.uniform(wmin, wmax))

    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                g.insert_edge(v, v + 1, w())
            if r + 1 < rows:
                g.insert_edge(v, v + cols, w())
            if diagonals and r + 1 < rows and c + 1 < cols:
                g.insert_edge(v, v + cols + 1, w())
    return g


def delaunay_graph(n: int, seed: int = 0, wmin: float = 1.0, wmax: float = 1.0) -> DynamicGraph:
    """Planar mesh: Delaunay triangulation of ``n`` uniform points in the unit square.

    Vertices are numbered along a coarse space-filling order so that mesh
    neighbors tend to have nearby ids, as in finite-element matrices.
    """
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    cell = np.floor(pts * 32).astype(int)
    snake = np.where(cell[:, 1] % 2 == 0, cell[:, 0], 31 - cell[:, 0])
    order = np.lexsort((pts[:, 0], snake, cell[:, 1]))
    pts = pts[order]
    tri = Delaunay(pts)
    s = tri.simplices
    e = np.concatenate([s[:, [0, 1]], s[:, [1, 2]], s[:, [0, 2]]])
    e.sort(axis=1)
    e = np.unique(e, axis=0)
    if wmin == wmax:
        w = np.full(len(e), float(wmin))
    else:
        w = rng.uniform(wmin, wmax, len(e))
    return DynamicGraph.from_edges(n, zip(e[:, 0], e[:, 1], w))


def _weight_range(g: DynamicGraph) -> tuple[float, float]:
    _, _, w = g.edge_arrays()
    if len(w) == 0:
        return 1.0, 1.0
    return float(w.min()), float(w.max())


def sample_insertions(g: DynamicGraph, count: int, rng: np.random.Generator,
                      mode: str = "uniform", local_hops: int = 2,
                    long_range_frac: float = 0.1) -> list[tuple[int, int, float]]:
    """Draw ``count`` distinct non-edges of ``g`` with weights uniform over g's range.

    ``uniform`` picks vertex pairs uniformly; ``local`` picks the endpoints of
    short random walks (2 to ``local_hops`` steps) so the new edge closes a
    small cycle; ``mixed`` draws each pair uniformly with probability
    ``long_range_frac`` and locally otherwise.
    """
    if mode not in ("uniform", "local", "mixed"):
        raise ValueError(f"unknown insertion mode {mode!r}")
    n = g.vertex_count
    lo, hi = _weight_range(g)
    chosen: set[tuple[int, int]] = set()
    out = []
    budget = 100 * count + 1000
    while len(out) < count:
        budget -= 1
        if budget < 0:
            raise GraphError(f"could only find {len(out)} of {count} non-edges")
        pick = mode
        if mode == "mixed":
            pick = "uniform" if rng.random() < long_range_frac else "local"
        if pick == "uniform":
            a, b = (int(x) for x in rng.integers(n, size=2))
        else:
            a = int(rng.integers(n))
            b = a
            hops = int(rng.integers(2, local_hops + 1))
            for _ in range(hops):
                nb, _w = g.adjacency_lists(b)
                if not nb:
                    break
                b = nb[int(rng.integers(len(nb)))]
        if a == b or g.has_edge(a, b):
            continue
        key = (min(a, b), max(a, b))
        if key in chosen:
            continue
        chosen.add(key)
        w = lo if lo == hi else float(rng.uniform(lo, hi))
        out.append((key[0], key[1], w))
    return out


def generate_stream(g: DynamicGraph, insert_frac: float = 0.25, delete_frac: float = 0.0,
                    batches: int = 10, seed: int = 0, mode: str = "uniform",
                    local_hops: int = 2, long_range_frac: float = 0.1) -> list[list[EdgeEvent]]:
    """Insertions (``insert_frac * n`` of them) then deletions (``delete_frac * m``).

    Insertion and deletion events are each split evenly over ``batches``
    batches; deletions sample edges present after all insertions and never
    repeat.  Connectivity is not protected.
    """
    if insert_frac < 0 or delete_frac < 0:
        raise ValueError("fractions must be nonnegative")
    if batches < 1:
        raise ValueError("need at least one batch")
    rng = np.random.default_rng(seed)
    n_ins = int(round(insert_frac * g.vertex_count))
    ins = sample_insertions(g, n_ins, rng, mode, local_hops, long_range_frac)
    events: list[list[EdgeEvent]] = []
    if n_ins:
        for b, chunk in enumerate(np.array_split(np.arange(n_ins), batches)):
            events.append([EdgeEvent("insertion", *ins[i], b) for i in chunk])
    if delete_frac > 0:
        after = g.copy()
        for u, v, w in ins:
            after.insert_edge(u, v, w)
        rows, cols, _ = after.edge_arrays()
        n_del = int(round(delete_frac * after.edge_count))
        pick = rng.choice(len(rows), size=n_del, replace=False)
        dels = [(int(rows[i]), int(cols[i])) for i in pick]
        for chunk in np.array_split(np.arange(n_del), batches):
            b = len(events)
            events.append([EdgeEvent("deletion", *dels[i], None, b) for i in chunk])
    return events
