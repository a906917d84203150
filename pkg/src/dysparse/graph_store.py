"""Mutable weighted undirected graph with per-vertex adjacency arrays.

Each vertex owns a growable neighbor array and a parallel weight array, plus a
position index so that membership tests and deletions are O(1).  Insertions
append into the array headroom, deletions swap the last entry into the hole.
The order of entries inside an adjacency array is therefore not stable across
deletions and nothing downstream may rely on it.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Invalid graph operation or malformed graph input."""


class EdgeNotFound(GraphError, KeyError):
    pass


NEW = "new"
COALESCED = "coalesced"


@dataclass(frozen=True)
class EdgeEvent:
    """One streamed update.  ``weight`` is None for deletions."""

    kind: str
    u: int
    v: int
    weight: float | None = None
    batch_index: int = 0

    def __post_init__(self):
        if self.kind not in ("insertion", "deletion"):
            raise GraphError(f"unknown event kind {self.kind!r}")
        if self.u == self.v:
            raise GraphError(f"self-loop event ({self.u}, {self.v})")
        if self.u < 0 or self.v < 0:
            raise GraphError(f"negative vertex id in ({self.u}, {self.v})")
        if self.kind == "insertion":
            if self.weight is None or not self.weight > 0:
                raise GraphError(f"insertion ({self.u}, {self.v}) needs a positive weight")
        elif self.weight is not None:
            raise GraphError(f"deletion ({self.u}, {self.v}) must not carry a weight")


class NeighborView(Sequence):
    """Read-only (vertex, weight) view over one adjacency array."""

    __slots__ = ("_nbr", "_wt")

    def __init__(self, nbr: list[int], wt: list[float]):
        self._nbr = nbr
        self._wt = wt

    def __len__(self):
        return len(self._nbr)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return list(zip(self._nbr[i], self._wt[i]))
        return self._nbr[i], self._wt[i]

    def __iter__(self):
        return zip(self._nbr, self._wt)

    def __repr__(self):
        return f"NeighborView({list(self)!r})"


class DynamicGraph:
    """Weighted undirected simple graph on vertices ``0..n-1``.

    Weights are conductances and must be strictly positive.  Inserting an
    existing pair coalesces by summing weights (parallel conductances).
    """

    def __init__(self, vertex_count: int):
        if vertex_count < 0:
            raise GraphError("vertex_count must be nonnegative")
        self.vertex_count = int(vertex_count)
        self._nbr: list[list[int]] = [[] for _ in range(vertex_count)]
        self._wt: list[list[float]] = [[] for _ in range(vertex_count)]
        self._pos: list[dict[int, int]] = [{} for _ in range(vertex_count)]
        self.edge_count = 0
        self.total_weight = 0.0

    @classmethod
    def from_edges(cls, n: int, edges) -> DynamicGraph:
        """Build from an iterable of ``(u, v, w)``; duplicates coalesce."""
        g = cls(n)
        for u, v, w in edges:
            g.insert_edge(int(u), int(v), float(w))
        return g

    @property
    def n(self) -> int:
        return self.vertex_count

    @property
    def m(self) -> int:
        return self.edge_count

    def _check_vertex(self, u: int) -> None:
        if not 0 <= u < self.vertex_count:
            raise GraphError(f"vertex {u} out of range [0, {self.vertex_count})")

    def insert_edge(self, u: int, v: int, w: float) -> str:
        """Add ``w`` to edge (u, v).  Returns ``"new"`` or ``"coalesced"``."""
        self._check_vertex(u)
        self._check_vertex(v)
        if u == v:
            raise GraphError(f"self-loop at vertex {u}")
        if not w > 0:
            raise GraphError(f"non-positive weight {w} for edge ({u}, {v})")
        i = self._pos[u].get(v)
        if i is not None:
            j = self._pos[v][u]
            self._wt[u][i] += w
            self._wt[v][j] = self._wt[u][i]
            self.total_weight += w
            return COALESCED
        self._pos[u][v] = len(self._nbr[u])
        self._nbr[u].append(v)
        self._wt[u].append(w)
        self._pos[v][u] = len(self._nbr[v])
        self._nbr[v].append(u)
        self._wt[v].append(w)
        self.edge_count += 1
        self.total_weight += w
        return NEW

    def _swap_remove(self, u: int, v: int) -> float:
        pos = self._pos[u]
        i = pos.pop(v)
        nbr, wt = self._nbr[u], self._wt[u]
        w = wt[i]
        last = len(nbr) - 1
        if i != last:
            moved = nbr[last]
            nbr[i] = moved
            wt[i] = wt[last]
            pos[moved] = i
        nbr.pop()
        wt.pop()
        return w

    def delete_edge(self, u: int, v: int) -> float:
        """Remove edge (u, v) and return its weight.

        Raises EdgeNotFound (graph untouched) when the edge is absent.
        """
        self._check_vertex(u)
        self._check_vertex(v)
        if v not in self._pos[u]:
            raise EdgeNotFound(f"edge ({u}, {v}) not in graph")
        w = self._swap_remove(u, v)
        self._swap_remove(v, u)
        self.edge_count -= 1
        self.total_weight -= w
        return w

    def set_weight(self, u: int, v: int, w: float) -> None:
        if not w > 0:
            raise GraphError(f"non-positive weight {w} for edge ({u}, {v})")
        i = self._pos[u].get(v)
        if i is None:
            raise EdgeNotFound(f"edge ({u}, {v}) not in graph")
        j = self._pos[v][u]
        self.total_weight += w - self._wt[u][i]
        self._wt[u][i] = w
        self._wt[v][j] = w

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._pos[u]

    def weight(self, u: int, v: int) -> float:
        i = self._pos[u].get(v)
        if i is None:
            raise EdgeNotFound(f"edge ({u}, {v}) not in graph")
        return self._wt[u][i]

    def neighbors(self, u: int) -> NeighborView:
        self._check_vertex(u)
        return NeighborView(self._nbr[u], self._wt[u])

    def adjacency_lists(self, u: int) -> tuple[list[int], list[float]]:
        """Raw (neighbors, weights) arrays of ``u``.  Callers must not mutate them."""
        return self._nbr[u], self._wt[u]

    def degree(self, u: int) -> int:
        return len(self._nbr[u])

    def weighted_degree(self, u: int) -> float:
        return sum(self._wt[u])

    def edges(self):
        """Yield each edge once as ``(u, v, w)`` with ``u < v``."""
        for u in range(self.vertex_count):
            for v, w in zip(self._nbr[u], self._wt[u]):
                if u < v:
                    yield u, v, w

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Edges as sorted ``(rows, cols, weights)`` arrays with rows < cols."""
        us, vs, ws = [], [], []
        for u in range(self.vertex_count):
            for v, w in zip(self._nbr[u], self._wt[u]):
                if u < v:
                    us.append(u)
                    vs.append(v)
                    ws.append(w)
        rows = np.asarray(us, dtype=np.int64)
        cols = np.asarray(vs, dtype=np.int64)
        wts = np.asarray(ws, dtype=np.float64)
        order = np.lexsort((cols, rows))
        return rows[order], cols[order], wts[order]

    def edge_dict(self) -> dict[tuple[int, int], float]:
        return {(u, v): w for u, v, w in self.edges()}

    def copy(self) -> DynamicGraph:
        g = DynamicGraph.__new__(DynamicGraph)
        g.vertex_count = self.vertex_count
        g._nbr = [list(a) for a in self._nbr]
        g._wt = [list(a) for a in self._wt]
        g._pos = [dict(d) for d in self._pos]
        g.edge_count = self.edge_count
        g.total_weight = self.total_weight
        return g

    def check_invariants(self) -> None:
        """Full O(n + m) consistency scan; raises AssertionError on violation."""
        entries = 0
        for u in range(self.vertex_count):
            nbr, wt, pos = self._nbr[u], self._wt[u], self._pos[u]
            assert len(nbr) == len(wt) == len(pos), f"array length mismatch at {u}"
            for i, (v, w) in enumerate(zip(nbr, wt)):
                assert v != u, f"self-loop at {u}"
                assert w > 0, f"non-positive weight on ({u}, {v})"
                assert pos[v] == i, f"stale position index at ({u}, {v})"
                j = self._pos[v].get(u)
                assert j is not None, f"asymmetric edge ({u}, {v})"
                assert self._wt[v][j] == w, f"asymmetric weight on ({u}, {v})"
            entries += len(nbr)
        assert entries == 2 * self.edge_count, "edge_count out of sync"

    def is_connected(self) -> bool:
        return connected_components(self)[0] <= 1

    def __eq__(self, other):
        if not isinstance(other, DynamicGraph):
            return NotImplemented
        return self.vertex_count == other.vertex_count and self.edge_dict() == other.edge_dict()

    def __repr__(self):
        return f"DynamicGraph(n={self.vertex_count}, m={self.edge_count})"


def laplacian(g: DynamicGraph) -> sp.csr_matrix:
    """Assemble ``L = D - A`` as a symmetric CSR matrix."""
    rows, cols, w = g.edge_arrays()
    return laplacian_from_edges(g.vertex_count, rows, cols, w)


def laplacian_from_edges(n, rows, cols, w) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    deg = np.bincount(rows, weights=w, minlength=n) + np.bincount(cols, weights=w, minlength=n)
    r = np.concatenate([rows, cols, np.arange(n)])
    c = np.concatenate([cols, rows, np.arange(n)])
    d = np.concatenate([-w, -w, deg])
    return sp.csr_matrix((d, (r, c)), shape=(n, n))


def density(g: DynamicGraph) -> float:
    """Off-tree density ``m/n - 1``."""
    return g.edge_count / g.vertex_count - 1.0


def connected_components(g: DynamicGraph) -> tuple[int, np.ndarray]:
    from scipy.sparse.csgraph import connected_components as cc

    rows, cols, w = g.edge_arrays()
    n = g.vertex_count
    adj = sp.csr_matrix((np.ones_like(w), (rows, cols)), shape=(n, n))
    return cc(adj, directed=False)


def load_matrix_market(path) -> DynamicGraph:
    """Read a MatrixMarket coordinate file as a graph.

    Off-diagonal entries become edges of weight ``|value|``, so negative
    Laplacian off-diagonals turn into positive conductances.  Entries hitting
    the same unordered pair (e.g. both triangles of a general file) are summed
    before the sign is dropped.  Diagonal entries are ignored; ``pattern``
    files get unit weights.  Indices shift from 1-based to 0-based.
    """
    path = Path(path)
    try:
        fh = open(path, "r")
    except OSError as exc:
        raise GraphError(f"cannot open {path}: {exc}") from exc
    with fh:
        header = fh.readline()
        parts = header.lower().split()
        if len(parts) < 5 or parts[0] != "%%matrixmarket":
            raise GraphError(f"{path}: missing %%MatrixMarket header")
        _, obj, fmt, field, symmetry = parts[:5]
        if obj != "matrix" or fmt != "coordinate":
            raise GraphError(f"{path}: only 'matrix coordinate' files are supported")
        if field not in ("real", "integer", "pattern"):
            raise GraphError(f"{path}: unsupported field {field!r}")
        if symmetry not in ("symmetric", "general"):
            raise GraphError(f"{path}: unsupported symmetry {symmetry!r}")

        line = fh.readline()
        while line and (line.startswith("%") or not line.strip()):
            line = fh.readline()
        try:
            nrows, ncols, nnz = (int(t) for t in line.split()[:3])
        except ValueError as exc:
            raise GraphError(f"{path}: bad size line {line!r}") from exc
        if nrows != ncols:
            raise GraphError(f"{path}: matrix is {nrows}x{ncols}, expected square")

        acc: dict[tuple[int, int], float] = {}
        seen = 0
        for lineno, line in enumerate(fh, start=3):
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            tok = s.split()
            try:
                i, j = int(tok[0]), int(tok[1])
                val = 1.0 if field == "pattern" else float(tok[2])
            except (ValueError, IndexError) as exc:
                raise GraphError(f"{path}:{lineno}: cannot parse entry {s!r}") from exc
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise GraphError(f"{path}:{lineno}: index ({i}, {j}) outside {nrows}x{ncols}")
            seen += 1
            if i == j:
                continue
            key = (i - 1, j - 1) if i < j else (j - 1, i - 1)
            acc[key] = acc.get(key, 0.0) + val
        if seen != nnz:
            raise GraphError(f"{path}: header promises {nnz} entries, found {seen}")

    g = DynamicGraph(nrows)
    for (u, v), val in sorted(acc.items()):
        w = abs(val)
        if not w > 0:
            raise GraphError(f"{path}: edge ({u + 1}, {v + 1}) has zero coalesced weight")
        g.insert_edge(u, v, w)
    return g


def write_matrix_market(g: DynamicGraph, path, comment: str | None = None) -> None:
    """Write the adjacency (upper triangle, 1-based, symmetric) of ``g``."""
    rows, cols, w = g.edge_arrays()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{g.vertex_count} {g.vertex_count} {len(w)}\n")
        # lower triangle storage, as MatrixMarket symmetric files expect
        for u, v, x in zip(rows, cols, w):
            fh.write(f"{v + 1} {u + 1} {float(x)!r}\n")
