"""Small hand-built instances with known outcomes."""

from __future__ import annotations

from .graph_store import DynamicGraph, EdgeEvent
from .walk_engine import WalkConfig

# Sparsifier edges of the 26-vertex case study.  The long chain 0..17 keeps
# vertex 9 eleven hops from 25, while 25-20-19-17 is a forced three-hop path.
CASE_H_EDGES = (
    [(i, i + 1) for i in range(17)]
    + [(17, 19), (19, 20), (20, 25), (17, 22), (22, 21), (12, 18), (13, 23), (5, 24)]
)
# Graph-only edges.  (16, 21) is the single missing link on the detour
# 16-21-22-17; (24, 25) is the deletion that never touches H.
CASE_G_ONLY = [(16, 21), (24, 25), (0, 2), (3, 5), (6, 8), (10, 12), (11, 18), (14, 23)]

CASE_CONFIG = WalkConfig(K=4.0, T=100, s=16, seed=0)


def case_study():
    """Return ``(G, H0, events)`` for the 26-vertex walkthrough.

    All weights are 1, so ``K = 4`` allows walks of at most four steps.
    Events: insert (25, 17), insert (25, 9), delete (16, 17), delete (24, 25).
    """
    H = DynamicGraph.from_edges(26, [(u, v, 1.0) for u, v in CASE_H_EDGES])
    G = H.copy()
    for u, v in CASE_G_ONLY:
        G.insert_edge(u, v, 1.0)
    events = [
        EdgeEvent("insertion", 25, 17, 1.0),
        EdgeEvent("insertion", 25, 9, 1.0),
        EdgeEvent("deletion", 16, 17),
        EdgeEvent("deletion", 24, 25),
    ]
    return G, H, events
