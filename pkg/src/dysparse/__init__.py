"""Dynamic spectral sparsification of weighted undirected graphs.

A sparsifier H of G is kept up to date under edge insertions and deletions
using short non-backtracking random walks instead of global recomputation.
"""

from .graph_store import (
    DynamicGraph,
    EdgeEvent,
    EdgeNotFound,
    GraphError,
    density,
    laplacian,
    load_matrix_market,
    write_matrix_market,
)
from .solver import PcgResult, build_preconditioner, pcg_solve
from .sparsify import (
    SparsifierState,
    UpdateReport,
    apply_deletion,
    apply_insertion,
    build_initial_sparsifier,
    calibrate_K,
    import_sparsifier,
    read_stream,
    replay_stream,
    write_stream,
)
from .spectral import condition_number, effective_resistance_exact
from .walk_engine import WalkConfig, nbrw_min_path, nbrw_reach, run_batch

__version__ = "0.1.0"

__all__ = [
    "DynamicGraph", "EdgeEvent", "EdgeNotFound", "GraphError", "PcgResult", "SparsifierState",
    "UpdateReport", "WalkConfig", "apply_deletion", "apply_insertion", "build_initial_sparsifier",
    "build_preconditioner", "calibrate_K", "condition_number", "density",
    "effective_resistance_exact", "import_sparsifier", "laplacian", "load_matrix_market",
    "nbrw_min_path", "nbrw_reach", "pcg_solve", "read_stream", "replay_stream", "run_batch",
    "write_matrix_market", "write_stream",
]
