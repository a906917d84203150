"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .generators import delaunay_graph, generate_stream, grid_graph, random_connected_graph, random_tree
from .graph_store import GraphError, density, laplacian, load_matrix_market, write_matrix_market
from .solver import build_preconditioner, pcg_solve, random_rhs
from .sparsify import (
    BATCHED,
    IMMEDIATE,
    SparsifierState,
    build_initial_sparsifier,
    calibrate_K,
    import_sparsifier,
    read_stream,
    replay_stream,
    write_stream,
)
from .spectral import SpectralError, condition_number
from .walk_engine import WalkConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

REPLAY_COLUMNS = [
    "batch", "insertions", "kept", "pruned", "deletions", "deletions_in_h", "paths_recovered",
    "edges_recovered", "fallbacks", "fallback_edges", "walker_steps", "max_event_steps",
    "d_G", "d_H", "kappa",
]


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    inputs: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    walk_config: dict | None = None
    mode: str | None = None
    tool_version: str = __version__

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> RunManifest:
        return cls(**json.loads(Path(path).read_text()))


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _load_graph(path):
    if not Path(path).exists():
        raise FileNotFoundError(f"no such file: {path}")
    return load_matrix_market(path)


def _kappa(G, H, method="auto"):
    try:
        return condition_number(G, H, method=method)
    except SpectralError as exc:
        if "disconnected" in str(exc):
            raise GraphError(str(exc)) from exc
        raise NumericalFailure(str(exc)) from exc


# -- commands ----------------------------------------------------------------------

def cmd_sparsify(args) -> int:
    G = _load_graph(args.graph)
    H = build_initial_sparsifier(G, args.density, seed=args.seed,
                                 similarity_radius=args.similarity_radius)
    write_matrix_market(H, args.out, comment=f"sparsifier target density {args.density}")
    est = _kappa(G, H)
    print(f"n={G.n} m_G={G.m} m_H={H.m} d_G={density(G):.6f} d_H={density(H):.6f} "
          f"kappa={est.kappa:.6g} method={est.method}")
    return EXIT_OK


def cmd_gen_updates(args) -> int:
    G = _load_graph(args.graph)
    stream = generate_stream(G, args.insert_frac, args.delete_frac, args.batches, args.seed,
                             mode=args.insert_mode, long_range_frac=args.long_range_frac)
    write_stream(stream, args.out)
    ins = sum(e.kind == "insertion" for b in stream for e in b)
    print(f"insertions={ins} deletions={sum(len(b) for b in stream) - ins} batches={len(stream)}")
    return EXIT_OK


def cmd_replay(args) -> int:
    G = _load_graph(args.graph)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        H = import_sparsifier(G, args.sparsifier)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    stream = read_stream(args.stream)

    cfg = WalkConfig(K=1.0, T=args.T, s=args.s, seed=args.seed)
    st = SparsifierState(G, H, cfg, mode=args.mode, freeze_h=args.freeze_H, workers=args.workers)
    if args.auto_K:
        try:
            K = calibrate_K(st, probe_fraction=args.probe_fraction, rho=args.rho)
        except SpectralError as exc:
            raise NumericalFailure(str(exc)) from exc
    else:
        K = args.K
    st.cfg = WalkConfig(K=K, T=args.T, s=args.s, seed=args.seed)

    kappas: dict[int, float] = {}
    last = len(stream) - 1

    def on_batch(state, stats):
        if args.eval_every and ((stats.batch + 1) % args.eval_every == 0 or stats.batch == last):
            kappas[stats.batch] = _kappa(state.G, state.H).kappa

    report = replay_stream(st, stream, on_batch=on_batch)

    with open(args.out, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(REPLAY_COLUMNS)
        for b in report.batches:
            row = [getattr(b, c) for c in REPLAY_COLUMNS[:-1]] + [kappas.get(b.batch)]
            wr.writerow([_fmt(x) for x in row])
    timing = Path(str(args.out) + ".timing.csv")
    with open(timing, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["batch", "wall_time"])
        for b in report.batches:
            wr.writerow([b.batch, f"{b.wall_time:.6f}"])
    if args.out_H:
        write_matrix_market(st.H, args.out_H, comment="updated sparsifier")

    RunManifest(
        command="replay",
        argv=args.argv,
        inputs={p: _sha256(p) for p in (args.graph, args.sparsifier, args.stream)},
        seed=args.seed,
        walk_config=asdict(st.cfg),
        mode=args.mode,
    ).write(str(args.out) + ".manifest.json")
    print(f"K={K!r} batches={len(report.batches)} kept={report.total('kept')} "
          f"pruned={report.total('pruned')} d_G={report.d_G:.6f} d_H={report.d_H:.6f}")
    return EXIT_OK


def cmd_solve(args) -> int:
    G = _load_graph(args.graph)
    H = import_sparsifier(G, args.sparsifier)
    if args.rhs == "random":
        b = random_rhs(G.n, args.seed)
    else:
        b = np.loadtxt(args.rhs, dtype=float).ravel()
    res = pcg_solve(laplacian(G), b, build_preconditioner(H), tol=args.tol, max_iter=args.max_iter)
    print(f"iterations={res.iterations} relative_residual={res.relative_residual:.3e} "
          f"tol={args.tol:g} converged={str(res.converged).lower()}")
    if not res.converged:
        raise NumericalFailure("PCG did not reach the tolerance")
    return EXIT_OK


def cmd_eval(args) -> int:
    G = _load_graph(args.graph)
    H = import_sparsifier(G, args.sparsifier)
    est = _kappa(G, H, args.method)
    print(f"kappa={est.kappa:.10g} lambda_max={est.lambda_max:.10g} "
          f"lambda_min={est.lambda_min:.10g} d_H={density(H):.6f} method={est.method}")
    return EXIT_OK


def cmd_gen_graph(args) -> int:
    if args.kind == "grid":
        g = grid_graph(args.rows, args.cols, diagonals=args.diagonals, seed=args.seed,
                       wmin=args.wmin, wmax=args.wmax)
    elif args.kind == "delaunay":
        g = delaunay_graph(args.n, seed=args.seed, wmin=args.wmin, wmax=args.wmax)
    elif args.kind == "random":
        g = random_connected_graph(args.n, args.extra_edges, seed=args.seed,
                                   wmin=args.wmin, wmax=args.wmax)
    else:
        g = random_tree(args.n, seed=args.seed, wmin=args.wmin, wmax=args.wmax)
    write_matrix_market(g, args.out, comment=f"generated {args.kind} seed {args.seed}")
    print(f"n={g.n} m={g.m} d={density(g):.6f}")
    return EXIT_OK


def cmd_rerun(args) -> int:
    man = RunManifest.read(args.manifest)
    argv = list(man.argv)
    if args.out:
        argv[argv.index("--out") + 1] = args.out
    return main(argv)


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dysparse", description="Dynamic spectral graph sparsification")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sparsify", help="build an initial sparsifier")
    s.add_argument("graph")
    s.add_argument("--density", type=float, default=0.10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--similarity-radius", type=int, default=2)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sparsify)

    s = sub.add_parser("gen-updates", help="generate an update stream")
    s.add_argument("graph")
    s.add_argument("--insert-frac", type=float, default=0.25)
    s.add_argument("--delete-frac", type=float, default=0.0)
    s.add_argument("--batches", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--insert-mode", choices=["uniform", "local", "mixed"], default="uniform")
    s.add_argument("--long-range-frac", type=float, default=0.1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_updates)

    s = sub.add_parser("replay", help="replay a stream and report per-batch CSV")
    s.add_argument("graph")
    s.add_argument("sparsifier")
    s.add_argument("stream")
    k = s.add_mutually_exclusive_group()
    k.add_argument("--K", type=float, default=10.0)
    k.add_argument("--auto-K", action="store_true")
    s.add_argument("--rho", type=float, default=0.1)
    s.add_argument("--probe-fraction", type=float, default=1.0)
    s.add_argument("--T", type=int, default=100)
    s.add_argument("--s", type=int, default=16)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=[IMMEDIATE, BATCHED], default=IMMEDIATE)
    s.add_argument("--eval-every", type=int, default=0)
    s.add_argument("--freeze-H", action="store_true")
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--out-H")
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("solve", help="PCG solve with the sparsifier as preconditioner")
    s.add_argument("graph")
    s.add_argument("sparsifier")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rhs", default="random", help="'random' or a text file of values")
    s.add_argument("--max-iter", type=int, default=None)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("eval", help="relative condition number of (G, H)")
    s.add_argument("graph")
    s.add_argument("sparsifier")
    s.add_argument("--method", choices=["auto", "dense", "iterative"], default="auto")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gen-graph", help="write a synthetic graph as MatrixMarket")
    s.add_argument("kind", choices=["grid", "delaunay", "random", "tree"])
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--rows", type=int, default=32)
    s.add_argument("--cols", type=int, default=32)
    s.add_argument("--diagonals", action="store_true")
    s.add_argument("--extra-edges", type=int, default=1000)
    s.add_argument("--wmin", type=float, default=1.0)
    s.add_argument("--wmax", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_graph)

    s = sub.add_parser("rerun", help="repeat a run from its manifest")
    s.add_argument("manifest")
    s.add_argument("--out", help="override the primary output path")
    s.set_defaults(func=cmd_rerun)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        if getattr(args, "s", 1) < 1 or getattr(args, "T", 1) < 1:
            raise UsageError("--s and --T must be positive")
        if getattr(args, "K", 0) < 0:
            raise UsageError("--K must be nonnegative")
        if getattr(args, "eval_every", 0) < 0:
            raise UsageError("--eval-every must be nonnegative")
        return args.func(args)
    except UsageError as exc:
        print(f"dysparse: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"dysparse: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GraphError, OSError, ValueError, KeyError) as exc:
        print(f"dysparse: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
