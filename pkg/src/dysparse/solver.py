"""Preconditioned conjugate gradient for Laplacian systems ``L_G x = b``.

The sparsifier Laplacian ``L_H`` serves as preconditioner.  Everything lives
on the zero-mean subspace: the right-hand side must sum to zero and iterates
are projected back to zero mean every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .graph_store import DynamicGraph, GraphError, laplacian
from .spectral import GroundedSolver, SpectralError, component_count

FACTOR_CAP = 2_000_000


@dataclass
class PcgResult:
    x: np.ndarray
    iterations: int
    relative_residual: float
    converged: bool
    residual_history: list[float] | None = None


def _center(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


class Preconditioner:
    """Applies ``L_H^+`` to zero-mean vectors.

    Uses a grounded sparse LU factorization up to ``factor_cap`` vertices, and
    an inner CG solve (tolerance 1e-10) above it.
    """

    def __init__(self, H, factor_cap: int = FACTOR_CAP):
        L = laplacian(H) if isinstance(H, DynamicGraph) else H.tocsr()
        if component_count(L) != 1:
            raise SpectralError("preconditioner graph is disconnected")
        self.n = L.shape[0]
        self.L = L
        self._direct = GroundedSolver(L) if self.n <= factor_cap else None

    def apply(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        scale = np.abs(b).sum()
        if scale > 0 and abs(b.sum()) > 1e-10 * scale:
            raise GraphError("preconditioner input must have zero mean")
        if self._direct is not None:
            return self._direct.solve(b)
        y, _ = spla.cg(self.L, b, rtol=1e-10, maxiter=10 * self.n)
        return _center(y)

    __call__ = apply


class IdentityPreconditioner:
    def apply(self, b):
        return _center(np.asarray(b, dtype=float))

    __call__ = apply


def build_preconditioner(H, factor_cap: int = FACTOR_CAP) -> Preconditioner:
    return Preconditioner(H, factor_cap)


def pcg_solve(LG, b, M=None, tol: float = 1e-8, max_iter: int | None = None,
              track: bool = False) -> PcgResult:
    """Solve ``L_G x = b`` by PCG with preconditioner ``M`` (identity if None).

    Stops when ``||b - L_G x|| / ||b|| < tol``.  The returned residual is
    recomputed from scratch, not taken from the recurrence.
    """
    if isinstance(LG, DynamicGraph):
        LG = laplacian(LG)
    n = LG.shape[0]
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise GraphError(f"rhs has shape {b.shape}, expected ({n},)")
    bnorm = np.linalg.norm(b)
    if bnorm > 0 and abs(b.sum()) > 1e-10 * np.abs(b).sum():
        raise GraphError("rhs must have zero mean")
    if M is None:
        M = IdentityPreconditioner()
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros(n)
    if bnorm == 0:
        return PcgResult(x, 0, 0.0, True, [] if track else None)

    r = _center(b.copy())
    z = M.apply(r)
    p = z.copy()
    rz = r @ z
    history = [1.0] if track else None
    it = 0
    converged = False
    while it < max_iter:
        Ap = LG @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r = _center(r - alpha * Ap)
        it += 1
        rel = np.linalg.norm(r) / bnorm
        if rel < tol:
            # confirm against the true residual; restart from it on drift
            r = _center(b - LG @ x)
            rel = np.linalg.norm(r) / bnorm
            if track:
                history.append(rel)
            if rel < tol:
                converged = True
                break
            z = M.apply(r)
            p = z.copy()
            rz = r @ z
            continue
        if track:
            history.append(rel)
        z = M.apply(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    x = _center(x)
    true_rel = float(np.linalg.norm(b - LG @ x) / bnorm)
    return PcgResult(x, it, true_rel, converged and true_rel < tol, history)


def random_rhs(n: int, seed: int = 0) -> np.ndarray:
    """Seeded standard-normal vector with its mean removed."""
    rng = np.random.default_rng(seed)
    return _center(rng.standard_normal(n))
