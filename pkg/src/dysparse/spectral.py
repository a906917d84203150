"""Exact and iterative spectral measurements of Laplacians.

Dense routines (pseudo-inverse, eigendecomposition, pencil eigensolve) are
ground-truth oracles for small graphs.  ``condition_number`` also has an
iterative path: Lanczos on the grounded pencil, used once ``n`` exceeds the
dense cap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .graph_store import DynamicGraph, GraphError, laplacian

DENSE_CAP = 5000

SparseLaplacian = sp.csr_matrix


class SpectralError(RuntimeError):
    """Numerical failure: disconnected input, singular solve, no convergence."""


class NotConverged(SpectralError):
    def __init__(self, msg, estimate=None):
        super().__init__(msg)
        self.estimate = estimate


@dataclass
class DenseSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    pinv: np.ndarray


@dataclass
class ConditionEstimate:
    kappa: float
    lambda_max: float
    lambda_min: float
    method: str
    iterations_used: int = 0


def _as_laplacian(L) -> sp.csr_matrix:
    if isinstance(L, DynamicGraph):
        return laplacian(L)
    return sp.csr_matrix(L)


def component_count(L) -> int:
    L = _as_laplacian(L)
    A = L.copy()
    A.setdiag(0)
    A.eliminate_zeros()
    return connected_components(A, directed=False)[0]


def _require_connected(L, what="graph"):
    if component_count(L) != 1:
        raise SpectralError(f"{what} is disconnected")


def _dense(L, cap) -> np.ndarray:
    L = _as_laplacian(L)
    n = L.shape[0]
    if n > cap:
        raise SpectralError(f"n = {n} exceeds the dense cap {cap}")
    return L.toarray()


def pseudo_inverse(L, cap: int = DENSE_CAP) -> np.ndarray:
    """L^+ of a connected Laplacian via ``(L + J/n)^{-1} - J/n``."""
    A = _dense(L, cap)
    _require_connected(L)
    n = A.shape[0]
    J = np.full((n, n), 1.0 / n)
    P = la.inv(A + J) - J
    return (P + P.T) / 2


def dense_spectrum(L, cap: int = DENSE_CAP) -> DenseSpectrum:
    """Ascending eigenpairs and pseudo-inverse built from them."""
    A = _dense(L, cap)
    lam, U = la.eigh(A)
    tol = max(abs(lam[-1]), 1.0) * A.shape[0] * np.finfo(float).eps * 10
    inv = np.where(lam > tol, 1.0 / np.where(lam > tol, lam, 1.0), 0.0)
    P = (U * inv) @ U.T
    return DenseSpectrum(lam, U, (P + P.T) / 2)


def probe(n: int, p: int, q: int) -> np.ndarray:
    if p == q or not (0 <= p < n and 0 <= q < n):
        raise GraphError(f"invalid resistance query ({p}, {q}) for n = {n}")
    b = np.zeros(n)
    b[p] = 1.0
    b[q] = -1.0
    return b


def effective_resistance_exact(L, p: int, q: int, cap: int = DENSE_CAP,
                               pinv: np.ndarray | None = None) -> float:
    """``b_pq^T L^+ b_pq`` from a dense pseudo-inverse."""
    L = _as_laplacian(L)
    n = L.shape[0]
    probe(n, p, q)
    if pinv is None:
        ncomp, labels = connected_components(abs(L) > 0, directed=False)
        if labels[p] != labels[q]:
            raise SpectralError(f"vertices {p} and {q} are disconnected")
        pinv = pseudo_inverse(L, cap) if ncomp == 1 else np.linalg.pinv(_dense(L, cap), hermitian=True)
    return float(pinv[p, p] + pinv[q, q] - 2 * pinv[p, q])


def effective_resistance_eigensum(spec: DenseSpectrum, p: int, q: int) -> float:
    """Resistance as the eigen-sum ``sum_{i>=2} (u_i^T b)^2 / lambda_i``."""
    lam, U = spec.eigenvalues, spec.eigenvectors
    c = U[p, 1:] - U[q, 1:]
    return float(np.sum(c * c / lam[1:]))


def all_pairs_resistance(L, cap: int = DENSE_CAP) -> np.ndarray:
    P = pseudo_inverse(L, cap)
    d = np.diag(P)
    return d[:, None] + d[None, :] - 2 * P


def spectral_distortion(w_pq: float, R: float) -> float:
    if not w_pq > 0 or R < 0:
        raise ValueError("need w_pq > 0 and R >= 0")
    return w_pq * R


def eigen_basis(spec: DenseSpectrum, K: int) -> np.ndarray:
    """Columns ``u_i / sqrt(lambda_i)`` for ``i = 2..K`` (1-based)."""
    lam, U = spec.eigenvalues, spec.eigenvectors
    return U[:, 1:K] / np.sqrt(lam[1:K])


def subspace_distortion(spec: DenseSpectrum, p: int, q: int, w_pq: float, K: int) -> float:
    """``w_pq * ||U_K^T b_pq||^2``; tends to ``w_pq * R_eff`` as K -> n."""
    UK = eigen_basis(spec, K)
    c = UK[p] - UK[q]
    return float(w_pq * c @ c)


def eigen_perturbation(spec: DenseSpectrum, p: int, q: int, w: float) -> np.ndarray:
    """First-order eigenvalue shifts ``w (u_i^T b_pq)^2`` from adding edge (p, q, w)."""
    U = spec.eigenvectors
    c = U[p] - U[q]
    return w * c * c


def _complement_basis(n: int) -> np.ndarray:
    # orthonormal basis of the subspace orthogonal to the all-ones vector
    Q, _ = np.linalg.qr(np.eye(n) - 1.0 / n)
    return Q[:, : n - 1]


def pencil_eigenvalues(LG, LH, cap: int = DENSE_CAP) -> np.ndarray:
    """Generalized eigenvalues of (L_G, L_H) restricted to ``1^perp``."""
    A = _dense(LG, cap)
    B = _dense(LH, cap)
    if A.shape != B.shape:
        raise GraphError("Laplacians differ in size")
    _require_connected(LH, "sparsifier")
    Q = _complement_basis(A.shape[0])
    Ar = Q.T @ A @ Q
    Br = Q.T @ B @ Q
    return la.eigh((Ar + Ar.T) / 2, (Br + Br.T) / 2, eigvals_only=True)


def _grounded(L: sp.csr_matrix) -> sp.csc_matrix:
    return sp.csc_matrix(L[1:, 1:])


class GroundedSolver:
    """Solve ``L y = b`` for zero-mean ``b``, returning the zero-mean solution.

    Vertex 0 is grounded (row/column dropped), the reduced matrix is factored
    by sparse LU, and the result is re-centered.
    """

    def __init__(self, L):
        L = _as_laplacian(L)
        _require_connected(L)
        self.n = L.shape[0]
        if self.n == 1:
            self._lu = None
            return
        try:
            self._lu = spla.splu(_grounded(L))
        except RuntimeError as exc:
            raise SpectralError(f"factorization failed: {exc}") from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        y = np.zeros(self.n)
        if self._lu is not None:
            y[1:] = self._lu.solve(np.asarray(b, dtype=float)[1:])
        return y - y.mean()


def lanczos_extreme(apply_A, apply_B, solve_B, n: int, max_iter: int, tol: float,
                    seed: int = 0, both: bool = True) -> tuple[float, float, int, bool]:
    """Extreme eigenvalues of the symmetric pencil (A, B) on zero-mean vectors.

    Lanczos on ``B^+ A`` in the B inner product with full reorthogonalization.
    ``solve_B`` must return the zero-mean solution of ``B y = b``.  Returns
    ``(lambda_min, lambda_max, iterations, converged)``; converged means the
    extreme Ritz residuals (only the top one when ``both`` is False) fell
    below ``tol`` relative to their Ritz values, or the Krylov space was
    exhausted.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v -= v.mean()
    Bv = apply_B(v)
    nrm = np.sqrt(max(float(v @ Bv), 0.0))
    if nrm == 0:
        raise SpectralError("degenerate Lanczos start vector")
    V = [v / nrm]
    BV = [Bv / nrm]
    alphas: list[float] = []
    betas: list[float] = []
    lo = hi = float("nan")
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        Av = apply_A(V[-1])
        alpha = float(V[-1] @ Av)
        w = solve_B(Av) - alpha * V[-1]
        if betas:
            w -= betas[-1] * V[-2]
        for _ in range(2):
            for vj, Bvj in zip(V, BV):
                w -= (Bvj @ w) * vj
        Bw = apply_B(w)
        beta = np.sqrt(max(float(w @ Bw), 0.0))
        alphas.append(alpha)
        if betas:
            theta, S = la.eigh_tridiagonal(np.array(alphas), np.array(betas))
        else:
            theta, S = np.array([alpha]), np.ones((1, 1))
        lo, hi = float(theta[0]), float(theta[-1])
        if k >= n - 1 or beta <= 1e-12 * max(abs(hi), 1e-300):
            converged = True
            break
        res_lo = abs(beta * S[-1, 0])
        res_hi = abs(beta * S[-1, -1])
        if k >= 3 and res_hi <= tol * abs(hi) and (not both or res_lo <= tol * abs(lo)):
            converged = True
            break
        betas.append(beta)
        V.append(w / beta)
        BV.append(Bw / beta)
    return lo, hi, k, converged


def condition_number(LG, LH, method: str = "auto", tol: float = 1e-6,
                     max_iter: int = 500, cap: int = DENSE_CAP, seed: int = 0) -> ConditionEstimate:
    """Relative condition number kappa(L_G, L_H) = lambda_max / lambda_min."""
    LG = _as_laplacian(LG)
    LH = _as_laplacian(LH)
    if LG.shape != LH.shape:
        raise GraphError("Laplacians differ in size")
    n = LG.shape[0]
    if method == "auto":
        method = "dense" if n <= min(cap, 2000) else "iterative"
    _require_connected(LG, "graph")
    _require_connected(LH, "sparsifier")
    if n < 2:
        return ConditionEstimate(1.0, 1.0, 1.0, method, 0)
    if method == "dense":
        lam = pencil_eigenvalues(LG, LH, cap)
        return ConditionEstimate(float(lam[-1] / lam[0]), float(lam[-1]), float(lam[0]), "dense", 0)
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")

    solve_H = GroundedSolver(LH).solve
    solve_G = GroundedSolver(LG).solve
    apply_G = lambda x: LG @ x
    apply_H = lambda x: LH @ x
    # lambda_max from the pencil (L_G, L_H); lambda_min as 1 / top of (L_H, L_G)
    _, hi, it1, ok1 = lanczos_extreme(apply_G, apply_H, solve_H, n, max_iter, tol, seed, both=False)
    _, hi_rev, it2, ok2 = lanczos_extreme(apply_H, apply_G, solve_G, n, max_iter, tol, seed + 1,
                                         both=False)
    lo = 1.0 / hi_rev
    est = ConditionEstimate(hi / lo, hi, lo, "iterative", it1 + it2)
    if not (ok1 and ok2):
        raise NotConverged(f"Lanczos did not converge in {max_iter} iterations", est)
    return est


def commute_time_estimate(g: DynamicGraph, p: int, q: int, trials: int, seed: int = 0) -> float:
    """Monte Carlo mean of p -> q -> p round-trip steps of the plain weighted walk."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if p == q:
        return 0.0
    rng = random.Random(seed)
    rand = rng.random
    nbrs, wts = g._nbr, g._wt
    tot = [sum(w) for w in wts]
    if tot[p] == 0 or tot[q] == 0:
        raise SpectralError("commute time needs non-isolated endpoints")

    def hit(a, b):
        steps = 0
        cur = a
        while cur != b:
            r = rand() * tot[cur]
            nb, wt = nbrs[cur], wts[cur]
            j = len(nb) - 1
            for i in range(len(nb)):
                r -= wt[i]
                if r < 0.0:
                    j = i
                    break
            cur = nb[j]
            steps += 1
        return steps

    total = 0
    for _ in range(trials):
        total += hit(p, q) + hit(q, p)
    return total / trials
