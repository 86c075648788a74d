"""Expected hitting times in finite Markov chains (dense or sparse)."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 2000


def _as_csr(matrix) -> sp.csr_matrix:
    if sp.issparse(matrix):
        return sp.csr_matrix(matrix)
    return sp.csr_matrix(np.asarray(matrix))


def _backward_closure(rev: sp.csr_matrix, seeds: np.ndarray, blocked: np.ndarray) -> np.ndarray:
    """Nodes that reach ``seeds``; paths may not leave from ``blocked`` nodes."""
    seen = seeds.copy()
    frontier = np.flatnonzero(seeds)
    while frontier.size:
        cand = rev[frontier].indices
        cand = cand[~seen[cand] & ~blocked[cand]]
        cand = np.unique(cand)
        seen[cand] = True
        frontier = cand
    return seen


def hitting_support(matrix, targets: np.ndarray) -> np.ndarray:
    """States from which ``targets`` is hit with probability one.

    This is the largest set C such that every state of C reaches a target
    and no non-target state of C has a successor outside C.
    """
    A = _as_csr(matrix)
    targets = np.asarray(targets, dtype=bool)
    A = A.multiply((~targets).astype(float)[:, None]).tocsr()
    A.eliminate_zeros()
    rev = A.T.tocsr()
    reaches = _backward_closure(rev, targets, targets)
    doomed = _backward_closure(rev, ~reaches, targets)
    return ~doomed


def solve_hitting(A: sp.csr_matrix, rows: np.ndarray) -> np.ndarray:
    """Solve ``y = 1 + A[rows, rows] y`` for the states in ``rows``."""
    n = len(rows)
    if n == 0:
        return np.zeros(0)
    sub = A[rows][:, rows]
    if n <= DENSE_LIMIT:
        M = np.eye(n) - sub.toarray()
        return np.linalg.solve(M, np.ones(n))
    M = (sp.identity(n, format="csc") - sub.tocsc()).tocsc()
    return spla.spsolve(M, np.ones(n))


def hitting_times(matrix, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Expected number of steps to reach ``targets`` from every state.

    Returns ``(times, support)``; ``times`` is ``inf`` outside the
    almost-sure support and ``0`` on targets.
    """
    A = _as_csr(matrix)
    targets = np.asarray(targets, dtype=bool)
    support = hitting_support(A, targets)
    times = np.full(len(targets), np.inf)
    times[targets] = 0.0
    rows = np.flatnonzero(support & ~targets)
    times[rows] = solve_hitting(A, rows)
    return times, support
