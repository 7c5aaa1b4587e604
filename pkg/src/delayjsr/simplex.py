"""Dense two-phase tableau simplex for small standard-form LPs.

Solves ``min c @ x  s.t.  A @ x == b, x >= 0``.  Pricing is Dantzig's
most-negative reduced cost; after a run of degenerate pivots the solver
switches to Bland's rule (smallest eligible index for both the entering and
the leaving variable) for the rest of the phase, which rules out cycling.
The polytope routines only ever build LPs with a handful of rows, so a dense
tableau updated with a rank-one numpy operation per pivot is fast enough.
"""
from typing import NamedTuple

import numpy as np

from .errors import LPFailureError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LPResult(NamedTuple):
    status: str
    x: np.ndarray
    fun: float
    nit: int


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _iterate(T, basis, ncols, tol, max_iter, nit):
    """Pivot on tableau ``T`` until optimal or unbounded."""
    m = T.shape[0] - 1
    bland = False
    degenerate = 0
    while True:
        if nit >= max_iter:
            raise LPFailureError(f"simplex did not terminate in {max_iter} pivots")
        cost = T[m, :ncols]
        if bland:
            neg = np.flatnonzero(cost < -tol)
            if neg.size == 0:
                return OPTIMAL, nit
            j = int(neg[0])
        else:
            j = int(np.argmin(cost))
            if cost[j] >= -tol:
                return OPTIMAL, nit
        colj = T[:m, j]
        rows = np.flatnonzero(colj > tol)
        if rows.size == 0:
            return UNBOUNDED, nit
        ratios = T[rows, -1] / colj[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol * max(1.0, abs(best))]
        r = int(min(tied, key=lambda i: basis[i]))
        if best <= tol:
            degenerate += 1
            bland = bland or degenerate > 2 * m
        else:
            degenerate = 0
        _pivot(T, r, j)
        basis[r] = j
        nit += 1


def solve_standard(c, A, b, tol=1e-10, max_iter=None):
    """Minimise ``c @ x`` subject to ``A @ x == b`` and ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    A = np.array(A, dtype=float, ndmin=2)
    b = np.array(b, dtype=float).reshape(-1)
    m, n = A.shape
    if max_iter is None:
        max_iter = 50 * (m + n) + 100

    flip = b < 0
    A[flip] *= -1.0
    b = np.where(flip, -b, b)

    # phase 1: artificial basis
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    _, nit = _iterate(T, basis, n + m, tol, max_iter, 0)

    infeas = -T[m, -1]
    if infeas > 1e-9 * max(1.0, float(np.abs(b).sum())):
        return LPResult(INFEASIBLE, np.full(n, np.nan), np.inf, nit)

    keep = []
    for i in range(m):
        if basis[i] >= n:
            cand = np.flatnonzero(np.abs(T[i, :n]) > tol)
            if cand.size == 0:
                continue  # redundant equality
            _pivot(T, i, int(cand[0]))
            basis[i] = int(cand[0])
            nit += 1
        keep.append(i)

    # phase 2 on the original columns
    T2 = np.empty((len(keep) + 1, n + 1))
    T2[:-1, :n] = T[keep, :n]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[i] for i in keep]
    T2[-1, :n] = c
    T2[-1, -1] = 0.0
    for i, bj in enumerate(basis):
        T2[-1] -= c[bj] * T2[i]
    status, nit = _iterate(T2, basis, n, tol, max_iter, nit)

    x = np.zeros(n)
    x[basis] = T2[:-1, -1]
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, x, -np.inf, nit)
    return LPResult(OPTIMAL, x, float(c @ x), nit)
