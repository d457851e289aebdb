"""Dense revised simplex for ``min c.x  s.t.  A x = b, x >= 0``.

The basis inverse is kept explicitly and updated by product-form pivots,
with a fresh factorisation every ``refactor_every`` iterations. Pricing uses
Bland's rule (lowest-index improving column, lowest-index leaving variable
among ratio ties), which cannot cycle. The constraint matrix is any object
exposing ``shape``, ``column(j)`` and ``rmatvec(y)``; plain arrays are wrapped
by :class:`DenseColumns`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


class LPError(RuntimeError):
    pass


class InfeasibleError(LPError):
    pass


class UnboundedError(LPError):
    pass


class DenseColumns:
    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)
        self.shape = self.A.shape

    def column(self, j: int) -> np.ndarray:
        return self.A[:, j]

    def columns(self, idx) -> np.ndarray:
        return self.A[:, idx]

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        return y @ self.A


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    basis: list[int]
    duals: np.ndarray
    iterations: int


def _columns(A, idx):
    if hasattr(A, "columns"):
        return A.columns(idx)
    return np.column_stack([A.column(j) for j in idx])


class RevisedSimplex:
    def __init__(self, c, A, b, *, tol: float = 1e-9, refactor_every: int = 100,
                 max_iters: int = 1_000_000):
        self.A = A if hasattr(A, "rmatvec") else DenseColumns(A)
        self.c = np.asarray(c, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.m, self.n = self.A.shape
        if self.c.shape != (self.n,) or self.b.shape != (self.m,):
            raise ValueError("dimension mismatch between c, A and b")
        self.tol = tol
        self.refactor_every = refactor_every
        self.max_iters = max_iters

    def initial_basis(self, seed: list[int], candidates=None) -> list[int]:
        """Extend ``seed`` columns to a full basis with ``b`` in its cone.

        There is no phase one: ``b`` must already be a nonnegative combination
        of the seed columns (true for the closed-measure LPs, where the seed
        is a rest point carrying all mass). The remaining slots are filled
        with degenerate columns from ``candidates``, picked by Gram-Schmidt
        in index order.
        """
        m = self.m
        basis = [int(j) for j in seed]
        Q = np.linalg.qr(_columns(self.A, basis))[0] if basis else np.zeros((m, 0))
        idx = np.arange(self.n) if candidates is None else np.asarray(candidates)
        for start in range(0, idx.size, 4096):
            if len(basis) == m:
                break
            chunk = idx[start:start + 4096]
            cols = _columns(self.A, chunk)
            for t, j in enumerate(chunk):
                if len(basis) == m:
                    break
                col = cols[:, t]
                r = col - Q @ (Q.T @ col)
                nr = np.linalg.norm(r)
                if nr > 1e-7 * max(1.0, np.linalg.norm(col)):
                    basis.append(int(j))
                    Q = np.column_stack([Q, r / nr])
        if len(basis) < m:
            raise LPError("constraint matrix is rank deficient")
        xB = np.linalg.solve(_columns(self.A, basis), self.b)
        if xB.min() < -1e-9:
            raise InfeasibleError("seed basis is not primal feasible")
        return basis

    def solve(self, basis: list[int]) -> LPResult:
        basis = list(basis)
        if len(basis) != self.m:
            raise ValueError("basis must have one column per row")
        A, c, tol = self.A, self.c, self.tol
        Binv = np.linalg.inv(_columns(A, basis))
        xB = Binv @ self.b
        if xB.min() < -1e-8:
            raise InfeasibleError("starting basis is not feasible")
        xB = np.maximum(xB, 0.0)
        for it in range(1, self.max_iters + 1):
            y = c[basis] @ Binv
            reduced = c - A.rmatvec(y)
            improving = np.flatnonzero(reduced < -tol)
            if improving.size == 0:
                xB = np.maximum(np.linalg.solve(_columns(A, basis), self.b), 0.0)
                x = np.zeros(self.n)
                x[basis] = xB
                log.debug("simplex optimal after %d pivots", it - 1)
                return LPResult(x, float(c @ x), basis, y, it - 1)
            enter = int(improving[0])
            col = Binv @ A.column(enter)
            pos = col > tol
            if not pos.any():
                raise UnboundedError(f"column {enter} gives an unbounded ray")
            ratios = np.full(self.m, np.inf)
            ratios[pos] = xB[pos] / col[pos]
            step = ratios.min()
            ties = np.flatnonzero(ratios <= step + tol * max(1.0, step))
            r = int(ties[np.argmin(np.asarray(basis)[ties])])
            step = ratios[r]
            xB = xB - step * col
            xB[r] = step
            pivot_row = Binv[r] / col[r]
            Binv -= np.outer(col, pivot_row)
            Binv[r] = pivot_row
            basis[r] = enter
            if it % self.refactor_every == 0:
                Binv = np.linalg.inv(_columns(A, basis))
                xB = np.maximum(Binv @ self.b, 0.0)
        raise LPError(f"simplex did not terminate in {self.max_iters} iterations")
