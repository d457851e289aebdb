"""Fixed-time minimal action, the Mane action potential and the barrier.

All tables are min-plus powers of the banded one-step kernel with the
``+alpha tau`` normalisation folded in; entry ``[i, j]`` is the cost of going
from ``x_i`` to ``x_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grids import ActionKernel, PhaseGrid, check_connected

EPS_POT = 5e-2


class NegativeCycleError(RuntimeError):
    """The alpha-corrected kernel has cycles of negative cost.

    Means ``alpha_hat`` underestimates the critical value; ``cycle_value``
    is the most negative closed-loop cost found.
    """

    def __init__(self, cycle_value: float):
        super().__init__(f"negative cycle of cost {cycle_value:.4g}: alpha_hat is too small")
        self.cycle_value = cycle_value


@dataclass(frozen=True)
class PotentialTable:
    values: np.ndarray
    kind: str
    c: float
    alpha_used: float
    positions: np.ndarray
    n_steps: int | None = None
    window: tuple[int, int] | None = None

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    def diagonal(self) -> np.ndarray:
        return np.diag(self.values).copy()

    def interp(self, i, y):
        """Value from grid position ``x_i`` to an off-grid target ``y``.

        Linear in ``y`` between the neighbouring grid columns, periodic.
        """
        hx = self.positions[1] - self.positions[0]
        s = np.mod(np.asarray(y, dtype=float), self.nx * hx) / hx
        lo = np.floor(s).astype(int) % self.nx
        hi = (lo + 1) % self.nx
        t = s - np.floor(s)
        return (1 - t) * self.values[i, lo] + t * self.values[i, hi]

    def interp_from(self, y, j):
        """Value from an off-grid source ``y`` to grid position ``x_j``."""
        hx = self.positions[1] - self.positions[0]
        s = np.mod(np.asarray(y, dtype=float), self.nx * hx) / hx
        lo = np.floor(s).astype(int) % self.nx
        hi = (lo + 1) % self.nx
        t = s - np.floor(s)
        return (1 - t) * self.values[lo, j] + t * self.values[hi, j]


def _identity(nx):
    eye = np.full((nx, nx), np.inf)
    np.fill_diagonal(eye, 0.0)
    return eye


def h_c_table(kernel: ActionKernel, grid: PhaseGrid, alpha_hat: float, n_steps: int) -> PotentialTable:
    """``n_steps``-fold min-plus power of the alpha-corrected kernel."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    check_connected(kernel)
    band = kernel.shifted(alpha_hat)
    table = _identity(kernel.nx)
    for _ in range(n_steps):
        table = kernels.minplus_band(table, band, kernel.offsets)
    return PotentialTable(table, "fixed_time", kernel.c, alpha_hat, grid.positions, n_steps=n_steps)


def default_phi_steps(grid: PhaseGrid) -> int:
    # simple paths have at most nx - 1 edges; twice that is ample
    return max(int(round(40.0 / grid.tau)), 2 * grid.nx)


def mane_potential(kernel: ActionKernel, grid: PhaseGrid, alpha_hat: float,
                   T_max_steps: int | None = None, eps_pot: float = EPS_POT,
                   stable_tol: float = 1e-6) -> PotentialTable:
    """``Phi(x_i, x_j) = min over 1 <= n <= T_max of h_n``, stopping early once stable.

    The zero-length path is folded in through ``Phi(x, x) := min(0, .)``.
    Raises :class:`NegativeCycleError` when a closed loop costs less than
    ``-eps_pot``.
    """
    check_connected(kernel)
    T_max = default_phi_steps(grid) if T_max_steps is None else int(T_max_steps)
    if T_max < 1:
        raise ValueError("T_max_steps must be >= 1")
    band = kernel.shifted(alpha_hat)
    one_step = kernels.minplus_band(_identity(kernel.nx), band, kernel.offsets)
    best = one_step
    steps = 1
    for steps in range(2, T_max + 1):
        nxt = np.minimum(one_step, kernels.minplus_band(best, band, kernel.offsets))
        both = np.isfinite(best) & np.isfinite(nxt)
        change = np.max(np.abs(best[both] - nxt[both]), initial=0.0)
        best = nxt
        if change <= stable_tol and np.isfinite(best).all():
            break
    loop = float(np.diag(best).min())
    if loop < -eps_pot:
        raise NegativeCycleError(loop)
    if not np.isfinite(best).all():
        raise ValueError(f"positions not mutually reachable within {T_max} steps")
    values = best.copy()
    np.fill_diagonal(values, np.minimum(0.0, np.diag(values)))
    return PotentialTable(values, "mane_potential", kernel.c, alpha_hat, grid.positions,
                          n_steps=steps)


def d_c(table: PotentialTable, i: int, j: int) -> float:
    """Symmetrised potential ``Phi(x_i, x_j) + Phi(x_j, x_i)``."""
    if table.kind != "mane_potential":
        raise ValueError("d_c needs a Mane potential table")
    return float(table.values[i, j] + table.values[j, i])


def d_c_matrix(table: PotentialTable) -> np.ndarray:
    if table.kind != "mane_potential":
        raise ValueError("d_c needs a Mane potential table")
    return table.values + table.values.T


def default_barrier_window(grid: PhaseGrid) -> tuple[int, int]:
    return int(round(10.0 / grid.tau)), int(round(40.0 / grid.tau))


def peierls_barrier(kernel: ActionKernel, grid: PhaseGrid, alpha_hat: float,
                    T_min_steps: int | None = None, T_max_steps: int | None = None,
                    eps_pot: float = EPS_POT) -> PotentialTable:
    """Minimum of ``h_n`` over the window ``T_min <= n <= T_max``.

    Stands in for the long-time lim inf of the fixed-time action.
    """
    check_connected(kernel)
    lo_default, hi_default = default_barrier_window(grid)
    T_min = lo_default if T_min_steps is None else int(T_min_steps)
    T_max = hi_default if T_max_steps is None else int(T_max_steps)
    if not 1 <= T_min <= T_max:
        raise ValueError("need 1 <= T_min_steps <= T_max_steps")
    band = kernel.shifted(alpha_hat)
    table = _identity(kernel.nx)
    best = np.full_like(table, np.inf)
    for n in range(1, T_max + 1):
        table = kernels.minplus_band(table, band, kernel.offsets)
        if n >= T_min:
            np.minimum(best, table, out=best)
    loop = float(np.diag(best).min())
    if loop < -eps_pot:
        raise NegativeCycleError(loop)
    if not np.isfinite(best).all():
        raise ValueError("barrier window too short to connect all positions")
    return PotentialTable(best, "barrier", kernel.c, alpha_hat, grid.positions,
                          window=(T_min, T_max))


def triangle_slack(table: PotentialTable, triples) -> float:
    """Largest violation of ``Phi(x,z) <= Phi(x,y) + Phi(y,z)`` over index triples."""
    t = np.asarray(triples, dtype=int).reshape(-1, 3)
    v = table.values
    viol = v[t[:, 0], t[:, 2]] - v[t[:, 0], t[:, 1]] - v[t[:, 1], t[:, 2]]
    return float(max(viol.max(initial=-math.inf), 0.0))
