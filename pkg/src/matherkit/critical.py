"""Critical value alpha(c), its Fenchel dual beta(h) and minimizing measures.

Two independent routes to alpha:

* ``alpha_lax_oleinik`` iterates the discrete Lax-Oleinik semigroup on the
  position grid and reads off the long-run cost per unit time;
* ``alpha_lp`` minimises the average of ``L - c v`` over closed probability
  measures on the phase grid with the in-repo simplex solver.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grids import ActionKernel, PhaseGrid, check_connected
from .model import CohomologyClass, LagrangianSpec, eval_lagrangian
from .simplex import RevisedSimplex


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class OccupationMeasure:
    """Nonnegative weights on the (x_i, v_j) phase grid."""

    weights: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def rotation(self) -> float:
        return float((self.weights * self.velocities[None, :]).sum())

    def flux(self) -> np.ndarray:
        """Velocity-weighted mass carried through each position."""
        return self.weights @ self.velocities

    def closedness_residuals(self, order: int) -> np.ndarray:
        f = self.flux()
        res = []
        for k in range(1, order + 1):
            res.append(k * np.cos(k * self.positions) @ f)
            res.append(-k * np.sin(k * self.positions) @ f)
        return np.abs(np.array(res))

    def support(self, threshold: float = 0.0):
        i, j = np.nonzero(self.weights > threshold)
        return self.positions[i], self.velocities[j], self.weights[i, j]

    def action(self, spec: LagrangianSpec, c: float = 0.0) -> float:
        X, V = np.meshgrid(self.positions, self.velocities, indexing="ij")
        return float((self.weights * (eval_lagrangian(spec, X, V) - c * V)).sum())


@dataclass
class CriticalValueReport:
    alpha: float
    method: str
    residual: float
    converged: bool = True
    measure: OccupationMeasure | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"alpha": self.alpha, "method": self.method, "residual": self.residual,
               "converged": self.converged}
        if self.measure is not None:
            out["rotation"] = self.measure.rotation
        out.update({k: v for k, v in self.details.items() if np.isscalar(v)})
        return out


def _karp_cycle_mean(kept: np.ndarray) -> float:
    """Minimum mean cycle weight from walks of length 0..n ending at each node.

    ``kept[k, v]`` is the cheapest k-edge walk ending at v from any start,
    which is exactly the Lax-Oleinik iterate from ``u_0 = 0``.
    """
    n = kept.shape[0] - 1
    last = kept[n]
    ks = np.arange(n)
    with np.errstate(invalid="ignore"):
        ratios = (last[None, :] - kept[:n]) / (n - ks)[:, None]
    ratios = np.where(np.isfinite(kept[:n]), ratios, -np.inf)
    per_node = ratios.max(axis=0)
    per_node = per_node[np.isfinite(last)]
    return float(per_node.min())


def alpha_lax_oleinik(kernel: ActionKernel, grid: PhaseGrid, max_iters: int = 40000,
                      tol: float = 1e-3, min_iters: int = 2000) -> CriticalValueReport:
    """Critical value from min-plus value iteration with ``u_0 = 0``.

    The long-run decrement ``(min u_N - min u_{N/2}) / (N/2)`` is the
    convergence diagnostic: its residual is the spread of the average
    decrement over the last ten blocks of the second half, in alpha units.
    The iteration count doubles from ``min_iters`` until the residual drops
    below ``tol`` or ``max_iters`` is reached.

    The returned ``alpha`` is the exact minimum cycle mean of the discrete
    kernel, obtained by Karp's formula from the first ``nx`` iterates of the
    same sequence; ``details["alpha_decrement"]`` holds the decrement
    estimate. The two agree to O(1/N).
    """
    check_connected(kernel)
    nx = kernel.nx
    tau = kernel.tau
    n_iters = max(min_iters, 2 * nx + 20)
    while True:
        n_iters = min(n_iters, max_iters)
        _, mins, kept = kernels.lax_oleinik(kernel.band, kernel.offsets, np.zeros(nx),
                                            n_iters, keep=nx)
        half = n_iters // 2
        decrement = (mins[n_iters] - mins[half]) / (n_iters - half)
        alpha_dec = -decrement / tau
        blocks = np.array_split(np.arange(half, n_iters + 1), 10)
        block_alpha = np.array([-(mins[b[-1]] - mins[b[0]]) / ((b[-1] - b[0]) * tau)
                                for b in blocks if b[-1] > b[0]])
        residual = float(block_alpha.max() - block_alpha.min())
        if residual <= tol or n_iters >= max_iters:
            break
        n_iters *= 2
    alpha = -_karp_cycle_mean(kept) / tau + 0.0  # no negative zero
    converged = residual <= tol and abs(alpha - alpha_dec) <= max(tol, 1e-9)
    if not converged:
        warnings.warn(f"Lax-Oleinik iteration not converged after {n_iters} steps "
                      f"(residual {residual:.3g} > tol {tol:.3g})", ConvergenceWarning,
                      stacklevel=2)
    return CriticalValueReport(alpha=float(alpha), method="lax_oleinik", residual=residual,
                               converged=converged,
                               details={"alpha_decrement": float(alpha_dec) + 0.0,
                                        "iterations": int(n_iters)})


class ClosedMeasureColumns:
    """Constraint matrix of the closed-measure LP in factored form.

    Column (i, j) is ``[1, v_j * dphi_1(x_i), ..., v_j * dphi_2K(x_i)]``; the
    test functions are sin(kx), cos(kx) for k = 1..K.
    """

    def __init__(self, positions, velocities, order):
        self.positions = positions
        self.velocities = velocities
        self.nx, self.nv = positions.size, velocities.size
        rows = []
        for k in range(1, order + 1):
            rows.append(k * np.cos(k * positions))
            rows.append(-k * np.sin(k * positions))
        self.D = np.array(rows).reshape(2 * order, self.nx)
        self.shape = (2 * order + 1, self.nx * self.nv)

    def column(self, idx: int) -> np.ndarray:
        i, j = divmod(int(idx), self.nv)
        out = np.empty(self.shape[0])
        out[0] = 1.0
        out[1:] = self.D[:, i] * self.velocities[j]
        return out

    def columns(self, idx) -> np.ndarray:
        i, j = np.divmod(np.asarray(idx, dtype=np.int64), self.nv)
        top = np.ones((1, i.size))
        return np.vstack([top, self.D[:, i] * self.velocities[j][None, :]])

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        g = y[1:] @ self.D
        return (y[0] + np.outer(g, self.velocities)).ravel()


def default_fourier_order(grid: PhaseGrid) -> int:
    """Largest order whose test functions stay independent on the grid."""
    return max(1, (grid.nx - 1) // 2)


def alpha_lp(spec: LagrangianSpec, grid: PhaseGrid, c, fourier_order: int | None = None,
             tol: float = 1e-9) -> CriticalValueReport:
    """Critical value as ``-min`` of the closed-measure linear program."""
    c = float(CohomologyClass.coerce(c))
    K = default_fourier_order(grid) if fourier_order is None else int(fourier_order)
    if K < 1:
        raise ValueError("fourier_order must be >= 1")
    if 2 * K + 1 > grid.nx:
        raise ValueError(f"fourier_order {K} exceeds what {grid.nx} positions resolve")
    x, v = grid.positions, grid.velocities
    X, V = np.meshgrid(x, v, indexing="ij")
    cost = (eval_lagrangian(spec, X, V) - c * V).ravel()
    A = ClosedMeasureColumns(x, v, K)
    b = np.zeros(A.shape[0])
    b[0] = 1.0
    lp = RevisedSimplex(cost, A, b, tol=tol)
    # seed: all mass at rest at the position of least rest cost
    rest = int(np.argmin(np.abs(v)))
    if abs(v[rest]) > 1e-12:
        raise ValueError("velocity grid must contain v = 0 (use odd nv)")
    i0 = int(np.argmin(cost.reshape(grid.nx, grid.nv)[:, rest]))
    seed = i0 * grid.nv + rest
    fill = np.arange(grid.nx) * grid.nv + (grid.nv - 1)
    basis = lp.initial_basis([seed], candidates=fill[fill != seed])
    result = lp.solve(basis)
    weights = result.x.reshape(grid.nx, grid.nv)
    weights = weights / weights.sum()
    measure = OccupationMeasure(weights, x, v)
    residual = float(measure.closedness_residuals(K).max(initial=0.0))
    return CriticalValueReport(alpha=-result.objective + 0.0, method="lp", residual=residual,
                               converged=True, measure=measure,
                               details={"iterations": result.iterations, "fourier_order": K})


@dataclass(frozen=True)
class FenchelEstimate:
    value: float
    argmax_c: float
    at_boundary: bool

    def __float__(self):
        return self.value


def _samples(alpha_samples):
    arr = np.asarray(alpha_samples, dtype=float)
    if arr.size == 0:
        raise ValueError("alpha sample table is empty")
    arr = arr.reshape(-1, 2)
    order = np.argsort(arr[:, 0], kind="stable")
    return arr[order, 0], arr[order, 1]


def beta_fenchel(alpha_samples, h: float) -> FenchelEstimate:
    """``beta(h) = max_c (c h - alpha(c))`` over the sampled classes.

    When the maximiser sits at the edge of the sampled range the value is
    only a lower bound and ``at_boundary`` is set.
    """
    cs, alphas = _samples(alpha_samples)
    vals = cs * h - alphas
    k = int(np.argmax(vals))
    at_boundary = cs.size > 1 and k in (0, cs.size - 1)
    if at_boundary:
        warnings.warn(f"Fenchel maximiser for h={h} at sample boundary c={cs[k]}; "
                      "value is a lower bound", ConvergenceWarning, stacklevel=2)
    return FenchelEstimate(float(vals[k]) + 0.0, float(cs[k]), bool(at_boundary))


def subdifferential_alpha(alpha_samples, c: float, noise: float = 1e-2) -> tuple[float, float]:
    """One-sided difference slopes ``[left, right]`` of alpha at a sampled class."""
    cs, alphas = _samples(alpha_samples)
    k = int(np.argmin(np.abs(cs - c)))
    if not math.isclose(cs[k], c, abs_tol=1e-9):
        raise ValueError(f"class {c} is not among the samples")
    if k == 0 or k == cs.size - 1:
        raise ValueError(f"class {c} lies on the boundary of the samples")
    left = (alphas[k] - alphas[k - 1]) / (cs[k] - cs[k - 1])
    right = (alphas[k + 1] - alphas[k]) / (cs[k + 1] - cs[k])
    if left > right + noise:
        warnings.warn(f"alpha samples not convex at c={c}: left {left:.4g} > right {right:.4g}",
                      ConvergenceWarning, stacklevel=2)
    return float(left), float(right)
