"""Point-cloud approximations of the Mather, Aubry and Mane sets.

All clouds live in ``T x R`` with the metric
``sqrt(torus_dist(x1, x2)**2 + (v1 - v2)**2)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .critical import OccupationMeasure
from .grids import ActionKernel, PhaseGrid, build_kernel
from .model import TWO_PI, LagrangianSpec, eval_lagrangian, torus_dist
from .potential import EPS_POT, PotentialTable

LABELS = ("mather", "aubry", "mane", "reference")


@dataclass(frozen=True)
class PointCloud:
    """Finite set of phase points ``(x, v)`` with the grid spacing it came from.

    Points closer than half a cell in both coordinates are merged on
    construction, keeping the first occurrence.
    """

    points: np.ndarray
    label: str = "reference"
    tolerance: float = 0.0
    hx: float = TWO_PI / 256
    hv: float = 8.0 / 128

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown cloud label {self.label!r}")
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        pts = np.column_stack([np.mod(pts[:, 0], TWO_PI), pts[:, 1]])
        if pts.size:
            nx = max(1, int(round(TWO_PI / self.hx)))
            keys = np.column_stack([np.rint(pts[:, 0] / self.hx).astype(np.int64) % nx,
                                    np.rint(pts[:, 1] / self.hv).astype(np.int64)])
            _, first = np.unique(keys, axis=0, return_index=True)
            pts = pts[np.sort(first)]
        object.__setattr__(self, "points", pts)

    @classmethod
    def on_grid(cls, grid: PhaseGrid, points, label="reference", tolerance=0.0) -> "PointCloud":
        return cls(points, label, tolerance, grid.hx, grid.hv)

    def __len__(self):
        return self.points.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.points[:, 1]

    def to_rows(self):
        return [(float(a), float(b)) for a, b in self.points]


def _check_nonempty(*clouds):
    for c in clouds:
        if len(c) == 0:
            raise ValueError(f"{c.label} cloud is empty")


def _pairwise_min(a: np.ndarray, b: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """For each point of ``a`` the distance to the nearest point of ``b``."""
    out = np.empty(a.shape[0])
    for s in range(0, a.shape[0], chunk):
        blk = a[s:s + chunk]
        dx = torus_dist(blk[:, None, 0], b[None, :, 0])
        dv = blk[:, None, 1] - b[None, :, 1]
        out[s:s + chunk] = np.sqrt(dx * dx + dv * dv).min(axis=1)
    return out


def one_sided(a: PointCloud, b: PointCloud) -> float:
    """``sup over a of the distance to b``."""
    _check_nonempty(a, b)
    return float(_pairwise_min(a.points, b.points).max())


def hausdorff(a: PointCloud, b: PointCloud) -> float:
    _check_nonempty(a, b)
    return max(one_sided(a, b), one_sided(b, a))


def within_cells(a: PointCloud, b: PointCloud, cells: float = 2.0) -> np.ndarray:
    """Mask of points of ``a`` lying in the ``cells``-cell box around some point of ``b``.

    Cell sizes are taken from ``a``.
    """
    _check_nonempty(b)
    if len(a) == 0:
        return np.zeros(0, dtype=bool)
    bx, bv = cells * a.hx * (1 + 1e-9), cells * a.hv * (1 + 1e-9)
    out = np.zeros(len(a), dtype=bool)
    for s in range(0, len(a), 2048):
        blk = a.points[s:s + 2048]
        dx = torus_dist(blk[:, None, 0], b.points[None, :, 0])
        dv = np.abs(blk[:, None, 1] - b.points[None, :, 1])
        out[s:s + 2048] = ((dx <= bx) & (dv <= bv)).any(axis=1)
    return out


def included(a: PointCloud, b: PointCloud, cells: float = 2.0) -> bool:
    return bool(within_cells(a, b, cells).all())


def cell_distance(a: PointCloud, b: PointCloud) -> float:
    """Largest over ``a`` of the box distance to ``b``, in cells of ``a``'s grid."""
    _check_nonempty(a, b)
    worst = 0.0
    for s in range(0, len(a), 2048):
        blk = a.points[s:s + 2048]
        dx = torus_dist(blk[:, None, 0], b.points[None, :, 0]) / a.hx
        dv = np.abs(blk[:, None, 1] - b.points[None, :, 1]) / a.hv
        worst = max(worst, float(np.maximum(dx, dv).min(axis=1).max()))
    return worst


# Mather

def mather_support(measure: OccupationMeasure, mass_fraction: float = 0.99) -> PointCloud:
    """Heaviest grid cells that together carry ``mass_fraction`` of the mass."""
    if not 0 < mass_fraction < 1:
        raise ValueError("mass_fraction must lie in (0, 1)")
    w = np.asarray(measure.weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise ValueError("measure has no mass")
    flat = w.ravel() / total
    order = np.argsort(-flat, kind="stable")
    cum = np.cumsum(flat[order])
    n = int(np.searchsorted(cum, mass_fraction - 1e-12) + 1)
    i, j = np.divmod(order[:n], w.shape[1])
    pts = np.column_stack([measure.positions[i], measure.velocities[j]])
    hx = measure.positions[1] - measure.positions[0]
    hv = measure.velocities[1] - measure.velocities[0]
    return PointCloud(pts, "mather", 1 - mass_fraction, hx, hv)


# Aubry

def projected_aubry(barrier: PotentialTable, epsilon: float = EPS_POT) -> np.ndarray:
    """Indices of positions whose barrier diagonal is at most ``epsilon``."""
    if barrier.kind != "barrier":
        raise ValueError("projected_aubry needs a barrier table")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return np.flatnonzero(barrier.diagonal() <= epsilon)


@dataclass
class AubryLift:
    cloud: PointCloud
    indices: np.ndarray
    v_forward: np.ndarray
    v_backward: np.ndarray
    residual: np.ndarray
    rejected: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def _argmin_refined(D: np.ndarray) -> float:
    """Fractional index of the minimum, refined by a three-point parabola."""
    m = int(np.argmin(D))
    if 0 < m < D.size - 1 and np.isfinite(D[m - 1:m + 2]).all():
        y0, y1, y2 = D[m - 1], D[m], D[m + 1]
        den = y0 - 2 * y1 + y2
        if den > 1e-15:
            return m + float(np.clip(0.5 * (y0 - y2) / den, -0.5, 0.5))
    return float(m)


def lift_aubry(spec: LagrangianSpec, grid: PhaseGrid, positions, barrier: PotentialTable,
               kernel: ActionKernel | None = None, velocity_tol: float | None = None) -> AubryLift:
    """Assign one velocity to each projected Aubry position.

    For position ``x_i`` the forward defect of offset ``k`` is the one-step
    cost ``x_i -> x_i + k hx`` plus the barrier back to ``x_i``; the backward
    defect is the barrier out of ``x_i`` plus the step arriving from
    ``x_i - k hx``. Their minimisers give forward and backward velocities,
    which on a static curve differ only by the half-step bias ``tau F(x)``.
    Positions where they disagree by more than ``velocity_tol`` (default one
    velocity cell) are not on a calibrated curve and are dropped.
    """
    if kernel is None:
        kernel = build_kernel(spec, grid, barrier.c)
    tol = grid.hv if velocity_tol is None else float(velocity_tol)
    idx = np.asarray(positions, dtype=int).ravel()
    band = kernel.shifted(barrier.alpha_used)
    B = barrier.values
    offs = kernel.offsets
    m = np.arange(offs.size)
    scale = grid.hx / grid.tau
    vf = np.empty(idx.size)
    vb = np.empty(idx.size)
    for n, i in enumerate(idx):
        fwd = (i + offs) % grid.nx
        dfwd = band[fwd, m] + B[fwd, i]
        bwd = (i - offs) % grid.nx
        dbwd = band[i, m] + B[i, bwd]
        vf[n] = (offs[0] + _argmin_refined(dfwd)) * scale
        vb[n] = (offs[0] + _argmin_refined(dbwd)) * scale
    x = grid.positions[idx]
    residual = np.abs(vf - vb - grid.tau * spec.force(x) / spec.mass)
    keep = residual <= tol
    v = 0.5 * (vf + vb)
    cloud = PointCloud(np.column_stack([x[keep], v[keep]]), "aubry", tol, grid.hx, grid.hv)
    return AubryLift(cloud, idx[keep], vf, vb, residual, idx[~keep])


def aubry_set(spec: LagrangianSpec, grid: PhaseGrid, barrier: PotentialTable,
              epsilon: float = EPS_POT, kernel: ActionKernel | None = None) -> AubryLift:
    return lift_aubry(spec, grid, projected_aubry(barrier, epsilon), barrier, kernel)


# Mane

@dataclass
class ManeReport:
    cloud: PointCloud
    defects: np.ndarray
    escaped: int
    sampled: int
    horizon: float
    two_sided: bool

    def diagnostics(self) -> dict:
        return {"sampled": self.sampled, "accepted": len(self.cloud), "escaped": self.escaped,
                "horizon": self.horizon, "two_sided": self.two_sided}


def _bilinear(table: PotentialTable, y0, y1):
    hx = table.positions[1] - table.positions[0]
    n = table.nx
    s0 = np.mod(y0, n * hx) / hx
    s1 = np.mod(y1, n * hx) / hx
    i0 = np.floor(s0).astype(int) % n
    j0 = np.floor(s1).astype(int) % n
    t0 = s0 - np.floor(s0)
    t1 = s1 - np.floor(s1)
    i1, j1 = (i0 + 1) % n, (j0 + 1) % n
    V = table.values
    return ((1 - t0) * (1 - t1) * V[i0, j0] + t0 * (1 - t1) * V[i1, j0]
            + (1 - t0) * t1 * V[i0, j1] + t0 * t1 * V[i1, j1])


class _Flow:
    """Batch of leapfrog orbits carrying their accumulated ``int (L - c v) dt``."""

    def __init__(self, spec, x, v, c, dt, v_max):
        self.spec, self.c, self.dt, self.v_max = spec, c, dt, v_max
        self.x, self.v = x.copy(), v.copy()
        self.a = spec.force(self.x) / spec.mass
        self.lag = eval_lagrangian(spec, self.x, self.v) - c * self.v
        self.action = np.zeros_like(self.x)
        self.escaped = np.abs(self.v) > v_max

    def advance(self, n_steps: int):
        spec, dt = self.spec, self.dt
        for _ in range(n_steps):
            v_half = self.v + 0.5 * dt * self.a
            self.x = self.x + dt * v_half
            self.a = spec.force(self.x) / spec.mass
            self.v = v_half + 0.5 * dt * self.a
            lag = eval_lagrangian(spec, self.x, self.v) - self.c * self.v
            self.action += 0.5 * dt * (self.lag + lag)
            self.lag = lag
            self.escaped |= np.abs(self.v) > self.v_max

    def take(self, keep):
        for name in ("x", "v", "a", "lag", "action", "escaped"):
            setattr(self, name, getattr(self, name)[keep])


def _orbit_defects(spec, grid, phi, c, alpha_hat, x0, v0, T, dt, two_sided, drop_above=math.inf):
    """Calibration defect of each orbit, integrated over growing horizons.

    The defect never decreases with the horizon, so orbits whose defect
    passes ``drop_above`` at an intermediate horizon are dropped early and
    reported with that lower bound.
    """
    n_total = max(1, int(math.ceil(T / dt)))
    h = T / n_total
    fwd = _Flow(spec, x0, v0, c, h, grid.v_max)
    # mechanical L is even in v: the past is the forward orbit of (x, -v) under -c
    bwd = _Flow(spec, x0, -v0, -c, h, grid.v_max) if two_sided else None
    alive = np.arange(x0.size)
    defect = np.full(x0.size, math.inf)
    escaped = np.zeros(x0.size, dtype=bool)
    stages = sorted({max(1, n_total // 32), max(1, n_total // 8), max(1, n_total // 2), n_total})
    done = 0
    for stage in stages:
        fwd.advance(stage - done)
        if bwd is not None:
            bwd.advance(stage - done)
        done = stage
        if bwd is not None:
            start, action, esc = bwd.x, fwd.action + bwd.action, fwd.escaped | bwd.escaped
            span = 2 * done * h
        else:
            start, action, esc = x0[alive], fwd.action, fwd.escaped
            span = done * h
        d = action + alpha_hat * span - _bilinear(phi, start, fwd.x)
        defect[alive] = d
        escaped[alive] = esc
        keep = (d <= drop_above) & ~esc
        if stage != n_total and not keep.all():
            alive = alive[keep]
            fwd.take(keep)
            if bwd is not None:
                bwd.take(keep)
            if alive.size == 0:
                break
    return defect, escaped


def mane_set(spec: LagrangianSpec, grid: PhaseGrid, phi: PotentialTable, c, alpha_hat: float,
             T: float = 20.0, epsilon: float = 3 * EPS_POT, dt: float = 0.02,
             two_sided: bool = True, v_refine: int = 5, stride: int = 1) -> ManeReport:
    """Phase-grid cells containing an orbit calibrated by ``phi`` up to ``epsilon``.

    Each cell is probed at ``v_refine`` velocities spread across it; the
    orbit through each probe is integrated over ``[-T, T]`` (``[0, T]`` with
    ``two_sided=False``) and its action, with ``+alpha_hat`` per unit time,
    is compared with ``phi`` between the end points. The best probe of each
    accepted cell is returned. Orbits leaving the velocity box are rejected
    and counted.
    """
    if phi.kind != "mane_potential":
        raise ValueError("mane_set needs a Mane potential table")
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    if v_refine < 1:
        raise ValueError("v_refine must be >= 1")
    c = float(c)
    xs = grid.positions[::stride]
    vs = grid.velocities[::stride]
    sub = grid.hv * ((np.arange(v_refine) + 0.5) / v_refine - 0.5)
    X, V, S = np.meshgrid(xs, vs, sub, indexing="ij")
    x0, v0 = X.ravel(), np.clip((V + S).ravel(), -grid.v_max, grid.v_max)
    workers = kernels.thread_count()
    n_chunks = max(1, min(workers, x0.size // 2048))
    chunks = np.array_split(np.arange(x0.size), n_chunks)

    def run(ix):
        return _orbit_defects(spec, grid, phi, c, alpha_hat, x0[ix], v0[ix], T, dt, two_sided,
                              drop_above=2 * epsilon)

    if n_chunks > 1:
        with ThreadPoolExecutor(max_workers=n_chunks) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(chunks[0])]
    defects = np.concatenate([p[0] for p in parts]).reshape(xs.size * vs.size, v_refine)
    escaped = np.concatenate([p[1] for p in parts]).reshape(xs.size * vs.size, v_refine)
    masked = np.where(escaped, np.inf, defects)
    best = np.argmin(masked, axis=1)
    cell_defect = masked[np.arange(best.size), best]
    ok = cell_defect <= epsilon
    pick = np.arange(best.size)[ok] * v_refine + best[ok]
    cloud = PointCloud(np.column_stack([x0[pick], v0[pick]]), "mane", epsilon, grid.hx, grid.hv)
    return ManeReport(cloud, cell_defect, int(escaped.all(axis=1).sum()), int(best.size),
                      float(T), two_sided)


def orbit_defect(spec, grid, phi, c, alpha_hat, x0, v0, T=20.0, dt=0.02, two_sided=True) -> float:
    """Calibration defect of the single orbit through ``(x0, v0)``."""
    d, esc = _orbit_defects(spec, grid, phi, float(c), alpha_hat, np.atleast_1d(float(x0)),
                            np.atleast_1d(float(v0)), T, dt, two_sided)
    return math.inf if esc[0] else float(d[0])


# Graph property

@dataclass
class GraphReport:
    passed: bool
    max_spread: float
    max_slope: float
    excluded_cells: list
    lipschitz_bound: float

    def to_json(self) -> dict:
        return {"passed": self.passed, "max_spread": self.max_spread, "max_slope": self.max_slope,
                "excluded_cells": self.excluded_cells, "lipschitz_bound": self.lipschitz_bound}


def graph_check(cloud: PointCloud, lipschitz_bound: float = 1.5, exclusion_cells: int = 2) -> GraphReport:
    """Test whether ``cloud`` is a Lipschitz graph over its projection.

    Fixed points (points with ``|v| <= hv / 2``) are corners where branches
    meet; cells within ``exclusion_cells`` of one are left out of the slope
    test.
    """
    _check_nonempty(cloud)
    nx = max(1, int(round(TWO_PI / cloud.hx)))
    cell = np.rint(cloud.x / cloud.hx).astype(int) % nx
    uniq = np.unique(cell)
    lo = np.array([cloud.v[cell == k].min() for k in uniq])
    hi = np.array([cloud.v[cell == k].max() for k in uniq])
    spread = float((hi - lo).max())
    mid = 0.5 * (lo + hi)
    rest = uniq[np.abs(mid) <= cloud.hv / 2]
    excluded = set()
    for r in rest:
        for d in range(-exclusion_cells, exclusion_cells + 1):
            excluded.add(int((r + d) % nx))
    present = dict(zip(uniq.tolist(), mid.tolist()))
    slope = 0.0
    for k, vk in present.items():
        nb = (k + 1) % nx
        if nb in present and nb != k and k not in excluded and nb not in excluded:
            slope = max(slope, abs(present[nb] - vk) / cloud.hx)
    passed = spread <= 2 * cloud.hv * (1 + 1e-9) and slope <= lipschitz_bound
    return GraphReport(bool(passed), spread, float(slope), sorted(excluded), float(lipschitz_bound))


def analytic_separatrix(grid: PhaseGrid, sign: int = 1) -> PointCloud:
    """Reference cloud ``{(x, sign * 2 sin(x/2))} U {(0, 0)}`` on the position grid."""
    x = grid.positions
    pts = np.column_stack([x, sign * 2 * np.sin(x / 2)])
    pts = np.vstack([[0.0, 0.0], pts])
    return PointCloud(pts, "reference", 0.0, grid.hx, grid.hv)
