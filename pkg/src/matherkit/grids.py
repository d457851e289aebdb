"""Phase-space discretisation and the one-step action kernel.

Edges are stored in banded form: for every target position ``j`` and
offset ``k`` (displacement ``k * hx``) the source is ``(j - k) mod nx`` and
the winding is ``floor((source + k) / nx)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import TWO_PI, CohomologyClass, LagrangianSpec, eval_lagrangian, wrap


@dataclass(frozen=True)
class PhaseGrid:
    nx: int = 256
    nv: int = 129
    v_max: float = 4.0
    tau: float = 0.2
    lift_window: int = 1

    def __post_init__(self):
        if self.nx < 2 or self.nv < 2:
            raise ValueError("nx and nv must be >= 2")
        if not (self.v_max > 0 and math.isfinite(self.v_max)):
            raise ValueError("v_max must be positive")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError("tau must be positive")
        if self.lift_window < 0:
            raise ValueError("lift_window must be >= 0")

    @property
    def hx(self) -> float:
        return TWO_PI / self.nx

    @property
    def hv(self) -> float:
        return 2.0 * self.v_max / (self.nv - 1)

    @cached_property
    def positions(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @cached_property
    def velocities(self) -> np.ndarray:
        return np.linspace(-self.v_max, self.v_max, self.nv)

    @property
    def max_offset(self) -> int:
        """Largest admissible displacement in cells, |k| hx <= v_max tau."""
        k = int(math.floor(self.v_max * self.tau / self.hx + 1e-9))
        return min(k, (self.lift_window + 1) * self.nx - 1)

    @cached_property
    def offsets(self) -> np.ndarray:
        k = self.max_offset
        return np.arange(-k, k + 1, dtype=np.int64)

    def with_(self, **changes) -> "PhaseGrid":
        params = dict(nx=self.nx, nv=self.nv, v_max=self.v_max, tau=self.tau,
                      lift_window=self.lift_window)
        params.update(changes)
        return PhaseGrid(**params)

    def to_json(self) -> dict:
        return {"nx": self.nx, "nv": self.nv, "vmax": self.v_max, "tau": self.tau,
                "lift_window": self.lift_window}

    @classmethod
    def from_json(cls, doc: dict) -> "PhaseGrid":
        defaults = cls()
        return cls(
            nx=int(doc.get("nx", defaults.nx)),
            nv=int(doc.get("nv", defaults.nv)),
            v_max=float(doc.get("vmax", doc.get("v_max", defaults.v_max))),
            tau=float(doc.get("tau", defaults.tau)),
            lift_window=int(doc.get("lift_window", defaults.lift_window)),
        )


def _band_geometry(grid: PhaseGrid):
    """Displacement and winding for each (target j, offset index m)."""
    j = np.arange(grid.nx)[:, None]
    k = grid.offsets[None, :]
    src = (j - k) % grid.nx
    winding = (src + k) // grid.nx
    disp = k * grid.hx + np.zeros_like(src, dtype=float)
    valid = np.abs(winding) <= grid.lift_window
    return src, winding, disp, valid


@dataclass(frozen=True)
class ActionKernel:
    """One-step discrete action ``tau L(x_mid, D/tau) - c D`` in banded form."""

    band: np.ndarray
    offsets: np.ndarray
    c: float
    tau: float
    nx: int

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.band)

    def entry(self, i: int, j: int, w: int) -> float:
        k = j - i + self.nx * w
        hits = np.nonzero(self.offsets == k)[0]
        if hits.size == 0:
            return math.inf
        return float(self.band[j, hits[0]])

    def shifted(self, alpha: float) -> np.ndarray:
        """Band with the ``+alpha tau`` normalisation of the action added."""
        return self.band + alpha * self.tau

    def dense(self) -> np.ndarray:
        """Cheapest one-step cost between positions, minimised over windings."""
        out = np.full((self.nx, self.nx), np.inf)
        src = (np.arange(self.nx)[:, None] - self.offsets[None, :]) % self.nx
        for m in range(self.offsets.size):
            cols = np.arange(self.nx)
            np.minimum.at(out, (src[:, m], cols), self.band[:, m])
        return out


def build_kernel(spec: LagrangianSpec, grid: PhaseGrid, c) -> ActionKernel:
    c = float(CohomologyClass.coerce(c))
    src, winding, disp, valid = _band_geometry(grid)
    x_src = grid.positions[src]
    x_mid = wrap(x_src + 0.5 * disp)
    vel = disp / grid.tau
    band = grid.tau * eval_lagrangian(spec, x_mid, vel) - c * disp
    band = np.where(valid & (np.abs(vel) <= grid.v_max * (1 + 1e-12)), band, np.inf)
    return ActionKernel(np.ascontiguousarray(band), grid.offsets.copy(), c, grid.tau, grid.nx)


def admissible_edges(grid: PhaseGrid) -> list[tuple[int, int, int]]:
    """All (i, j, w) with |x_j - x_i + 2 pi w| / tau <= v_max and |w| <= W."""
    src, winding, disp, valid = _band_geometry(grid)
    edges = []
    for j in range(grid.nx):
        for m in range(grid.offsets.size):
            if valid[j, m]:
                edges.append((int(src[j, m]), j, int(winding[j, m])))
    return sorted(edges)


def check_connected(kernel: ActionKernel) -> None:
    """Raise if the admissible edges do not connect every position."""
    steps = kernel.offsets[np.isfinite(kernel.band).all(axis=0) & (kernel.offsets != 0)]
    if kernel.nx == 1:
        return
    if steps.size and math.gcd(*map(int, np.abs(steps)), kernel.nx) == 1:
        return
    # fall back to explicit reachability (some edges inadmissible near the wrap)
    reach = np.zeros(kernel.nx, dtype=bool)
    reach[0] = True
    src = (np.arange(kernel.nx)[:, None] - kernel.offsets[None, :]) % kernel.nx
    ok = np.isfinite(kernel.band)
    for _ in range(kernel.nx):
        new = reach.copy()
        new |= (reach[src] & ok).any(axis=1)
        if new.all():
            return
        if (new == reach).all():
            break
        reach = new
    raise ValueError("admissible edges do not connect the position graph; "
                     "increase v_max * tau relative to the grid spacing")
