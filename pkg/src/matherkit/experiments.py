"""Cohomology scans, the step-one perturbation, flat detection and the
semicontinuity probe, all built on one per-class pipeline."""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import sets as S
from .critical import (ConvergenceWarning, CriticalValueReport, alpha_lax_oleinik, alpha_lp)
from .grids import ActionKernel, PhaseGrid, build_kernel
from .model import BumpPotential, FourierPotential, LagrangianSpec, Potential
from .potential import EPS_POT, NegativeCycleError, PotentialTable, mane_potential, peierls_barrier


@dataclass(frozen=True)
class PipelineOptions:
    eps_pot: float = EPS_POT
    aubry_epsilon: float | None = None
    mane_horizon: float = 20.0
    mane_epsilon: float | None = None
    mane_dt: float = 0.02
    mane_v_refine: int = 5
    mass_fraction: float = 0.99
    alpha_tol: float = 1e-3
    lp_tol: float = 1e-9
    fourier_order: int | None = None
    compute_mane: bool = True

    @property
    def aubry_eps(self) -> float:
        return self.eps_pot if self.aubry_epsilon is None else self.aubry_epsilon

    @property
    def mane_eps(self) -> float:
        return 3 * self.eps_pot if self.mane_epsilon is None else self.mane_epsilon


@dataclass
class PipelineResult:
    c: float
    lax: CriticalValueReport
    lp: CriticalValueReport
    kernel: ActionKernel
    phi: PotentialTable
    barrier: PotentialTable
    mather: S.PointCloud
    aubry: S.AubryLift
    mane: S.ManeReport | None
    flags: list = field(default_factory=list)

    @property
    def alpha(self) -> float:
        return self.lax.alpha


def run_pipeline(spec: LagrangianSpec, grid: PhaseGrid, c: float,
                 options: PipelineOptions = PipelineOptions()) -> PipelineResult:
    """Critical value by both methods, potential tables and the three clouds at ``c``."""
    c = float(c)
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        kernel = build_kernel(spec, grid, c)
        lax = alpha_lax_oleinik(kernel, grid, tol=options.alpha_tol)
        lp = alpha_lp(spec, grid, c, fourier_order=options.fourier_order, tol=options.lp_tol)
    flags += [f"convergence: {w.message}" for w in caught if issubclass(w.category, ConvergenceWarning)]
    if abs(lax.alpha - lp.alpha) > 5e-3:
        flags.append(f"methods disagree: lax {lax.alpha:.6g} vs lp {lp.alpha:.6g}")
    alpha = lax.alpha
    phi = mane_potential(kernel, grid, alpha, eps_pot=options.eps_pot)
    barrier = peierls_barrier(kernel, grid, alpha, eps_pot=options.eps_pot)
    mather = S.mather_support(lp.measure, options.mass_fraction)
    aubry = S.aubry_set(spec, grid, barrier, options.aubry_eps, kernel=kernel)
    if len(aubry.cloud) == 0:
        flags.append("empty aubry cloud")
    mane = None
    if options.compute_mane:
        mane = S.mane_set(spec, grid, phi, c, alpha, T=options.mane_horizon,
                          epsilon=options.mane_eps, dt=options.mane_dt,
                          v_refine=options.mane_v_refine)
        if len(mane.cloud) == 0:
            flags.append("empty mane cloud")
    return PipelineResult(c, lax, lp, kernel, phi, barrier, mather, aubry, mane, flags)


def _safe_hausdorff(a, b) -> float:
    if len(a) == 0 or len(b) == 0:
        return math.nan
    return S.hausdorff(a, b)


# Scan

@dataclass
class ScanRow:
    c: float
    alpha: float
    alpha_lp: float
    d_H_mather_aubry: float
    d_H_aubry_mane: float
    measure_support_size: int
    flags: list = field(default_factory=list)

    FIELDS = ("c", "alpha", "alpha_lp", "d_H_mather_aubry", "d_H_aubry_mane",
              "measure_support_size", "flags")


def _scan_one(args) -> ScanRow:
    spec, grid, c, options = args
    try:
        res = run_pipeline(spec, grid, c, options)
    except (NegativeCycleError, ValueError, ArithmeticError) as exc:
        return ScanRow(float(c), math.nan, math.nan, math.nan, math.nan, 0,
                       [f"failed: {type(exc).__name__}: {exc}"])
    d_an = math.nan if res.mane is None else _safe_hausdorff(res.aubry.cloud, res.mane.cloud)
    return ScanRow(res.c, res.alpha, res.lp.alpha, _safe_hausdorff(res.mather, res.aubry.cloud),
                   d_an, len(res.mather), list(res.flags))


def class_grid(c_lo: float, c_hi: float, n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("a scan needs n >= 2 classes")
    if not c_hi > c_lo:
        raise ValueError("need c_lo < c_hi")
    return np.linspace(c_lo, c_hi, n)


def scan_c(spec: LagrangianSpec, grid: PhaseGrid, c_lo: float, c_hi: float, n: int,
           options: PipelineOptions = PipelineOptions(), workers: int = 1) -> list[ScanRow]:
    """Run the pipeline independently at ``n`` evenly spaced classes.

    Failures at one class are recorded in that row's flags. With
    ``workers > 1`` classes run in separate processes; rows come back in
    class order either way.
    """
    jobs = [(spec, grid, float(c), options) for c in class_grid(c_lo, c_hi, n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_one, jobs))
    return [_scan_one(j) for j in jobs]


def fmt(x) -> str:
    """Twelve significant digits, '.' decimal point, no grouping."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    return format(x, ".12g")


def scan_csv(rows: list[ScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ScanRow.FIELDS)
    for r in rows:
        w.writerow([fmt(r.c), fmt(r.alpha), fmt(r.alpha_lp), fmt(r.d_H_mather_aubry),
                    fmt(r.d_H_aubry_mane), fmt(r.measure_support_size), ";".join(r.flags)])
    return buf.getvalue()


# Step one perturbation

def mather_bump(grid: PhaseGrid, mather: S.PointCloud, amplitude: float,
                width_cells: float = 4.0) -> BumpPotential:
    """Non-negative bump vanishing within one cell of the projected Mather cloud.

    The one-cell margin closes the single-cell gaps a vertex solution of the
    measure LP leaves in a support that is really a whole circle.
    """
    if len(mather) == 0:
        raise ValueError("Mather cloud is empty")
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    centers = np.unique(np.rint(np.mod(mather.x, 2 * math.pi) / grid.hx).astype(int) % grid.nx)
    return BumpPotential(tuple(grid.positions[centers]), float(amplitude),
                         width_cells * grid.hx, grid.hx)


@dataclass
class PerturbationReport:
    c: float
    amplitude: float
    perturbation: dict
    before: PipelineResult
    after: PipelineResult

    def summary(self) -> dict:
        b, a = self.before, self.after
        return {
            "c": self.c,
            "amplitude": self.amplitude,
            "perturbation": self.perturbation,
            "alpha_before": b.alpha,
            "alpha_after": a.alpha,
            "d_H_MA_before": _safe_hausdorff(b.mather, b.aubry.cloud),
            "d_H_MA_after": _safe_hausdorff(a.mather, a.aubry.cloud),
            "mather_shift_cells": max(S.cell_distance(a.mather, b.mather),
                                      S.cell_distance(b.mather, a.mather)),
            "aubry_size_before": len(b.aubry.cloud),
            "aubry_size_after": len(a.aubry.cloud),
            "flags": b.flags + a.flags,
        }


def step1_perturbation(spec: LagrangianSpec, grid: PhaseGrid, c: float, amplitude: float,
                       before: PipelineResult | None = None,
                       options: PipelineOptions = PipelineOptions()) -> tuple[LagrangianSpec, PerturbationReport]:
    """Add a bump vanishing on the projected Mather set and recompute.

    The bump raises the action of every path that leaves the Mather set,
    which isolates the minimizing measure and pulls the Aubry set onto it.
    """
    if before is None:
        before = run_pipeline(spec, grid, c, replace(options, compute_mane=False))
    bump = mather_bump(grid, before.mather, amplitude)
    new_spec = spec.with_perturbation(bump)
    after = run_pipeline(new_spec, grid, c, replace(options, compute_mane=False))
    return new_spec, PerturbationReport(float(c), float(amplitude), bump.to_json(), before, after)


# Flat detection

@dataclass
class FlatReport:
    c: float
    rotation: float
    probes: np.ndarray
    alphas: np.ndarray
    deviation: np.ndarray
    on_flat: np.ndarray
    has_flat: bool
    extent: tuple[float, float] | None
    at_boundary: tuple[bool, bool]

    def to_json(self) -> dict:
        return {
            "c": self.c, "rotation": self.rotation, "has_flat": self.has_flat,
            "extent": None if self.extent is None else list(self.extent),
            "at_boundary": list(self.at_boundary),
            "probes": [{"c": float(p), "alpha": float(a), "deviation": float(d), "on_flat": bool(o)}
                       for p, a, d, o in zip(self.probes, self.alphas, self.deviation, self.on_flat)],
        }


def flat_detector(spec: LagrangianSpec, grid: PhaseGrid, c: float, probe_radius: float = 2.0,
                  n_probes: int = 41, rotation: float | None = None, tol: float = 1e-2,
                  affine_tol: float = 1e-4, refine_steps: int = 8) -> FlatReport:
    """Probe alpha around ``c`` and report the affine piece through it.

    A probe is on-flat when ``|alpha(c') - alpha(c) - h (c' - c)| <= tol``.
    The run of on-flat probes around ``c`` is the candidate extent; each end
    is refined by bisection. Strict convexity also produces a short run
    within ``tol``, so a flat is only reported when some other probe lies on
    the affine line to within ``affine_tol``.
    """
    if n_probes < 3:
        raise ValueError("n_probes must be >= 3")
    c = float(c)

    def alpha_at(cc):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            return alpha_lax_oleinik(build_kernel(spec, grid, cc), grid).alpha

    a0 = alpha_at(c)
    h = alpha_lp(spec, grid, c).measure.rotation if rotation is None else float(rotation)
    probes = np.unique(np.append(np.linspace(c - probe_radius, c + probe_radius, n_probes), c))
    alphas = np.array([a0 if p == c else alpha_at(p) for p in probes])

    def dev(cc, aa):
        return abs(aa - a0 - h * (cc - c))

    deviation = np.array([dev(p, a) for p, a in zip(probes, alphas)])
    on = deviation <= tol
    k = int(np.flatnonzero(probes == c)[0])
    lo = k
    while lo > 0 and on[lo - 1]:
        lo -= 1
    hi = k
    while hi < probes.size - 1 and on[hi + 1]:
        hi += 1
    others = np.ones(probes.size, dtype=bool)
    others[k] = False
    has_flat = bool(np.any((deviation <= affine_tol) & others & on))

    def bisect(inside, outside):
        for _ in range(refine_steps):
            mid = 0.5 * (inside + outside)
            if dev(mid, alpha_at(mid)) <= tol:
                inside = mid
            else:
                outside = mid
        return 0.5 * (inside + outside)

    at_lo, at_hi = lo == 0, hi == probes.size - 1
    extent = None
    if has_flat:
        left = probes[lo] if at_lo else bisect(probes[lo], probes[lo - 1])
        right = probes[hi] if at_hi else bisect(probes[hi], probes[hi + 1])
        extent = (float(left), float(right))
        if at_lo or at_hi:
            warnings.warn("flat reaches the probe range; extent is a lower bound",
                          ConvergenceWarning, stacklevel=2)
    return FlatReport(c, float(h), probes, alphas, deviation, on, has_flat, extent, (at_lo, at_hi))


# Semicontinuity

@dataclass
class SemicontinuityReport:
    c: float
    classes: list
    mane_new_into_old: list
    mane_old_into_new: list
    d_H_mather: list
    d_H_aubry: list
    epsilon: float

    @property
    def upper_ok(self) -> bool:
        """One-sided Mane distances shrink (within ``2 eps``) and end below ``3 eps``."""
        seq = self.mane_new_into_old
        mono = all(b <= a + 2 * self.epsilon for a, b in zip(seq, seq[1:]))
        return bool(mono and seq[-1] <= 3 * self.epsilon)

    def to_json(self) -> dict:
        return {"c": self.c, "classes": self.classes, "epsilon": self.epsilon,
                "mane_new_into_old": self.mane_new_into_old,
                "mane_old_into_new": self.mane_old_into_new,
                "d_H_mather": self.d_H_mather, "d_H_aubry": self.d_H_aubry,
                "upper_semicontinuous": self.upper_ok}


def vanishing_perturbations(n: int = 4, scale: float = 0.1) -> list[Potential]:
    """``phi_k = (scale / 2**k) (1 - cos x)`` for k = 0..n-1."""
    return [FourierPotential(((scale / 2 ** k, 0.0), (-scale / 2 ** k, 0.0))) for k in range(n)]


def approach_from_below(c: float, n: int = 3, start: float = 0.3) -> list[float]:
    """``c - start / 2**k`` for k = 0..n-1."""
    return [float(c) - start / 2 ** k for k in range(n)]


def semicontinuity_probe(spec: LagrangianSpec, grid: PhaseGrid, c: float,
                         perturbations: list[Potential | None] | None = None,
                         classes: list[float] | None = None,
                         options: PipelineOptions = PipelineOptions(),
                         base: PipelineResult | None = None) -> SemicontinuityReport:
    """Compare the clouds of ``(spec + phi_k, c_k)`` with those of ``(spec, c)``."""
    if perturbations is None and classes is None:
        raise ValueError("give a perturbation sequence, a class sequence or both")
    n = len(perturbations) if perturbations is not None else len(classes)
    perturbations = perturbations if perturbations is not None else [None] * n
    classes = classes if classes is not None else [float(c)] * n
    if len(perturbations) != len(classes):
        raise ValueError("perturbation and class sequences differ in length")
    if base is None:
        base = run_pipeline(spec, grid, c, options)
    out = {"new": [], "old": [], "m": [], "a": []}
    for phi_k, c_k in zip(perturbations, classes):
        spec_k = spec if phi_k is None else spec.with_perturbation(phi_k)
        res = run_pipeline(spec_k, grid, c_k, options)
        out["new"].append(S.one_sided(res.mane.cloud, base.mane.cloud))
        out["old"].append(S.one_sided(base.mane.cloud, res.mane.cloud))
        out["m"].append(S.hausdorff(res.mather, base.mather))
        out["a"].append(S.hausdorff(res.aubry.cloud, base.aubry.cloud))
    return SemicontinuityReport(float(c), [float(x) for x in classes], out["new"], out["old"],
                                out["m"], out["a"], options.eps_pot)
