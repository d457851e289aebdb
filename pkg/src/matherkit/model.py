"""Mechanical Tonelli Lagrangians on the circle.

The configuration space is the circle of circumference 2*pi. Positions are
stored as plain reals (lifts) and reduced modulo 2*pi only when a metric is
needed.

Sign convention::

    L(x, v) = m v**2 / 2 - U(x) + phi(x)
    H(x, p) = p**2 / (2 m) + U(x) - phi(x)

so the pendulum with Hamiltonian ``p**2/2 + cos x - 1`` has ``U = cos x - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap(x):
    """Reduce positions to [0, 2*pi)."""
    return np.mod(x, TWO_PI)


def torus_dist(x1, x2):
    """Distance on the circle of circumference 2*pi."""
    d = np.abs(np.mod(np.asarray(x1) - np.asarray(x2), TWO_PI))
    return np.minimum(d, TWO_PI - d)


class Potential:
    """A 2*pi-periodic function on the circle with its derivative."""

    def __call__(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError

    def to_json(self):
        raise TypeError(f"{type(self).__name__} has no JSON form")


@dataclass(frozen=True)
class FourierPotential(Potential):
    """``U(x) = sum_k a_k cos(k x) + b_k sin(k x)`` for k = 0..K.

    ``coefficients[k] = (a_k, b_k)``; ``b_0`` is ignored.
    """

    coefficients: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        coeffs = tuple((float(a), float(b)) for a, b in self.coefficients)
        for a, b in coeffs:
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError("Fourier coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, (a, b) in enumerate(self.coefficients):
            if k == 0:
                out = out + a
            else:
                out = out + a * np.cos(k * x) + b * np.sin(k * x)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, (a, b) in enumerate(self.coefficients[1:], start=1):
            out = out - k * a * np.sin(k * x) + k * b * np.cos(k * x)
        return out

    def shifted(self, const: float) -> "FourierPotential":
        coeffs = list(self.coefficients) or [(0.0, 0.0)]
        a0, b0 = coeffs[0]
        coeffs[0] = (a0 + const, b0)
        return FourierPotential(tuple(coeffs))

    def to_json(self):
        return {"kind": "fourier", "coefficients": [list(p) for p in self.coefficients]}


@dataclass(frozen=True)
class CallablePotential(Potential):
    """Wraps an arbitrary periodic function. ``df`` defaults to central differences."""

    f: Callable
    df: Callable | None = None
    name: str = "callable"

    def __call__(self, x):
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.df is not None:
            return np.asarray(self.df(x), dtype=float)
        h = 1e-6
        return (self(x + h) - self(x - h)) / (2 * h)


@dataclass(frozen=True)
class SumPotential(Potential):
    terms: tuple[Potential, ...]

    def __call__(self, x):
        return sum((t(x) for t in self.terms), np.zeros_like(np.asarray(x, dtype=float)))

    def derivative(self, x):
        return sum((t.derivative(x) for t in self.terms), np.zeros_like(np.asarray(x, dtype=float)))

    def to_json(self):
        return {"kind": "sum", "terms": [t.to_json() for t in self.terms]}


@dataclass(frozen=True)
class BumpPotential(Potential):
    """``amplitude * (1 - exp(-(d / width)**2))`` with ``d`` the distance to a set of arcs.

    The arcs are ``[center - half_width, center + half_width]``; the profile
    vanishes to second order on them and is positive elsewhere.
    """

    centers: tuple[float, ...]
    amplitude: float
    width: float
    half_width: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        if not self.centers:
            raise ValueError("bump needs at least one center")
        if not self.width > 0:
            raise ValueError("bump width must be positive")

    def _dist(self, x):
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.centers)
        # signed offset to each center in (-pi, pi]
        off = np.mod(x[..., None] - c + math.pi, TWO_PI) - math.pi
        k = np.argmin(np.abs(off), axis=-1)
        nearest = np.take_along_axis(off, k[..., None], axis=-1)[..., 0]
        d = np.maximum(np.abs(nearest) - self.half_width, 0.0)
        return d, np.sign(nearest)

    def __call__(self, x):
        d, _ = self._dist(x)
        return self.amplitude * (1.0 - np.exp(-(d / self.width) ** 2))

    def derivative(self, x):
        d, sgn = self._dist(x)
        w2 = self.width ** 2
        return self.amplitude * np.exp(-d * d / w2) * 2.0 * d / w2 * sgn

    def to_json(self):
        return {"kind": "bump", "centers": list(self.centers), "amplitude": self.amplitude,
                "width": self.width, "half_width": self.half_width}


def pendulum_potential() -> FourierPotential:
    # U(x) = cos x - 1, hyperbolic fixed point at x = 0
    return FourierPotential(((-1.0, 0.0), (1.0, 0.0)))


def free_potential() -> FourierPotential:
    return FourierPotential(((0.0, 0.0),))


@dataclass(frozen=True)
class CohomologyClass:
    """Constant closed 1-form ``c dx`` on the torus."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("cohomology class must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def coerce(cls, c) -> "CohomologyClass":
        return c if isinstance(c, cls) else cls(tuple(np.atleast_1d(c)))

    def __float__(self):
        if len(self.values) != 1:
            raise ValueError("only d = 1 classes convert to float")
        return self.values[0]


def as_float_class(c) -> float:
    return float(CohomologyClass.coerce(c))


@dataclass(frozen=True)
class LagrangianSpec:
    """Mechanical Lagrangian ``m v^2/2 - U(x) + phi(x)`` on the circle."""

    potential: Potential = field(default_factory=free_potential)
    mass: float = 1.0
    perturbation: Potential | None = None
    dimension: int = 1

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.dimension != 1:
            raise NotImplementedError("only the circle (dimension 1) is supported")

    def U(self, x):
        return self.potential(x)

    def phi(self, x):
        if self.perturbation is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.perturbation(x)

    def force(self, x):
        """Right-hand side of ``m x'' = -U'(x) + phi'(x)``."""
        f = -self.potential.derivative(x)
        if self.perturbation is not None:
            f = f + self.perturbation.derivative(x)
        return f

    def with_perturbation(self, extra: Potential) -> "LagrangianSpec":
        pert = extra if self.perturbation is None else SumPotential((self.perturbation, extra))
        return LagrangianSpec(self.potential, self.mass, pert, self.dimension)

    def to_json(self) -> dict:
        return {
            "mass": self.mass,
            "potential": self.potential.to_json(),
            "perturbation": None if self.perturbation is None else self.perturbation.to_json(),
        }


def pendulum(mass: float = 1.0) -> LagrangianSpec:
    return LagrangianSpec(pendulum_potential(), mass)


def free(mass: float = 1.0) -> LagrangianSpec:
    return LagrangianSpec(free_potential(), mass)


def potential_from_json(doc) -> Potential | None:
    if doc is None:
        return None
    kind = doc.get("kind")
    if kind == "pendulum":
        return pendulum_potential()
    if kind == "free":
        return free_potential()
    if kind == "fourier":
        coeffs = doc.get("coefficients", [])
        return FourierPotential(tuple(tuple(pair) for pair in coeffs))
    if kind == "sum":
        return SumPotential(tuple(potential_from_json(t) for t in doc["terms"]))
    if kind == "bump":
        return BumpPotential(tuple(doc["centers"]), float(doc["amplitude"]), float(doc["width"]),
                             float(doc.get("half_width", 0.0)))
    raise ValueError(f"unknown potential kind {kind!r}")


def spec_from_json(doc: dict) -> LagrangianSpec:
    if "potential" not in doc:
        raise ValueError("Lagrangian document needs a 'potential' entry")
    return LagrangianSpec(
        potential=potential_from_json(doc["potential"]),
        mass=float(doc.get("mass", 1.0)),
        perturbation=potential_from_json(doc.get("perturbation")),
    )


def load_spec(path: str | Path) -> LagrangianSpec:
    with open(path) as fh:
        doc = json.load(fh)
    return spec_from_json(doc.get("lagrangian", doc))


def eval_lagrangian(spec: LagrangianSpec, x, v):
    v = np.asarray(v, dtype=float)
    return 0.5 * spec.mass * v * v - spec.U(x) + spec.phi(x)


def legendre(spec: LagrangianSpec, x, v):
    """Return ``(p, H)`` with ``p = m v`` and ``H = p v - L``."""
    v = np.asarray(v, dtype=float)
    p = spec.mass * v
    H = p * v - eval_lagrangian(spec, x, v)
    return p, H


def hamiltonian(spec: LagrangianSpec, x, p):
    p = np.asarray(p, dtype=float)
    return p * p / (2.0 * spec.mass) + spec.U(x) - spec.phi(x)


@dataclass(frozen=True)
class OrbitSegment:
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    energy: np.ndarray

    @property
    def states(self) -> np.ndarray:
        return np.stack([self.x, self.v], axis=-1)

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))


def _leapfrog(spec: LagrangianSpec, x, v, step: float, n_steps: int, keep: bool):
    m = spec.mass
    xs = [x] if keep else None
    vs = [v] if keep else None
    a = spec.force(x) / m
    for _ in range(n_steps):
        v_half = v + 0.5 * step * a
        x = x + step * v_half
        a = spec.force(x) / m
        v = v_half + 0.5 * step * a
        if keep:
            xs.append(x)
            vs.append(v)
    if keep:
        return np.array(xs), np.array(vs)
    return x, v


def integrate_orbit(spec: LagrangianSpec, x0: float, v0: float, step: float, n_steps: int) -> OrbitSegment:
    """Velocity-Verlet integration of the Euler-Lagrange flow.

    A negative-time orbit is obtained by integrating with reversed velocity
    and flipping the result; ``step`` itself must be positive.
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    if not (math.isfinite(x0) and math.isfinite(v0)):
        raise ValueError("initial state must be finite")
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    xs, vs = _leapfrog(spec, float(x0), float(v0), float(step), int(n_steps), keep=True)
    _, energy = legendre(spec, xs, vs)
    times = step * np.arange(n_steps + 1)
    return OrbitSegment(times, xs, vs, energy)


def integrate_many(spec: LagrangianSpec, x0: np.ndarray, v0: np.ndarray, step: float,
                   n_steps: int, sample_every: int = 1):
    """Vectorised leapfrog over a batch of initial states.

    Returns arrays of shape ``(n_samples, batch)`` for x and v, sampled every
    ``sample_every`` steps (the last sample is always the final state).
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    m = spec.mass
    a = spec.force(x) / m
    xs, vs = [x.copy()], [v.copy()]
    for n in range(1, n_steps + 1):
        v_half = v + 0.5 * step * a
        x = x + step * v_half
        a = spec.force(x) / m
        v = v_half + 0.5 * step * a
        if n % sample_every == 0 or n == n_steps:
            xs.append(x.copy())
            vs.append(v.copy())
    return np.array(xs), np.array(vs)

