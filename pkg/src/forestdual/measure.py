"""Lifespan measures, their Laplace exponent and the ancestor laws.

A lifespan measure is a finite measure Pi on (0, inf).  Its total mass ``b``
is the birth rate, Pi/b is the lifetime law and ``m`` (the mean of Pi) is
the mean offspring number.  The Laplace exponent of the associated Levy
process (drift -1, jump measure Pi) is

    psi(lam) = lam - int (1 - exp(-lam r)) Pi(dr),

``eta`` is its largest root and the tilted measure exp(-eta r) Pi(dr)
describes the process conditioned not to drift to +inf.

Three families are supported: exponential (birth-death), point masses and
tabulated densities.  Every family provides the tail and its first two
integrals, which is all the scale-function solver and the ancestor laws
need.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from ._sampling import Sampler

ANCESTOR_TABLE_SIZE = 4096

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class MeasureError(ValueError):
    """Malformed lifespan measure or failed root search."""


def _as_array(v):
    return np.asarray(v, dtype=float)


class LifespanMeasure(ABC):
    """Finite lifespan measure Pi on (0, inf)."""

    kind: str

    b: float  # total mass
    m: float  # mean, int r Pi(dr)

    @property
    @abstractmethod
    def r_max(self) -> float:
        """Upper end of the support (inf for unbounded support)."""

    @abstractmethod
    def laplace_exponent(self, lam):
        ...

    @abstractmethod
    def psi_prime(self, lam):
        ...

    @abstractmethod
    def tail(self, v):
        """Pi([v, inf)) for v > 0."""

    @abstractmethod
    def tail_integral(self, v):
        """int_0^v tail(s) ds = int min(v, r) Pi(dr)."""

    @abstractmethod
    def tail_moment(self, v):
        """int_0^v s tail(s) ds = int min(v, r)^2 / 2 Pi(dr)."""

    @abstractmethod
    def tilt_by(self, theta: float) -> "LifespanMeasure":
        """The measure exp(-theta r) Pi(dr)."""

    @abstractmethod
    def lifespan_sampler(self) -> Sampler:
        ...

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    def partial_mass(self, v):
        """Pi((0, v))."""
        return self.b - self.tail(v)

    @cached_property
    def eta(self) -> float:
        return _solve_eta(self)

    def tilt(self) -> "LifespanMeasure":
        if self.eta == 0.0:
            return self
        return self.tilt_by(self.eta)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        return self.lifespan_sampler().sample(rng, size)

    def _check(self):
        if not (0.0 < self.b < math.inf):
            raise MeasureError(f"mass must be positive and finite, got {self.b}")
        if not (0.0 < self.m < math.inf):
            raise MeasureError(f"mean must be positive and finite, got {self.m}")


@dataclass(frozen=True)
class Exponential(LifespanMeasure):
    """Pi(dr) = b d exp(-d r) dr: birth rate b, death rate d."""

    b: float
    d: float
    kind = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "d", float(self.d))
        if not (self.b > 0 and self.d > 0 and math.isfinite(self.b) and math.isfinite(self.d)):
            raise MeasureError("exponential rates must be positive and finite")

    @property
    def m(self) -> float:
        return self.b / self.d

    @property
    def r_max(self) -> float:
        return math.inf

    @cached_property
    def eta(self) -> float:
        return max(self.b - self.d, 0.0)

    def laplace_exponent(self, lam):
        lam = _as_array(lam)
        return lam * (lam + self.d - self.b) / (lam + self.d)

    def psi_prime(self, lam):
        lam = _as_array(lam)
        return 1.0 - self.b * self.d / (lam + self.d) ** 2

    def tail(self, v):
        v = np.maximum(_as_array(v), 0.0)
        return self.b * np.exp(-self.d * v)

    def tail_integral(self, v):
        v = np.maximum(_as_array(v), 0.0)
        return -(self.b / self.d) * np.expm1(-self.d * v)

    def tail_moment(self, v):
        v = np.maximum(_as_array(v), 0.0)
        dv = self.d * v
        return self.b * (-np.expm1(-dv) - dv * np.exp(-dv)) / self.d**2

    def tilt(self) -> "LifespanMeasure":
        if self.b > self.d:
            return Exponential(self.d, self.b)
        return self

    def tilt_by(self, theta: float) -> "LifespanMeasure":
        rate = self.d + theta
        return Exponential(self.b * self.d / rate, rate)

    def lifespan_sampler(self) -> Sampler:
        return Sampler.exponential(self.d)

    def to_dict(self) -> dict:
        return {"kind": "exponential", "b": self.b, "d": self.d}


@dataclass(frozen=True)
class PointMasses(LifespanMeasure):
    """Finite sum of atoms, sum_i w_i delta_{r_i}."""

    points: tuple
    kind = "atoms"

    def __post_init__(self):
        pts = tuple((float(r), float(w)) for r, w in self.points)
        if not pts:
            raise MeasureError("point masses need at least one atom")
        for r, w in pts:
            if not (0 < r < math.inf and 0 < w < math.inf):
                raise MeasureError(f"atoms need 0 < r < inf and w > 0, got ({r}, {w})")
        object.__setattr__(self, "points", tuple(sorted(pts)))
        self._check()

    @cached_property
    def _r(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @cached_property
    def _w(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def b(self) -> float:
        return float(self._w.sum())

    @property
    def m(self) -> float:
        return float((self._w * self._r).sum())

    @property
    def r_max(self) -> float:
        return float(self._r[-1])

    def laplace_exponent(self, lam):
        lam = _as_array(lam)
        return lam + np.expm1(-np.multiply.outer(lam, self._r)) @ self._w

    def psi_prime(self, lam):
        lam = _as_array(lam)
        return 1.0 - np.exp(-np.multiply.outer(lam, self._r)) @ (self._w * self._r)

    def tail(self, v):
        return np.less_equal.outer(_as_array(v), self._r).astype(float) @ self._w

    def partial_mass(self, v):
        return np.greater.outer(_as_array(v), self._r).astype(float) @ self._w

    def tail_integral(self, v):
        v = np.maximum(_as_array(v), 0.0)
        return np.minimum.outer(v, self._r) @ self._w

    def tail_moment(self, v):
        v = np.maximum(_as_array(v), 0.0)
        return (np.minimum.outer(v, self._r) ** 2 / 2.0) @ self._w

    def tilt_by(self, theta: float) -> "LifespanMeasure":
        return PointMasses(tuple((r, w * math.exp(-theta * r)) for r, w in self.points))

    def lifespan_sampler(self) -> Sampler:
        return Sampler.discrete(self._r, self._w)

    def to_dict(self) -> dict:
        return {"kind": "atoms", "points": [[r, w] for r, w in self.points]}


@dataclass(frozen=True, eq=False)
class TabulatedDensity(LifespanMeasure):
    """Density given by linear interpolation of nodal values on a grid.

    The density vanishes outside [grid[0], grid[-1]].  An optional
    exponential factor exp(-theta r) is carried along so that tilting stays
    inside the family and the tilted Laplace exponent equals the shifted one
    up to rounding.  Integrals use 8-point Gauss-Legendre per cell, which is
    exact for the untilted piecewise-linear density (so the mass is the
    trapezoid sum of the nodal values).
    """

    grid: np.ndarray
    density: np.ndarray
    theta: float = 0.0
    kind = "table"

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        f = np.array(self.density, dtype=float)
        if g.ndim != 1 or g.shape != f.shape or g.size < 2:
            raise MeasureError("grid and density must be 1-d arrays of equal length >= 2")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(f))):
            raise MeasureError("grid and density must be finite")
        if g[0] <= 0 or np.any(np.diff(g) <= 0):
            raise MeasureError("grid must be strictly increasing in (0, inf)")
        if np.any(f < 0):
            raise MeasureError("density values must be nonnegative")
        g.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "density", f)
        object.__setattr__(self, "theta", float(self.theta))
        self._check()

    def _segment_nodes(self, lo, hi, j):
        """Gauss nodes and weights of the density on [lo, hi] inside cell j."""
        g, f = self.grid, self.density
        half = (hi - lo) / 2.0
        r = (lo + hi)[..., None] / 2.0 + half[..., None] * _GL_X
        slope = (f[j + 1] - f[j]) / (g[j + 1] - g[j])
        rho = (f[j][..., None] + slope[..., None] * (r - g[j][..., None])) * np.exp(-self.theta * r)
        return r, rho * (half[..., None] * _GL_W)

    @cached_property
    def _nodes(self):
        j = np.arange(self.grid.size - 1)
        r, w = self._segment_nodes(self.grid[:-1], self.grid[1:], j)
        return r, w

    @cached_property
    def _cumulative(self):
        r, w = self._nodes
        cells = np.stack([w.sum(1), (w * r).sum(1), (w * r * r).sum(1)])
        return np.concatenate([np.zeros((3, 1)), np.cumsum(cells, axis=1)], axis=1)

    def _partial_moments(self, v):
        """(int_{r<v} r^k Pi(dr) for k=0,1,2) for each v."""
        v = _as_array(v)
        shape = v.shape
        v = np.clip(v.ravel(), self.grid[0], self.grid[-1])
        j = np.clip(np.searchsorted(self.grid, v, side="right") - 1, 0, self.grid.size - 2)
        r, w = self._segment_nodes(self.grid[j], v, j)
        part = np.stack([w.sum(1), (w * r).sum(1), (w * r * r).sum(1)])
        out = self._cumulative[:, j] + part
        return out.reshape((3,) + shape)

    @cached_property
    def b(self) -> float:
        return float(self._cumulative[0, -1])

    @cached_property
    def m(self) -> float:
        return float(self._cumulative[1, -1])

    @property
    def r_max(self) -> float:
        return float(self.grid[-1])

    def laplace_exponent(self, lam):
        lam = _as_array(lam)
        r, w = self._nodes
        r, w = r.ravel(), w.ravel()
        return lam + np.expm1(-np.multiply.outer(lam, r)) @ w

    def psi_prime(self, lam):
        lam = _as_array(lam)
        r, w = self._nodes
        r, w = r.ravel(), w.ravel()
        return 1.0 - np.exp(-np.multiply.outer(lam, r)) @ (w * r)

    def partial_mass(self, v):
        return self._partial_moments(v)[0]

    def tail(self, v):
        # Suffix sums keep tiny tails accurate (they get multiplied by
        # exp(eta v) in the overshoot density).
        v = _as_array(v)
        shape = v.shape
        v = np.clip(v.ravel(), self.grid[0], self.grid[-1])
        j = np.clip(np.searchsorted(self.grid, v, side="right") - 1, 0, self.grid.size - 2)
        _, w = self._segment_nodes(v, self.grid[j + 1], j)
        return (self._suffix_mass[j + 1] + w.sum(1)).reshape(shape)

    @cached_property
    def _suffix_mass(self):
        cells = self._nodes[1].sum(1)
        return np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])

    def tail_integral(self, v):
        v = np.maximum(_as_array(v), 0.0)
        p = self._partial_moments(v)
        return v * (self.b - p[0]) + p[1]

    def tail_moment(self, v):
        v = np.maximum(_as_array(v), 0.0)
        p = self._partial_moments(v)
        return v * v * (self.b - p[0]) / 2.0 + p[2] / 2.0

    def tilt_by(self, theta: float) -> "LifespanMeasure":
        return TabulatedDensity(self.grid, self.density, self.theta + theta)

    def pdf(self, r):
        r = _as_array(r)
        inside = (r >= self.grid[0]) & (r <= self.grid[-1])
        return np.where(inside, np.interp(r, self.grid, self.density) * np.exp(-self.theta * r), 0.0)

    def lifespan_sampler(self) -> Sampler:
        xs = np.union1d(self.grid, np.linspace(self.grid[0], self.grid[-1], ANCESTOR_TABLE_SIZE + 1))
        return Sampler.table(xs, self.partial_mass(xs))

    def to_dict(self) -> dict:
        out = {"kind": "table", "grid": self.grid.tolist(), "density": self.density.tolist()}
        if self.theta:
            out["tilt"] = self.theta
        return out


def _solve_eta(mu: LifespanMeasure) -> float:
    if mu.m <= 1.0:
        return 0.0
    # psi is convex with psi'(0) = 1 - m < 0: locate its minimum, then the
    # root to the right of it.
    hi = 1.0
    while mu.psi_prime(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise MeasureError("could not bracket the minimum of psi")
    lo = brentq(lambda x: float(mu.psi_prime(x)), 0.0, hi, xtol=1e-15)
    top = max(hi, 2.0 * lo)
    while mu.laplace_exponent(top) <= 0.0:
        top *= 2.0
        if top > 1e12:
            raise MeasureError("could not bracket the root of psi")
    return float(brentq(lambda x: float(mu.laplace_exponent(x)), lo, top, xtol=1e-15, rtol=1e-15))


def laplace_exponent(mu: LifespanMeasure, lam):
    if np.any(_as_array(lam) < 0):
        raise ValueError("the Laplace exponent is only evaluated at lam >= 0")
    out = mu.laplace_exponent(lam)
    return float(out) if np.ndim(out) == 0 else out


def solve_eta(mu: LifespanMeasure) -> float:
    return mu.eta


def tilt(mu: LifespanMeasure) -> LifespanMeasure:
    """The tilted measure exp(-eta r) Pi(dr), of mass b - eta and root 0."""
    return mu.tilt()


def sample_lifespan(mu: LifespanMeasure, rng: np.random.Generator, size: int | None = None):
    return mu.sample(rng, size)


@dataclass(frozen=True, eq=False)
class AncestorLaw:
    """Law of the ancestor's lifespan: density, CDF and sampler."""

    name: str
    density: Callable
    cdf: Callable
    sampler: Sampler
    support: float = math.inf

    def sample(self, rng: np.random.Generator, size: int | None = None):
        return self.sampler.sample(rng, size)

    @classmethod
    def exponential(cls, name: str, rate: float) -> "AncestorLaw":
        return cls(
            name,
            lambda u: np.where(_as_array(u) >= 0, rate * np.exp(-rate * np.maximum(_as_array(u), 0.0)), 0.0),
            lambda u: -np.expm1(-rate * np.maximum(_as_array(u), 0.0)),
            Sampler.exponential(rate),
        )

    @classmethod
    def fixed(cls, value: float) -> "AncestorLaw":
        value = float(value)
        if not value > 0:
            raise ValueError("a fixed ancestor lifespan must be positive")
        return cls("fixed", lambda u: np.zeros_like(_as_array(u)), lambda u: (_as_array(u) >= value).astype(float), Sampler.fixed(value), value)

    @classmethod
    def standard(cls, mu: LifespanMeasure) -> "AncestorLaw":
        if isinstance(mu, Exponential):
            return cls.exponential("standard", mu.d)
        if isinstance(mu, TabulatedDensity):
            density = lambda u: mu.pdf(u) / mu.b
        else:
            density = lambda u: np.zeros_like(_as_array(u))
        return cls("standard", density, lambda u: mu.partial_mass(np.nextafter(_as_array(u), np.inf)) / mu.b, mu.lifespan_sampler(), mu.r_max)


def _table_law(name: str, density, cdf, support: float, extra) -> AncestorLaw:
    xs = np.union1d(np.linspace(0.0, support, ANCESTOR_TABLE_SIZE), np.asarray(extra, dtype=float))
    xs = xs[(xs >= 0) & (xs <= support)]
    return AncestorLaw(name, density, cdf, Sampler.table(xs, cdf(xs)), support)


def _breakpoints(mu: LifespanMeasure):
    if isinstance(mu, PointMasses):
        return mu._r
    if isinstance(mu, TabulatedDensity):
        return mu.grid
    return []


def ancestor_law_top(mu: LifespanMeasure) -> AncestorLaw:
    """Undershoot law: density exp(-eta u) tail(u) / (m ^ 1)."""
    if isinstance(mu, Exponential):
        return AncestorLaw.exponential("top", max(mu.b, mu.d))
    eta, norm = mu.eta, min(mu.m, 1.0)
    tilted = mu.tilt()

    def density(u):
        u = _as_array(u)
        return np.where(u > 0, np.exp(-eta * u) * mu.tail(np.maximum(u, 0.0)) / norm, 0.0)

    def cdf(u):
        u = np.maximum(_as_array(u), 0.0)
        if eta == 0.0:
            return np.minimum(mu.tail_integral(u) / norm, 1.0)
        val = (mu.partial_mass(u) - tilted.partial_mass(u) - np.expm1(-eta * u) * mu.tail(u)) / eta
        return np.clip(val / norm, 0.0, 1.0)

    return _table_law("top", density, cdf, mu.r_max, _breakpoints(mu))


def ancestor_law_bot(mu: LifespanMeasure) -> AncestorLaw:
    """Overshoot law: density exp(eta v) tilted_tail(v) / (m ^ 1)."""
    if isinstance(mu, Exponential):
        return AncestorLaw.exponential("bot", mu.d)
    eta, norm = mu.eta, min(mu.m, 1.0)
    tilted = mu.tilt()

    def density(v):
        v = _as_array(v)
        return np.where(v > 0, np.exp(eta * v) * tilted.tail(np.maximum(v, 0.0)) / norm, 0.0)

    def cdf(v):
        v = np.maximum(_as_array(v), 0.0)
        if eta == 0.0:
            return np.minimum(mu.tail_integral(v) / norm, 1.0)
        val = (mu.partial_mass(v) - tilted.partial_mass(v) + np.expm1(eta * v) * tilted.tail(v)) / eta
        return np.clip(val / norm, 0.0, 1.0)

    return _table_law("bot", density, cdf, mu.r_max, _breakpoints(mu))


def measure_from_dict(spec: dict) -> LifespanMeasure:
    kind = spec.get("kind")
    try:
        if kind == "exponential":
            return Exponential(float(spec["b"]), float(spec["d"]))
        if kind == "atoms":
            return PointMasses(tuple(tuple(p) for p in spec["points"]))
        if kind == "table":
            return TabulatedDensity(np.asarray(spec["grid"], float), np.asarray(spec["density"], float), float(spec.get("tilt", 0.0)))
    except (KeyError, TypeError) as exc:
        raise MeasureError(f"bad measure description: {exc}") from exc
    raise MeasureError(f"unknown measure kind {kind!r}")
