"""Inverse-CDF samplers shared by Python code and the numba kernels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

EXP = 0
DISCRETE = 1
TABLE = 2
FIXED = 3

QUANTUM = 2.0**-32
_SCALE = 2.0**32


@njit(cache=True, nogil=True)
def quantize(x):
    # Snap to the dyadic grid so sums and differences of levels stay exact.
    return np.floor(x * _SCALE + 0.5) / _SCALE


@njit(cache=True, nogil=True)
def draw(rng, kind, par, xs, cs):
    if kind == EXP:
        return rng.standard_exponential() / par
    if kind == FIXED:
        return par
    u = rng.random()
    n = xs.shape[0]
    i = np.searchsorted(cs, u, side="right")
    if kind == DISCRETE:
        if i >= n:
            i = n - 1
        return xs[i]
    if i < 1:
        i = 1
    if i > n - 1:
        i = n - 1
    c0 = cs[i - 1]
    c1 = cs[i]
    if c1 > c0:
        return xs[i - 1] + (u - c0) / (c1 - c0) * (xs[i] - xs[i - 1])
    return xs[i]


@njit(cache=True, nogil=True)
def draw_many(rng, kind, par, xs, cs, size):
    out = np.empty(size)
    for k in range(size):
        out[k] = draw(rng, kind, par, xs, cs)
    return out


_EMPTY = np.zeros(1)


@dataclass(frozen=True, eq=False)
class Sampler:
    """Flat description of a one-dimensional law that a kernel can draw from.

    ``kind`` selects the method: exponential with rate ``par``, a fixed
    value ``par``, a categorical law on ``xs`` with cumulative
    probabilities ``cs``, or linear interpolation of the inverse of a
    tabulated CDF ``cs`` at abscissae ``xs``.
    """

    kind: int
    par: float = 0.0
    xs: np.ndarray = field(default_factory=lambda: _EMPTY)
    cs: np.ndarray = field(default_factory=lambda: _EMPTY)

    @classmethod
    def exponential(cls, rate: float) -> "Sampler":
        return cls(EXP, float(rate))

    @classmethod
    def fixed(cls, value: float) -> "Sampler":
        return cls(FIXED, float(value))

    @classmethod
    def discrete(cls, values, probs) -> "Sampler":
        cs = np.cumsum(np.asarray(probs, dtype=float))
        cs /= cs[-1]
        cs[-1] = 1.0
        return cls(DISCRETE, 0.0, np.ascontiguousarray(values, dtype=float), cs)

    @classmethod
    def table(cls, xs, cdf) -> "Sampler":
        cs = np.asarray(cdf, dtype=float).copy()
        cs = (cs - cs[0]) / (cs[-1] - cs[0])
        cs = np.maximum.accumulate(cs)
        cs[-1] = 1.0
        return cls(TABLE, 0.0, np.ascontiguousarray(xs, dtype=float), cs)

    def args(self):
        return self.kind, self.par, self.xs, self.cs

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if size is None:
            return float(draw(rng, *self.args()))
        return draw_many(rng, *self.args(), int(size))
