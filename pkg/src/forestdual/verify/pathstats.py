"""Functionals of many paths stored as flat level arrays.

A batch is ``(tops, bottoms, offsets)``: path i owns the segments
``offsets[i]:offsets[i+1]``.  Forest contours and simulated Levy paths
share this layout.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..path import PiecewisePath


def lifetimes(tops, bottoms, offsets) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(tops - bottoms)])
    return c[offsets[1:]] - c[offsets[:-1]]


def jump_counts(offsets) -> np.ndarray:
    return np.diff(offsets) - 1


@njit(cache=True)
def local_times(tops, bottoms, offsets, levels):
    """Gamma_r of every path at every level: #{bottom < r <= top}."""
    n = offsets.shape[0] - 1
    out = np.zeros((n, levels.shape[0]), dtype=np.int64)
    for i in range(n):
        for j in range(offsets[i], offsets[i + 1]):
            for k in range(levels.shape[0]):
                r = levels[k]
                if bottoms[j] < r and r <= tops[j]:
                    out[i, k] += 1
    return out


@njit(cache=True)
def _segment_stats(tops, bottoms, offsets):
    n = offsets.shape[0] - 1
    first_jump = np.full(n, np.nan)
    first_time = np.full(n, np.nan)
    area = np.zeros(n)
    sup = np.full(n, -np.inf)
    inf = np.full(n, np.inf)
    for i in range(n):
        t = 0.0
        for j in range(offsets[i], offsets[i + 1]):
            d = tops[j] - bottoms[j]
            area[i] += d * (tops[j] + bottoms[j]) / 2.0
            if tops[j] > sup[i]:
                sup[i] = tops[j]
            if bottoms[j] < inf[i]:
                inf[i] = bottoms[j]
            t += d
            if j == offsets[i] and j + 1 < offsets[i + 1]:
                first_jump[i] = tops[j + 1] - bottoms[j]
                first_time[i] = t
    return first_jump, first_time, area, sup, inf


def segment_stats(tops, bottoms, offsets) -> dict:
    """First jump size and time (nan without jumps), area, supremum, infimum."""
    fj, ft, area, sup, inf = _segment_stats(tops, bottoms, offsets)
    return {"first_jump": fj, "first_jump_time": ft, "area": area, "sup": sup, "inf": inf}


@njit(cache=True)
def _values_at(tops, bottoms, offsets, fractions):
    n = offsets.shape[0] - 1
    out = np.empty(n)
    for i in range(n):
        total = 0.0
        for j in range(offsets[i], offsets[i + 1]):
            total += tops[j] - bottoms[j]
        target = fractions[i] * total
        acc = 0.0
        out[i] = bottoms[offsets[i + 1] - 1]
        for j in range(offsets[i], offsets[i + 1]):
            d = tops[j] - bottoms[j]
            if acc + d > target:
                out[i] = tops[j] - (target - acc)
                break
            acc += d
    return out


def values_at_fraction(tops, bottoms, offsets, fraction) -> np.ndarray:
    """X at time fraction * zeta on each path."""
    n = offsets.size - 1
    f = np.broadcast_to(np.asarray(fraction, dtype=float), (n,)).copy()
    return _values_at(tops, bottoms, offsets, f)


def random_jump_sizes(tops, bottoms, offsets, rng: np.random.Generator) -> np.ndarray:
    """One uniformly chosen jump size per path (nan for paths without jumps)."""
    counts = jump_counts(offsets)
    u = rng.random(counts.size)
    out = np.full(counts.size, np.nan)
    has = np.flatnonzero(counts > 0)
    pick = offsets[has] + np.floor(u[has] * counts[has]).astype(np.int64)
    out[has] = tops[pick + 1] - bottoms[pick]
    return out


def reverse_flat(tops, bottoms, offsets):
    """Space-time reversal of every path (paths must be finite)."""
    new_t = np.empty_like(tops)
    new_b = np.empty_like(bottoms)
    for i in range(offsets.size - 1):
        lo, hi = offsets[i], offsets[i + 1]
        x0 = tops[lo]
        new_t[lo:hi] = x0 - bottoms[lo:hi][::-1]
        new_b[lo:hi] = x0 - tops[lo:hi][::-1]
    return new_t, new_b, offsets


def pack(paths) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    paths = list(paths)
    lengths = np.array([len(p) for p in paths], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    if not paths:
        return np.zeros(0), np.zeros(0), offsets
    return np.concatenate([p.tops for p in paths]), np.concatenate([p.bottoms for p in paths]), offsets


def unpack(tops, bottoms, offsets) -> list[PiecewisePath]:
    return [PiecewisePath(tops[offsets[i] : offsets[i + 1]], bottoms[offsets[i] : offsets[i + 1]]) for i in range(offsets.size - 1)]


def functionals(tops, bottoms, offsets, levels) -> dict:
    """The standard functional set: lifetime, jump count and local times."""
    out = {"zeta": lifetimes(tops, bottoms, offsets), "jumps": jump_counts(offsets)}
    lt = local_times(tops, bottoms, offsets, np.ascontiguousarray(levels, dtype=float))
    for k, r in enumerate(levels):
        out[f"gamma@{r:.4g}"] = lt[:, k]
    return out
