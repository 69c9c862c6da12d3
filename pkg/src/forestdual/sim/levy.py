"""Direct simulation of the slope -1 Levy process with jump measure Pi."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..measure import LifespanMeasure
from ..path import PiecewisePath
from ..streams import run_blocks
from . import _kernels as K

STATUS_NAMES = {
    K.HIT_ZERO: "hit-zero",
    K.PASSED_UP: "passed-upper",
    K.LOW_CAP: "low-cap",
    K.HIGH_CAP: "high-cap",
    K.TIME_CAP: "time-cap",
    K.JUMP_CAP: "jump-cap",
}

_UPPER_MODES = {"none": K.UP_NONE, "kill": K.UP_KILL, "reflect": K.UP_REFLECT}


@dataclass(frozen=True)
class Rules:
    """How a simulated path ends or is constrained.

    kill_zero: stop when 0 is hit at a positive time.
    upper, upper_mode: "kill" stops at the first jump into (upper, inf),
    "reflect" clips jumps at ``upper`` (the path reflected below upper).
    low_cap, high_cap: stop below/above these levels; these proxy events
    of the type "never returns".  t_max and max_jumps are safety caps.
    """

    kill_zero: bool = True
    upper: float = math.inf
    upper_mode: str = "none"
    low_cap: float = -math.inf
    high_cap: float = math.inf
    t_max: float = math.inf
    max_jumps: int = 10**7

    def args(self):
        if self.upper_mode not in _UPPER_MODES:
            raise ValueError(f"unknown upper mode {self.upper_mode!r}")
        return (
            bool(self.kill_zero),
            float(self.upper),
            _UPPER_MODES[self.upper_mode],
            float(self.low_cap),
            float(self.high_cap),
            float(self.t_max),
            int(self.max_jumps),
        )


@dataclass(frozen=True, eq=False)
class LevyBatch:
    tops: np.ndarray
    bottoms: np.ndarray
    offsets: np.ndarray
    status: np.ndarray
    final: np.ndarray

    def __len__(self) -> int:
        return int(self.status.size)

    def path(self, i: int) -> PiecewisePath:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return PiecewisePath(self.tops[lo:hi], self.bottoms[lo:hi])

    def durations(self) -> np.ndarray:
        """Lifetime of every path."""
        d = np.concatenate([[0.0], np.cumsum(self.tops - self.bottoms)])
        return d[self.offsets[1:]] - d[self.offsets[:-1]]

    def n_segments(self) -> np.ndarray:
        return np.diff(self.offsets)

    def select(self, mask) -> "LevyBatch":
        idx = np.flatnonzero(mask)
        segs = [np.arange(self.offsets[i], self.offsets[i + 1]) for i in idx]
        take = np.concatenate(segs) if segs else np.zeros(0, np.int64)
        lengths = np.diff(self.offsets)[idx]
        off = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        return LevyBatch(self.tops[take], self.bottoms[take], off, self.status[idx], self.final[idx])

    @classmethod
    def merge(cls, parts: list["LevyBatch"]) -> "LevyBatch":
        offs, base = [np.zeros(1, np.int64)], 0
        for p in parts:
            offs.append(p.offsets[1:] + base)
            base += p.tops.size
        return cls(
            np.concatenate([p.tops for p in parts]),
            np.concatenate([p.bottoms for p in parts]),
            np.concatenate(offs),
            np.concatenate([p.status for p in parts]),
            np.concatenate([p.final for p in parts]),
        )


def simulate_levy_path(mu: LifespanMeasure, x0: float, rules: Rules, rng: np.random.Generator) -> tuple[PiecewisePath, str, float]:
    """One path from x0: (path, how it ended, final value)."""
    if x0 < 0:
        raise ValueError("x0 must be nonnegative")
    tops, bottoms = np.empty(64), np.empty(64)
    tops, bottoms, n, status, final = K.levy_path(rng, mu.b, *mu.lifespan_sampler().args(), float(x0), *rules.args(), tops, bottoms)
    return PiecewisePath(tops[:n].copy(), bottoms[:n].copy()), STATUS_NAMES[status], float(final)


def simulate_levy_batch(mu: LifespanMeasure, x0s: np.ndarray, rules: Rules, rng: np.random.Generator) -> LevyBatch:
    x0s = np.ascontiguousarray(x0s, dtype=float)
    t, b, off, st, fin = K.levy_batch(rng, x0s, mu.b, *mu.lifespan_sampler().args(), *rules.args())
    return LevyBatch(t, b, off, st, fin)


def simulate_levy_paths(mu: LifespanMeasure, x0, rules: Rules, n: int, seed: int, label: str = "levy", threads: int | None = None) -> LevyBatch:
    """``n`` paths from x0.

    x0 is a number, an array of ``n`` starting points, or a callable
    ``(rng, size) -> starts``.
    """
    if callable(x0):
        starts = None
    else:
        starts = np.broadcast_to(np.asarray(x0, dtype=float), (n,))

    def block(rng, size, first):
        s = x0(rng, size) if starts is None else starts[first : first + size]
        return simulate_levy_batch(mu, s, rules, rng)

    parts = run_blocks(block, n, seed, label, threads=threads, with_offset=True)
    if not parts:
        return LevyBatch(np.zeros(0), np.zeros(0), np.zeros(1, np.int64), np.zeros(0, np.int64), np.zeros(0))
    return LevyBatch.merge(parts)
