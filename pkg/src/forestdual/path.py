"""Exact algebra of slope -1 paths with positive jumps.

A path is stored as a sequence of segments.  Segment ``i`` starts at level
``tops[i]`` (a value the path takes) and drifts down at unit speed to the
left limit ``bottoms[i]``, after which the path jumps up to ``tops[i+1]``.
The lifetime is the total drop, sum(tops - bottoms); an infinite lifetime is
encoded by ``bottoms[-1] = -inf``.

Storing levels rather than (time, jump) events makes every operator below a
rearrangement or clipping of levels.  When the levels are dyadic rationals
of moderate size (the simulators quantise to 2**-32) all these operations,
including the reflection ``x -> T - x``, are exact in floating point.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import IO, Iterable, Sequence

import numpy as np


class PathError(ValueError):
    """Operator precondition not met."""


class PathClassError(PathError):
    """Levels that do not describe a slope -1 path with positive jumps."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PiecewisePath:
    tops: np.ndarray
    bottoms: np.ndarray

    def __post_init__(self):
        t, b = _frozen(self.tops), _frozen(self.bottoms)
        object.__setattr__(self, "tops", t)
        object.__setattr__(self, "bottoms", b)
        if t.shape != b.shape:
            raise PathClassError("tops and bottoms must have the same length")
        if t.size == 0:
            return
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(b[:-1])) or np.isnan(b[-1]) or b[-1] == math.inf:
            raise PathClassError("levels must be finite (only the last bottom may be -inf)")
        if np.any(b > t):
            raise PathClassError("a segment cannot end above its start")
        if np.any(t[1:] <= b[:-1]):
            raise PathClassError("jumps must be strictly positive")

    # construction ------------------------------------------------------

    @classmethod
    def empty(cls) -> "PiecewisePath":
        return cls(np.zeros(0), np.zeros(0))

    @classmethod
    def segment(cls, x0: float, duration: float) -> "PiecewisePath":
        return cls([x0], [x0 - duration])

    @classmethod
    def from_events(cls, x0: float, times: Sequence[float], jumps: Sequence[float], zeta: float) -> "PiecewisePath":
        """Build from the start value, jump times and sizes, and lifetime."""
        times = [float(t) for t in times]
        jumps = [float(j) for j in jumps]
        if len(times) != len(jumps):
            raise PathClassError("need one size per jump time")
        if any(j <= 0 for j in jumps):
            raise PathClassError("jump sizes must be positive")
        edges = [0.0] + times + [float(zeta)]
        if any(b <= a for a, b in zip(edges, edges[1:-1])) or (times and times[-1] >= zeta):
            raise PathClassError("jump times must be increasing, positive and below the lifetime")
        tops, bottoms = [float(x0)], []
        for k, j in enumerate(jumps):
            bottoms.append(tops[-1] - (edges[k + 1] - edges[k]))
            tops.append(bottoms[-1] + j)
        bottoms.append(-math.inf if zeta == math.inf else tops[-1] - (edges[-1] - edges[-2]))
        return cls(tops, bottoms)

    # basic views -------------------------------------------------------

    def __len__(self) -> int:
        return int(self.tops.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PiecewisePath):
            return NotImplemented
        return np.array_equal(self.tops, other.tops) and np.array_equal(self.bottoms, other.bottoms)

    __hash__ = None

    def __repr__(self) -> str:
        return f"PiecewisePath(x0={self.x0!r}, n_jumps={self.n_jumps}, zeta={self.zeta!r})"

    @property
    def x0(self) -> float:
        return float(self.tops[0]) if self.tops.size else math.nan

    @property
    def terminal(self) -> float:
        """Left limit at the lifetime."""
        return float(self.bottoms[-1]) if self.tops.size else math.nan

    @cached_property
    def durations(self) -> np.ndarray:
        return self.tops - self.bottoms

    @cached_property
    def ends(self) -> np.ndarray:
        return np.cumsum(self.durations)

    @cached_property
    def starts(self) -> np.ndarray:
        return np.concatenate([[0.0], self.ends[:-1]]) if self.tops.size else np.zeros(0)

    @property
    def zeta(self) -> float:
        return float(self.ends[-1]) if self.tops.size else 0.0

    @property
    def finite(self) -> bool:
        return self.tops.size == 0 or math.isfinite(self.bottoms[-1])

    @property
    def n_jumps(self) -> int:
        return max(int(self.tops.size) - 1, 0)

    @property
    def jump_times(self) -> np.ndarray:
        return self.ends[:-1].copy()

    @property
    def jump_sizes(self) -> np.ndarray:
        return self.tops[1:] - self.bottoms[:-1]

    def events(self) -> list[tuple[float, float]]:
        return list(zip(self.jump_times.tolist(), self.jump_sizes.tolist()))

    def supremum(self) -> float:
        return float(self.tops.max()) if self.tops.size else -math.inf

    def infimum(self) -> float:
        """Infimum of the values and left limits."""
        return float(self.bottoms.min()) if self.tops.size else math.inf

    def area(self) -> float:
        """int_0^zeta X_t dt."""
        self._need_finite()
        return float(np.sum(self.durations * (self.tops + self.bottoms) / 2.0))

    def _need_finite(self):
        if not self.finite:
            raise PathError("operation needs a finite lifetime")

    def value_at(self, t: float) -> float:
        if not (0 <= t < self.zeta):
            raise PathError(f"t = {t} outside [0, zeta)")
        i = int(np.searchsorted(self.ends, t, side="right"))
        return float(self.tops[i] - (t - self.starts[i]))

    def left_limit(self, t: float) -> float:
        if not (0 < t <= self.zeta):
            raise PathError(f"t = {t} outside (0, zeta]")
        i = int(np.searchsorted(self.ends, t, side="left"))
        return float(self.tops[i] - (t - self.starts[i]))

    # serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        self._need_finite()
        return {
            "x0": self.x0 if self.tops.size else None,
            "zeta": self.zeta,
            "events": [[t, j] for t, j in self.events()],
            "levels": [[a, c] for a, c in zip(self.tops.tolist(), self.bottoms.tolist())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewisePath":
        if "levels" in d:
            lv = np.asarray(d["levels"], dtype=float).reshape(-1, 2)
            return cls(lv[:, 0], lv[:, 1])
        if d.get("x0") is None:
            return cls.empty()
        ev = d.get("events", [])
        return cls.from_events(d["x0"], [e[0] for e in ev], [e[1] for e in ev], d["zeta"])

    def breakpoint_rows(self) -> list[tuple[float, float]]:
        """(t, value) rows: the start value and the left limit of every segment."""
        self._need_finite()
        rows = []
        for s, e, a, c in zip(self.starts.tolist(), self.ends.tolist(), self.tops.tolist(), self.bottoms.tolist()):
            rows.append((s, a))
            rows.append((e, c))
        return rows

    @classmethod
    def from_breakpoint_rows(cls, rows: Sequence[tuple[float, float]]) -> "PiecewisePath":
        if len(rows) % 2:
            raise PathClassError("breakpoint rows come in (start, end) pairs")
        vals = np.asarray([r[1] for r in rows], dtype=float)
        return cls(vals[0::2], vals[1::2])


# passage times ---------------------------------------------------------


def first_passage(p: PiecewisePath, level: float, kind: str = "hit") -> float | None:
    """First passage time of ``p`` at ``level``.

    kind "hit": inf{t > 0 : X_t = level}, where reaching the level as the
    left limit at the lifetime counts as a hit; "below": entry into
    (-inf, level); "above": entry into (level, inf).  Returns None when the
    event does not happen before the lifetime.
    """
    if len(p) == 0:
        return None
    t, b, s = p.tops, p.bottoms, p.starts
    if kind == "hit":
        hit = (b < level) & (level <= t)
        hit[0] &= level < t[0]
        idx = np.flatnonzero(hit)
        best = float(s[idx[0]] + (t[idx[0]] - level)) if idx.size else None
        if b[-1] == level and (best is None or p.zeta < best):
            best = p.zeta
        return best
    if kind == "below":
        idx = np.flatnonzero(b < level)
        if not idx.size:
            return None
        i = idx[0]
        return float(s[i] + max(t[i] - level, 0.0))
    if kind == "above":
        idx = np.flatnonzero(t > level)
        if not idx.size:
            return None
        return float(s[idx[0]])
    raise ValueError(f"unknown passage kind {kind!r}")


# shift, kill, reversal ---------------------------------------------------


def shift(p: PiecewisePath, s: float) -> PiecewisePath:
    """theta_s: the path seen from time s on."""
    if s == 0:
        return p
    if not (0 < s < p.zeta):
        raise PathError(f"shift time {s} outside [0, zeta)")
    i = int(np.searchsorted(p.ends, s, side="right"))
    offset = s - p.starts[i]
    first = p.tops[i] if offset == 0 else p.tops[i] - offset
    return PiecewisePath(np.concatenate([[first], p.tops[i + 1 :]]), p.bottoms[i:])


def kill(p: PiecewisePath, at: float) -> PiecewisePath:
    """k_at: the path stopped (sent to the cemetery) at time ``at``."""
    if at == 0:
        return PiecewisePath.empty()
    if not (0 < at <= p.zeta):
        raise PathError(f"kill time {at} outside [0, zeta]")
    i = int(np.searchsorted(p.ends, at, side="left"))
    last = p.bottoms[i] if at == p.ends[i] else p.tops[i] - (at - p.starts[i])
    return PiecewisePath(p.tops[: i + 1], np.concatenate([p.bottoms[:i], [last]]))


def reverse(p: PiecewisePath) -> PiecewisePath:
    """rho: space-time reversal, t -> X_0 - X_{(zeta - t)-}."""
    if not p.finite:
        raise PathError("cannot reverse a path with infinite lifetime")
    if len(p) == 0:
        return p
    x0 = p.tops[0]
    return PiecewisePath(x0 - p.bottoms[::-1], x0 - p.tops[::-1])


# local time and clocks -----------------------------------------------------


def local_time(p: PiecewisePath, r):
    """Gamma_r: number of times t >= 0 (before the lifetime) with X_t = r."""
    p._need_finite()
    r_arr = np.asarray(r, dtype=float)
    out = np.searchsorted(np.sort(p.bottoms), r_arr, side="left") - np.searchsorted(np.sort(p.tops), r_arr, side="left")
    return int(out) if out.ndim == 0 else out.astype(np.int64)


def clock_below(p: PiecewisePath, s: float) -> PiecewisePath:
    """Erase the time spent at or below level s and glue the rest."""
    keep = p.tops > s
    return PiecewisePath(p.tops[keep], np.maximum(p.bottoms[keep], s))


def clock_alpha(p: PiecewisePath) -> PiecewisePath:
    """Erase the time spent in (-inf, 0]."""
    return clock_below(p, 0.0)


def clock_above(p: PiecewisePath, s: float) -> PiecewisePath:
    """Erase the time spent above s; jumps across s are clipped to land on s."""
    keep = p.bottoms < s
    return PiecewisePath(np.minimum(p.tops[keep], s), p.bottoms[keep])


def concat(paths: Iterable[PiecewisePath]) -> PiecewisePath:
    """Juxtapose paths, stopping after the first one with infinite lifetime.

    A junction where the next path starts exactly at the previous left limit
    is continuous and merges two segments.  A downward junction is outside
    the path class and raises.
    """
    tops: list[np.ndarray] = []
    bottoms: list[np.ndarray] = []
    last = None
    for q in paths:
        if len(q) == 0:
            continue
        qt, qb = q.tops, q.bottoms
        if last is not None:
            if qt[0] < last:
                raise PathClassError("concatenation would create a negative jump")
            if qt[0] == last:
                prev_b = bottoms[-1]
                bottoms[-1] = np.concatenate([prev_b[:-1], [qb[0]]])
                qt, qb = qt[1:], qb[1:]
                if qt.size == 0:
                    last = float(bottoms[-1][-1])
                    if not q.finite:
                        break
                    continue
        tops.append(qt)
        bottoms.append(qb)
        last = float(qb[-1])
        if not q.finite:
            break
    if not tops:
        return PiecewisePath.empty()
    return PiecewisePath(np.concatenate(tops), np.concatenate(bottoms))


# last passage from T to 0 ------------------------------------------------


@dataclass(frozen=True)
class LastPassage:
    """Indices and times describing the first T-to-0 passage of a path.

    ``first`` is the segment where T is first reached (time g_T, t = 0
    allowed), ``last`` the last segment reaching T before 0 is reached
    (time gbar_T) and ``zero`` the segment along which the left limit first
    reaches 0 (time g_0).
    """

    first: int
    last: int
    zero: int
    g_T: float
    gbar_T: float
    g_0: float


def last_passage(p: PiecewisePath, T: float) -> LastPassage:
    if not T > 0:
        raise PathError("T must be positive")
    t, b, s = p.tops, p.bottoms, p.starts
    reach = (b < T) & (T <= t)
    idx = np.flatnonzero(reach)
    if not idx.size:
        raise PathError("the path never reaches T")
    j0 = int(idx[0])
    zeros = np.flatnonzero(b[j0:] <= 0.0)
    if not zeros.size:
        raise PathError("the path does not return to 0 after reaching T")
    k = j0 + int(zeros[0])
    j = int(idx[idx <= k][-1])
    return LastPassage(j0, j, k, float(s[j0] + (t[j0] - T)), float(s[j] + (t[j] - T)), float(s[k] + t[k]))


def chi(p: PiecewisePath, T: float) -> PiecewisePath:
    """Move the last T-to-0 passage to the front and kill at g_0.

    The result is [X on [gbar_T, g_0), X on [0, gbar_T)]: it starts at T,
    follows the final descent to 0, then replays the beginning of the path.
    """
    lp = last_passage(p, T)
    j, k = lp.last, lp.zero
    t, b = p.tops, p.bottoms
    front_t = np.concatenate([[T], t[j + 1 : k + 1]])
    front_b = np.concatenate([b[j:k], [max(b[k], 0.0)]]) if k > j else np.array([max(b[j], 0.0)])
    back_t = t[:j]
    back_b = b[:j]
    if t[j] > T:
        back_t = np.concatenate([back_t, [t[j]]])
        back_b = np.concatenate([back_b, [T]])
    if back_t.size and back_t[0] <= 0.0:
        raise PathClassError("the rearranged path would jump down at the junction")
    return PiecewisePath(np.concatenate([front_t, back_t]), np.concatenate([front_b, back_b]))


def K(p: PiecewisePath, T: float) -> PiecewisePath:
    """The dual contour map: reverse(chi(p, T))."""
    return reverse(chi(p, T))


# io --------------------------------------------------------------------------


def write_paths_jsonl(paths: Iterable[PiecewisePath], fh: IO[str]) -> None:
    for q in paths:
        fh.write(json.dumps(q.to_dict()) + "\n")


def read_paths_jsonl(fh: IO[str]) -> list[PiecewisePath]:
    out = []
    for line in fh:
        line = line.strip()
        if line:
            out.append(PiecewisePath.from_dict(json.loads(line)))
    return out


def write_paths_csv(paths: Iterable[PiecewisePath], fh: IO[str]) -> None:
    """Columns path, t, value: two rows per segment (start value, left limit)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["path", "t", "value"])
    for i, q in enumerate(paths):
        for t, v in q.breakpoint_rows():
            w.writerow([i, repr(t), repr(v)])


def read_paths_csv(fh: IO[str]) -> list[PiecewisePath]:
    rows: dict[int, list] = {}
    reader = csv.DictReader(fh)
    for row in reader:
        rows.setdefault(int(row["path"]), []).append((float(row["t"]), float(row["value"])))
    return [PiecewisePath.from_breakpoint_rows(rows[k]) for k in sorted(rows)]
