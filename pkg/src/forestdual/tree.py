"""Chronological trees, forests and their width processes.

A node lives on the time interval (alpha, omega]: it is born at level alpha
and dies at level omega.  Trees are stored in canonical planar order, a
depth-first preorder in which the children of a node are visited by
decreasing birth level.  This is exactly the order in which the contour
process meets the nodes, so the contour of a tree is read off the arrays
without any traversal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np


class TreeError(ValueError):
    """Node data violating the chronological-tree invariants."""


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChronologicalTree:
    """A planar chronological tree in canonical preorder.

    Node ``i`` has birth level ``alpha[i]``, death level ``omega[i]`` and
    parent index ``parent[i]`` (-1 for the root, which is node 0).
    ``horizon`` records the level at which the tree was truncated, if any.
    """

    alpha: np.ndarray
    omega: np.ndarray
    parent: np.ndarray
    horizon: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen(self.alpha, float))
        object.__setattr__(self, "omega", _frozen(self.omega, float))
        object.__setattr__(self, "parent", _frozen(self.parent, np.int64))

    @classmethod
    def from_nodes(cls, records: Iterable[Sequence], horizon: float | None = None) -> "ChronologicalTree":
        """Build a tree from ``(id, parent_id, alpha, omega)`` records.

        Ids are arbitrary hashables, the root has parent ``None``.  The
        result is renumbered in canonical order and validated.
        """
        recs = list(records)
        if not recs:
            raise TreeError("a tree needs at least one node")
        info = {}
        children: dict = {}
        roots = []
        for rid, pid, a, w in recs:
            if rid in info:
                raise TreeError(f"duplicate node id {rid!r}")
            info[rid] = (pid, float(a), float(w))
            if pid is None:
                roots.append(rid)
            else:
                children.setdefault(pid, []).append(rid)
        if len(roots) != 1:
            raise TreeError(f"expected exactly one root, found {len(roots)}")
        for pid in children:
            if pid not in info:
                raise TreeError(f"unknown parent id {pid!r}")
        alpha, omega, parent = [], [], []
        stack = [(roots[0], -1)]
        while stack:
            rid, pidx = stack.pop()
            _, a, w = info[rid]
            idx = len(alpha)
            alpha.append(a)
            omega.append(w)
            parent.append(pidx)
            kids = sorted(children.get(rid, []), key=lambda c: info[c][1])
            for k0, k1 in zip(kids, kids[1:]):
                if info[k0][1] == info[k1][1]:
                    raise TreeError("simultaneous births are not supported")
            # increasing birth level pushed last-on-top = largest first
            stack.extend((c, idx) for c in kids)
        if len(alpha) != len(recs):
            raise TreeError("records do not form a single connected tree")
        tree = cls(np.array(alpha), np.array(omega), np.array(parent), horizon)
        tree.validate()
        return tree

    def validate(self) -> None:
        a, w, p = self.alpha, self.omega, self.parent
        if a.size == 0:
            raise TreeError("empty tree")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(w))):
            raise TreeError("levels must be finite")
        if a[0] != 0.0 or p[0] != -1:
            raise TreeError("node 0 must be a root born at level 0")
        if np.any(w <= a):
            raise TreeError("every node needs omega > alpha")
        if a.size > 1:
            pp = p[1:]
            if np.any(pp < 0) or np.any(pp >= np.arange(1, a.size)):
                raise TreeError("parents must precede their children")
            if np.any(a[pp] >= a[1:]) or np.any(a[1:] > w[pp]):
                raise TreeError("children must be born during the parent's life")

    @property
    def n_nodes(self) -> int:
        return int(self.alpha.size)

    def nodes(self) -> Iterator[tuple[int, int | None, float, float]]:
        for i in range(self.n_nodes):
            p = int(self.parent[i])
            yield i, (None if p < 0 else p), float(self.alpha[i]), float(self.omega[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChronologicalTree):
            return NotImplemented
        return (
            np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.omega, other.omega)
            and np.array_equal(self.parent, other.parent)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"ChronologicalTree(n_nodes={self.n_nodes}, height={self.extinction_time()!r})"

    def extinction_time(self) -> float:
        return float(self.omega.max())

    def total_length(self) -> float:
        return float(np.sum(self.omega - self.alpha))

    def truncate(self, s: float) -> "ChronologicalTree":
        return truncate(self, s)

    def width(self) -> "WidthProcess":
        return WidthProcess(self.alpha, self.omega)


@dataclass(frozen=True, eq=False)
class Forest:
    """Finite ordered sequence of chronological trees."""

    trees: tuple

    def __post_init__(self):
        trees = tuple(self.trees)
        if not trees:
            raise TreeError("a forest needs at least one tree")
        object.__setattr__(self, "trees", trees)

    def __len__(self) -> int:
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)

    def __getitem__(self, i):
        return self.trees[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Forest):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self.trees, other.trees))

    __hash__ = None

    def __repr__(self) -> str:
        return f"Forest(n_trees={len(self)}, n_nodes={self.n_nodes})"

    @property
    def n_nodes(self) -> int:
        return sum(t.n_nodes for t in self.trees)

    @property
    def alpha(self) -> np.ndarray:
        return np.concatenate([t.alpha for t in self.trees])

    @property
    def omega(self) -> np.ndarray:
        return np.concatenate([t.omega for t in self.trees])

    def extinction_time(self) -> float:
        return max(t.extinction_time() for t in self.trees)

    def total_length(self) -> float:
        return float(sum(t.total_length() for t in self.trees))

    def truncate(self, s: float) -> "Forest":
        return Forest(tuple(truncate(t, s) for t in self.trees))

    def width(self) -> "WidthProcess":
        return WidthProcess(self.alpha, self.omega)


class WidthProcess:
    """xi_t = #{nodes with alpha < t <= omega}, a left-continuous step function.

    Values are evaluated exactly by counting; ``right_limit`` gives
    xi_{t+} = #{alpha <= t < omega}.  Breakpoints and the levels taken on
    the intervals between them are available for plotting and integration.
    """

    def __init__(self, alpha: np.ndarray, omega: np.ndarray):
        self._a = np.sort(np.asarray(alpha, dtype=float))
        self._w = np.sort(np.asarray(omega, dtype=float))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.searchsorted(self._a, t, side="left") - np.searchsorted(self._w, t, side="left")
        return int(out) if out.ndim == 0 else out.astype(np.int64)

    def right_limit(self, t):
        t = np.asarray(t, dtype=float)
        out = np.searchsorted(self._a, t, side="right") - np.searchsorted(self._w, t, side="right")
        return int(out) if out.ndim == 0 else out.astype(np.int64)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.union1d(self._a, self._w)

    def levels(self) -> np.ndarray:
        """Value on (breakpoints[k], breakpoints[k+1]] for each k."""
        bp = self.breakpoints
        return self(bp[1:]) if bp.size > 1 else np.zeros(0, dtype=np.int64)

    def area(self) -> float:
        """Integral of xi over (0, inf), summed over the step intervals."""
        bp = self.breakpoints
        if bp.size < 2:
            return 0.0
        return float(np.sum(self.levels() * np.diff(bp)))

    def maximum(self) -> int:
        bp = self.breakpoints
        return int(self.levels().max()) if bp.size > 1 else 0

    def support_end(self) -> float:
        return float(self._w[-1]) if self._w.size else 0.0


def width_process(t: ChronologicalTree | Forest) -> WidthProcess:
    return t.width()


def truncate(t: ChronologicalTree, s: float) -> ChronologicalTree:
    """Keep what exists up to level s: drop nodes born at or after s, clip deaths."""
    if not s > 0:
        raise ValueError("truncation level must be positive")
    keep = t.alpha < s
    idx = np.flatnonzero(keep)
    remap = np.full(t.n_nodes, -1, dtype=np.int64)
    remap[idx] = np.arange(idx.size)
    par = t.parent[idx]
    new_parent = np.where(par < 0, -1, remap[np.maximum(par, 0)])
    horizon = s if t.horizon is None else min(s, t.horizon)
    return ChronologicalTree(t.alpha[idx], np.minimum(t.omega[idx], s), new_parent, horizon)


def extinction_time(t: ChronologicalTree | Forest) -> float:
    return t.extinction_time()


def total_length(t: ChronologicalTree | Forest) -> float:
    return t.total_length()


def forest_records(forests: Iterable[Forest]) -> Iterator[dict]:
    for fi, forest in enumerate(forests):
        for ti, tree in enumerate(forest):
            for i, p, a, w in tree.nodes():
                yield {"forest": fi, "tree": ti, "id": i, "parent": p, "alpha": a, "omega": w}


def write_forests_jsonl(forests: Iterable[Forest], fh: IO[str]) -> None:
    """One node per line: {forest, tree, id, parent, alpha, omega}."""
    for rec in forest_records(forests):
        fh.write(json.dumps(rec) + "\n")


def read_forests_jsonl(fh: IO[str]) -> list[Forest]:
    groups: dict = {}
    for lineno, line in enumerate(fh, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            key = (int(rec.get("forest", 0)), int(rec.get("tree", 0)))
            groups.setdefault(key, []).append((rec["id"], rec["parent"], rec["alpha"], rec["omega"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise TreeError(f"line {lineno}: bad node record ({exc})") from exc
    forests: dict = {}
    for (fi, ti) in sorted(groups):
        forests.setdefault(fi, []).append(ChronologicalTree.from_nodes(groups[(fi, ti)]))
    return [Forest(tuple(forests[k])) for k in sorted(forests)]


def single_node(omega: float) -> ChronologicalTree:
    return ChronologicalTree(np.array([0.0]), np.array([float(omega)]), np.array([-1]))
