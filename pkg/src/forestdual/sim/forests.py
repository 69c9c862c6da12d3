"""Splitting trees and forests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..path import PiecewisePath
from ..measure import AncestorLaw, LifespanMeasure, ancestor_law_bot, ancestor_law_top
from ..streams import run_blocks, stream
from ..tree import ChronologicalTree, Forest
from . import _kernels as K

DEFAULT_NODE_CAP = 10**7
DEFAULT_MAX_RESAMPLE = 10**6


class SimulationError(RuntimeError):
    """Node cap exceeded or rejection sampling stalled."""


def resolve_ancestor(mu: LifespanMeasure, ancestor) -> AncestorLaw:
    """Ancestor law from a name ("standard", "top", "bottom"), a fixed value or a law."""
    if isinstance(ancestor, AncestorLaw):
        return ancestor
    if isinstance(ancestor, (int, float)) and not isinstance(ancestor, bool):
        return AncestorLaw.fixed(float(ancestor))
    if ancestor == "standard":
        return AncestorLaw.standard(mu)
    if ancestor in ("top", "undershoot"):
        return ancestor_law_top(mu)
    if ancestor in ("bottom", "bot", "overshoot"):
        return ancestor_law_bot(mu)
    raise ValueError(f"unknown ancestor law {ancestor!r}")


@dataclass(frozen=True, eq=False)
class ForestSpec:
    """What to simulate.

    ``measure`` is the base lifespan measure.  With ``tilted`` the
    descendants live under the tilted measure while ancestor laws named by
    string are still computed from the base measure.  ``stopping`` is
    "first-survivor" or a geometric parameter p in (0, 1].
    """

    measure: LifespanMeasure
    ancestor: object = "standard"
    T: float = 1.0
    stopping: object = "first-survivor"
    tilted: bool = False
    seed: int = 0
    node_cap: int = DEFAULT_NODE_CAP
    max_resample: int = DEFAULT_MAX_RESAMPLE

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.stopping != "first-survivor":
            p = float(self.stopping)
            if not (0 < p <= 1):
                raise ValueError("the geometric parameter must lie in (0, 1]")

    @cached_property
    def descendant_measure(self) -> LifespanMeasure:
        return self.measure.tilt() if self.tilted else self.measure

    @cached_property
    def ancestor_law(self) -> AncestorLaw:
        return resolve_ancestor(self.measure, self.ancestor)

    @property
    def mode(self) -> int:
        return K.FIRST_SURVIVOR if self.stopping == "first-survivor" else K.GEOMETRIC

    @property
    def p(self) -> float:
        return 1.0 if self.stopping == "first-survivor" else float(self.stopping)

    def interpretation(self) -> str:
        if self.stopping == "first-survivor":
            return "stopped sequence: i.i.d. trees up to the first one alive at T"
        return "geometric number of extinct trees followed by one surviving tree (conditioned by rejection)"


def _check(status: int, what: str):
    if status == K.OVERFLOW:
        raise SimulationError(f"{what}: node cap exceeded")
    if status == K.STALL:
        raise SimulationError(f"{what}: rejection sampling stalled")


@dataclass(frozen=True, eq=False)
class ForestBatch:
    """Many forests stored as flat arrays in canonical order.

    Nodes ``tree_start[k]:tree_start[k+1]`` form tree k; trees
    ``forest_start[i]:forest_start[i+1]`` form forest i.
    """

    alpha: np.ndarray
    omega: np.ndarray
    parent: np.ndarray
    tree_start: np.ndarray
    forest_start: np.ndarray
    T: float
    rejected: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.forest_start.size - 1)

    @property
    def n_nodes(self) -> int:
        return int(self.alpha.size)

    def tree(self, k: int) -> ChronologicalTree:
        lo, hi = self.tree_start[k], self.tree_start[k + 1]
        return ChronologicalTree(self.alpha[lo:hi], self.omega[lo:hi], self.parent[lo:hi], self.T)

    def forest(self, i: int) -> Forest:
        return Forest(tuple(self.tree(k) for k in range(self.forest_start[i], self.forest_start[i + 1])))

    def __iter__(self):
        return (self.forest(i) for i in range(len(self)))

    def contour_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Contours of all forests as flat (tops, bottoms, offsets).

        Trees are already truncated at T, so these are the truncated
        contours; forest i owns segments ``offsets[i]:offsets[i+1]``.
        """
        bottoms = np.empty_like(self.alpha)
        bottoms[:-1] = self.alpha[1:]
        bottoms[self.tree_start[1:] - 1] = 0.0
        return self.omega.copy(), bottoms, self.tree_start[self.forest_start].copy()

    def contour(self, i: int) -> PiecewisePath:
        lo, hi = self.tree_start[self.forest_start[i]], self.tree_start[self.forest_start[i + 1]]
        bottoms = np.concatenate([self.alpha[lo + 1 : hi], [0.0]])
        bottoms[self.tree_start[self.forest_start[i] + 1 : self.forest_start[i + 1]] - 1 - lo] = 0.0
        return PiecewisePath(self.omega[lo:hi], bottoms)

    def tree_counts(self) -> np.ndarray:
        return np.diff(self.forest_start)

    def widths(self, times) -> dict:
        """Width functionals of every forest (see ``forest_widths``)."""
        times = np.ascontiguousarray(times, dtype=float)
        xi, trees, at_T, wmax, area = K.forest_widths(self.alpha, self.omega, self.tree_start, self.forest_start, times, self.T)
        return {"xi": xi, "trees": trees, "at_T": at_T, "max": wmax, "area": area}

    @classmethod
    def merge(cls, parts: list["ForestBatch"], T: float) -> "ForestBatch":
        alpha = np.concatenate([p.alpha for p in parts])
        omega = np.concatenate([p.omega for p in parts])
        parent = np.concatenate([p.parent for p in parts])
        ts, fs = [np.zeros(1, np.int64)], [np.zeros(1, np.int64)]
        node_off, tree_off = 0, 0
        for p in parts:
            ts.append(p.tree_start[1:] + node_off)
            fs.append(p.forest_start[1:] + tree_off)
            node_off += p.n_nodes
            tree_off += p.tree_start.size - 1
        return cls(alpha, omega, parent, np.concatenate(ts), np.concatenate(fs), T, sum(p.rejected for p in parts))


def simulate_forests(spec: ForestSpec, n: int, seed: int | None = None, label: str = "forest", threads: int | None = None) -> ForestBatch:
    """Simulate ``n`` independent forests of ``spec``.

    Draws come from the stream (seed, label, block) for each block of
    replicates, so the result does not depend on ``threads``.
    """
    seed = spec.seed if seed is None else seed
    mu = spec.descendant_measure
    life = mu.lifespan_sampler().args()
    anc = spec.ancestor_law.sampler.args()

    def block(rng, size):
        a, w, par, ts, fs, rej, status = K.simulate_forests(
            rng, size, mu.b, *life, *anc, float(spec.T), spec.mode, spec.p, spec.node_cap, spec.max_resample
        )
        _check(status, "forest simulation")
        return ForestBatch(a, w, par, ts, fs, spec.T, rej)

    parts = run_blocks(block, n, seed, label, threads=threads)
    batch = ForestBatch.merge(parts, spec.T)
    batch.meta.update({"interpretation": spec.interpretation(), "seed": seed, "label": label})
    return batch


def simulate_forest(spec: ForestSpec) -> Forest:
    return simulate_forests(spec, 1).forest(0)


def simulate_conditioned_trees(
    mu: LifespanMeasure,
    ancestor,
    T: float,
    n: int,
    lo: float,
    hi: float,
    seed: int,
    label: str = "conditioned",
    threads: int | None = None,
    base: LifespanMeasure | None = None,
    max_resample: int = DEFAULT_MAX_RESAMPLE,
) -> ForestBatch:
    """Trees with extinction level in [lo, hi] (or alive at T when hi >= T).

    Each tree is returned as a one-tree forest.  Named ancestor laws are
    computed from ``base`` (default ``mu``).
    """
    law = resolve_ancestor(base if base is not None else mu, ancestor)
    life = mu.lifespan_sampler().args()
    anc = law.sampler.args()

    def block(rng, size):
        a, w, par, ts, rej, status = K.simulate_conditioned_trees(
            rng, size, mu.b, *life, *anc, float(T), float(lo), float(hi), DEFAULT_NODE_CAP, max_resample
        )
        _check(status, "conditioned tree simulation")
        return ForestBatch(a, w, par, ts, np.arange(size + 1, dtype=np.int64), T, rej)

    return ForestBatch.merge(run_blocks(block, n, seed, label, threads=threads), T)


def simulate_tree(mu: LifespanMeasure, ancestor, T: float = math.inf, rng: np.random.Generator | None = None, node_cap: int = DEFAULT_NODE_CAP) -> tuple[ChronologicalTree, bool]:
    """One splitting tree truncated at T, and whether it is alive at T.

    ``ancestor`` is an ancestor law, its name or a fixed root lifespan.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    rng = stream(0, "tree") if rng is None else rng
    law = resolve_ancestor(mu, ancestor)
    root = float(law.sample(rng))
    a = np.empty(64)
    w = np.empty(64)
    p = np.empty(64, dtype=np.int64)
    a, w, p, pos, survived, status = K.grow_tree(rng, mu.b, *mu.lifespan_sampler().args(), root, float(T), a, w, p, 0, node_cap)
    _check(status, "tree simulation")
    horizon = None if math.isinf(T) else float(T)
    return ChronologicalTree(a[:pos].copy(), w[:pos].copy(), p[:pos].copy(), horizon), bool(survived)
