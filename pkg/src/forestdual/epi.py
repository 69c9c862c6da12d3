"""Reconstructed transmission trees, coalescence times and incidence series.

All individuals alive at the horizon T belong to the last tree of a forest
built by stopping at the first surviving tree.  Reading that tree's
truncated contour, the survivors are the visits to level T and the
coalescence depth of two planar neighbours is T minus the lowest level the
contour reaches between their visits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .measure import LifespanMeasure
from .sim import ForestBatch, simulate_conditioned_trees, simulate_forests
from .streams import stream
from .tree import ChronologicalTree, Forest
from .verify.checks import ALPHA, SLICES, _timed, dual_specs
from .verify.report import RunReport, bonferroni
from .verify.stats import MIN_KS_SAMPLE, chi2_geometric, exact_count, ks_two_sample

STARVATION = 500


class NoSurvivorError(ValueError):
    """The forest has nobody alive at T."""


def _last_tree(f: Forest, T: float) -> ChronologicalTree:
    t = f.trees[-1].truncate(T)
    if not np.any(t.omega >= T):
        raise NoSurvivorError("no individual alive at T")
    return t


def coalescence_from_contour(alpha: np.ndarray, omega: np.ndarray, T: float) -> np.ndarray:
    """Depths T - inf(contour) between consecutive visits of T.

    ``alpha``/``omega`` describe one tree in canonical order, truncated at T.
    """
    tops = omega
    bottoms = np.append(alpha[1:], 0.0)
    visits = np.flatnonzero(tops >= T)
    if visits.size == 0:
        raise NoSurvivorError("no individual alive at T")
    if visits.size == 1:
        return np.zeros(0)
    # segment k of the reduction spans [v_k, v_{k+1}); the last one runs to the end
    lows = np.minimum.reduceat(bottoms, visits)[:-1]
    return T - lows


def coalescence_from_genealogy(alpha: np.ndarray, omega: np.ndarray, parent: np.ndarray, T: float) -> np.ndarray:
    """Depths of the most recent common ancestors of planar-neighbour survivors.

    For survivors i < j the lineage of j is climbed until it meets an
    ancestor of i; the two lineages split at the birth level of the last
    individual climbed.
    """
    alive = np.flatnonzero(omega >= T)
    if alive.size == 0:
        raise NoSurvivorError("no individual alive at T")
    out = []
    for i, j in zip(alive[:-1], alive[1:]):
        anc = set()
        k = int(i)
        while k >= 0:
            anc.add(k)
            k = int(parent[k])
        k = int(j)
        last = k
        while k not in anc:
            last = k
            k = int(parent[k])
        out.append(T - alpha[last])
    return np.array(out, dtype=float)


def coalescence_times(f: Forest, T: float) -> list[float]:
    """Coalescence depths H_i of the survivors at T, in planar order."""
    t = _last_tree(f, T)
    return [float(h) for h in coalescence_from_contour(t.alpha, t.omega, T)]


def mrca_coalescence_times(f: Forest, T: float) -> list[float]:
    t = _last_tree(f, T)
    return [float(h) for h in coalescence_from_genealogy(t.alpha, t.omega, t.parent, T)]


@dataclass(frozen=True)
class ReconstructedTree:
    """Ultrametric genealogy of the survivors at T.

    ``depths[i]`` is the coalescence depth between leaves i and i+1 (time
    before T).  Internal nodes come from splitting the leaf range at its
    largest depth, recursively.
    """

    depths: tuple
    T: float
    labels: tuple | None = None

    def __post_init__(self):
        d = tuple(float(x) for x in self.depths)
        object.__setattr__(self, "depths", d)
        if any(not (0 < x <= self.T) for x in d):
            raise ValueError("coalescence depths must lie in (0, T]")
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != self.n_leaves:
                raise ValueError("one label per leaf is required")
            object.__setattr__(self, "labels", labels)

    @property
    def n_leaves(self) -> int:
        return len(self.depths) + 1

    @property
    def n_internal(self) -> int:
        return len(self.depths)

    def leaf_label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i)

    def split(self, lo: int, hi: int) -> int:
        """Index of the root split of leaves lo..hi (first maximal depth)."""
        seg = self.depths[lo:hi]
        return lo + int(np.argmax(seg))

    def newick(self, digits: int = 12) -> str:
        fmt = lambda x: f"{x:.{digits}g}"

        def build(lo: int, hi: int, parent_depth: float | None) -> str:
            if lo == hi:
                text, depth = self.leaf_label(lo), 0.0
            else:
                k = self.split(lo, hi)
                depth = self.depths[k]
                text = "(" + build(lo, k, depth) + "," + build(k + 1, hi, depth) + ")"
            if parent_depth is None:
                return text
            return f"{text}:{fmt(parent_depth - depth)}"

        return build(0, self.n_leaves - 1, None) + ";"


def reconstructed_tree(f: Forest, T: float, labels: Sequence[str] | None = None) -> ReconstructedTree:
    return ReconstructedTree(tuple(coalescence_times(f, T)), T, None if labels is None else tuple(labels))


def write_newick(trees: Sequence[ReconstructedTree], fh: IO[str]) -> None:
    for t in trees:
        fh.write(t.newick() + "\n")


def incidence_series(f: Forest, bin: float, T: float | None = None) -> np.ndarray:
    """Births of non-root individuals per bin [k bin, (k+1) bin) over [0, T)."""
    if not bin > 0:
        raise ValueError("bin width must be positive")
    if T is None:
        horizons = [t.horizon for t in f.trees if t.horizon is not None]
        T = max(horizons) if horizons else float(f.omega.max())
    n_bins = max(int(math.ceil(T / bin - 1e-12)), 1)
    births = np.concatenate([t.alpha[1:] for t in f.trees])
    idx = np.floor(births / bin).astype(np.int64)
    idx = idx[(idx >= 0) & (idx < n_bins)]
    return np.bincount(idx, minlength=n_bins)


def write_incidence_csv(series: np.ndarray, bin: float, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["bin_start", "count"])
    for k, c in enumerate(series):
        w.writerow([repr(float(k * bin)), int(c)])


# conditional decomposition --------------------------------------------------------


def _batch_coalescence(batch: ForestBatch, check: bool = True):
    """Per-forest coalescence depths, first-depths and cross-check violations."""
    counts = np.zeros(len(batch), dtype=np.int64)
    first = np.full(len(batch), np.nan)
    mismatch = 0
    leaf_bad = 0
    T = batch.T
    for i in range(len(batch)):
        k = batch.forest_start[i + 1] - 1
        lo, hi = batch.tree_start[k], batch.tree_start[k + 1]
        a, w, p = batch.alpha[lo:hi], batch.omega[lo:hi], batch.parent[lo:hi]
        h = coalescence_from_contour(a, w, T)
        counts[i] = h.size
        if h.size:
            first[i] = h[0]
        if check:
            if not np.array_equal(h, coalescence_from_genealogy(a, w, p, T)):
                mismatch += 1
            if h.size + 1 != int(np.sum(w >= T)):
                leaf_bad += 1
    return counts, first, mismatch, leaf_bad


def _tree_widths(batch: ForestBatch, T: float) -> dict:
    ts = np.array(SLICES) * T
    w = batch.widths(ts)
    return {**{f"t={s:g}T": w["xi"][:, k] for k, s in enumerate(SLICES)}, "t=T-": w["at_T"], "area": w["area"]}


def check_conditional_decomposition(
    mu: LifespanMeasure,
    T: float = 1.0,
    n: int = 200_000,
    seed: int = 0,
    sigma: float | None = None,
    delta: float | None = None,
    m: int = 20_000,
    alpha: float = ALPHA,
    threads: int | None = None,
) -> RunReport:
    """Backward width of the base forest given the coalescence depths.

    Strata: N = 0, and N = 1 with H_1 in [sigma - delta, sigma + delta].
    The oracle sums widths of independent tilted trees with undershoot
    ancestors: one per coalescence conditioned on dying out in the bin,
    plus one conditioned on surviving to T.  A third comparison draws N
    from its geometric law and the depths from the oracle trees
    themselves, reproducing the unconditional backward width.
    """
    sigma = 0.5 * T if sigma is None else sigma
    delta = T / 20 if delta is None else delta
    lo, hi = sigma - delta, sigma + delta
    report = RunReport("conditional-decomposition", seed, {"measure": mu.to_dict(), "T": T, "n": n, "m": m, "sigma": sigma, "delta": delta, "alpha": alpha})
    with _timed(report):
        left, _, _, gamma = dual_specs(mu, T)
        F = simulate_forests(left, n, seed, "decomposition/forests", threads)
        counts, first, mismatch, leaf_bad = _batch_coalescence(F)
        report.add(exact_count(mismatch, n, "contour-equals-genealogy"))
        report.add(exact_count(leaf_bad, n, "leaf-count-equals-width-at-T"))
        n_nodes = np.diff(F.tree_start[F.forest_start])
        births = np.array([np.sum(F.alpha[F.tree_start[F.forest_start[i]] : F.tree_start[F.forest_start[i + 1]]] > 0) for i in range(len(F))])
        report.add(exact_count(int(np.sum(births != n_nodes - F.tree_counts())), n, "incidence-total-equals-transmissions"))

        ts = np.array(SLICES) * T
        wf = F.widths(T - ts)
        back = {**{f"t={s:g}T": wf["xi"][:, k] for k, s in enumerate(SLICES)}, "t=T-": wf["trees"], "area": wf["area"]}
        n_ks = 3 * len(back)
        level = bonferroni(alpha, n_ks + 1)
        report.add(chi2_geometric(counts, gamma, level, start=0, name="coalescence-count-geometric"))

        tilted = mu.tilt()
        surv = simulate_conditioned_trees(tilted, "top", T, m, math.inf, math.inf, seed, "decomposition/surviving", threads, base=mu)
        dying = simulate_conditioned_trees(tilted, "top", T, m, lo, hi, seed, "decomposition/dying", threads, base=mu)
        ws, wd = _tree_widths(surv, T), _tree_widths(dying, T)

        s0 = counts == 0
        s1 = (counts == 1) & (first >= lo) & (first <= hi)
        report.params.update(stratum_N0=int(s0.sum()), stratum_N1=int(s1.sum()), gamma=gamma)
        for name, mask in (("N=0", s0), ("N=1", s1)):
            if mask.sum() < STARVATION:
                report.notes.append(f"stratum {name} starved: {int(mask.sum())} < {STARVATION} samples")
        for label, mask, oracle in (("N=0", s0, ws), ("N=1,H1 in bin", s1, {k: ws[k] + wd[k] for k in ws})):
            if mask.sum() < MIN_KS_SAMPLE:
                report.notes.append(f"stratum {label} skipped: too few samples for KS")
                continue
            for key in back:
                report.add(ks_two_sample(back[key][mask], oracle[key], level, f"{label}:{key}"))

        # unconditional mixture
        rng = stream(seed, "decomposition/mixture-counts")
        N = rng.geometric(gamma, m) - 1
        extinct = simulate_conditioned_trees(tilted, "top", T, int(N.sum()), -math.inf, float(np.nextafter(T, 0)), seed, "decomposition/extinct", threads, base=mu)
        surv2 = simulate_conditioned_trees(tilted, "top", T, m, math.inf, math.inf, seed, "decomposition/surviving-mixture", threads, base=mu)
        we, ws2 = _tree_widths(extinct, T), _tree_widths(surv2, T)
        owner = np.repeat(np.arange(m), N)
        for key in back:
            total = ws2[key].astype(float) + np.bincount(owner, we[key], m)
            report.add(ks_two_sample(back[key], total, level, f"mixture:{key}"))
        report.n_samples = n + 3 * m + int(N.sum())
        report.notes.append(f"depth bin [{lo:g}, {hi:g}] stands in for conditioning on an exact extinction time")
    return report
