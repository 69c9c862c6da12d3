"""Verification checks: exact identities and Monte Carlo comparisons.

Each check simulates both sides of an identity independently from named
random streams, computes its test statistics and returns a ``RunReport``.
Statistical tests within one check share a Bonferroni-corrected level.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager

import numpy as np
from scipy import integrate, optimize, stats

from ..contour import forest_from_contour, jccp, jccp_forest
from ..measure import Exponential, LifespanMeasure, ancestor_law_bot, ancestor_law_top
from ..path import (
    PathError,
    PiecewisePath,
    K,
    clock_above,
    clock_below,
    concat,
    kill,
    last_passage,
    local_time,
    reverse,
)
from ..scale import (
    build_scale_table,
    exponential_scale,
    gamma_params,
    return_to_zero_prob,
    subcritical_dual_geometric_param,
)
from ..sim import ForestSpec, Rules, simulate_conditioned_trees, simulate_forests, simulate_levy_paths
from ..streams import stream
from ..tree import Forest
from . import pathstats as ps
from .report import RunReport, TestResult, bonferroni
from .stats import binomial_sigma, chi2_cells, chi2_geometric, exact_count, interval, ks_one_sample, ks_two_sample, proportion

ALPHA = 0.01
SLICES = (0.25, 0.5, 0.75)
HIGH_CAP_FACTOR = 40.0
LOW_CAP_FACTOR = 14.0
HALF_GRID = 2.0**-33


@contextmanager
def _timed(report: RunReport):
    start = time.perf_counter()
    try:
        yield report
    finally:
        report.meta["runtime_s"] = round(time.perf_counter() - start, 3)


def _params(mu: LifespanMeasure, **kw) -> dict:
    return {"measure": mu.to_dict(), **kw}


def _ks_family(report: RunReport, pairs: dict, alpha: float, prefix: str = "", extra_tests: int = 0) -> None:
    """Two-sample KS for every (left, right) pair at a Bonferroni level."""
    level = bonferroni(alpha, len(pairs) + extra_tests)
    for name, (x, y) in pairs.items():
        report.add(ks_two_sample(x, y, level, prefix + name))


def half_grid_levels(rng: np.random.Generator, size, T: float) -> np.ndarray:
    """Odd multiples of 2**-33 in (0, T).

    Simulated levels live on the 2**-32 grid, so these levels are never
    breakpoints, and T - r is exact for T on the grid.
    """
    k = np.floor(rng.random(size) * (T / (2 * HALF_GRID))).astype(np.int64)
    return (2 * k + 1) * HALF_GRID


def descent_rate(mu: LifespanMeasure) -> float:
    """theta > 0 with psi(-theta) = 0 for a subcritical measure.

    P_{-L}(ever reaching 0) = exp(-theta L), which bounds the error of
    treating a path that falls below -L as never returning.
    """
    if mu.m >= 1:
        raise ValueError("only subcritical measures drift to -infinity")
    if isinstance(mu, Exponential):
        return mu.d - mu.b

    def f(theta):
        return -theta + mu.tilt_by(-theta).b - mu.b

    hi = 1.0
    while f(hi) < 0:
        hi *= 2
        if hi > 1e6:
            raise ValueError("could not bracket the descent rate")
    return float(optimize.brentq(f, 1e-12, hi, xtol=1e-14))


def _caps(mu: LifespanMeasure) -> tuple[float, float, float, float]:
    """(low_cap, high_cap, bias_low, bias_high) proxies for 'never returns'."""
    low, high, bl, bh = -math.inf, math.inf, 0.0, 0.0
    if mu.m < 1:
        theta = descent_rate(mu)
        low = -LOW_CAP_FACTOR / theta
        bl = math.exp(-LOW_CAP_FACTOR)
    if mu.eta > 0:
        high = HIGH_CAP_FACTOR / mu.eta
        bh = math.exp(-HIGH_CAP_FACTOR)
    return low, high, bl, bh


# forest sides ---------------------------------------------------------------


def dual_specs(mu: LifespanMeasure, T: float) -> tuple[ForestSpec, ForestSpec, float, float]:
    """Both sides of the width-reversal identity and their tree-count parameters.

    For m >= 1 the left side is the base forest with overshoot ancestors
    stopped at its first survivor, the right side the tilted forest with
    undershoot ancestors stopped the same way; tree counts are geometric
    with parameters 1/W-tilde(T) and 1/W(T).  For m < 1 both sides use a
    geometric(1/W(T)) number of extinct trees plus one survivor.
    """
    gamma, gamma_t = gamma_params(mu, T)
    if mu.m >= 1:
        left = ForestSpec(mu, "bottom", T, "first-survivor")
        right = ForestSpec(mu, "top", T, "first-survivor", tilted=True)
        return left, right, gamma_t, gamma
    left = ForestSpec(mu, "bottom", T, gamma)
    right = ForestSpec(mu, "top", T, gamma, tilted=True)
    return left, right, gamma, gamma


def _slice_values(batch, T: float, reversed_: bool) -> dict:
    """Width at t in {0+, SLICES*T, T-}, read at T - t when ``reversed_``."""
    ts = np.array(SLICES) * T
    w = batch.widths(T - ts if reversed_ else ts)
    out = {}
    out["t=0+"] = w["at_T"] if reversed_ else w["trees"]
    for k, s in enumerate(SLICES):
        out[f"t={s:g}T"] = w["xi"][:, k]
    out["t=T-"] = w["trees"] if reversed_ else w["at_T"]
    out["area"] = w["area"]
    out["max-width"] = w["max"]
    return out


def check_width_reversal(mu: LifespanMeasure, T: float = 1.0, n: int = 10_000, seed: int = 0, null: bool = False, alpha: float = ALPHA, threads: int | None = None) -> RunReport:
    """Reversed width of the base forest against the width of the dual forest.

    With ``null`` both samples come from the left-hand side (independent
    streams) and are compared without reversal asymmetry; this calibrates
    the false-alarm rate of the test family.
    """
    report = RunReport("width-reversal" + ("-null" if null else ""), seed, _params(mu, T=T, n=n, alpha=alpha, null=null))
    with _timed(report):
        left, right, p_left, p_right = dual_specs(mu, T)
        if null:
            right, p_right = left, p_left
        L = simulate_forests(left, n, seed, "width-reversal/left", threads)
        R = simulate_forests(right, n, seed, "width-reversal/right", threads)
        lv = _slice_values(L, T, True)
        rv = _slice_values(R, T, null)
        _ks_family(report, {k: (lv[k], rv[k]) for k in lv}, alpha, extra_tests=2)
        level = bonferroni(alpha, len(lv) + 2)
        report.add(chi2_geometric(L.tree_counts(), p_left, level, name="tree-count-left"))
        report.add(chi2_geometric(R.tree_counts(), p_right, level, name="tree-count-right"))
        report.n_samples = 2 * n
        report.params.update(gamma_left=p_left, gamma_right=p_right, interpretation=left.interpretation())
        report.notes.append(f"left: {left.interpretation()}; right: {right.interpretation()}")
    return report


def check_geometric_equivalence(mu: LifespanMeasure, T: float = 1.0, n: int = 10_000, seed: int = 0, alpha: float = ALPHA, threads: int | None = None) -> RunReport:
    """Stopping at the first survivor against an explicit geometric tree count."""
    report = RunReport("geometric-equivalence", seed, _params(mu, T=T, n=n, alpha=alpha))
    with _timed(report):
        p = survival_prediction(mu, T)[0]
        A = simulate_forests(ForestSpec(mu, "bottom", T, "first-survivor"), n, seed, "geom/first-survivor", threads)
        B = simulate_forests(ForestSpec(mu, "bottom", T, p), n, seed, "geom/geometric", threads)
        av, bv = _slice_values(A, T, False), _slice_values(B, T, False)
        keys = [k for k in av if k != "t=0+"]
        _ks_family(report, {k: (av[k], bv[k]) for k in keys}, alpha, extra_tests=2)
        level = bonferroni(alpha, len(keys) + 2)
        report.add(chi2_geometric(A.tree_counts(), p, level, name="tree-count-first-survivor"))
        report.add(chi2_geometric(B.tree_counts(), p, level, name="tree-count-geometric"))
        report.n_samples = 2 * n
        report.params["p"] = p
    return report


# survival ------------------------------------------------------------------


def survival_prediction(mu: LifespanMeasure, T: float) -> tuple[float, float]:
    """Predicted P_bottom(alive at T) and tilted P_top(alive at T).

    For m >= 1 these are 1/W-tilde(T) and 1/W(T).  Below criticality the
    two sides coincide and equal 1 - (1 - 1/W(T)) / m.
    """
    gamma, gamma_t = gamma_params(mu, T)
    if mu.m >= 1:
        return gamma_t, gamma
    p = subcritical_dual_geometric_param(mu, T)
    return p, p


def _survived(batch) -> np.ndarray:
    top = np.maximum.reduceat(batch.omega, batch.tree_start[:-1])
    return top >= batch.T


def check_survival_lemma(mu: LifespanMeasure, T: float = 1.0, n: int = 100_000, seed: int = 0, threads: int | None = None) -> RunReport:
    report = RunReport("survival-lemma", seed, _params(mu, T=T, n=n))
    with _timed(report):
        p_bot, p_top = survival_prediction(mu, T)
        base = simulate_conditioned_trees(mu, "bottom", T, n, -math.inf, math.inf, seed, "survival/base", threads)
        tilt = simulate_conditioned_trees(mu.tilt(), "top", T, n, -math.inf, math.inf, seed, "survival/tilted", threads, base=mu)
        report.add(binomial_sigma(int(_survived(base).sum()), n, p_bot, "survival-bottom-base"))
        report.add(binomial_sigma(int(_survived(tilt).sum()), n, p_top, "survival-top-tilted"))
        report.n_samples = 2 * n
    return report


# contour transform ---------------------------------------------------------------


def check_contour_transform(mu: LifespanMeasure, T: float = 1.0, n: int = 10_000, seed: int = 0, alpha: float = ALPHA, threads: int | None = None) -> RunReport:
    """The dual contour map sends left-side contours to right-side contours in law."""
    report = RunReport("contour-transform", seed, _params(mu, T=T, n=n, alpha=alpha))
    with _timed(report):
        left, right, _, _ = dual_specs(mu, T)
        L = simulate_forests(left, n, seed, "contour-transform/left", threads)
        R = simulate_forests(right, n, seed, "contour-transform/right", threads)
        lt, lb, lo = L.contour_arrays()
        rng = stream(seed, "contour-transform/levels")
        mapped, bad_pre, bad_zeta, bad_transport = [], 0, 0, 0
        for i in range(len(L)):
            p = PiecewisePath(lt[lo[i] : lo[i + 1]], lb[lo[i] : lo[i + 1]])
            try:
                lp = last_passage(p, T)
                q = K(p, T)
            except PathError:
                bad_pre += 1
                continue
            if q.zeta != lp.g_0:
                bad_zeta += 1
            r = half_grid_levels(rng, 8, T)
            if not np.array_equal(local_time(kill(p, lp.g_0), T - r), local_time(q, r)):
                bad_transport += 1
            mapped.append(q)
        report.add(exact_count(bad_pre, n, "precondition-g0-finite"))
        report.add(exact_count(bad_zeta, n, "zeta-equals-g0"))
        report.add(exact_count(bad_transport, n, "local-time-transport"))
        kt, kb, ko = ps.pack(mapped)
        rt, rb, ro = R.contour_arrays()
        levels = (2 * np.arange(8) + 1) / 16 * T
        fk = ps.functionals(kt, kb, ko, levels)
        fr = ps.functionals(rt, rb, ro, levels)
        fk["jump-size"] = ps.random_jump_sizes(kt, kb, ko, stream(seed, "contour-transform/jump-left"))
        fr["jump-size"] = ps.random_jump_sizes(rt, rb, ro, stream(seed, "contour-transform/jump-right"))
        _ks_family(report, {k: (fk[k], fr[k]) for k in fk}, alpha)
        report.n_samples = 2 * n
    return report


# Levy-path checks ----------------------------------------------------------------


def _last_bottoms(batch) -> np.ndarray:
    return batch.bottoms[batch.offsets[1:] - 1]


def _quantile_edges(mu: LifespanMeasure, k: int) -> np.ndarray:
    """Edges splitting the normalised lifespan law into k equal-mass cells."""
    edges = [0.0]
    for j in range(1, k):
        target = mu.b * (1 - j / k)
        hi = 1.0
        while mu.tail(hi) > target:
            hi *= 2
        edges.append(float(optimize.brentq(lambda v: float(mu.tail(v)) - target, 0.0, hi, xtol=1e-12)))
    edges.append(math.inf)
    return np.array(edges)


def joint_cell_probs(mu: LifespanMeasure, a: float, x: float, u_edges, v_edges) -> tuple[float, np.ndarray]:
    """Two-sided exit from [0, a] started at x.

    Returns P(hit 0 first) = W(a-x)/W(a) and the probabilities that the
    passage above a happens with undershoot a - Y_- in each u cell and
    overshoot Y - a in each v cell, integrating the joint density
    (W(a-x)W(a-u)/W(a) - W(a-x-u)) du Pi(dv + u).
    """
    table = build_scale_table(mu, a, min(1e-3, a / 100))

    def W(y):
        return table(y) if y >= 0 else 0.0

    Wa = W(a)

    def g(u):
        return W(a - x) * W(a - u) / Wa - W(a - x - u)

    probs = np.zeros((len(u_edges) - 1, len(v_edges) - 1))
    for i in range(len(u_edges) - 1):
        lo, hi = u_edges[i], u_edges[i + 1]
        kinks = [k for k in (a - x,) if lo < k < hi]
        for j in range(len(v_edges) - 1):
            vl, vh = v_edges[j], v_edges[j + 1]

            def f(u, vl=vl, vh=vh):
                upper = 0.0 if math.isinf(vh) else float(mu.tail(u + vh))
                return g(u) * (float(mu.tail(u + vl)) - upper)

            probs[i, j] = integrate.quad(f, lo, hi, points=kinks or None, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
    return W(a - x) / Wa, probs


def _excursion_laws(report: RunReport, mu: LifespanMeasure, n: int, seed: int, level: float, tag_: str, threads) -> None:
    low, _, bias_low, _ = _caps(mu)
    rules = Rules(kill_zero=False, upper=0.0, upper_mode="kill", low_cap=low)
    batch = simulate_levy_paths(mu, 0.0, rules, n, seed, f"over-undershoot/{tag_}", threads)
    passed = batch.status == 1
    report.add(binomial_sigma(int(passed.sum()), n, return_to_zero_prob(mu), f"{tag_}:return-probability", bias=bias_low))
    under = -_last_bottoms(batch)[passed]
    over = batch.final[passed]
    report.add(ks_one_sample(under, ancestor_law_top(mu).cdf, level, f"{tag_}:undershoot-law"))
    report.add(ks_one_sample(over, ancestor_law_bot(mu).cdf, level, f"{tag_}:overshoot-law"))


def check_over_undershoot(
    mu: LifespanMeasure,
    n: int = 100_000,
    seed: int = 0,
    mu_sub: LifespanMeasure | None = None,
    a: float = 1.0,
    x: float = 0.5,
    bins: int = 8,
    alpha: float = ALPHA,
    threads: int | None = None,
) -> RunReport:
    """Undershoot/overshoot laws at 0 and the two-sided joint exit law.

    The joint law is tested on ``mu_sub`` (default Exponential(1, 2)), a
    subcritical measure for which every path exits [0, a] without proxies.
    """
    mu_sub = Exponential(1.0, 2.0) if mu_sub is None else mu_sub
    report = RunReport("over-undershoot", seed, _params(mu, n=n, alpha=alpha, subcritical=mu_sub.to_dict(), a=a, x=x, bins=bins))
    with _timed(report):
        level = bonferroni(alpha, 5)
        _excursion_laws(report, mu, n, seed, level, "main", threads)
        _excursion_laws(report, mu_sub, n, seed, level, "subcritical", threads)
        rules = Rules(kill_zero=True, upper=a, upper_mode="kill")
        batch = simulate_levy_paths(mu_sub, x, rules, n, seed, "over-undershoot/joint", threads)
        u_edges = np.linspace(0.0, a, bins + 1)
        v_edges = _quantile_edges(mu_sub, bins)
        p_zero, probs = joint_cell_probs(mu_sub, a, x, u_edges, v_edges)
        passed = batch.status == 1
        u = a - _last_bottoms(batch)[passed]
        v = batch.final[passed] - a
        counts, _, _ = np.histogram2d(u, v, [u_edges, v_edges])
        observed = np.concatenate([[np.sum(batch.status == 0)], counts.ravel()])
        expected = np.concatenate([[p_zero], probs.ravel()])
        report.add(chi2_cells(observed, expected, level, "subcritical:joint-exit-histogram"))
        report.params["joint_total_probability"] = float(expected.sum())
        report.n_samples = 3 * n
    return report


def _rng_split(n: int) -> tuple[slice, slice]:
    h = n // 2
    return slice(0, h), slice(h, 2 * h)


def _path_functionals(t, b, o) -> dict:
    s = ps.segment_stats(t, b, o)
    return {
        "first-jump": s["first_jump"],
        "first-jump-time": s["first_jump_time"],
        "value-at-half-life": ps.values_at_fraction(t, b, o, 0.5),
        "area": s["area"],
        "infimum": s["inf"],
        "supremum": s["sup"],
    }


def _halves_ks(report, A: dict, B: dict, level: float, prefix: str, keys) -> None:
    for k in keys:
        x, y = A[k], B[k]
        report.add(ks_two_sample(x, y, level, prefix + k))


def _split_excursions(batch):
    """Pre-passage and post-passage parts of excursions from 0 ended at 0.

    The passage above 0 happens at the first segment whose top exceeds 0.
    """
    pre_t, pre_b, pre_o, post_t, post_b, post_o = [], [], [0], [], [], [0]
    for i in range(len(batch)):
        lo, hi = batch.offsets[i], batch.offsets[i + 1]
        t, b = batch.tops[lo:hi], batch.bottoms[lo:hi]
        j = 1 + int(np.flatnonzero(t[1:] > 0.0)[0])
        pre_t.append(t[:j])
        pre_b.append(b[:j])
        pre_o.append(pre_o[-1] + j)
        post_t.append(t[j:])
        post_b.append(b[j:])
        post_o.append(post_o[-1] + hi - lo - j)
    cat = np.concatenate
    return (cat(pre_t), cat(pre_b), np.array(pre_o)), (cat(post_t), cat(post_b), np.array(post_o))


def conditioned_from(mu: LifespanMeasure, starts: np.ndarray, rules: Rules, seed: int, label: str, threads=None, rounds: int = 1000):
    """One path per start, conditioned on hitting 0 by rejection with the same start."""
    starts = np.asarray(starts, dtype=float)
    paths: list = [None] * starts.size
    todo = np.arange(starts.size)
    for r in range(rounds):
        if not todo.size:
            break
        out = simulate_levy_paths(mu, starts[todo], rules, todo.size, seed, f"{label}/round{r}", threads)
        ok = np.flatnonzero(out.status == 0)
        for k in ok:
            paths[todo[k]] = out.path(int(k))
        todo = todo[out.status != 0]
    if todo.size:
        raise RuntimeError(f"{label}: no path from {todo.size} starts hit 0")
    return ps.pack(paths)


def check_reversal_invariance(
    mu: LifespanMeasure,
    T: float = 1.0,
    n: int = 100_000,
    seed: int = 0,
    alpha: float = ALPHA,
    bins: int = 3,
    threads: int | None = None,
) -> RunReport:
    """Space-time reversal of last excursions and of excursions away from 0.

    Parts: (a) paths from T killed at 0, conditioned to hit 0 before
    entering (T, inf), against their reversals; (b) excursions from 0
    conditioned to come back to 0, against their reversals; (c) the
    reversed pre-passage part against paths started at an independent
    undershoot and conditioned to hit 0, integrated and within undershoot
    bins; (d) conditional independence of the parts before and after the
    passage above 0.  Reversal comparisons use disjoint halves of the
    sample so that the two KS samples are independent.
    """
    low, high, bias_low, bias_high = _caps(mu)
    report = RunReport("reversal-invariance", seed, _params(mu, T=T, n=n, alpha=alpha, bins=bins, low_cap=low, high_cap=high))
    report.params["proxy_bias"] = bias_low + bias_high
    with _timed(report):
        keys_a = ["first-jump", "first-jump-time", "value-at-half-life", "area", "jump-size"]
        keys_b = ["first-jump", "first-jump-time", "value-at-half-life", "area", "infimum"]
        keys_c = ["zeta", "jumps", "supremum", "area", "first-jump"]
        n_tests = len(keys_a) + len(keys_b) + len(keys_c) + 2 * bins
        level = bonferroni(alpha, n_tests)

        # (a) last excursion from T
        ra = Rules(kill_zero=True, upper=T, upper_mode="kill")
        ea = simulate_levy_paths(mu, T, ra, n, seed, "reversal/last-excursion", threads)
        ea = ea.select(ea.status == 0)
        t, b, o = ea.tops, ea.bottoms, ea.offsets
        rt, rb, _ = ps.reverse_flat(t, b, o)
        report.add(exact_count(int(np.sum(ps.lifetimes(t, b, o) != ps.lifetimes(rt, rb, o))), len(ea), "last-excursion:zeta-preserved"))
        tt, tb, _ = ps.reverse_flat(rt, rb, o)
        report.add(exact_count(int(np.sum(np.any(np.c_[tt != t, tb != b], axis=1))), len(ea), "last-excursion:involution"))
        A = _path_functionals(t, b, o)
        B = _path_functionals(rt, rb, o)
        A["jump-size"] = ps.random_jump_sizes(t, b, o, stream(seed, "reversal/jumps-a"))
        B["jump-size"] = ps.random_jump_sizes(rt, rb, o, stream(seed, "reversal/jumps-b"))
        first, second = _rng_split(len(ea))
        _halves_ks(report, _take(A, first), _take(B, second), level, "last-excursion:", keys_a)

        # (b) excursion from 0 conditioned to return to 0
        rb_rules = Rules(kill_zero=True, low_cap=low, high_cap=high)
        eb = simulate_levy_paths(mu, 0.0, rb_rules, n, seed, "reversal/excursion", threads)
        eb = eb.select(eb.status == 0)
        t, b, o = eb.tops, eb.bottoms, eb.offsets
        rt, rb, _ = ps.reverse_flat(t, b, o)
        A = _path_functionals(t, b, o)
        B = _path_functionals(rt, rb, o)
        first, second = _rng_split(len(eb))
        _halves_ks(report, _take(A, first), _take(B, second), level, "excursion:", keys_b)

        # (c) reversed pre-passage part against P_u( . | hit 0)
        rc = Rules(kill_zero=False, upper=0.0, upper_mode="kill", low_cap=low)
        ec = simulate_levy_paths(mu, 0.0, rc, n, seed, "reversal/pre-passage", threads)
        ec = ec.select(ec.status == 1)
        h = len(ec) // 2
        part = ec.select(np.arange(len(ec)) < h)
        pt, pb, _ = ps.reverse_flat(part.tops, part.bottoms, part.offsets)
        po = part.offsets
        # the reversal of a pre-passage path runs from the undershoot down to 0
        under_other = -_last_bottoms(ec.select(np.arange(len(ec)) >= h))[:h]
        ot, ob, oo = conditioned_from(mu, under_other, Rules(kill_zero=True, low_cap=low, high_cap=high), seed, "reversal/from-undershoot", threads)
        FA = ps.functionals(pt, pb, po, [])
        FB = ps.functionals(ot, ob, oo, [])
        FA.update(_path_functionals(pt, pb, po))
        FB.update(_path_functionals(ot, ob, oo))
        for k in keys_c:
            x, y = FA[k], FB[k]
            report.add(ks_two_sample(x, y, level, f"pre-passage:{k}"))
        u_a = pt[po[:-1]]
        u_b = ot[oo[:-1]]
        edges = np.quantile(np.concatenate([u_a, u_b]), np.linspace(0, 1, bins + 1))
        edges[0], edges[-1] = -np.inf, np.inf
        ca, cb = np.digitize(u_a, edges) - 1, np.digitize(u_b, edges) - 1
        for j in range(bins):
            report.add(ks_two_sample(FA["zeta"][ca == j], FB["zeta"][cb == j], level, f"pre-passage:zeta|undershoot-bin{j}"))
            report.add(ks_two_sample(FA["jumps"][ca == j], FB["jumps"][cb == j], level, f"pre-passage:jumps|undershoot-bin{j}"))

        # (d) independence of the parts before and after the passage above 0
        _independence_tests(report, mu, n, seed, low, high, threads)
        report.n_samples = 3 * n + len(under_other)
        if bias_low + bias_high > 0:
            report.notes.append(f"never-returning paths proxied by caps ({low:.4g}, {high:.4g}); conditioning bias <= {bias_low + bias_high:.3g}")
    return report


def _take(F: dict, sel) -> dict:
    return {k: np.asarray(v)[sel] for k, v in F.items()}


def _residualize(values: np.ndarray, cond: np.ndarray, bins: int = 20) -> np.ndarray:
    """Rank-transform (ties share their average rank), then subtract the
    mean within quantile bins of ``cond``."""
    ranks = stats.rankdata(values) / values.size
    edges = np.quantile(cond, np.linspace(0, 1, bins + 1)[1:-1])
    idx = np.searchsorted(edges, cond, side="right")
    means = np.bincount(idx, ranks, bins) / np.maximum(np.bincount(idx, minlength=bins), 1)
    return ranks - means[idx]


def _independence_tests(report: RunReport, mu: LifespanMeasure, n: int, seed: int, low: float, high: float, threads) -> None:
    """Residual correlations between pre- and post-passage functionals.

    Given the undershoot y and the jump z, the reversed pre-passage part
    depends on y only and the post-passage part on the overshoot z - y
    only.  Residuals of (rank-transformed) functionals after removing
    their conditional means given y and given z - y are therefore
    uncorrelated.  Post-passage paths that never come back are kept up to
    the high cap, so the post-passage functionals are always defined.
    """
    rules = Rules(kill_zero=True, low_cap=low, high_cap=high)
    e = simulate_levy_paths(mu, 0.0, rules, n, seed, "reversal/independence", threads)
    ok = (e.status == 0) | (e.status == 3)
    e = e.select(ok & (e.n_segments() > 1))
    pre, post = _split_excursions(e)
    y = -pre[1][pre[2][1:] - 1]
    v = post[0][post[2][:-1]]
    f_pre = {"pre-duration": ps.lifetimes(*pre), "pre-jumps": ps.jump_counts(pre[2])}
    f_post = {"post-duration": ps.lifetimes(*post), "post-jumps": ps.jump_counts(post[2])}
    for a_name, a in f_pre.items():
        ra = _residualize(a, y)
        for b_name, bvals in f_post.items():
            rb = _residualize(bvals, v)
            report.add(_pearson(ra, rb, f"independence:{a_name}~{b_name}"))


def _pearson(x: np.ndarray, y: np.ndarray, name: str, sigmas: float = 3.0) -> TestResult:
    n = x.size
    r = float(np.corrcoef(x, y)[0, 1]) if n > 2 and np.std(x) > 0 and np.std(y) > 0 else 0.0
    return TestResult(name, "correlation", abs(r), sigmas / math.sqrt(n), n=int(n), r=r, sigmas=float(sigmas))


def check_measure_change(
    mu: LifespanMeasure,
    a: float = 1.0,
    x: float = 0.5,
    n: int = 100_000,
    seed: int = 0,
    ks: tuple = (1, 2, 3, math.inf),
    threads: int | None = None,
) -> RunReport:
    """Tilted probabilities of upward passage against base ones times exp(-eta(a - x)).

    The events are Lambda_k = {at most k jumps up to the passage above a}.
    The right side needs {tau_a < inf} after the passage: the path is
    continued from the overshoot and counted when it comes back to a
    before rising by the high cap.
    """
    report = RunReport("measure-change", seed, _params(mu, a=a, x=x, n=n, ks=[str(k) for k in ks]))
    with _timed(report):
        eta = mu.eta
        if eta == 0:
            report.skipped = True
            report.notes.append("eta = 0: the tilted measure equals the base measure and the identity is trivial")
            return report
        _, high, _, bias_high = _caps(mu)
        report.params.update(eta=eta, high_cap=high, proxy_bias=bias_high)
        for x0, tag_ in ((x, "x"), (a, "x=a")):
            rules = Rules(kill_zero=True, upper=a, upper_mode="kill")
            left = simulate_levy_paths(mu.tilt(), x0, rules, n, seed, f"measure-change/{tag_}/tilted", threads)
            right = simulate_levy_paths(mu, x0, rules, n, seed, f"measure-change/{tag_}/base", threads)
            lp = left.status == 1
            rp = np.flatnonzero(right.status == 1)
            back = simulate_levy_paths(mu, right.final[rp] - a, Rules(kill_zero=True, high_cap=high), rp.size, seed, f"measure-change/{tag_}/return", threads)
            returned = np.zeros(n, dtype=bool)
            returned[rp[back.status == 0]] = True
            rao = np.zeros(n)
            rao[rp] = np.exp(-eta * (right.final[rp] - a))
            factor = math.exp(-eta * (a - x0))
            for k in ks if tag_ == "x" else (math.inf,):
                lam_l = left.n_segments() <= k
                lam_r = right.n_segments() <= k
                pl, sl = proportion(int(np.sum(lp & lam_l)), n)
                pr, sr = proportion(int(np.sum(returned & lam_r)), n)
                name = f"{tag_}:jumps<={'inf' if math.isinf(k) else int(k)}"
                res = interval(pl, sl, pr * factor, sr * factor, name, bias=bias_high * factor, n=n)
                res.extra["conditional_expectation_estimate"] = float(np.mean(rao * lam_r) * factor)
                report.add(res)
        report.n_samples = 4 * n
    return report


def check_contour_law(mu: LifespanMeasure, T: float = 1.0, x: float = 0.5, n: int = 10_000, seed: int = 0, alpha: float = ALPHA, threads: int | None = None) -> RunReport:
    """Contour of a tree with ancestor lifespan x, truncated at T, against the
    Levy path from x reflected below T and killed at 0."""
    report = RunReport("contour-law", seed, _params(mu, T=T, x=x, n=n, alpha=alpha))
    with _timed(report):
        trees = simulate_conditioned_trees(mu, float(x), T, n, -math.inf, math.inf, seed, "contour-law/trees", threads)
        ct, cb, co = trees.contour_arrays()
        paths = simulate_levy_paths(mu, x, Rules(kill_zero=True, upper=T, upper_mode="reflect"), n, seed, "contour-law/levy", threads)
        levels = (2 * np.arange(8) + 1) / 16 * T
        fa = ps.functionals(ct, cb, co, levels)
        fb = ps.functionals(paths.tops, paths.bottoms, paths.offsets, levels)
        _ks_family(report, {k: (fa[k], fb[k]) for k in fa}, alpha)
        report.n_samples = 2 * n
    return report


# deterministic identities ------------------------------------------------------------


def check_identities(n: int = 10_000, seed: int = 0, T: float = 1.0, mu: LifespanMeasure | None = None, threads: int | None = None) -> RunReport:
    """Exact identities on random instances.

    Instances are forests of the left-hand side of the duality for
    Exponential(2, 1) (or ``mu``), untruncated subcritical trees and Levy
    paths.  Every identity must hold with equality on every instance.
    """
    mu = Exponential(2.0, 1.0) if mu is None else mu
    report = RunReport("identities", seed, _params(mu, T=T, n=n))
    with _timed(report):
        left, _, _, _ = dual_specs(mu, T)
        batch = simulate_forests(left, n, seed, "identities/forests", threads)
        rng = stream(seed, "identities/levels")
        bad = dict.fromkeys(
            [
                "contour-local-time-equals-width",
                "round-trip-truncated",
                "contour-matches-flat-layout",
                "dual-map-local-time-transport",
                "dual-map-zeta-equals-g0",
                "reversal-involution",
                "concat-of-tree-contours",
                "clock-below-commutes-with-concat",
                "clock-above-commutes-with-concat",
                "local-time-additive-over-concat",
                "local-time-unchanged-by-clocks",
            ],
            0,
        )
        for i in range(n):
            f = batch.forest(i)
            p = jccp_forest(f)
            r = half_grid_levels(rng, 8, T)
            if not np.array_equal(local_time(p, r), f.width()(r)):
                bad["contour-local-time-equals-width"] += 1
            if forest_from_contour(p, horizon=T) != f:
                bad["round-trip-truncated"] += 1
            if p != batch.contour(i):
                bad["contour-matches-flat-layout"] += 1
            lp = last_passage(p, T)
            q = K(p, T)
            if not np.array_equal(local_time(kill(p, lp.g_0), T - r), local_time(q, r)):
                bad["dual-map-local-time-transport"] += 1
            if q.zeta != lp.g_0:
                bad["dual-map-zeta-equals-g0"] += 1
            if reverse(reverse(p)) != p or reverse(reverse(q)) != q:
                bad["reversal-involution"] += 1
            parts = [jccp(t) for t in f]
            if concat(parts) != p:
                bad["concat-of-tree-contours"] += 1
            s = float(half_grid_levels(rng, 1, T)[0])
            if clock_below(concat(parts), s) != concat([clock_below(c, s) for c in parts]):
                bad["clock-below-commutes-with-concat"] += 1
            if clock_above(concat(parts), s) != concat([clock_above(c, s) for c in parts]):
                bad["clock-above-commutes-with-concat"] += 1
            if not np.array_equal(local_time(p, r), np.sum([local_time(c, r) for c in parts], axis=0)):
                bad["local-time-additive-over-concat"] += 1
            above, below = r[r > s], r[r < s]
            if not (np.array_equal(local_time(clock_below(p, s), above), local_time(p, above)) and np.array_equal(local_time(clock_above(p, s), below), local_time(p, below))):
                bad["local-time-unchanged-by-clocks"] += 1
        for name, count in bad.items():
            report.add(exact_count(count, n, name))

        # untruncated subcritical trees round trip through their contours
        sub = Exponential(1.0, 2.0)
        trees = simulate_conditioned_trees(sub, "standard", math.inf, n, -math.inf, math.inf, seed, "identities/untruncated", threads)
        wrong = 0
        for k in range(n):
            t = trees.tree(k)
            t = type(t)(t.alpha, t.omega, t.parent, None)
            if forest_from_contour(jccp(t)) != Forest((t,)):
                wrong += 1
        report.add(exact_count(wrong, n, "round-trip-untruncated"))

        # reversal on Levy paths: an involution on paths ending at 0, and
        # in general an involution of the jump/event structure
        high = _caps(mu)[1]
        lev = simulate_levy_paths(mu, lambda g, size: g.random(size) * 2 * T, Rules(kill_zero=True, high_cap=high, max_jumps=10_000), n, seed, "identities/levy", threads)
        t, b, o = lev.tops, lev.bottoms, lev.offsets
        rt, rb, _ = ps.reverse_flat(t, b, o)
        tt, tb, _ = ps.reverse_flat(rt, rb, o)
        owner = np.repeat(np.arange(n), np.diff(o))
        seg_bad = (tt != t) | (tb != b)
        ends_at_zero = lev.status == 0
        report.add(exact_count(int(np.sum(np.bincount(owner, seg_bad, n)[ends_at_zero] > 0)), int(ends_at_zero.sum()), "reversal-involution-levy-excursions"))
        inner = owner[1:] == owner[:-1]
        ev_bad = (tt - tb) != (t - b)
        jump_bad = np.zeros(t.size, dtype=bool)
        jump_bad[1:] = inner & ((tt[1:] - tb[:-1]) != (t[1:] - b[:-1]))
        report.add(exact_count(int(np.sum(np.bincount(owner, ev_bad | jump_bad, n) > 0)), n, "reversal-involution-levy-events"))
        report.n_samples = 3 * n
    return report


# scale function --------------------------------------------------------------


def check_scale(cases=((2.0, 1.0), (1.0, 2.0), (1.0, 1.0), (4.0, 1.0)), x_max: float = 5.0, h: float = 1e-3, tol: float = 1e-6) -> RunReport:
    """Numerical scale functions against closed forms, plus renewal residuals."""
    report = RunReport("scale", 0, {"cases": [list(c) for c in cases], "x_max": x_max, "h": h, "tol": tol})
    with _timed(report):
        x = np.linspace(0.0, x_max, 501)
        for b, d in cases:
            mu = Exponential(b, d)
            for tilted in (False, True):
                label = f"({b:g},{d:g}){'-tilted' if tilted else ''}"
                table = build_scale_table(mu, x_max, h, tilted=tilted, method="volterra")
                target = table.mu
                exact = exponential_scale(target.b, target.d, x)
                rel = float(np.max(np.abs(table(x) - exact) / exact))
                report.add(TestResult(f"{label}:relative-error", "bound", rel, tol))
                report.add(TestResult(f"{label}:renewal-residual", "bound", table.residual(), tol))
            if mu.eta > 0:
                W = build_scale_table(mu, x_max, h, method="volterra")
                Wt = build_scale_table(mu, x_max, h, tilted=True, method="volterra")
                gap = float(np.max(np.abs(W(x) - np.exp(mu.eta * x) * Wt(x)) / W(x)))
                report.add(TestResult(f"({b:g},{d:g}):W=exp(eta x)W-tilde", "bound", gap, tol))
    return report


# calibration ---------------------------------------------------------------------


def calibration(mu: LifespanMeasure, T: float = 1.0, n: int = 10_000, seeds: int = 200, max_rate: float = 0.05, threads: int | None = None) -> RunReport:
    """Family-wise rejection rate of the width-reversal check under the null."""
    report = RunReport("calibration", 0, _params(mu, T=T, n=n, seeds=seeds, max_rate=max_rate))
    with _timed(report):
        failures = []
        for s in range(seeds):
            if not check_width_reversal(mu, T, n, seed=s, null=True, threads=threads).passed:
                failures.append(s)
        rate = len(failures) / seeds
        report.add(TestResult("null-rejection-rate", "bound", rate, max_rate, n=seeds, failed_seeds=failures))
        report.n_samples = 2 * n * seeds
    return report
