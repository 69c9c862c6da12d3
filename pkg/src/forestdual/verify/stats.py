"""Test statistics with recomputable pass rules.

Every test returns a ``TestResult`` whose pass flag is ``statistic <=
critical``; the critical value is a deterministic function of the stored
sample sizes and alpha, so a report can be re-audited from its numbers.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .report import TestResult

MIN_KS_SAMPLE = 50


class InsufficientSample(ValueError):
    """Too few observations for an asymptotic p-value."""


def ks_critical(n: int, m: int | None, alpha: float) -> float:
    """Asymptotic KS critical distance (one-sample when ``m`` is None)."""
    en = n if m is None else n * m / (n + m)
    return float(stats.kstwobign.isf(alpha) / math.sqrt(en))


def ks_two_sample(xs, ys, alpha: float = 0.01, name: str = "ks") -> TestResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    NaN entries mark undefined functionals and are dropped.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    xs, ys = xs[~np.isnan(xs)], ys[~np.isnan(ys)]
    if xs.size < MIN_KS_SAMPLE or ys.size < MIN_KS_SAMPLE:
        raise InsufficientSample(f"{name}: KS needs at least {MIN_KS_SAMPLE} observations per sample (got {xs.size}, {ys.size})")
    res = stats.ks_2samp(xs, ys, method="asymp")
    n, m = xs.size, ys.size
    return TestResult(
        name,
        "ks",
        float(res.statistic),
        ks_critical(n, m, alpha),
        alpha=alpha,
        n=int(n),
        m=int(m),
        pvalue=float(res.pvalue),
    )


def ks_one_sample(xs, cdf, alpha: float = 0.01, name: str = "ks1") -> TestResult:
    xs = np.asarray(xs, dtype=float)
    if xs.size < MIN_KS_SAMPLE:
        raise InsufficientSample(f"{name}: KS needs at least {MIN_KS_SAMPLE} observations (got {xs.size})")
    res = stats.kstest(xs, cdf, method="asymp")
    return TestResult(name, "ks1", float(res.statistic), ks_critical(xs.size, None, alpha), alpha=alpha, n=int(xs.size), pvalue=float(res.pvalue))


def _pool(expected: np.ndarray, observed: np.ndarray, min_expected: float):
    """Merge cells from the right until every cell expects ``min_expected``."""
    e, o = list(expected), list(observed)
    while len(e) > 1 and e[-1] < min_expected:
        last_e, last_o = e.pop(), o.pop()
        e[-1] += last_e
        o[-1] += last_o
    i = 0
    while i < len(e) - 1:
        if e[i] < min_expected:
            small_e, small_o = e.pop(i), o.pop(i)
            e[i] += small_e
            o[i] += small_o
        else:
            i += 1
    return np.array(e), np.array(o)


def chi2_cells(observed, probs, alpha: float = 0.01, name: str = "chi2", min_expected: float = 5.0, fitted: int = 0) -> TestResult:
    """Pearson chi-square of observed counts against cell probabilities.

    Cells are pooled so that each expects at least ``min_expected``.
    """
    observed = np.asarray(observed, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = observed.sum()
    e, o = _pool(probs * n, observed, min_expected)
    df = max(e.size - 1 - fitted, 1)
    stat = float(np.sum((o - e) ** 2 / e)) if e.size > 1 else 0.0
    return TestResult(
        name,
        "chi2",
        stat,
        float(stats.chi2.isf(alpha, df)),
        alpha=alpha,
        n=int(n),
        df=int(df),
        pvalue=float(stats.chi2.sf(stat, df)),
    )


def chi2_geometric(counts, p: float, alpha: float = 0.01, start: int = 1, name: str = "chi2-geometric") -> TestResult:
    """Chi-square of integer counts against the geometric law on {start, start+1, ...}.

    P(k) = p (1-p)^(k-start); the tail beyond the largest observed value
    is its own cell, then cells are pooled to expect at least 5.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size == 0:
        raise InsufficientSample(f"{name}: no counts")
    if np.any(counts < start):
        raise ValueError(f"{name}: counts below the support start {start}")
    if not (0 < p <= 1):
        raise ValueError("p must lie in (0, 1]")
    top = int(counts.max())
    k = np.arange(start, top + 1)
    probs = p * (1 - p) ** (k - start)
    obs = np.bincount(counts - start, minlength=top - start + 1).astype(float)
    tail = (1 - p) ** (top + 1 - start)
    probs = np.append(probs, tail)
    obs = np.append(obs, 0.0)
    res = chi2_cells(obs, probs, alpha, name)
    res.extra["p"] = float(p)
    res.extra["mean"] = float(counts.mean())
    return res


def binomial_sigma(successes: int, n: int, p0: float, name: str = "binomial", sigmas: float = 3.0, bias: float = 0.0) -> TestResult:
    """|phat - p0| measured in binomial standard deviations (pass at ``sigmas``).

    ``bias`` is a known bound on the proxy error of the estimate; it widens
    the tolerance.
    """
    if n <= 0:
        raise InsufficientSample(f"{name}: no trials")
    sd = math.sqrt(p0 * (1 - p0) / n) if 0 < p0 < 1 else 1.0 / n
    phat = successes / n
    z = max(abs(phat - p0) - bias, 0.0) / sd
    return TestResult(
        name,
        "binomial",
        float(z),
        float(sigmas),
        n=int(n),
        estimate=float(phat),
        expected=float(p0),
        sigma=float(sd),
        bias=float(bias),
        pvalue=float(stats.binomtest(int(successes), int(n), p0).pvalue) if 0 < p0 < 1 else None,
    )


def exact_count(violations: int, n: int, name: str) -> TestResult:
    """Deterministic identity checked on ``n`` instances: pass iff no violation."""
    return TestResult(name, "exact", float(violations), 0.0, n=int(n))


def correlation(xs, ys, name: str = "correlation", sigmas: float = 3.0) -> TestResult:
    """Spearman rank correlation; pass when |r| <= sigmas / sqrt(n)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n = xs.size
    if n < MIN_KS_SAMPLE:
        raise InsufficientSample(f"{name}: need at least {MIN_KS_SAMPLE} pairs")
    r = float(stats.spearmanr(xs, ys).statistic)
    if math.isnan(r):
        r = 0.0
    return TestResult(name, "correlation", abs(r), sigmas / math.sqrt(n), n=int(n), r=r, sigmas=float(sigmas))


def interval(left: float, left_sd: float, right: float, right_sd: float, name: str, sigmas: float = 3.0, bias: float = 0.0, n: int = 0) -> TestResult:
    """Two independent estimates agree within ``sigmas`` combined standard errors plus ``bias``."""
    sd = math.hypot(left_sd, right_sd)
    diff = abs(left - right)
    return TestResult(
        name,
        "interval",
        float(diff),
        float(sigmas * sd + bias),
        n=int(n),
        left=float(left),
        right=float(right),
        sigma=float(sd),
        sigmas=float(sigmas),
        bias=float(bias),
    )


def proportion(successes: int, n: int) -> tuple[float, float]:
    """Estimate and standard error of a proportion."""
    p = successes / n
    return p, math.sqrt(max(p * (1 - p), 1.0 / n) / n)
