"""Compiled kernels for tree, forest and Levy-path simulation.

All levels are snapped to the 2**-32 grid as they are generated, which
keeps later path algebra exact.  Kernels return status codes instead of
raising; the Python wrappers turn them into exceptions.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .._sampling import QUANTUM, draw, quantize

OK = 0
OVERFLOW = 1
STALL = 2

FIRST_SURVIVOR = 0
GEOMETRIC = 1

# Levy path termination codes
HIT_ZERO = 0
PASSED_UP = 1
LOW_CAP = 2
HIGH_CAP = 3
TIME_CAP = 4
JUMP_CAP = 5

UP_NONE = 0
UP_KILL = 1
UP_REFLECT = 2


@njit(cache=True, nogil=True)
def _grow_f(a, need):
    if need <= a.shape[0]:
        return a
    size = a.shape[0] * 2
    while size < need:
        size *= 2
    out = np.empty(size, dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True, nogil=True)
def _grow_i(a, need):
    if need <= a.shape[0]:
        return a
    size = a.shape[0] * 2
    while size < need:
        size *= 2
    out = np.empty(size, dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True, nogil=True)
def grow_tree(rng, b, lk, lp, lx, lc, root_life, T, alpha, omega, parent, pos, cap):
    """Append one tree in canonical order starting at index ``pos``.

    Returns the (possibly reallocated) arrays, the new end position, whether
    some individual is alive at T and a status code.
    """
    start = pos
    stack_a = np.empty(64)
    stack_p = np.empty(64, dtype=np.int64)
    stack_a[0] = 0.0
    stack_p[0] = -1
    sp = 1
    survived = False
    first = True
    while sp > 0:
        sp -= 1
        a = stack_a[sp]
        par = stack_p[sp]
        if first:
            life = root_life
            first = False
        else:
            life = draw(rng, lk, lp, lx, lc)
        w = quantize(a + life)
        if w <= a:
            w = a + QUANTUM
        if pos - start >= cap:
            return alpha, omega, parent, pos, survived, OVERFLOW
        if pos >= alpha.shape[0]:
            alpha = _grow_f(alpha, pos + 1)
            omega = _grow_f(omega, pos + 1)
            parent = _grow_i(parent, pos + 1)
        idx = pos - start
        alpha[pos] = a
        omega[pos] = w if w < T else T
        parent[pos] = par
        pos += 1
        if w >= T:
            survived = True
        end = w if w < T else T
        s = a
        last = a
        while True:
            s += rng.standard_exponential() / b
            if s >= end:
                break
            sq = quantize(s)
            if sq <= last or sq >= end:
                continue
            last = sq
            if sp >= stack_a.shape[0]:
                stack_a = _grow_f(stack_a, sp + 1)
                stack_p = _grow_i(stack_p, sp + 1)
            stack_a[sp] = sq
            stack_p[sp] = idx
            sp += 1
    return alpha, omega, parent, pos, survived, OK


@njit(cache=True, nogil=True)
def simulate_forests(rng, n_forests, b, lk, lp, lx, lc, ak, ap, ax, ac, T, mode, p, cap, max_resample):
    """Simulate ``n_forests`` forests into flat arrays.

    mode FIRST_SURVIVOR: i.i.d. trees until the first one alive at T.
    mode GEOMETRIC: N ~ geometric(p) trees conditioned to die out before T,
    then one conditioned to be alive at T, conditioning by rejection.
    """
    alpha = np.empty(1024)
    omega = np.empty(1024)
    parent = np.empty(1024, dtype=np.int64)
    tree_start = np.empty(256, dtype=np.int64)
    forest_start = np.empty(n_forests + 1, dtype=np.int64)
    pos = 0
    nt = 0
    rejected = 0
    rate = -np.log1p(-p) if p < 1.0 else np.inf
    for f in range(n_forests):
        forest_start[f] = nt
        if mode == FIRST_SURVIVOR:
            n_needed = -1
        else:
            n_needed = int(np.floor(rng.standard_exponential() / rate))
        j = 0
        tries = 0
        while True:
            x = draw(rng, ak, ap, ax, ac)
            old = pos
            alpha, omega, parent, pos, survived, status = grow_tree(rng, b, lk, lp, lx, lc, x, T, alpha, omega, parent, pos, cap)
            if status != OK:
                return alpha[:0], omega[:0], parent[:0], tree_start[:0], forest_start, rejected, status
            if mode == FIRST_SURVIVOR:
                keep = True
                done = survived
            else:
                keep = survived == (j == n_needed)
                done = keep and survived
            if keep:
                if nt + 1 >= tree_start.shape[0]:
                    tree_start = _grow_i(tree_start, nt + 2)
                tree_start[nt] = old
                nt += 1
                j += 1
                tries = 0
            else:
                pos = old
                rejected += 1
                tries += 1
            if done:
                break
            if tries > max_resample or (mode == FIRST_SURVIVOR and j > max_resample):
                return alpha[:0], omega[:0], parent[:0], tree_start[:0], forest_start, rejected, STALL
    forest_start[n_forests] = nt
    tree_start = _grow_i(tree_start, nt + 1)
    tree_start[nt] = pos
    return alpha[:pos].copy(), omega[:pos].copy(), parent[:pos].copy(), tree_start[: nt + 1].copy(), forest_start, rejected, OK


@njit(cache=True, nogil=True)
def simulate_conditioned_trees(rng, n_trees, b, lk, lp, lx, lc, ak, ap, ax, ac, T, lo, hi, cap, max_resample):
    """Trees whose extinction level (max omega, untruncated below T) lies in [lo, hi].

    With hi >= T the condition is survival to T (the tree is truncated at T).
    """
    alpha = np.empty(1024)
    omega = np.empty(1024)
    parent = np.empty(1024, dtype=np.int64)
    tree_start = np.empty(n_trees + 1, dtype=np.int64)
    pos = 0
    rejected = 0
    for i in range(n_trees):
        tries = 0
        while True:
            x = draw(rng, ak, ap, ax, ac)
            old = pos
            alpha, omega, parent, pos, survived, status = grow_tree(rng, b, lk, lp, lx, lc, x, T, alpha, omega, parent, pos, cap)
            if status != OK:
                return alpha[:0], omega[:0], parent[:0], tree_start[:0], rejected, status
            if survived:
                text = T
            else:
                text = omega[old:pos].max()
            if (survived and hi >= T) or (not survived and lo <= text and text <= hi):
                tree_start[i] = old
                break
            pos = old
            rejected += 1
            tries += 1
            if tries > max_resample:
                return alpha[:0], omega[:0], parent[:0], tree_start[:0], rejected, STALL
    tree_start[n_trees] = pos
    return alpha[:pos].copy(), omega[:pos].copy(), parent[:pos].copy(), tree_start, rejected, OK


@njit(cache=True, nogil=True)
def forest_widths(alpha, omega, tree_start, forest_start, times, T):
    """Per-forest width functionals.

    Returns widths at ``times`` (left-continuous), the tree count (the width
    just after 0), the width at T, the maximum width and the area.
    """
    n = forest_start.shape[0] - 1
    k = times.shape[0]
    xi = np.zeros((n, k), dtype=np.int64)
    trees = np.zeros(n, dtype=np.int64)
    at_T = np.zeros(n, dtype=np.int64)
    wmax = np.zeros(n, dtype=np.int64)
    area = np.zeros(n)
    for f in range(n):
        lo = tree_start[forest_start[f]]
        hi = tree_start[forest_start[f + 1]]
        trees[f] = forest_start[f + 1] - forest_start[f]
        acc = 0.0
        for i in range(lo, hi):
            a = alpha[i]
            w = omega[i]
            acc += w - a
            if a < T and T <= w:
                at_T[f] += 1
            for j in range(k):
                if a < times[j] and times[j] <= w:
                    xi[f, j] += 1
        area[f] = acc
        sa = np.sort(alpha[lo:hi])
        sw = np.sort(omega[lo:hi])
        m = hi - lo
        jw = 0
        best = 0
        for i in range(m):
            # value just after the birth sa[i]: births <= sa[i] minus deaths <= sa[i]
            if i + 1 < m and sa[i + 1] == sa[i]:
                continue
            while jw < m and sw[jw] <= sa[i]:
                jw += 1
            v = i + 1 - jw
            if v > best:
                best = v
        wmax[f] = best
    return xi, trees, at_T, wmax, area


@njit(cache=True, nogil=True)
def levy_path(rng, b, lk, lp, lx, lc, x0, kill_zero, upper, upper_mode, low_cap, high_cap, t_max, max_jumps, tops, bottoms):
    """One slope -1 Levy path with jumps at rate b, written into ``tops``/``bottoms``.

    Returns (arrays, number of segments, status, final value).  The final
    value is the post-jump level when the path is killed by a jump (upward
    passage or high cap), the terminal left limit otherwise.
    """
    a = quantize(x0)
    if upper_mode == UP_REFLECT and a > upper:
        a = upper
    n = 0
    elapsed = 0.0
    while True:
        gap = rng.standard_exponential() / b
        c = a - gap
        if n >= tops.shape[0]:
            tops = _grow_f(tops, n + 1)
            bottoms = _grow_f(bottoms, n + 1)
        tops[n] = a
        if kill_zero and a > 0.0 and c <= 0.0:
            if elapsed + a >= t_max:
                bottoms[n] = a - (t_max - elapsed)
                return tops, bottoms, n + 1, TIME_CAP, bottoms[n]
            bottoms[n] = 0.0
            return tops, bottoms, n + 1, HIT_ZERO, 0.0
        if c <= low_cap:
            if elapsed + (a - low_cap) >= t_max:
                bottoms[n] = a - (t_max - elapsed)
                return tops, bottoms, n + 1, TIME_CAP, bottoms[n]
            bottoms[n] = low_cap
            return tops, bottoms, n + 1, LOW_CAP, low_cap
        c = quantize(c)
        if c >= a:
            c = a - QUANTUM
        if elapsed + (a - c) >= t_max:
            bottoms[n] = a - (t_max - elapsed)
            return tops, bottoms, n + 1, TIME_CAP, bottoms[n]
        bottoms[n] = c
        elapsed += a - c
        n += 1
        nxt = quantize(c + draw(rng, lk, lp, lx, lc))
        if nxt <= c:
            nxt = c + QUANTUM
        if upper_mode == UP_KILL and nxt > upper:
            return tops, bottoms, n, PASSED_UP, nxt
        if upper_mode == UP_REFLECT and nxt > upper:
            nxt = upper
        if nxt >= high_cap:
            return tops, bottoms, n, HIGH_CAP, nxt
        if n >= max_jumps + 1:
            return tops, bottoms, n, JUMP_CAP, c
        a = nxt


@njit(cache=True, nogil=True)
def levy_batch(rng, x0s, b, lk, lp, lx, lc, kill_zero, upper, upper_mode, low_cap, high_cap, t_max, max_jumps):
    """Independent Levy paths from each start in ``x0s``, as flat level arrays."""
    n = x0s.shape[0]
    tops = np.empty(4096)
    bottoms = np.empty(4096)
    offsets = np.empty(n + 1, dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    final = np.empty(n)
    bt = np.empty(64)
    bb = np.empty(64)
    pos = 0
    for i in range(n):
        bt, bb, m, st, fv = levy_path(rng, b, lk, lp, lx, lc, x0s[i], kill_zero, upper, upper_mode, low_cap, high_cap, t_max, max_jumps, bt, bb)
        offsets[i] = pos
        tops = _grow_f(tops, pos + m)
        bottoms = _grow_f(bottoms, pos + m)
        tops[pos : pos + m] = bt[:m]
        bottoms[pos : pos + m] = bb[:m]
        pos += m
        status[i] = st
        final[i] = fv
    offsets[n] = pos
    return tops[:pos].copy(), bottoms[:pos].copy(), offsets, status, final
