"""Jumping chronological contour processes (JCCP) of trees and forests.

The contour of a tree starts at the death level of the root and walks down
the right-hand side of each branch at unit speed.  At every birth level it
jumps up to the death level of the newborn.  With trees stored in
canonical order the contour segments are simply (omega[i], alpha[i+1]),
with a final descent of the last node to 0.
"""

from __future__ import annotations

import numpy as np

from .path import PathClassError, PiecewisePath, K, local_time
from .tree import ChronologicalTree, Forest


class ContourError(ValueError):
    """Path that does not code a forest."""


def jccp(t: ChronologicalTree) -> PiecewisePath:
    return PiecewisePath(t.omega, np.concatenate([t.alpha[1:], [0.0]]))


def jccp_forest(f: Forest, truncation: float | None = None) -> PiecewisePath:
    """Concatenated contours of the trees (truncated at ``truncation`` first)."""
    trees = f.trees if truncation is None else tuple(t.truncate(truncation) for t in f.trees)
    tops = np.concatenate([t.omega for t in trees])
    bottoms = np.concatenate([np.concatenate([t.alpha[1:], [0.0]]) for t in trees])
    return PiecewisePath(tops, bottoms)


def forest_from_contour(p: PiecewisePath, horizon: float | None = None) -> Forest:
    """Rebuild the forest coded by a contour path.

    A new tree starts after every left limit equal to 0.  Within a tree a
    jump from level c creates a node born at c; its parent is the
    individual whose life (alpha, omega] contains c among the ancestors of
    the previously visited node.
    """
    if len(p) == 0:
        raise ContourError("empty path")
    if not p.finite:
        raise ContourError("a contour has finite lifetime")
    tops, bottoms = p.tops, p.bottoms
    if bottoms[-1] != 0.0:
        raise ContourError("a contour ends at 0")
    if np.any(bottoms < 0.0):
        raise ContourError("a contour never goes below 0")
    cuts = np.flatnonzero(bottoms == 0.0) + 1
    trees = []
    start = 0
    for end in cuts:
        omega = tops[start:end]
        alpha = np.concatenate([[0.0], bottoms[start : end - 1]])
        n = omega.size
        parent = np.empty(n, dtype=np.int64)
        parent[0] = -1
        stack = [0]
        for i in range(1, n):
            c = alpha[i]
            while stack and alpha[stack[-1]] >= c:
                stack.pop()
            if not stack or c > omega[stack[-1]]:
                raise ContourError(f"jump at level {c} has no living parent")
            parent[i] = stack[-1]
            stack.append(i)
        trees.append(ChronologicalTree(alpha, omega, parent, horizon))
        start = end
    return Forest(tuple(trees))


def width_via_local_time(p: PiecewisePath, levels):
    """Local times of the contour at ``levels`` (the width of the coded forest)."""
    return local_time(p, levels)


def dual_forest(f: Forest, T: float) -> Forest:
    """Forest coded by K applied to the contour of ``f`` truncated at T."""
    try:
        return forest_from_contour(K(jccp_forest(f, T), T), horizon=T)
    except PathClassError as exc:
        raise ContourError(str(exc)) from exc
