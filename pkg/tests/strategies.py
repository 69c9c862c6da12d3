"""Hypothesis strategies for trees, forests and paths on a dyadic grid.

Levels are multiples of 1/16 so every operator under test is exact in
floating point, mirroring the quantisation used by the simulators.
"""

import numpy as np
from hypothesis import assume
from hypothesis import strategies as st

from forestdual.path import PiecewisePath
from forestdual.tree import ChronologicalTree, Forest

Q = 16


@st.composite
def trees(draw, max_nodes=12, max_level=64):
    omega0 = draw(st.integers(1, max_level))
    nodes = [(0, None, 0, omega0)]
    births = {0: set()}
    for _ in range(1, draw(st.integers(1, max_nodes))):
        pid = draw(st.integers(0, len(nodes) - 1))
        _, _, a, w = nodes[pid]
        if w - a < 2:
            continue
        b = draw(st.integers(a + 1, w - 1))
        if b in births[pid]:
            continue
        births[pid].add(b)
        births[len(nodes)] = set()
        nodes.append((len(nodes), pid, b, b + draw(st.integers(1, max_level))))
    return ChronologicalTree.from_nodes([(k, p, a / Q, w / Q) for k, p, a, w in nodes])


@st.composite
def forests(draw, max_trees=4, **kw):
    return Forest(tuple(draw(st.lists(trees(**kw), min_size=1, max_size=max_trees))))


@st.composite
def paths(draw, max_segments=10, max_level=64, finite=True):
    """Slope -1 paths with positive jumps, levels in [-max_level, max_level]/Q."""
    n = draw(st.integers(1, max_segments))
    tops, bottoms = [], []
    top = draw(st.integers(-max_level, max_level))
    for k in range(n):
        bottom = draw(st.integers(top - max_level, top))
        tops.append(top)
        bottoms.append(bottom)
        if k < n - 1:
            top = bottom + draw(st.integers(1, max_level))
    t = np.array(tops, float) / Q
    b = np.array(bottoms, float) / Q
    if not finite:
        b[-1] = -np.inf
    return PiecewisePath(t, b)


@st.composite
def excursions_to_zero(draw, max_segments=8, max_level=48):
    """Paths started at x0 > 0, staying positive, ending at 0."""
    n = draw(st.integers(1, max_segments))
    tops, bottoms = [], []
    top = draw(st.integers(1, max_level))
    for k in range(n):
        last = k == n - 1
        bottom = 0 if last else draw(st.integers(1, top))
        tops.append(top)
        bottoms.append(bottom)
        if not last:
            top = bottom + draw(st.integers(1, max_level))
    assume(all(t >= b for t, b in zip(tops, bottoms)))
    return PiecewisePath(np.array(tops, float) / Q, np.array(bottoms, float) / Q)
