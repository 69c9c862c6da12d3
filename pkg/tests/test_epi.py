import io
import re

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from forestdual.epi import (
    NoSurvivorError,
    ReconstructedTree,
    check_conditional_decomposition,
    coalescence_times,
    incidence_series,
    mrca_coalescence_times,
    reconstructed_tree,
    write_incidence_csv,
)
from forestdual.measure import Exponential
from forestdual.sim import simulate_forests
from forestdual.tree import ChronologicalTree, Forest, single_node
from forestdual.verify import dual_specs

from .strategies import forests, trees


def parse_newick(text):
    """Leaf label -> distance from the root."""
    tokens = re.findall(r"[(),;:]|[^(),;:]+", text.strip())
    pos = 0

    def node(depth):
        nonlocal pos
        leaves = {}
        if tokens[pos] == "(":
            pos += 1
            children = [subtree(depth)]
            while tokens[pos] == ",":
                pos += 1
                children.append(subtree(depth))
            assert tokens[pos] == ")"
            pos += 1
            for c in children:
                leaves.update(c)
            return leaves, None
        label = tokens[pos]
        pos += 1
        return {label: depth}, label

    def subtree(depth):
        nonlocal pos
        leaves, _ = node(0.0)
        assert tokens[pos] == ":"
        length = float(tokens[pos + 1])
        pos += 2
        return {k: v + depth + length for k, v in leaves.items()}

    leaves, _ = node(0.0)
    assert tokens[pos] == ";"
    return leaves


class TestCoalescence:
    def test_one_survivor(self):
        assert coalescence_times(Forest((single_node(3.0),)), 2.0) == []

    def test_hand_built(self):
        t = ChronologicalTree.from_nodes([(0, None, 0.0, 3.0), (1, 0, 1.0, 2.5)])
        f = Forest((t,))
        assert coalescence_times(f, 2.0) == [1.0] == mrca_coalescence_times(f, 2.0)

    def test_three_survivors(self):
        # root (0, 4) with children born at 1 and 3; the child born at 1 has a child born at 2
        t = ChronologicalTree.from_nodes([(0, None, 0, 4), (1, 0, 1, 4), (2, 0, 3, 4), (3, 1, 2, 4)])
        f = Forest((t,))
        # planar order: root, child@3, child@1, grandchild@2
        assert coalescence_times(f, 3.5) == [0.5, 2.5, 1.5] == mrca_coalescence_times(f, 3.5)

    def test_no_survivor(self):
        with pytest.raises(NoSurvivorError):
            coalescence_times(Forest((single_node(1.0),)), 2.0)

    @settings(max_examples=400, deadline=None)
    @given(forests(max_trees=2), st.integers(1, 120))
    def test_contour_equals_genealogy(self, f, level):
        T = level / 16
        assume(f.trees[-1].extinction_time() >= T)
        h = coalescence_times(f, T)
        assert h == mrca_coalescence_times(f, T)
        assert len(h) + 1 == f.trees[-1].width()(T)
        assert all(0 < x <= T for x in h)


class TestReconstructedTree:
    def test_single_leaf(self):
        t = ReconstructedTree((), 1.0)
        assert t.n_leaves == 1 and t.n_internal == 0 and t.newick() == "0;"

    def test_cherry(self):
        assert ReconstructedTree((0.4,), 1.0, ("A", "B")).newick() == "(A:0.4,B:0.4);"
        assert ReconstructedTree((0.4,), 1.0).newick() == "(0:0.4,1:0.4);"

    def test_ladder(self):
        t = ReconstructedTree((0.3, 0.7, 0.2), 1.0)
        assert t.newick() == "((0:0.3,1:0.3):0.4,(2:0.2,3:0.2):0.5);"

    def test_invalid_depths(self):
        with pytest.raises(ValueError):
            ReconstructedTree((0.0,), 1.0)
        with pytest.raises(ValueError):
            ReconstructedTree((1.5,), 1.0)
        with pytest.raises(ValueError):
            ReconstructedTree((0.5,), 1.0, ("A",))

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.integers(1, 64), max_size=12))
    def test_newick_is_ultrametric(self, ks):
        depths = [k / 64 for k in ks]
        t = ReconstructedTree(tuple(depths), 1.0)
        leaves = parse_newick(t.newick())
        assert sorted(leaves, key=int) == [str(i) for i in range(len(depths) + 1)]
        height = max(depths) if depths else 0.0
        assert all(v == pytest.approx(height, abs=1e-9) for v in leaves.values())

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(1, 64), min_size=1, max_size=12))
    def test_adjacent_leaves_meet_at_their_depth(self, ks):
        depths = [k / 64 for k in ks]
        t = ReconstructedTree(tuple(depths), 1.0)
        # the path length between leaves i and i+1 is twice their coalescence depth
        for i, d in enumerate(depths):
            lo, hi, top = 0, len(depths), None
            while True:
                k = t.split(lo, hi)
                if k == i:
                    top = t.depths[k]
                    break
                lo, hi = (lo, k) if i < k else (k + 1, hi)
            assert top == d

    def test_leaf_count_is_width_at_T(self):
        left, _, _, _ = dual_specs(Exponential(2, 1), 1.0)
        batch = simulate_forests(left, 300, 4)
        for f in batch:
            assert reconstructed_tree(f, 1.0).n_leaves == f.width()(1.0)


class TestIncidence:
    def test_single_node(self):
        assert incidence_series(Forest((single_node(3.0),)), 1.0, 3.0).tolist() == [0, 0, 0]

    def test_two_node(self, two_node):
        assert incidence_series(Forest((two_node,)), 1.0, 3.0).tolist() == [0, 1, 0]

    @settings(max_examples=200, deadline=None)
    @given(forests(), st.integers(1, 32))
    def test_total(self, f, k):
        horizon = float(f.omega.max())
        s = incidence_series(f, k / 16, horizon)
        assert s.sum() == f.n_nodes - len(f)

    def test_csv(self):
        buf = io.StringIO()
        write_incidence_csv(np.array([0, 1, 0]), 0.5, buf)
        assert buf.getvalue() == "bin_start,count\n0.0,0\n0.5,1\n1.0,0\n"

    def test_bad_bin(self, two_node):
        with pytest.raises(ValueError):
            incidence_series(Forest((two_node,)), 0.0)


def test_decomposition_small_run():
    r = check_conditional_decomposition(Exponential(2, 1), 1.0, n=20000, m=3000, seed=3)
    assert r.passed, r.summary()
    assert r.audit()
    assert any("starved" in n for n in r.notes)  # the N=1 stratum is thin at this size
