import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forestdual.tree import (
    ChronologicalTree,
    Forest,
    TreeError,
    extinction_time,
    read_forests_jsonl,
    single_node,
    total_length,
    truncate,
    width_process,
    write_forests_jsonl,
)

from .strategies import forests, trees


class TestWidth:
    def test_single_node(self):
        xi = width_process(single_node(3.0))
        assert xi(np.array([0.0, 1e-9, 1.5, 3.0, 3.0001])).tolist() == [0, 1, 1, 1, 0]

    def test_two_node(self, two_node):
        xi = width_process(two_node)
        assert xi(np.array([0.5, 1.0, 1.5, 3.0, 3.5])).tolist() == [1, 1, 2, 2, 0]

    def test_two_node_right_limits(self, two_node):
        xi = width_process(two_node)
        assert xi.right_limit(1.0) == 2 and xi.right_limit(0.0) == 1 and xi.right_limit(3.0) == 0

    def test_forest_doubles(self, two_node):
        f = Forest((two_node, two_node))
        ts = np.linspace(0.1, 3.5, 35)
        assert np.array_equal(width_process(f)(ts), 2 * width_process(two_node)(ts))

    def test_area_is_total_length(self, two_node):
        assert width_process(two_node).area() == pytest.approx(5.0)
        assert width_process(two_node).maximum() == 2


class TestTruncate:
    def test_tall_enough(self, two_node):
        assert truncate(two_node, 10.0) == two_node

    def test_clipping(self, two_node):
        t = truncate(two_node, 2.0)
        assert t.alpha.tolist() == [0.0, 1.0] and t.omega.tolist() == [2.0, 2.0]

    def test_late_child_removed(self):
        t = ChronologicalTree.from_nodes([(0, None, 0.0, 3.0), (1, 0, 2.5, 4.0)])
        r = truncate(t, 2.0)
        assert r.n_nodes == 1 and r.omega.tolist() == [2.0]

    def test_lengths(self, two_node):
        assert extinction_time(single_node(3.0)) == 3.0 and total_length(single_node(3.0)) == 3.0
        assert extinction_time(two_node) == 3.0 and total_length(two_node) == 5.0
        assert total_length(truncate(two_node, 2.0)) == 3.0


class TestValidation:
    def test_child_outside_parent_life(self):
        with pytest.raises(TreeError):
            ChronologicalTree.from_nodes([(0, None, 0.0, 1.0), (1, 0, 2.0, 3.0)])

    def test_two_roots(self):
        with pytest.raises(TreeError):
            ChronologicalTree.from_nodes([(0, None, 0.0, 1.0), (1, None, 0.0, 3.0)])

    def test_simultaneous_births(self):
        with pytest.raises(TreeError):
            ChronologicalTree.from_nodes([(0, None, 0, 3), (1, 0, 1, 2), (2, 0, 1, 2)])

    def test_dead_on_arrival(self):
        with pytest.raises(TreeError):
            ChronologicalTree.from_nodes([(0, None, 0.0, 0.0)])

    def test_empty_forest(self):
        with pytest.raises(TreeError):
            Forest(())

    def test_canonical_order(self):
        # children listed out of order; canonical order visits the latest-born child first
        t = ChronologicalTree.from_nodes([("r", None, 0, 4), ("a", "r", 1, 2), ("b", "r", 3, 5)])
        assert t.alpha.tolist() == [0, 3, 1]


@settings(max_examples=200, deadline=None)
@given(trees())
def test_width_counts_alive(t):
    ts = np.unique(np.concatenate([t.alpha, t.omega, (t.alpha + t.omega) / 2]))
    expected = [(np.sum((t.alpha < s) & (s <= t.omega))) for s in ts]
    assert width_process(t)(ts).tolist() == expected


@settings(max_examples=200, deadline=None)
@given(trees(), st.integers(1, 80))
def test_truncation_commutes_with_width(t, level):
    s = level / 16
    ts = np.linspace(0.01, s, 40)
    assert np.array_equal(width_process(truncate(t, s))(ts), width_process(t)(ts))


@settings(max_examples=100, deadline=None)
@given(forests())
def test_jsonl_round_trip(f):
    buf = io.StringIO()
    write_forests_jsonl([f, f], buf)
    back = read_forests_jsonl(io.StringIO(buf.getvalue()))
    assert back == [f, f]
