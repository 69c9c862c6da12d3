import math

import numpy as np
import pytest

from forestdual.measure import Exponential, PointMasses
from forestdual.path import PiecewisePath
from forestdual.scale import gamma_params
from forestdual.sim import ForestSpec, Rules, simulate_conditioned_trees, simulate_forests, simulate_levy_path, simulate_levy_paths, simulate_tree
from forestdual.sim._kernels import HIT_ZERO
from forestdual.streams import stream
from forestdual.verify.stats import chi2_geometric

BD21 = Exponential(2.0, 1.0)


def tree_heights(batch):
    return np.maximum.reduceat(batch.omega, batch.tree_start[:-1])


def test_same_seed_same_forests():
    spec = ForestSpec(BD21, "bottom", 1.0)
    a = simulate_forests(spec, 3000, 11, "repro", threads=1)
    b = simulate_forests(spec, 3000, 11, "repro", threads=3)
    for name in ("alpha", "omega", "parent", "tree_start", "forest_start"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = simulate_forests(spec, 3000, 12, "repro")
    assert not np.array_equal(a.omega[:100], c.omega[:100])


def test_levels_are_dyadic():
    batch = simulate_forests(ForestSpec(BD21, "bottom", 1.0), 200, 0)
    assert np.all(batch.omega * 2**32 == np.round(batch.omega * 2**32))


def test_negligible_birth_rate_gives_single_ancestor():
    mu = PointMasses(((1.0, 1e-12),))
    t, alive = simulate_tree(mu, 0.5, 1.0, np.random.default_rng(0))
    assert t.n_nodes == 1 and t.omega.tolist() == [0.5] and not alive


def test_small_horizon_node_count():
    mu = Exponential(2.0, 1.0)
    batch = simulate_conditioned_trees(mu, "standard", 0.01, 10**6, -math.inf, math.inf, 3, "small-T")
    mean_nodes = batch.n_nodes / 10**6
    assert mean_nodes == pytest.approx(1.02, abs=0.005)


def test_survival_with_overshoot_ancestor():
    n = 10**5
    batch = simulate_conditioned_trees(BD21, "bottom", 1.0, n, -math.inf, math.inf, 5, "survival")
    p = np.mean(tree_heights(batch) >= 1.0)
    assert p == pytest.approx(1 / (2 - math.exp(-1)), abs=0.01)


def test_first_survivor_tree_count_is_geometric():
    batch = simulate_forests(ForestSpec(BD21, "bottom", 1.0), 10**5, 8)
    gamma_tilde = gamma_params(BD21, 1.0)[1]
    assert chi2_geometric(batch.tree_counts(), gamma_tilde, 0.01).passed


def test_geometric_one_is_a_single_tree():
    batch = simulate_forests(ForestSpec(BD21, "bottom", 1.0, 1.0), 500, 1)
    assert np.all(batch.tree_counts() == 1)


def test_only_the_last_tree_is_alive_at_T():
    batch = simulate_forests(ForestSpec(BD21, "bottom", 1.0), 2000, 2)
    heights = tree_heights(batch)
    last = batch.forest_start[1:] - 1
    assert np.all(heights[last] == 1.0)
    others = np.setdiff1d(np.arange(heights.size), last)
    assert np.all(heights[others] < 1.0)
    w = batch.widths(np.array([1.0]))
    alive_last = [np.sum(batch.omega[batch.tree_start[k] : batch.tree_start[k + 1]] >= 1.0) for k in last]
    assert np.array_equal(w["at_T"], alive_last)


def test_conditioned_trees_respect_the_window():
    batch = simulate_conditioned_trees(BD21.tilt(), "top", 1.0, 2000, 0.45, 0.55, 4, "window", base=BD21)
    h = tree_heights(batch)
    assert np.all((h >= 0.45) & (h <= 0.55))


class TestLevy:
    def test_no_jumps(self):
        mu = PointMasses(((1.0, 1e-12),))
        p, how, final = simulate_levy_path(mu, 1.0, Rules(), np.random.default_rng(0))
        assert p == PiecewisePath.segment(1.0, 1.0) and how == "hit-zero" and final == 0.0

    def test_two_sided_exit(self):
        n = 10**5
        paths = simulate_levy_paths(BD21, 0.5, Rules(kill_zero=True, upper=1.0, upper_mode="kill"), n, 6, "exit")
        p = np.mean(paths.status == HIT_ZERO)
        assert p == pytest.approx((2 * math.exp(0.5) - 1) / (2 * math.e - 1), abs=0.01)

    def test_hitting_zero(self):
        n = 10**5
        paths = simulate_levy_paths(BD21, 1.0, Rules(kill_zero=True, high_cap=40.0), n, 7, "hit")
        assert np.mean(paths.status == HIT_ZERO) == pytest.approx(math.exp(-1), abs=0.01)

    def test_paths_are_in_class(self):
        paths = simulate_levy_paths(BD21, 0.5, Rules(kill_zero=True, upper=1.0, upper_mode="reflect"), 500, 9, "class")
        for i in range(len(paths)):
            p = paths.path(i)
            assert p.supremum() <= 1.0 and p.bottoms[-1] == 0.0

    def test_block_streams_are_independent_of_threads(self):
        r = Rules(kill_zero=True, upper=1.0, upper_mode="kill")
        a = simulate_levy_paths(BD21, 0.5, r, 5000, 1, "t", threads=1)
        b = simulate_levy_paths(BD21, 0.5, r, 5000, 1, "t", threads=4)
        assert np.array_equal(a.tops, b.tops) and np.array_equal(a.status, b.status)


def test_streams_are_labelled():
    a = stream(0, "x").random(4)
    assert np.array_equal(a, stream(0, "x").random(4))
    assert not np.array_equal(a, stream(0, "y").random(4))
    assert not np.array_equal(a, stream(1, "x").random(4))
