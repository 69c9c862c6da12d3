import math

import numpy as np
import pytest

from forestdual.measure import Exponential, PointMasses
from forestdual.scale import (
    ScaleError,
    build_scale_table,
    exit_down_prob,
    exponential_scale,
    gamma_params,
    hit_zero_prob,
    return_to_zero_prob,
    subcritical_dual_geometric_param,
)

from .conftest import gamma_table

E = math.e


def test_closed_form_value():
    assert float(exponential_scale(2, 1, 1.0)) == pytest.approx(2 * E - 1, rel=1e-15)


def test_closed_form_critical_is_linear():
    assert float(exponential_scale(1, 1, 2.0)) == pytest.approx(3.0, rel=1e-15)


@pytest.mark.parametrize("b,d", [(2, 1), (1, 2), (1, 1), (4, 1)])
def test_volterra_matches_closed_form(b, d):
    table = build_scale_table(Exponential(b, d), 5.0, 1e-3, method="volterra")
    exact = exponential_scale(b, d, table.x)
    assert np.max(np.abs(table.W - exact) / exact) < 1e-6


@pytest.mark.parametrize("b,d", [(2, 1), (4, 1)])
def test_tilted_volterra_matches_swapped_rates(b, d):
    table = build_scale_table(Exponential(b, d), 5.0, 1e-3, tilted=True, method="volterra")
    exact = exponential_scale(d, b, table.x)
    assert np.max(np.abs(table.W - exact) / exact) < 1e-6


def test_w_at_zero_is_one():
    assert build_scale_table(PointMasses(((1.0, 0.6), (2.0, 0.9))), 3.0, 1e-3)(0.0) == 1.0


def test_subcritical_limit():
    table = build_scale_table(Exponential(1, 2), 30.0, 1e-2, method="volterra")
    assert table(30.0) == pytest.approx(2.0, rel=1e-9)
    assert table.W_inf == 2.0


@pytest.mark.parametrize("mu", [PointMasses(((1.0, 0.6), (2.0, 0.9))), gamma_table()])
def test_renewal_residual(mu):
    for tilted in (False, True):
        assert build_scale_table(mu, 3.0, 1e-3, tilted=tilted).residual() < 1e-6


def test_exit_probability():
    table = build_scale_table(Exponential(2, 1), 2.0, 1e-3)
    assert exit_down_prob(table, 0.5, 1.0) == pytest.approx((2 * math.exp(0.5) - 1) / (2 * E - 1), rel=1e-12)
    # the commonly quoted 0.517887 is a rounding slip; the closed form gives 0.5178428
    assert exit_down_prob(table, 0.5, 1.0) == pytest.approx(0.517843, abs=1e-6)
    assert exit_down_prob(table, 1.0, 1.0) == pytest.approx(1 / (2 * E - 1))
    assert exit_down_prob(table, 0.0, 1.0) == 1.0


def test_gamma_params():
    g, gt = gamma_params(Exponential(2, 1), 1.0)
    assert g == pytest.approx(0.225399, abs=1e-6)
    assert gt == pytest.approx(1 / (2 - 1 / E), rel=1e-14)
    assert gt == pytest.approx(0.612700, abs=1e-6)


def test_gamma_params_equal_when_not_supercritical():
    g, gt = gamma_params(Exponential(1, 2), 1.0)
    assert g == gt


def test_gamma_params_small_horizon():
    g, gt = gamma_params(Exponential(2, 1), 1e-9)
    assert g == pytest.approx(1.0, abs=1e-8) and gt == pytest.approx(1.0, abs=1e-8)


def test_gamma_params_volterra_path():
    mu = PointMasses(((1.0, 0.6), (2.0, 0.9)))
    g, gt = gamma_params(mu, 1.0)
    assert 0 < g < gt < 1


def test_hit_zero_prob():
    assert hit_zero_prob(Exponential(2, 1), 1.0) == pytest.approx(math.exp(-1))
    assert hit_zero_prob(Exponential(1, 2), 5.0) == 1.0
    assert hit_zero_prob(Exponential(2, 1), 0.0) == 1.0


def test_return_to_zero_prob():
    assert return_to_zero_prob(Exponential(1, 2)) == 0.5
    assert return_to_zero_prob(Exponential(2, 1)) == 1.0


def test_subcritical_dual_geometric_param():
    p = subcritical_dual_geometric_param(Exponential(1, 2), 1.0)
    WT = 2 - math.exp(-1)
    assert p == pytest.approx(1 - (1 - 1 / WT) / 0.5, rel=1e-14)
    assert p == pytest.approx(0.225399, abs=1e-6)
    assert subcritical_dual_geometric_param(Exponential(1, 2), 1e-9) == pytest.approx(1.0, abs=1e-8)
    assert subcritical_dual_geometric_param(Exponential(1, 2), 50.0) == pytest.approx(0.0, abs=1e-15)


def test_coarse_step_rejected():
    with pytest.raises(ScaleError):
        build_scale_table(Exponential(2, 1), 1.0, 0.1, method="volterra")


def test_evaluation_outside_table():
    table = build_scale_table(Exponential(2, 1), 1.0, 1e-3)
    with pytest.raises(ScaleError):
        table(1.5)
