"""Scale functions, two-sided exit probabilities and the forest parameters.

The scale function W of the Levy process with Laplace exponent psi is the
increasing function with Laplace transform 1/psi.  It solves the renewal
equation

    W(x) = 1 + int_0^x W(x - v) tail(v) dv,

and gives the exit probability P_x(hit 0 before exceeding a) = W(a-x)/W(a).

The equation is discretised with a product trapezoid rule: W is linear
between grid nodes and the tail is integrated exactly against it, using the
measure's tail integral and tail moment.  The O(h^2) error is removed by
Richardson extrapolation against a second solve at step h/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import Exponential, LifespanMeasure

RESIDUAL_TOL = 1e-6


class ScaleError(ValueError):
    """Step too coarse, or evaluation outside the tabulated range."""


def exponential_scale(b: float, d: float, x):
    x = np.asarray(x, dtype=float)
    if b == d:
        return 1.0 + b * x
    return (b * np.exp((b - d) * x) - d) / (b - d)


def _product_weights(mu: LifespanMeasure, x: np.ndarray):
    h = x[1] - x[0]
    A = np.diff(mu.tail_integral(x))
    B = np.diff(mu.tail_moment(x)) - x[:-1] * A
    return A - B / h, B / h


def _solve(mu: LifespanMeasure, n: int, x_max: float) -> np.ndarray:
    x = np.linspace(0.0, x_max, n + 1)
    wa, wb = _product_weights(mu, x)
    W = np.empty(n + 1)
    W[0] = 1.0
    diag = 1.0 - wa[0]
    for k in range(1, n + 1):
        s = np.dot(wa[1:k], W[k - 1 : 0 : -1]) + np.dot(wb[:k], W[k - 1 :: -1])
        W[k] = (1.0 + s) / diag
    return W


def _convolve(mu: LifespanMeasure, x: np.ndarray, W: np.ndarray) -> np.ndarray:
    """int_0^{x_k} W(x_k - v) tail(v) dv with W linear between nodes."""
    wa, wb = _product_weights(mu, x)
    out = np.zeros_like(W)
    for k in range(1, W.size):
        out[k] = np.dot(wa[:k], W[k:0:-1]) + np.dot(wb[:k], W[k - 1 :: -1])
    return out


@dataclass(frozen=True, eq=False)
class ScaleTable:
    """W on the uniform grid x = 0, h, ..., x_max."""

    mu: LifespanMeasure
    h: float
    x_max: float
    x: np.ndarray
    W: np.ndarray
    tilted: bool = False
    closed: bool = False

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        if np.any(xa > self.x_max * (1 + 1e-12)) or np.any(xa < 0):
            raise ScaleError(f"W evaluated outside [0, {self.x_max}]")
        if self.closed:
            out = exponential_scale(self.mu.b, self.mu.d, xa)
        else:
            out = np.interp(xa, self.x, self.W)
        return float(out) if out.ndim == 0 else out

    @property
    def W_inf(self) -> float:
        """Limit of W at infinity: 1/(1-m) if m < 1, else inf."""
        m = self.mu.m
        return 1.0 / (1.0 - m) if m < 1 else math.inf

    def residual(self) -> float:
        """Largest relative defect of the renewal equation.

        The convolution is evaluated at steps h and 2h and extrapolated, so
        the defect is measured at the even grid nodes.
        """
        n = self.x.size - 1
        fine = _convolve(self.mu, self.x, self.W)
        if n < 4:
            conv = fine
            idx = np.arange(n + 1)
        else:
            m2 = n - n % 2
            coarse = _convolve(self.mu, self.x[: m2 + 1 : 2], self.W[: m2 + 1 : 2])
            idx = np.arange(0, m2 + 1, 2)
            conv = fine[idx] + (fine[idx] - coarse) / 3.0
        return float(np.max(np.abs(conv - (self.W[idx] - 1.0)) / self.W[idx]))


def build_scale_table(
    mu: LifespanMeasure,
    x_max: float,
    h: float = 1e-3,
    tilted: bool = False,
    check: bool = True,
    method: str = "auto",
) -> ScaleTable:
    """Tabulate W (or W-tilde when ``tilted``) on [0, x_max].

    The step is adjusted down so that x_max is a grid node.  ``method`` is
    "auto" (closed form for exponential measures), "closed" or "volterra".
    """
    if method not in ("auto", "closed", "volterra"):
        raise ValueError(f"unknown method {method!r}")
    if not (x_max > 0 and h > 0):
        raise ValueError("x_max and h must be positive")
    if h > x_max / 100 * (1 + 1e-12):
        raise ScaleError(f"step {h} is coarser than x_max/100")
    target = mu.tilt() if tilted else mu
    n = int(math.ceil(x_max / h - 1e-9))
    x = np.linspace(0.0, x_max, n + 1)
    if method == "closed" and not isinstance(target, Exponential):
        raise ValueError("closed form only available for exponential measures")
    if isinstance(target, Exponential) and method != "volterra":
        W = exponential_scale(target.b, target.d, x)
        W[0] = 1.0
        return ScaleTable(target, x_max / n, x_max, x, W, tilted, closed=True)
    W1 = _solve(target, n, x_max)
    W2 = _solve(target, 2 * n, x_max)
    W = W2[::2] + (W2[::2] - W1) / 3.0
    W[0] = 1.0
    table = ScaleTable(target, x_max / n, x_max, x, W, tilted)
    if check:
        if np.any(np.diff(W) <= 0):
            raise ScaleError("scale function not increasing; refine the step")
        res = table.residual()
        if res > RESIDUAL_TOL:
            raise ScaleError(f"renewal-equation residual {res:.3g} exceeds {RESIDUAL_TOL}; refine the step")
    return table


def default_step(x_max: float) -> float:
    return min(1e-3, x_max / 100)


def exit_down_prob(table: ScaleTable, x: float, a: float) -> float:
    """P_x(hit 0 before entering (a, inf)) = W(a - x) / W(a)."""
    if a > table.x_max * (1 + 1e-12):
        raise ScaleError(f"a = {a} beyond the table range {table.x_max}")
    if not (0 <= x <= a):
        raise ValueError("need 0 <= x <= a")
    return table(a - x) / table(a)


def gamma_params(mu: LifespanMeasure, T: float, h: float | None = None) -> tuple[float, float]:
    """(1/W(T), 1/W-tilde(T))."""
    if isinstance(mu, Exponential):
        tilted = mu.tilt()
        return (1.0 / float(exponential_scale(mu.b, mu.d, T)), 1.0 / float(exponential_scale(tilted.b, tilted.d, T)))
    h = default_step(T) if h is None else h
    W = build_scale_table(mu, T, h)
    Wt = build_scale_table(mu, T, h, tilted=True) if mu.eta > 0 else W
    return 1.0 / W(T), 1.0 / Wt(T)


def hit_zero_prob(mu: LifespanMeasure, x: float) -> float:
    """P_x(hit 0 eventually) = exp(-eta x)."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    return math.exp(-mu.eta * x)


def return_to_zero_prob(mu: LifespanMeasure) -> float:
    """P_0(return to 0 after the first passage above 0) = min(1, m)."""
    return min(1.0, mu.m)


def subcritical_dual_geometric_param(mu: LifespanMeasure, T: float, h: float | None = None) -> float:
    """1 - (1 - 1/W(T)) / (1 - 1/W(inf)) for m < 1, with W(inf) = 1/(1-m)."""
    if mu.m >= 1:
        raise ValueError("only defined for subcritical measures (m < 1)")
    if isinstance(mu, Exponential):
        WT = float(exponential_scale(mu.b, mu.d, T))
    else:
        WT = build_scale_table(mu, T, default_step(T) if h is None else h)(T)
    return 1.0 - (1.0 - 1.0 / WT) / mu.m
