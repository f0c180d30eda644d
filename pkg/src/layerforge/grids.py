"""Graded grids for layer-scale functions and local polynomial derivatives."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq


def graded_half_grid(xi_max: float, n: int, spacing0: float = 1e-3) -> np.ndarray:
    """Graded nodes 0 = xi_0 < ... < xi_n = xi_max clustered at 0.

    Nodes follow xi_j = xi_max * (e^{q j/n} - 1) / (e^q - 1) with q chosen so
    the first spacing is <= spacing0.  Falls back to uniform when the uniform
    spacing already satisfies the target.
    """
    if n < 2:
        raise ValueError("need at least 2 intervals")
    if xi_max / n <= spacing0:
        return np.linspace(0.0, xi_max, n + 1)

    # first spacing as a function of q; decreasing in q
    def gap(q):
        return xi_max * np.expm1(q / n) / np.expm1(q) - spacing0

    q = brentq(gap, 1e-8, 200.0, xtol=1e-10)
    j = np.arange(n + 1, dtype=float)
    xi = xi_max * np.expm1(q * j / n) / np.expm1(q)
    xi[0] = 0.0
    xi[-1] = xi_max
    return xi


def graded_symmetric_grid(xi_max: float, n_per_side: int,
                          spacing0: float = 1e-3) -> np.ndarray:
    """Symmetric graded grid on [-xi_max, xi_max] including 0 once."""
    half = graded_half_grid(xi_max, n_per_side, spacing0)
    return np.concatenate([-half[::-1], half[1:]])


def graded_x_grid(t0: float, eps: float, n: int, xi_max: float = 30.0) -> np.ndarray:
    """Points of (0,1) clustered around t0 on the layer scale.

    Half the points map a graded xi-grid through x = t0 + eps*xi (clipped to
    the domain); the rest cover (0,1) uniformly.  t0 itself is excluded.
    """
    n_layer = n // 2
    half = graded_half_grid(min(xi_max, 0.45 / eps), max(n_layer // 2, 8), 1e-2)[1:]
    layer = np.concatenate([t0 - eps * half[::-1], t0 + eps * half])
    outer = np.linspace(0.0, 1.0, n - layer.size + 2)[1:-1]
    x = np.unique(np.concatenate([layer, outer]))
    x = x[(x > 0.0) & (x < 1.0) & (x != t0)]
    return x


def local_poly_derivative(x: np.ndarray, y: np.ndarray, i: int,
                          order: int, width: int = 5) -> float:
    """Derivative of given order at node i from a local polynomial fit.

    Fits a degree-(width-1) interpolating polynomial through `width` nodes
    centred (as far as possible) on node i and differentiates it there.
    """
    n = x.size
    lo = max(0, min(i - width // 2, n - width))
    xs = x[lo:lo + width] - x[i]
    ys = y[lo:lo + width]
    coeff = np.polynomial.polynomial.polyfit(xs, ys, width - 1)
    fact = 1.0
    for k in range(2, order + 1):
        fact *= k
    return float(coeff[order] * fact)


def one_sided_derivative(x: np.ndarray, y: np.ndarray, at_start: bool,
                         width: int = 6) -> float:
    """First derivative at an endpoint of a table by local polynomial fit."""
    idx = 0 if at_start else x.size - 1
    return local_poly_derivative(x, y, idx, 1, width)
