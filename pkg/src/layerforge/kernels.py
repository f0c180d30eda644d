"""Hot numeric kernels with optional numba acceleration.

The loop-heavy kernels (postfix expression evaluation, the adaptive
Runge-Kutta kink integrator, and the Thomas tridiagonal solve) are written
once in nopython-compatible Python.  When numba is available they are
compiled with @njit; setting the environment variable LAYERFORGE_NUMBA=0
selects the pure-Python/numpy path instead (same source, no compilation).
benchmarks/bench_kernels.py times one path against the other.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("LAYERFORGE_NUMBA", "auto").strip().lower()
if _FLAG in ("0", "false", "off", "no"):
    HAS_NUMBA = False
    USE_NUMBA = False
else:
    try:
        import numba

        HAS_NUMBA = True
        USE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAS_NUMBA = False
        USE_NUMBA = False
        if _FLAG in ("1", "true", "on", "yes"):
            raise RuntimeError("LAYERFORGE_NUMBA=1 but numba is not importable")


# ---------------------------------------------------------------------------
# Postfix program evaluation (opcodes defined in expr.compile_program)


def _eval_program_impl(codes, args, x, u, stack):
    sp = 0
    for i in range(codes.shape[0]):
        op = codes[i]
        if op == 0:
            stack[sp] = args[i]
            sp += 1
        elif op == 1:
            stack[sp] = x
            sp += 1
        elif op == 2:
            stack[sp] = u
            sp += 1
        elif op == 3:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] + stack[sp]
        elif op == 4:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] - stack[sp]
        elif op == 5:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] * stack[sp]
        elif op == 6:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] / stack[sp]
        elif op == 7:
            stack[sp - 1] = -stack[sp - 1]
        elif op == 8:
            stack[sp - 1] = stack[sp - 1] ** int(args[i])
        elif op == 9:
            stack[sp - 1] = math.sin(stack[sp - 1])
        elif op == 10:
            stack[sp - 1] = math.cos(stack[sp - 1])
        elif op == 11:
            stack[sp - 1] = math.exp(stack[sp - 1])
        elif op == 12:
            stack[sp - 1] = math.log(stack[sp - 1])
        elif op == 13:
            stack[sp - 1] = math.tanh(stack[sp - 1])
        else:
            stack[sp - 1] = math.sqrt(stack[sp - 1])
    return stack[0]


def eval_program_array(codes, args, x, u):
    """Vectorized interpreter for grid work; plain numpy on both paths."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    shape = np.broadcast_shapes(x.shape, u.shape)
    stack = []
    for i in range(codes.shape[0]):
        op = codes[i]
        if op == 0:
            stack.append(np.full(shape, args[i]))
        elif op == 1:
            stack.append(np.broadcast_to(x, shape).astype(float))
        elif op == 2:
            stack.append(np.broadcast_to(u, shape).astype(float))
        elif op == 7:
            stack[-1] = -stack[-1]
        elif op == 8:
            stack[-1] = stack[-1] ** int(args[i])
        elif op in (3, 4, 5, 6):
            b = stack.pop()
            a = stack.pop()
            if op == 3:
                stack.append(a + b)
            elif op == 4:
                stack.append(a - b)
            elif op == 5:
                stack.append(a * b)
            else:
                stack.append(a / b)
        else:
            fn = {9: np.sin, 10: np.cos, 11: np.exp, 12: np.log,
                  13: np.tanh, 14: np.sqrt}[int(op)]
            stack[-1] = fn(stack[-1])
    return stack[0]


# ---------------------------------------------------------------------------
# Two-sided potential evaluation from precomputed panel integrals.
#
# The potential integrates the reaction term at the layer point from the
# lower reduced root.  Panels cover [root_lo, root_hi]; prefix[j] sums the
# panels below edge j, suffix[j] sums panels from edge j upward (accumulated
# top-down so the upper tail keeps full relative accuracy), and `total` is
# the whole integral (zero up to the layer-location residual).  Values above
# the interval midpoint are assembled from the top so the potential stays
# relatively accurate where it vanishes quadratically.  Within `taylor_dist`
# of either root the value switches to the quartic Taylor expansion with the
# exact derivative coefficients `taylor` = (c1-, c2-, c3-, c1+, c2+, c3+);
# the structural zero at the upper root is enforced exactly there, since the
# located layer point leaves only an O(1e-16) residual in `total` that would
# otherwise swamp the quadratic vanishing.


def _potential_impl(codes, args, t0, edges, prefix, suffix, total,
                    taylor, taylor_dist, glx, glw, v, stack):
    m = edges.shape[0] - 1
    d_lo = v - edges[0]
    if abs(d_lo) < taylor_dist:
        return d_lo * d_lo * (0.5 * taylor[0]
                              + d_lo * (taylor[1] / 6.0 + d_lo * taylor[2] / 24.0))
    d_hi = edges[m] - v
    if abs(d_hi) < taylor_dist:
        return d_hi * d_hi * (0.5 * taylor[3]
                              - d_hi * (taylor[4] / 6.0 - d_hi * taylor[5] / 24.0))
    j = int(np.searchsorted(edges, v)) - 1
    if j < 0:
        j = 0
    if j > m - 1:
        j = m - 1
    vmid = 0.5 * (edges[0] + edges[m])
    if v <= vmid:
        a = edges[j]
        acc = 0.0
        half = 0.5 * (v - a)
        mid = 0.5 * (v + a)
        for k in range(glx.shape[0]):
            acc += glw[k] * _eval_program_impl(codes, args, t0,
                                               mid + half * glx[k], stack)
        return prefix[j] + half * acc
    a = edges[j + 1]
    acc = 0.0
    half = 0.5 * (a - v)
    mid = 0.5 * (a + v)
    for k in range(glx.shape[0]):
        acc += glw[k] * _eval_program_impl(codes, args, t0,
                                           mid + half * glx[k], stack)
    return total - (half * acc + suffix[j + 1])


# ---------------------------------------------------------------------------
# Adaptive Dormand-Prince 5(4) integration of dV/ds = dir * sqrt(2 W(V)).
#
# Integrates away from the anchor in the rescaled coordinate s = |xi| until
# V comes within switch_eps of the approached root (or the slope falls
# below chi_floor, which by the tail linearization means the same thing up
# to quadrature noise in the potential), recording every accepted step
# together with the slope and the reaction value (consumed later by quintic
# Hermite interpolation onto the table grid).
# Status: 0 ok, 1 step limit hit, 2 step size underflow.


def _integrate_kink_impl(codes, args, t0, edges, prefix, suffix, total,
                         taylor, taylor_dist, glx, glw, anchor, target,
                         direction, switch_eps, chi_floor, tol, h_max,
                         max_steps):
    s_out = np.empty(max_steps)
    v_out = np.empty(max_steps)
    c_out = np.empty(max_steps)
    b_out = np.empty(max_steps)
    stack = np.empty(64)

    s = 0.0
    v = anchor
    w0 = _potential_impl(codes, args, t0, edges, prefix, suffix, total,
                         taylor, taylor_dist, glx, glw, v, stack)
    if w0 < 0.0:
        w0 = 0.0
    chi = math.sqrt(2.0 * w0)
    s_out[0] = 0.0
    v_out[0] = v
    c_out[0] = chi
    b_out[0] = _eval_program_impl(codes, args, t0, v, stack)
    count = 1

    h = 1e-3
    status = 0
    while True:
        if abs(v - target) < switch_eps or chi <= chi_floor:
            break
        if count >= max_steps:
            status = 1
            break
        if h > h_max:
            h = h_max

        k1 = direction * chi
        v2 = v + h * (0.2 * k1)
        w = _potential_impl(codes, args, t0, edges, prefix, suffix, total,
                            taylor, taylor_dist, glx, glw, v2, stack)
        k2 = direction * math.sqrt(2.0 * w) if w > 0.0 else 0.0
        v3 = v + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2)
        w = _potential_impl(codes, args, t0, edges, prefix, suffix, total,
                            taylor, taylor_dist, glx, glw, v3, stack)
        k3 = direction * math.sqrt(2.0 * w) if w > 0.0 else 0.0
        v4 = v + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3)
        w = _potential_impl(codes, args, t0, edges, prefix, suffix, total,
                            taylor, taylor_dist, glx, glw, v4, stack)
        k4 = direction * math.sqrt(2.0 * w) if w > 0.0 else 0.0
        v5 = v + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2
                      + 64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4)
        w = _potential_impl(codes, args, t0, edges, prefix, suffix, total,
                            taylor, taylor_dist, glx, glw, v5, stack)
        k5 = direction * math.sqrt(2.0 * w) if w > 0.0 else 0.0
        v6 = v + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2
                      + 46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4
                      - 5103.0 / 18656.0 * k5)
        w = _potential_impl(codes, args, t0, edges, prefix, suffix, total,
                            taylor, taylor_dist, glx, glw, v6, stack)
        k6 = direction * math.sqrt(2.0 * w) if w > 0.0 else 0.0
        v_new = v + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3
                         + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5
                         + 11.0 / 84.0 * k6)
        w = _potential_impl(codes, args, t0, edges, prefix, suffix, total,
                            taylor, taylor_dist, glx, glw, v_new, stack)
        k7 = direction * math.sqrt(2.0 * w) if w > 0.0 else 0.0
        v_low = v + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3
                         + 393.0 / 640.0 * k4 - 92097.0 / 339200.0 * k5
                         + 187.0 / 2100.0 * k6 + 1.0 / 40.0 * k7)

        err = abs(v_new - v_low) / (tol + tol * abs(v_new))
        if err <= 1.0:
            s += h
            v = v_new
            chi = abs(k7)
            s_out[count] = s
            v_out[count] = v
            c_out[count] = chi
            b_out[count] = _eval_program_impl(codes, args, t0, v, stack)
            count += 1
        if err > 1e-12:
            factor = 0.9 * err ** (-0.2)
            if factor < 0.2:
                factor = 0.2
            elif factor > 5.0:
                factor = 5.0
            h *= factor
        else:
            h *= 5.0
        if h < 1e-14:
            status = 2
            break
    return s_out, v_out, c_out, b_out, count, status


def _thomas_impl(lower, diag, upper, rhs, pivot_tol):
    """Thomas solve of a tridiagonal system; returns (ok, x).

    lower[0] and upper[-1] are ignored.  Fails when a forward-elimination
    pivot falls below pivot_tol in magnitude.
    """
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    x = np.empty(n)
    piv = diag[0]
    if abs(piv) < pivot_tol:
        return False, x
    cp[0] = upper[0] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i] * cp[i - 1]
        if abs(piv) < pivot_tol:
            return False, x
        cp[i] = upper[i] / piv
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / piv
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return True, x


# ---------------------------------------------------------------------------
# Path selection.  The downstream kernels call their callees through module
# globals, so in the numba path those globals are rebound to the compiled
# dispatchers before the callers are (lazily) compiled.

if USE_NUMBA:
    _jit = numba.njit(cache=True)
    _eval_program_py = _eval_program_impl
    _eval_program_impl = _jit(_eval_program_impl)
    _potential_py = _potential_impl
    _potential_impl = _jit(_potential_impl)
    integrate_kink = _jit(_integrate_kink_impl)
    thomas_solve = _jit(_thomas_impl)
else:
    integrate_kink = _integrate_kink_impl
    thomas_solve = _thomas_impl


def eval_program_scalar(codes, args, x: float, u: float) -> float:
    """Evaluate a compiled program at a scalar point."""
    return float(_eval_program_impl(codes, args, float(x), float(u),
                                    np.empty(64)))


def potential_scalar(codes, args, t0, edges, prefix, suffix, total,
                     taylor, taylor_dist, glx, glw, v: float) -> float:
    """Evaluate the panel-based potential at a scalar point."""
    return float(_potential_impl(codes, args, t0, edges, prefix, suffix,
                                 total, taylor, taylor_dist, glx, glw,
                                 float(v), np.empty(64)))
