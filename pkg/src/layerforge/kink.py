"""Zero-order interior-layer profile from the first integral.

The autonomous layer equation conserves (V')^2/2 - W(V), so the monotone
connecting profile satisfies dV/dxi = sqrt(2 W(V)) with W the running
integral of the reaction term at the layer point.  Integrating this first
integral from the anchor removes the boundary-condition-at-infinity
difficulty of a shooting method entirely; the exponential tails are
attached analytically once the profile is within `switch_eps` of a root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import expr as ex
from .grids import graded_half_grid
from .kernels import eval_program_array, integrate_kink
from .locator import LayerLocation
from .problem import ProblemSpec
from .quadrature import gl_fixed, gl_rule

#: largest admissible profile shift parameter
P_STAR = 0.1

#: switch to the linearized tail once the profile is this close to a root
SWITCH_EPS = 1e-8

#: per-step tolerance of the adaptive profile integration
RK_TOL = 1e-12

_N_PANELS = 64
_GL_ORDER = 16


class PotentialNegative(RuntimeError):
    """The potential dips below zero strictly between the outer roots."""


class AnchorOutOfRange(RuntimeError):
    """The middle root does not lie strictly between the outer roots."""


#: within this distance of a root the potential switches to its Taylor form
_TAYLOR_DIST = 1e-5


@dataclass(frozen=True)
class PotentialTable:
    """Panel-decomposed potential W(v) between the outer roots.

    Panel integrals are accumulated both bottom-up and top-down so W keeps
    full relative accuracy near both roots, where it vanishes quadratically.
    Within _TAYLOR_DIST of a root even that is not enough (the quadratic is
    below the quadrature roundoff), so the value switches to the quartic
    Taylor expansion at the root, whose coefficients are exact symbolic
    partials of the reaction term.
    """

    codes: np.ndarray
    args: np.ndarray
    t0: float
    edges: np.ndarray
    prefix: np.ndarray
    suffix: np.ndarray
    total: float
    glx: np.ndarray
    glw: np.ndarray
    taylor_lo: tuple   # (b_u, b_uu, b_uuu) at the lower root
    taylor_hi: tuple   # (b_u, b_uu, b_uuu) at the upper root

    def w(self, v):
        """W(v) for scalar or array v (numpy path, mirrors the kernel)."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        m = self.edges.size - 1
        j = np.clip(np.searchsorted(self.edges, v) - 1, 0, m - 1)
        vmid = 0.5 * (self.edges[0] + self.edges[-1])
        upper = v > vmid
        a = np.where(upper, self.edges[j + 1], self.edges[j])
        half = 0.5 * (np.where(upper, a - v, v - a))
        mid = 0.5 * (a + v)
        pts = mid[:, None] + half[:, None] * self.glx[None, :]
        bv = eval_program_array(self.codes, self.args, self.t0, pts)
        seg = half * (bv @ self.glw)
        out = np.where(upper,
                       self.total - (seg + self.suffix[j + 1]),
                       self.prefix[j] + seg)

        d_lo = v - self.edges[0]
        near_lo = np.abs(d_lo) < _TAYLOR_DIST
        if near_lo.any():
            c1, c2, c3 = self.taylor_lo
            d = d_lo[near_lo]
            out[near_lo] = d * d * (0.5 * c1 + d * (c2 / 6.0 + d * c3 / 24.0))
        d_hi = self.edges[-1] - v
        near_hi = np.abs(d_hi) < _TAYLOR_DIST
        if near_hi.any():
            # the structural zero of the potential at the upper root is
            # enforced exactly here; the located layer point leaves only an
            # O(1e-16) residual in `total`, far below every tolerance, and
            # keeping it would swamp the quadratic vanishing
            c1, c2, c3 = self.taylor_hi
            d = d_hi[near_hi]
            out[near_hi] = d * d * (0.5 * c1 - d * (c2 / 6.0 - d * c3 / 24.0))
        return out if out.size > 1 else float(out[0])


@dataclass(frozen=True)
class KinkProfile:
    """Tabulated monotone profile with analytic exponential tails."""

    spec: ProblemSpec = field(repr=False)
    potential: PotentialTable = field(repr=False)
    t0: float
    phi1_t0: float
    phi2_t0: float
    anchor: float          # profile value at argument 0 (the middle root)
    mu_minus: float        # tail rate toward the lower root
    mu_plus: float         # tail rate toward the upper root
    gamma_bar: float
    xi_max: float
    xi: np.ndarray = field(repr=False)
    v_table: np.ndarray = field(repr=False)
    chi_table: np.ndarray = field(repr=False)
    A_minus: float
    A_plus: float
    _v_interp: CubicHermiteSpline = field(repr=False)
    _chi_interp: CubicHermiteSpline = field(repr=False)

    @property
    def chi_at_zero(self) -> float:
        return float(self.chi_table[self.xi.size // 2])

    def value(self, s):
        """Profile value at unshifted argument s (scalar or array)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        left = s < -self.xi_max
        right = s > self.xi_max
        mid = ~(left | right)
        if mid.any():
            out[mid] = self._v_interp(s[mid])
        if left.any():
            out[left] = self.phi1_t0 + self.A_minus * np.exp(self.mu_minus * s[left])
        if right.any():
            out[right] = self.phi2_t0 - self.A_plus * np.exp(-self.mu_plus * s[right])
        return out if out.size != 1 else float(out[0])

    def slope(self, s):
        """Profile derivative (the positive layer weight) at argument s."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        left = s < -self.xi_max
        right = s > self.xi_max
        mid = ~(left | right)
        if mid.any():
            out[mid] = self._chi_interp(s[mid])
        if left.any():
            out[left] = (self.mu_minus * self.A_minus
                         * np.exp(self.mu_minus * s[left]))
        if right.any():
            out[right] = (self.mu_plus * self.A_plus
                          * np.exp(-self.mu_plus * s[right]))
        return out if out.size != 1 else float(out[0])

    def w(self, v):
        return self.potential.w(v)


def build_potential(spec: ProblemSpec, loc: LayerLocation) -> PotentialTable:
    codes, args = ex.compile_program(spec.b)
    t0 = loc.t0
    lo = float(spec.phi(1, t0))
    hi = float(spec.phi(2, t0))
    edges = np.linspace(lo, hi, _N_PANELS + 1)
    glx, glw = gl_rule(_GL_ORDER)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pts = mid[:, None] + half[:, None] * glx[None, :]
    bv = eval_program_array(codes, args, t0, pts)
    panels = half * (bv @ glw)
    prefix = np.concatenate([[0.0], np.cumsum(panels)])
    suffix = np.concatenate([np.cumsum(panels[::-1])[::-1], [0.0]])
    taylor_lo = tuple(float(spec.b_val(t0, lo, du=k)) for k in (1, 2, 3))
    taylor_hi = tuple(float(spec.b_val(t0, hi, du=k)) for k in (1, 2, 3))
    return PotentialTable(codes=codes, args=args, t0=t0, edges=edges,
                          prefix=prefix, suffix=suffix,
                          total=float(prefix[-1]), glx=glx, glw=glw,
                          taylor_lo=taylor_lo, taylor_hi=taylor_hi)


def _hermite_quintic(s_t, s_k, v_k, d1_k, d2_k):
    """Two-point quintic Hermite interpolation of step data onto s_t."""
    idx = np.clip(np.searchsorted(s_k, s_t) - 1, 0, s_k.size - 2)
    h = s_k[idx + 1] - s_k[idx]
    t = (s_t - s_k[idx]) / h
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5
    h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5
    h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5
    h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5
    h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5
    h21 = 0.5 * t3 - t4 + 0.5 * t5
    return (v_k[idx] * h00 + h * d1_k[idx] * h10 + h * h * d2_k[idx] * h20
            + v_k[idx + 1] * h01 + h * d1_k[idx + 1] * h11
            + h * h * d2_k[idx + 1] * h21)


def build_kink(spec: ProblemSpec, loc: LayerLocation,
               xi_max: float | None = None, n_per_side: int = 3000,
               spacing0: float = 1e-3, rk_tol: float = RK_TOL,
               switch_eps: float = SWITCH_EPS) -> KinkProfile:
    """Construct the profile table by integrating the first integral.

    Integrates dV/dxi = sqrt(2 W(V)) adaptively from the anchor in both
    directions, switches to the linearized exponential tail once within
    switch_eps of a root, and fills a graded table (clustered at 0) via
    quintic Hermite interpolation of the accepted steps, which carry exact
    first and second derivatives of the profile.
    """
    t0 = loc.t0
    phi1_t0 = float(spec.phi(1, t0))
    phi2_t0 = float(spec.phi(2, t0))
    anchor = float(spec.phi(0, t0))
    if not phi1_t0 < anchor < phi2_t0:
        raise AnchorOutOfRange(
            f"middle root {anchor:.15g} outside ({phi1_t0:.15g}, {phi2_t0:.15g})")

    pot = build_potential(spec, loc)

    # the potential must be strictly positive between the roots
    span = phi2_t0 - phi1_t0
    probe = np.linspace(phi1_t0 + 1e-4 * span, phi2_t0 - 1e-4 * span, 401)
    wvals = pot.w(probe)
    if np.min(wvals) <= 0.0:
        bad = probe[int(np.argmin(wvals))]
        raise PotentialNegative(
            f"potential is {np.min(wvals):.3e} at v={bad:.15g}; "
            "no monotone connecting profile exists")

    mu_minus = float(np.sqrt(spec.b_val(t0, phi1_t0, du=1)))
    mu_plus = float(np.sqrt(spec.b_val(t0, phi2_t0, du=1)))
    gamma_bar = min(mu_minus, mu_plus)
    if xi_max is None:
        xi_max = 20.0 / gamma_bar
    elif xi_max < 20.0 / gamma_bar:
        raise ValueError(f"xi_max must be at least 20/gamma_bar "
                         f"= {20.0 / gamma_bar:.6g}")

    taylor = np.array(pot.taylor_lo + pot.taylor_hi)
    sides = {}
    for direction, target, mu in ((1.0, phi2_t0, mu_plus),
                                  (-1.0, phi1_t0, mu_minus)):
        s, v, c, b, n, status = integrate_kink(
            pot.codes, pot.args, t0, pot.edges, pot.prefix, pot.suffix,
            pot.total, taylor, _TAYLOR_DIST, pot.glx, pot.glw, anchor,
            target, direction, switch_eps, 0.5 * mu * switch_eps, rk_tol,
            0.1, 200000)
        if status != 0:
            raise RuntimeError(f"profile integration failed with status {status}")
        sides[direction] = (s[:n], v[:n], c[:n], b[:n])

    half_grid = graded_half_grid(xi_max, n_per_side, spacing0)
    xi = np.concatenate([-half_grid[::-1], half_grid[1:]])

    # Tail amplitudes.  The integrated profile carries ~1e-12 absolute error,
    # which is a poor *relative* error on the root distance deep in the tail,
    # so the amplitude is read off at moderate depth (distance ~1e-4, where
    # the relative error is ~1e-8) and transported to infinity with the exact
    # first-integral correction  int_0^d* (1/chi(delta) - 1/(mu delta)) d delta.
    v_table = np.empty_like(xi)
    for direction in (1.0, -1.0):
        s_k, v_k, c_k, b_k = sides[direction]
        if direction > 0:
            mu = mu_plus
            dist = phi2_t0 - v_k
        else:
            mu = mu_minus
            dist = v_k - phi1_t0
        deep = np.nonzero(dist >= 1e-4)[0]
        idx = int(deep[-1])
        d_star, s_star = float(dist[idx]), float(s_k[idx])

        def correction_integrand(delta, _mu=mu, _dir=direction):
            vv = phi2_t0 - delta if _dir > 0 else phi1_t0 + delta
            chi_tilde = np.sqrt(np.maximum(2.0 * pot.w(vv), 0.0))
            return 1.0 / chi_tilde - 1.0 / (_mu * delta)

        g_inf = gl_fixed(correction_integrand, 0.0, d_star, n=32)
        amp = d_star * float(np.exp(mu * (s_star + g_inf)))
        # below this depth the pure exponential is accurate to ~1e-6 relative
        s_tail = float(np.log(amp / 1e-6) / mu)

        if direction > 0:
            nodes = xi >= 0.0
            s_t = xi[nodes]
        else:
            nodes = xi < 0.0
            s_t = -xi[nodes]
        inside = s_t <= min(s_tail, float(s_k[-1]))
        vals = np.empty_like(s_t)
        vals[inside] = _hermite_quintic(s_t[inside], s_k, v_k,
                                        direction * c_k, b_k)
        if direction > 0:
            vals[~inside] = phi2_t0 - amp * np.exp(-mu * s_t[~inside])
            A_plus = amp
        else:
            vals[~inside] = phi1_t0 + amp * np.exp(-mu * s_t[~inside])
            A_minus = amp
        v_table[nodes] = vals

    # slope table from the first integral itself: this ties the tabulated
    # weight to the potential exactly at every node
    chi_table = np.sqrt(np.maximum(2.0 * pot.w(v_table), 0.0))
    b_table = ex.evaluate(spec.b, t0, v_table)

    v_interp = CubicHermiteSpline(xi, v_table, chi_table)
    chi_interp = CubicHermiteSpline(xi, chi_table, b_table)

    return KinkProfile(spec=spec, potential=pot, t0=t0, phi1_t0=phi1_t0,
                       phi2_t0=phi2_t0, anchor=anchor, mu_minus=mu_minus,
                       mu_plus=mu_plus, gamma_bar=gamma_bar,
                       xi_max=float(xi_max), xi=xi, v_table=v_table,
                       chi_table=chi_table, A_minus=float(A_minus),
                       A_plus=float(A_plus), _v_interp=v_interp,
                       _chi_interp=chi_interp)


def _shift(loc: LayerLocation, p: float) -> float:
    if abs(p) > P_STAR:
        raise ValueError(f"|p| must not exceed {P_STAR}, got {p}")
    return loc.tbar1 - p


def eval_V0(kink: KinkProfile, loc: LayerLocation, xi, p: float):
    """Shifted profile value at layer coordinate xi."""
    return kink.value(np.asarray(xi, dtype=float) - _shift(loc, p))


def eval_chi(kink: KinkProfile, loc: LayerLocation, xi, p: float):
    """Shifted profile weight at layer coordinate xi."""
    return kink.slope(np.asarray(xi, dtype=float) - _shift(loc, p))


def chi_derivatives(kink: KinkProfile, loc: LayerLocation, xi, p: float,
                    order: int):
    """Derivatives of the shifted weight, all analytic.

    order 1: reaction at the profile; order 2: du-slope times the weight;
    order 3: second du-derivative times the weight squared plus du-slope
    times the reaction.  No numeric differentiation anywhere.
    """
    spec = kink.spec
    t0 = kink.t0
    v = eval_V0(kink, loc, xi, p)
    if order == 1:
        return spec.b_val(t0, v)
    if order == 2:
        return spec.b_val(t0, v, du=1) * eval_chi(kink, loc, xi, p)
    if order == 3:
        chi = eval_chi(kink, loc, xi, p)
        return (spec.b_val(t0, v, du=2) * chi * chi
                + spec.b_val(t0, v, du=1) * spec.b_val(t0, v))
    raise ValueError(f"order must be 1, 2 or 3, got {order}")
