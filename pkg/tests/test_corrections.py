import math

import numpy as np
import pytest

from layerforge import corrections, solver
from layerforge.grids import graded_half_grid, local_poly_derivative
from layerforge.quadrature import adaptive_gl

SQ2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def cubic_aux(cubic_terms):
    aux, _ = cubic_terms
    return aux


def small_grid(aux):
    return graded_half_grid(aux.kink.xi_max, 2000, 1e-3)


def jump_solve(aux, psi, jm, jp, grid=None):
    return corrections.solve_jump(
        aux.chi, psi, jm, jp, small_grid(aux) if grid is None else grid,
        chi_prime=aux.chi_prime, bs=aux.B_s, mu_minus=aux.kink.mu_minus,
        mu_plus=aux.kink.mu_plus)


class TestSolveJump:
    def test_zero_source_zero_jumps(self, cubic_aux):
        term = jump_solve(cubic_aux, lambda xi, side: 0.0 * xi, 0.0, 0.0)
        assert np.all(term.val_neg == 0.0)
        assert np.all(term.val_pos == 0.0)
        assert term.phi_value == 0.0

    def test_homogeneous_solution_is_the_weight(self, cubic_aux):
        term = jump_solve(cubic_aux, lambda xi, side: 0.0 * xi, 1.0, 0.0)
        chi = cubic_aux.chi(term.xi_neg)
        assert np.allclose(term.val_neg, chi / term.chi0, rtol=0, atol=1e-14)
        assert np.all(term.val_pos == 0.0)
        assert term.phi_value == pytest.approx(term.dchi0 / term.chi0,
                                               abs=1e-14)

    def test_equal_jumps_cancel_in_phi(self, cubic_aux):
        term = jump_solve(cubic_aux, lambda xi, side: 0.0 * xi, 0.7, 0.7)
        assert term.phi_value == pytest.approx(0.0, abs=1e-14)

    def test_sign_preservation(self, cubic_aux):
        def psi(xi, side):
            return cubic_aux.chi(xi) * (1.0 + xi * xi)

        term = jump_solve(cubic_aux, psi, 0.3, 0.1)
        assert np.all(term.val_neg >= 0.0)
        assert np.all(term.val_pos >= 0.0)

    def test_non_decaying_source_rejected(self, cubic_aux):
        with pytest.raises(corrections.NonDecayingSource):
            jump_solve(cubic_aux,
                       lambda xi, side: cubic_aux.chi(xi) * xi ** 8, 0.0, 0.0)
        # polynomial growth below the sixth power is admissible
        jump_solve(cubic_aux,
                   lambda xi, side: cubic_aux.chi(xi) * (1.0 + xi ** 4),
                   0.0, 0.0)

    def test_jump_data_exact_at_table_ends(self, cubic_terms):
        _, terms = cubic_terms
        v2 = terms["v2"]
        assert v2.val_neg[-1] == v2.jump_minus
        assert v2.val_pos[0] == v2.jump_plus


def _subsample(xi, gap=0.018):
    """Node indices spaced at least `gap` apart.

    Second differences amplify table-value roundoff by 1/h^2, so the
    cross-check stencil lives on a thinned copy of the graded table where
    truncation and roundoff balance near their joint minimum.
    """
    keep = [0]
    for i in range(1, xi.size):
        if xi[i] - xi[keep[-1]] >= gap:
            keep.append(i)
    return np.asarray(keep)


class TestGoverningEquation:
    @pytest.mark.parametrize("label", ["v1", "v2", "vstar", "z"])
    def test_residual_at_interior_nodes(self, cubic_terms, label):
        """Second differences of the tables replay the jump equation."""
        aux, terms = cubic_terms
        term = terms[label]
        for xi, val, side in ((term.xi_neg, term.val_neg, -1),
                              (term.xi_pos, term.val_pos, 1)):
            keep = _subsample(xi)
            xs, vs = xi[keep], val[keep]
            probes = np.arange(2, xs.size - 2, 29)
            psi = term.psi_fn(xs[probes], side)
            bs = aux.B_s(xs[probes])
            for j, i in enumerate(probes):
                d2 = local_poly_derivative(xs, vs, int(i), order=2)
                resid = abs(-d2 + bs[j] * vs[i] - psi[j])
                assert resid <= 1e-6 * (1.0 + abs(psi[j]))

    @pytest.mark.parametrize("label", ["v1", "v2", "vstar", "z"])
    def test_derivative_evaluator_consistent_with_tables(self, cubic_terms,
                                                         label):
        _, terms = cubic_terms
        term = terms[label]
        for xi, val in ((term.xi_neg, term.val_neg),
                        (term.xi_pos, term.val_pos)):
            i = xi.size // 3
            fd = local_poly_derivative(xi, val, i, order=1)
            side = -1 if xi[0] < 0 else 1
            assert term.derivative(xi[i], side=side) == pytest.approx(
                fd, rel=1e-6, abs=1e-8)


class TestBounds:
    def test_first_order_growth_bound(self, cubic_terms):
        """|v1| <= C (1 + xi^2) chi with a finite fitted constant."""
        aux, terms = cubic_terms
        v1 = terms["v1"]
        chi = aux.chi(v1.xi_pos)
        ratio = np.abs(v1.val_pos) / ((1.0 + v1.xi_pos ** 2) * chi)
        assert np.max(ratio) < 10.0

    def test_vstar_nonnegative(self, cubic_terms, wavy_terms):
        for _, terms in (cubic_terms, wavy_terms):
            vs = terms["vstar"]
            assert np.all(vs.val_neg >= 0.0)
            assert np.all(vs.val_pos >= 0.0)

    def test_p_sensitivity_of_layer_component(self, actx):
        """The shift derivative of the layer component is the weight."""
        spec, loc, kk = actx.pipeline("cubic")
        h = 1e-5
        up = corrections.make_auxiliary(spec, kk, loc, p=h)
        dn = corrections.make_auxiliary(spec, kk, loc, p=-h)
        xi = np.linspace(-8.0, 8.0, 41)
        for side in (-1, 1):
            fd = (up.v0(xi, side) - dn.v0(xi, side)) / (2 * h)
            chi = corrections.make_auxiliary(spec, kk, loc, p=0.0).chi(xi)
            assert np.max(np.abs(fd - chi)) <= 1e-6


class TestPhi:
    def test_phi_by_quadrature_matches_table_derivatives(self, cubic_terms,
                                                         wavy_terms):
        for _, terms in (cubic_terms, wavy_terms):
            for term in terms.values():
                gap = abs(corrections.phi_of(term)
                          - corrections.phi_from_tables(term))
                assert gap <= 1e-6

    def test_phi_v1_vanishes_for_symmetric_problem(self, cubic_terms):
        _, terms = cubic_terms
        assert abs(terms["v1"].phi_value) <= 1e-8

    def test_phi_v1_wavy_matches_direct_quadrature(self, wavy_terms, actx):
        """The first-order jump equals its moment-integral identity."""
        spec, loc, kk = actx.pipeline("cubic-wavy")
        aux, terms = wavy_terms
        t0 = loc.t0

        def integrand(xi):
            return (xi * spec.b_val(t0, aux.V0(xi), dx=1) * aux.chi(xi))

        moment = adaptive_gl(integrand, -kk.xi_max, kk.xi_max, tol=1e-12)
        chi0 = float(np.atleast_1d(aux.chi(np.array([0.0])))[0])
        expected = (moment / chi0
                    - (spec.phi(1, t0, order=1) - spec.phi(2, t0, order=1)))
        assert terms["v1"].phi_value == pytest.approx(expected, abs=1e-6)

    def test_phi_vstar_closed_form(self, cubic_terms):
        """Jump of the nonnegative shape: minus the sum of squared layer
        jumps over twice the anchor weight (equals -sqrt(2) on the cubic)."""
        aux, terms = cubic_terms
        vs = terms["vstar"]
        v0m = float(np.atleast_1d(aux.v0(0.0, -1))[0])
        v0p = float(np.atleast_1d(aux.v0(0.0, 1))[0])
        closed = -(v0m ** 2 + v0p ** 2) / (2.0 * vs.chi0)
        assert vs.phi_value == pytest.approx(closed, abs=1e-6)
        assert vs.phi_value == pytest.approx(-SQ2, abs=1e-6)

    def test_phi_z_vanishes(self, cubic_terms, wavy_terms):
        for _, terms in (cubic_terms, wavy_terms):
            assert abs(terms["z"].phi_value) <= 1e-8


class TestV2:
    def test_cubic_jumps_vanish(self, cubic_terms):
        _, terms = cubic_terms
        assert terms["v2"].jump_minus == 0.0
        assert terms["v2"].jump_plus == 0.0

    def test_decay_rate_within_tight_margin(self, cubic_terms, wavy_terms):
        from layerforge.verify import term_decay_rate
        for aux, terms in (cubic_terms, wavy_terms):
            rate = term_decay_rate(terms["v2"])
            assert rate >= aux.kink.gamma_bar - 0.05

    def test_wavy_jumps_cancel_smooth_correction(self, wavy_terms):
        aux, terms = wavy_terms
        v2 = terms["v2"]
        assert v2.jump_minus == pytest.approx(-aux.u2_side[0], abs=1e-14)
        assert v2.jump_plus == pytest.approx(-aux.u2_side[1], abs=1e-14)
        # one-sided smooth correction plus layer jump is continuous
        left = aux.u2_side[0] + v2.value(0.0, side=-1)
        right = aux.u2_side[1] + v2.value(0.0, side=1)
        assert abs(left - right) <= 1e-10


class TestMatching:
    def test_symmetry_kills_first_moment(self, cubic):
        _, loc, _ = cubic
        assert abs(loc.t1) <= 1e-8
        assert abs(loc.C_II) <= 1e-8

    def test_oracle_comparison_against_fd(self, cubic_terms, wavy_terms):
        for aux, terms in (cubic_terms, wavy_terms):
            for term in terms.values():
                (xn, fdn), (xp, fdp) = solver.solve_jump_fd_numerov(
                    aux.B_s, term.psi_fn, term.jump_minus, term.jump_plus)
                gap = max(np.max(np.abs(fdn - term.value(xn, side=-1))),
                          np.max(np.abs(fdp - term.value(xp, side=1))))
                assert gap <= 1e-6

    def test_three_point_oracle_agrees_coarsely(self, cubic_terms):
        """The plain nonuniform stencil corroborates at its own accuracy."""
        aux, terms = cubic_terms
        v1 = terms["v1"]
        g = graded_half_grid(40.0, 4000, 1e-3)
        fd_neg, fd_pos = solver.solve_jump_fd(aux.B_s, v1.psi_fn, 0.0, 0.0,
                                              -g[::-1], g)
        gap = max(np.max(np.abs(fd_neg - v1.value(-g[::-1], side=-1))),
                  np.max(np.abs(fd_pos - v1.value(g, side=1))))
        assert gap <= 1e-6
