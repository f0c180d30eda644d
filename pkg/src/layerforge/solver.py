"""Independent finite-difference machinery.

A damped-Newton nonlinear solve on a layer-adapted mesh validates the
assembled expansion end to end, and a plain tridiagonal solve of the
two-branch jump problem provides the oracle the explicit integral formula
is tested against.  Everything here deliberately shares nothing with the
variation-of-parameters construction beyond the problem data itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import thomas_solve
from .locator import LayerLocation
from .problem import ProblemSpec


class NoConvergence(RuntimeError):
    def __init__(self, message: str, last_residual: float):
        super().__init__(f"{message} (last residual {last_residual:.3e})")
        self.last_residual = last_residual


class SingularJacobian(RuntimeError):
    pass


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray = field(repr=False)
    kind: str           # "uniform" or "layer-adapted"
    tau: float
    N: int
    center: float       # the layer point the transition region brackets

    def __post_init__(self):
        if not np.all(np.diff(self.nodes) > 0.0):
            raise ValueError("mesh nodes must be strictly increasing")


@dataclass(frozen=True)
class MeshSolution:
    mesh: Mesh = field(repr=False)
    values: np.ndarray = field(repr=False)
    iterations: int
    residual_norm: float
    damping: tuple


def transition_half_width(loc: LayerLocation, eps: float, N: int,
                          C_tau: float) -> float:
    """Mesh transition half-width, clamped away from the boundaries."""
    tau = (C_tau / loc.gamma_bar) * eps * np.log(N)
    return float(min(tau, min(loc.t0, 1.0 - loc.t0) / 2.0))


def build_mesh(loc: LayerLocation, eps: float, N: int, C_tau: float = 2.5,
               kind: str = "layer-adapted") -> Mesh:
    """Piecewise-uniform mesh with half the cells inside the layer region.

    The layer point is always a node.  The uniform kind ignores the
    transition width (but still records it for region bookkeeping).
    """
    if N % 2:
        raise ValueError("N must be even")
    if C_tau <= 2.0:
        raise ValueError("C_tau must exceed 2")
    tau = transition_half_width(loc, eps, N, C_tau)
    if kind == "uniform":
        return Mesh(nodes=np.linspace(0.0, 1.0, N + 1), kind=kind,
                    tau=tau, N=N, center=loc.t0)
    if kind != "layer-adapted":
        raise ValueError(f"unknown mesh kind {kind!r}")
    t0 = loc.t0
    n_in = N // 2
    n_in_left = n_in // 2
    n_in_right = n_in - n_in_left
    n_out = N - n_in
    n_out_left = n_out // 2
    n_out_right = n_out - n_out_left
    nodes = np.concatenate([
        np.linspace(0.0, t0 - tau, n_out_left + 1),
        np.linspace(t0 - tau, t0, n_in_left + 1)[1:],
        np.linspace(t0, t0 + tau, n_in_right + 1)[1:],
        np.linspace(t0 + tau, 1.0, n_out_right + 1)[1:],
    ])
    return Mesh(nodes=nodes, kind=kind, tau=tau, N=N, center=t0)


def _second_difference_weights(x: np.ndarray):
    """Three-point weights for u'' at interior nodes of a nonuniform mesh."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    wl = 2.0 / (hm * (hm + hp))
    wc = -2.0 / (hm * hp)
    wr = 2.0 / (hp * (hm + hp))
    return wl, wc, wr


def _reaction_weights(x: np.ndarray):
    """Per-node weights of the reaction average in the difference scheme.

    Where the three-node stencil is locally uniform the scheme uses the
    fourth-order compact (Numerov) average (1, 10, 1)/12 of the reaction;
    at the few mesh-transition nodes it falls back to the plain nodal value
    (a localized second-order defect that does not affect the global order).
    """
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    uniform = np.abs(hp - hm) <= 1e-12 * (hm + hp)
    al = np.where(uniform, 1.0 / 12.0, 0.0)
    ac = np.where(uniform, 10.0 / 12.0, 1.0)
    ar = np.where(uniform, 1.0 / 12.0, 0.0)
    return al, ac, ar


def discrete_residual(spec: ProblemSpec, mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Interior residual of the difference scheme at the given nodal values."""
    x = mesh.nodes
    wl, wc, wr = _second_difference_weights(x)
    al, ac, ar = _reaction_weights(x)
    d2 = wl * u[:-2] + wc * u[1:-1] + wr * u[2:]
    b_nodes = spec.b_val(x, u)
    react = al * b_nodes[:-2] + ac * b_nodes[1:-1] + ar * b_nodes[2:]
    return -spec.eps ** 2 * d2 + react


def newton_solve(spec: ProblemSpec, mesh: Mesh, initial,
                 max_iter: int = 50) -> MeshSolution:
    """Damped Newton iteration with tridiagonal linear solves.

    `initial` is an evaluator x -> u seeding the iteration; the boundary
    values are imposed exactly.  The step is halved until the residual norm
    decreases; running out of halvings or iterations raises NoConvergence,
    which is the expected outcome when seeding from the unstable root.
    """
    x = mesh.nodes
    u = np.asarray(initial(x), dtype=float).copy()
    u[0] = spec.g0
    u[-1] = spec.g1
    wl, wc, wr = _second_difference_weights(x)
    al, ac, ar = _reaction_weights(x)
    eps_sq = spec.eps ** 2
    damping: list = []

    res = discrete_residual(spec, mesh, u)
    norm = float(np.max(np.abs(res)))
    for iteration in range(1, max_iter + 1):
        tol = 1e-10 * (1.0 + float(np.max(np.abs(spec.b_val(x, u)))))
        if norm <= tol:
            return MeshSolution(mesh=mesh, values=u, iterations=iteration - 1,
                                residual_norm=norm, damping=tuple(damping))
        # boundary rows pin the update to zero; lower[0] / upper[-1] unused
        bu = spec.b_val(x, u, du=1)
        lower = np.concatenate([[0.0], -eps_sq * wl + al * bu[:-2], [0.0]])
        diag = np.concatenate([[1.0], -eps_sq * wc + ac * bu[1:-1], [1.0]])
        upper = np.concatenate([[0.0], -eps_sq * wr + ar * bu[2:], [0.0]])
        rhs = np.concatenate([[0.0], -res, [0.0]])
        ok, delta = thomas_solve(lower, diag, upper, rhs,
                                 1e-14 * float(np.max(np.abs(diag))))
        if not ok:
            raise SingularJacobian(
                f"tridiagonal pivot breakdown at iteration {iteration}")
        lam = 1.0
        while lam >= 2.0 ** -20:
            trial = u + lam * delta
            trial_res = discrete_residual(spec, mesh, trial)
            trial_norm = float(np.max(np.abs(trial_res)))
            if trial_norm < norm or trial_norm <= tol:
                break
            lam *= 0.5
        else:
            raise NoConvergence(
                f"line search stalled at iteration {iteration}", norm)
        damping.append(lam)
        u, res, norm = trial, trial_res, trial_norm

    tol = 1e-10 * (1.0 + float(np.max(np.abs(spec.b_val(x, u)))))
    if norm <= tol:
        return MeshSolution(mesh=mesh, values=u, iterations=max_iter,
                            residual_norm=norm, damping=tuple(damping))
    raise NoConvergence(f"no convergence in {max_iter} iterations", norm)


def compare(sol: MeshSolution, u_fn):
    """(max, layer-region, outer-region) nodal distances to an evaluator."""
    x = sol.mesh.nodes
    diff = np.abs(sol.values - np.asarray(u_fn(x), dtype=float))
    layer = np.abs(x - sol.mesh.center) <= sol.mesh.tau
    d_max = float(np.max(diff))
    d_layer = float(np.max(diff[layer])) if layer.any() else 0.0
    d_outer = float(np.max(diff[~layer])) if (~layer).any() else 0.0
    return d_max, d_layer, d_outer


def solve_jump_fd(coeff_fn, psi_fn, nu0_minus: float, nu0_plus: float,
                  xi_neg: np.ndarray, xi_pos: np.ndarray):
    """Direct tridiagonal solve of the two-branch jump problem.

    Solves -nu'' + c(xi) nu = psi on each branch with Dirichlet data
    (0 at the far end, the jump value at 0) using the standard nonuniform
    three-point stencil.  This is an oracle for the integral-formula path.
    """
    out = []
    for xi, side, left_bc, right_bc in (
            (np.asarray(xi_neg, dtype=float), -1, 0.0, nu0_minus),
            (np.asarray(xi_pos, dtype=float), 1, nu0_plus, 0.0)):
        wl, wc, wr = _second_difference_weights(xi)
        c = np.asarray(coeff_fn(xi[1:-1]), dtype=float)
        psi = np.asarray(psi_fn(xi[1:-1], side), dtype=float)
        lower = np.concatenate([[0.0], -wl, [0.0]])
        diag = np.concatenate([[1.0], -wc + c, [1.0]])
        upper = np.concatenate([[0.0], -wr, [0.0]])
        rhs = np.concatenate([[left_bc], psi, [right_bc]])
        ok, sol = thomas_solve(lower, diag, upper, rhs,
                               1e-14 * float(np.max(np.abs(diag))))
        if not ok:
            raise SingularJacobian("jump-problem oracle: pivot breakdown")
        out.append(sol)
    return out[0], out[1]


def solve_jump_fd_numerov(coeff_fn, psi_fn, nu0_minus: float, nu0_plus: float,
                          half_width: float = 40.0, n: int = 4000):
    """Fourth-order tridiagonal (Numerov) solve of the jump problem.

    Uniform branch meshes on [-half_width, 0] and [0, half_width] with n
    nodes each; Dirichlet data as in solve_jump_fd.  Returns the two branch
    grids with their solutions.
    """
    results = []
    for side, left_bc, right_bc in ((-1, 0.0, nu0_minus), (1, nu0_plus, 0.0)):
        if side < 0:
            xi = np.linspace(-half_width, 0.0, n)
        else:
            xi = np.linspace(0.0, half_width, n)
        h = xi[1] - xi[0]
        c = np.asarray(coeff_fn(xi), dtype=float)
        psi = np.asarray(psi_fn(xi, side), dtype=float)
        w = h * h / 12.0
        lower = np.concatenate([[0.0], 1.0 - w * c[:-2], [0.0]])
        diag = np.concatenate([[1.0], -2.0 - 10.0 * w * c[1:-1], [1.0]])
        upper = np.concatenate([[0.0], 1.0 - w * c[2:], [0.0]])
        rhs = np.concatenate([[left_bc],
                              -w * (psi[:-2] + 10.0 * psi[1:-1] + psi[2:]),
                              [right_bc]])
        ok, sol = thomas_solve(lower, diag, upper, rhs, 1e-300)
        if not ok:
            raise SingularJacobian("jump-problem oracle: pivot breakdown")
        results.append((xi, sol))
    return results[0], results[1]
