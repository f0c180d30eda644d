"""layerforge: interior-layer asymptotics for bistable reaction-diffusion
two-point boundary value problems.

Builds the second-order matched expansion of the solution that switches
between the stable reduced roots across an interior layer, the signed
perturbations used for solution bracketing, and the numerical verification
harness (residual orders, derivative-jump sweeps, decay fits, and an
independent finite-difference oracle).
"""

from .problem import (AssumptionReport, ProblemSpec, builtin_problem,
                      check_assumptions, load_problem, resolve_problem)
from .locator import (DegenerateRoot, LayerLocation, NoSignChange,
                      WrongOrientation, integral_I, locate_t0)
from .kink import (AnchorOutOfRange, KinkProfile, PotentialNegative,
                   build_kink, chi_derivatives, eval_V0, eval_chi)
from .corrections import (CorrectionTerm, LayerAuxiliary, NonDecayingSource,
                          build_v1, build_v2, build_vstar, build_z,
                          compute_matching, make_auxiliary, phi_of,
                          solve_jump)
from .expansion import (Expansion, PerturbedExpansion, build_expansion,
                        build_perturbed, estimate_C0)
from .solver import (Mesh, MeshSolution, NoConvergence, SingularJacobian,
                     build_mesh, compare, newton_solve, solve_jump_fd,
                     solve_jump_fd_numerov)
from .verify import (AllZeros, SweepReport, decay_fit, fbeta_check,
                     monotonicity_check, residual_sweep, solver_convergence,
                     truncation_check)

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport", "ProblemSpec", "builtin_problem", "check_assumptions",
    "load_problem", "resolve_problem",
    "DegenerateRoot", "LayerLocation", "NoSignChange", "WrongOrientation",
    "integral_I", "locate_t0",
    "AnchorOutOfRange", "KinkProfile", "PotentialNegative", "build_kink",
    "chi_derivatives", "eval_V0", "eval_chi",
    "CorrectionTerm", "LayerAuxiliary", "NonDecayingSource", "build_v1",
    "build_v2", "build_vstar", "build_z", "compute_matching",
    "make_auxiliary", "phi_of", "solve_jump",
    "Expansion", "PerturbedExpansion", "build_expansion", "build_perturbed",
    "estimate_C0",
    "Mesh", "MeshSolution", "NoConvergence", "SingularJacobian", "build_mesh",
    "compare", "newton_solve", "solve_jump_fd", "solve_jump_fd_numerov",
    "AllZeros", "SweepReport", "decay_fit", "fbeta_check",
    "monotonicity_check", "residual_sweep", "solver_convergence",
    "truncation_check",
    "__version__",
]
