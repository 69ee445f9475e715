"""pathheat: a desk-scale numerical laboratory for the path-dependent heat
equation on continuous paths.

The package covers the four pillars the problem rests on: pathwise
(horizontal/vertical) derivatives with a numerically verified change-of-
variable formula along semimartingales; the forward-integral calculus that
makes cylinder functionals exact grid computations; a smooth gauge on the
path space with uniformly bounded derivatives, feeding a constructive
variational principle; and the Feynman-Kac Monte-Carlo solution with its
flow property and finite-dimensional cross-checks.
"""

from .errors import (ContractError, ConvergenceError, DomainError, InputError,
                     NumericError, ResolutionError, ToleranceError)
from .grids import (GridPath, PathPoint, SemimartingaleSpec, TimeGrid,
                    brownian_extension, extend_with_increments, path_distance,
                    read_path_csv, simulate_semimartingale, stop_path,
                    write_path_csv)
from .regularization import (BracketEstimate, IntegrandFn, forward_integral,
                             forward_integral_limit, mutual_bracket)
from .fourier import (FourierBasis, fejer_coefficient, fejer_mean,
                      fejer_smooth, terminal_ramp)
from .cylinders import (CylinderSpec, LiftedFunctional, PathwiseDerivs,
                        consistency_check, cylinder_approx,
                        cylinder_pathwise_derivs, eval_cylinder,
                        fd_pathwise_derivs, make_cylinder_lift)
from .quadrature import QuadratureConfig
from .gauge import (GaugeAnchor, GaugeDiagnostics, calibrate_alpha,
                    curvature_profile, floored_norm_profile,
                    horizontal_kernel, horizontal_smoothed_distance,
                    mean_gaussian_norm, normal_density, perturbation_sum,
                    smooth_gauge, vertical_smoothed_distance)
from .varprinciple import (SearchSpace, VPResult, smooth_variational_principle,
                           verify_gauge_axioms)
from .solver import (FiniteDimSolution, MCConfig, MCEstimate,
                     TerminalFunctional, build_terminal, candidate_solution,
                     finite_dim_solution, flow_residual, pde_residual,
                     running_max_exact_solution, viscosity_spotcheck)
from .ito import ItoReport, delayed_lift, ito_verify, with_fd_derivatives

__version__ = "0.1.0"
