"""Desk-scale laboratory for conservative jump dynamics with repulsion.

Three coordinated pieces: an exact kinetic Monte Carlo simulator of the
particle process (thinning against the jump kernel), a truncated
correlation-function hierarchy on a periodic lattice, and the
scale-of-Banach-spaces horizon arithmetic with its global continuation
ladder.  A small exact master-equation solver cross-validates both
dynamical routes.
"""

from .backend import backend_name
from .geometry import Configuration, TorusDomain, min_image
from .kernels import (EXPONENTIAL, GAUSSIAN, TOP_HAT, KernelSpec,
                      RadialKernel, jump_rate_c, total_energy,
                      zero_potential)
from .functionals import (FiniteSupportFunction, QuadratureGrid, e_product,
                          k_transform, lp_integral_truncated)
from .lattice import LatticeGrid, LatticeKernels
from .hierarchy import (ClosureRule, CorrelationField, apply_lbar,
                        apply_ldelta, apply_qy, free_solution, integrate_rk4,
                        poisson_field, rk4_step, scale_norm,
                        taylor_semigroup_step)
from .scheduler import (Certificate, ScaleLadder, ScaleParams, build_ladder,
                        delta_theta, horizon_T, horizon_Tbar, lambert_w0,
                        norm_certificate, tau_theta, theta_of_t)
from .kmc import (ReplicaResult, SimState, detailed_balance_probe,
                  poisson_configuration, run, run_lattice, run_replicas,
                  step)
from .master import (MasterState, Sector, correlation_moments,
                     gibbs_distribution, master_equation_rhs, propagate,
                     stationary_state)
from .estimators import (MomentEstimate, PairHistogram, density_estimate,
                         pair_correlation_estimate,
                         sub_poissonian_check_estimates,
                         sub_poissonian_check_field,
                         variance_positivity_check)

__version__ = "0.1.0"
