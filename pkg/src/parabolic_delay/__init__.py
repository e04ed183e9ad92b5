"""Linear parabolic equations with a time-dependent delay on boxes in 1-D and 2-D.

Coefficients are described by small descriptor objects, discretized with a
conservative finite-difference operator, and advanced by an implicit
evolution family.  Delay problems are solved as mild (variation of
constants) solutions, either by marching or by chunked Picard iteration.
"""
from .analysis import (ExperimentReport, coefficient_convergence_experiment,
                       delay_convergence_experiment, delta, delta_profile, estimate_constants,
                       global_bound, gronwall_check, gronwall_constants, ic_continuity_experiment,
                       joint_convergence_experiment, picard_march_gap, stability_constant,
                       sup_difference)
from .coefficients import (CoefficientSet, Constant, ConstantDelay, PiecewiseConstantDelay,
                           PiecewiseConstantTime, SampledDelay, SampledGrid, ShiftedDelay,
                           SinusoidDelay, SinusoidTime, SumField, adjoint_coefficients,
                           coefficient_set, ellipticity_constant, flatten, oscillatory_family,
                           phi, sup_bound_K)
from .delay_solver import (HistorySegment, Trajectory, evaluate_delayed, glue, mild_solve_march,
                           mild_solve_picard, multiply_c1, picard_theta0, write_trajectory_csv)
from .discretization import (SpaceGrid, assemble_operator, discrete_norm, operator_pq_norm,
                             write_matrix_csv)
from .errors import CausalityError, DomainError, InvariantViolation, PreconditionError
from .propagator import (Propagator, PropagatorOptions, adjoint_propagate, all_pairs,
                         estimate_M_gamma, kernels_at, propagate, propagate_kernel,
                         smoothing_exponent_fit, verify_cocycle)

__version__ = "0.1.0"
