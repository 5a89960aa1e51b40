"""Spectral solver library for 1D periodic quasilinear wave equations.

One-stage explicit trigonometric integrators in time, Fourier Galerkin in
space, plus a convergence-study harness and CLI.
"""

from trigwave.harness import (
    ConvergenceReport,
    RunConfig,
    RunRecord,
    convergence_study,
    energy_identity_experiment,
    error_vs_reference,
    fit_order,
    reference_solution,
    run_trajectory,
    spatial_convergence_study,
)
from trigwave.integrators import (
    AssumptionReport,
    BlowUpError,
    MethodCoefficients,
    builtin_method,
    check_assumption1,
    compose_trajectory_via_splitting,
    linear_flow,
    splitting_linear_half,
    splitting_nonlinear,
    step,
)
from trigwave.problem import (
    NonlinearityWorkspace,
    ProblemSpec,
    builtin_problem,
    discretize_initial_data,
    eval_fhatK,
)
from trigwave.spectral import (
    OperatorSpectrum,
    PairState,
    SpectralField,
    apply_filter,
    differentiate,
    interpolate,
    is_hermitian,
    mode_numbers,
    mode_weights,
    pair_norm,
    project,
    random_field,
    random_pair_state,
    scalar_product,
    sinc,
    sobolev_norm,
    synthesize,
)

__version__ = "0.1.0"
