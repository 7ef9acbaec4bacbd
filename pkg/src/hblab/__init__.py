"""Numerical laboratory for Hamiltonian-based quantum search with low-rank oracles."""

from .operators import (
    HermitianOperator, SpectralData, SearchInstance, Overlaps,
    build_grover_final, build_uniform_initial, build_rank_one_initial,
    build_general_lowrank_final, spectral_decompose, assemble_instance,
    interpolate, grover_instance, instance_from_dict, load_instance,
)
from .schedules import (
    Schedule, RobustnessProfile, linear_schedule, double_step_schedule,
    smooth_bump_schedule, table_schedule, custom_schedule, robustness_profile,
    verify_concavity_relation, schedule_from_dict, load_schedule,
)
from .evolution import (
    ReducedBasis, EvolutionResult, build_reduced_basis, evolve_double_step,
    evolve_full, evolve_reduced, evolve, survival_amplitude, propagate,
)
from .counting import (
    CountingPlan, CountingResult, make_plan, poisson_weights, kernel_selectivity,
    estimate_overlap, offset_sensitivity,
)
from .spectral import (
    GapProfile, KDecomposition, KreinReport, gap_profile, krein_K, k_hat, decompose_K,
    crossing_times, krein_eigenvalues, certify_gap_bound, t_to_s, s_to_t,
)
from .bounds import (
    BoundNotApplicable, BoundReport, RobustBoundInputs, tau_lower_bound, tau_upper_time,
    tau_robust_bound, robust_inputs, bound_report, verify_thm1, verify_thm5,
    first_success_tau, threshold_scaling, adiabatic_error_scan, repetition_count,
)

__version__ = "0.1.0"
