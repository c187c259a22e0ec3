//! Closed-form error evaluators, the one-memory lower bound and the numerical
//! optimizers used to check it.

mod bound;
mod error_prob;
mod fixed_dist;
mod one_memory;
mod pg;

pub use bound::{
    compute_t_star, compute_theta, lower_bound, lower_bound_value, t_star_residual,
    t_star_threshold, BoundResult,
};
pub use error_prob::{
    error_eq3, error_eq3_fn, p_reduced, p_reduced_gradient, stationary_law, Atom, InterferenceLaw,
    MAX_ENUMERATION_BITS,
};
pub use fixed_dist::{fixed_dist_objective, optimize_fixed_dist, AtomRole, FixedDistSolution};
pub use one_memory::{
    error_eq5, minimize_eq5, minimize_eq5_restricted, minimize_eq5_with, minimize_with_fixed_a0,
    one_memory_law, reduced_stationary_points, verify_zero_for_zero, MultiStart, OneMemProblem,
    OneMemSolution, StateRates, StationaryPoint, ZeroForZeroReport, DEFAULT_STATES,
};
pub use pg::PgOptions;
