//! Default tolerances shared across the crate.

/// Geometric tolerance of the closed-form set oracles.
pub const EPS_GEO: f64 = 1e-12;

/// Tolerance of the built-in nearest-point oracles of the perturbation map.
pub const EPS_F: f64 = 1e-10;

/// Acceptance radius for `normal_cone_membership`.
pub const TOL_NORMAL: f64 = 1e-9;

/// Feasibility tolerance for computed trajectories. Projections land on the
/// set up to rounding; this is the bound reported by the verification suite.
pub const TOL_FEASIBLE: f64 = 1e-9;

/// Violations of sampled inequalities below this magnitude are rounding.
pub const TOL_SAMPLED: f64 = 1e-9;

/// Solver-side allowance added to `EPS_GEO` in trajectory feasibility.
pub const EPS_STEP: f64 = 1e-12;

/// Constant in `slack(h) = SLACK_FACTOR * (1 + sup phi) * h`.
pub const SLACK_FACTOR: f64 = 10.0;

/// Safety factor applied to the factorial bound in the domination check.
pub const FACTORIAL_MARGIN: f64 = 1.1;

/// Constant in the tolerance floor `10 h (1 + sup gamma)` of the iteration.
pub const TOL_FLOOR_FACTOR: f64 = 10.0;

/// Default refinement of the quadrature grid relative to the solver grid.
pub const QUAD_REFINE: usize = 4;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 16;
