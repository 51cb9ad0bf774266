//! Shared numerical thresholds.

/// Feasibility checks on constructed allocations.
pub const FEASIBILITY: f64 = 1e-9;

/// Feasibility of iterative solver outputs.
pub const SOLVER_FEASIBILITY: f64 = 1e-6;

/// `R_i > R_i'` is taken to mean `R_i − R_i' > STRICT_GAP`.
pub const STRICT_GAP: f64 = 1e-12;

/// A water-filling power above this is part of the support.
pub const SUPPORT: f64 = 1e-12;

/// Time fractions within this of 0 or 1 count as whole.
pub const FRACTION_EPS: f64 = 1e-12;
