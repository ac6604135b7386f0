//! Centralized numeric tolerances.
//!
//! Every magic epsilon used by the engine lives here with a note on what it
//! guards, so that precision trade-offs are visible in one place instead of
//! being scattered through the solvers.

/// Symmetry validation: max |a_ij - a_ji| allowed, relative to the largest
/// entry magnitude (floored at 1).
pub const SYMMETRY_TOL: f64 = 1.0e-12;

/// Positive-definiteness threshold factor: a matrix counts as PD when its
/// smallest eigenvalue exceeds this factor times trace/m.
pub const PD_EIG_REL_TOL: f64 = 1.0e-12;

/// Auto-shrinkage target: smallest eigenvalue at least this factor times the
/// mean diagonal entry.
pub const SHRINK_TARGET_REL: f64 = 1.0e-8;

/// Relative width used to cluster eigenvalues with the bottom eigenvalue
/// (hard-case detection), scaled by the largest |eigenvalue|.
pub const EIGEN_CLUSTER_REL_TOL: f64 = 1.0e-10;

/// Gradient loadings (eigenbasis coordinates of the whitened linear term)
/// below this factor times max(1, largest |loading|) are snapped to exactly
/// zero, so near-hard cases take the stable branch.
pub const BETA_SNAP_REL_TOL: f64 = 1.0e-13;

/// Loss-target residual for the secular bisection: stop when
/// |f(mu) - l| <= tol * (1 + |l|).
pub const SECULAR_LOSS_TOL: f64 = 1.0e-12;

/// Budget-radius residual for the trust-region boundary solve: stop when
/// | ||s|| - sqrt(q) | <= tol * sqrt(q).
pub const RADIUS_RESIDUAL_REL: f64 = 1.0e-10;

/// Chi-squared quantile solver: CDF residual target.
pub const QUANTILE_RESIDUAL_TOL: f64 = 1.0e-12;

/// Self-consistency of reported solver outcomes: every reported scenario must
/// reproduce the reported P&L and Maha^2 within this relative tolerance.
pub const OUTCOME_SELF_TOL: f64 = 1.0e-8;

/// Two solver candidates whose Maha^2 agree within this relative tolerance
/// count as tied, and the union of their scenario sets is reported.
pub const CANDIDATE_TIE_REL: f64 = 1.0e-10;
