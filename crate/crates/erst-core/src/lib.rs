//! Reverse stress testing for elliptical factor models.
//!
//! The engine answers the three mutually inverse questions that make up a
//! reverse stress test, for linear and delta-gamma portfolios:
//!
//! * given a plausibility budget, which scenario hurts most
//!   ([`maxerst_linear`], [`maxerst_quadratic`]);
//! * given a P&L target, which scenario attains it most plausibly
//!   ([`most_plausible_scenario`], [`profit_scenario`]);
//! * given a scenario, how plausible is it, and how should it be rescaled to
//!   a chosen plausibility level ([`scenario_plausibility`], [`fit_scenario`]).
//!
//! Plausibility is squared Mahalanobis distance under an elliptical factor
//! model ([`EllipticalModel`]): chi-squared in the Gaussian case, a seeded
//! Monte Carlo law for Student-t tails.
//!
//! Around the solvers sit the tools a production run needs: covariance
//! estimation, definiteness repair and correlation stressing
//! ([`estimate_cov`], [`shrink_to_pd`], [`single_factor_stress`]), dimension
//! reduction by principal-component selection or cluster compression
//! ([`pca_fpc_select`], [`compress_portfolio`]), and independent closed-form
//! and brute-force oracles for auditing any solver answer
//! ([`pure_gamma_maxerst`], [`brute_force_maxerst`]).

mod elliptical;
mod error;
mod loss_driven;
mod maxerst;
mod oracle;
mod plausibility;
mod pnl_model;
mod reduction;
mod sigma_tools;
mod tolerances;
mod util;

pub use elliptical::{
    chi2_cdf, chi2_quantile, std_normal_cdf, std_normal_density, std_normal_quantile,
    EllipticalModel, Family, MahaLaw, McConfig, McTable, DEFAULT_MC_DRAWS, DEFAULT_MC_SEED,
};
pub use error::{ErstError, Result};
pub use loss_driven::{
    most_plausible_scenario, profit_scenario, secular_f, secular_f_hard, whiten, SecularCurve,
    WhitenedProblem,
};
pub use maxerst::{
    maxerst_linear, maxerst_quadratic, plausibility_budget, BudgetMode, ContinuumSet,
    Multiplicity, PlausibilityBudget, SolverOutcome,
};
pub use oracle::{
    brute_force_loss_scenario, brute_force_maxerst, pure_gamma_maxerst, pure_gamma_var,
    GridSearchMin, GridSearchTarget, PureGammaSpec,
};
pub use plausibility::{
    fit_scenario, mahalanobis_sq, scenario_plausibility, FitReport, Scenario,
};
pub use pnl_model::{
    es_linear_normal, var_linear_normal, var_monte_carlo, LinearPortfolio, McEstimate,
    QuadraticPortfolio,
};
pub use reduction::{
    cluster_betas, compress_portfolio, pca_fpc_select, per_factor_pnl_panel,
    reconstruct_scenario, ClusterMap, FpcSelection,
};
pub use sigma_tools::{
    block_stress, calibrate_theta, estimate_cov, is_positive_definite, shrink_to_pd,
    single_factor_stress, PdCheck, Provenance, SeriesPanel, Shrink, StressedCovariance,
    ThetaBlock, ThetaCalibration, ThetaSpec,
};
pub use tolerances::*;
