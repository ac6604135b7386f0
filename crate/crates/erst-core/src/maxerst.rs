//! Budget-driven reverse stress testing: for a plausibility budget q, find
//! the worst P&L attainable on the ellipsoid Maha^2(S) <= q.
//!
//! The budget is expressed in squared Mahalanobis units and usually comes
//! from one of two places: the model-implied quantile of the Maha^2 law at a
//! confidence level (so the ellipsoid collects a fixed probability mass), or
//! the Maha^2 of a chosen reference scenario (so the search is exactly as
//! bold as that scenario and no bolder). Both are resolved once by
//! [`plausibility_budget`] and carried as a [`PlausibilityBudget`].
//!
//! For linear portfolios the optimum has a closed form: the worst loss is
//! `-sqrt(q) * sqrt(omega^T Sigma omega)` at the scenario
//! `-sqrt(q) * Sigma omega / sqrt(omega^T Sigma omega)`, which makes the
//! worst loss exactly proportional to Gaussian VaR whatever the portfolio.
//! Quadratic portfolios are handled as a trust-region subproblem in the
//! whitened coordinates of [`crate::loss_driven`]: minimize
//! `1/2 y^T diag(lambda) y + beta^T y` over the ball `||y|| <= sqrt(q)`,
//! solved by a safeguarded scalar iteration on the Lagrange shift, with the
//! interior and hard cases handled explicitly.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::elliptical::EllipticalModel;
use crate::error::{ErstError, Result};
use crate::loss_driven::{outcome_from_eigen, whiten, WhitenedProblem};
use crate::plausibility::Scenario;
use crate::pnl_model::{LinearPortfolio, QuadraticPortfolio};
use crate::tolerances::RADIUS_RESIDUAL_REL;
use crate::util::{check_finite_matrix, check_symmetric, min_symmetric_eigenvalue};

/// How a plausibility budget was specified.
#[derive(Debug, Clone, PartialEq)]
pub enum BudgetMode {
    /// Budget = quantile of the model's Maha^2 law at this confidence level.
    Quantile(f64),
    /// Budget = Maha^2 of this reference scenario under the model, so the
    /// search is exactly as implausible as the reference and no more.
    Historical(DVector<f64>),
}

/// A resolved plausibility budget: the mode it came from and the squared
/// Mahalanobis radius q it resolved to.
#[derive(Debug, Clone, PartialEq)]
pub struct PlausibilityBudget {
    mode: BudgetMode,
    q: f64,
}

impl PlausibilityBudget {
    /// How the budget was specified.
    pub fn mode(&self) -> &BudgetMode {
        &self.mode
    }

    /// The squared Mahalanobis radius of the search ellipsoid.
    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Resolve a budget specification against a distribution model.
pub fn plausibility_budget(mode: BudgetMode, model: &EllipticalModel) -> Result<PlausibilityBudget> {
    let q = match &mode {
        BudgetMode::Quantile(alpha) => model.maha_sq_quantile(*alpha)?,
        BudgetMode::Historical(reference) => model.maha_sq(reference)?,
    };
    if !(q.is_finite() && q >= 0.0) {
        return Err(ErstError::Degenerate(format!(
            "budget resolved to an invalid radius {q}"
        )));
    }
    Ok(PlausibilityBudget { mode, q })
}

/// Number of distinct optimizers a solve produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplicity {
    /// A single scenario.
    Unique,
    /// Two symmetric scenarios (simple degenerate direction).
    Pair,
    /// A sphere of scenarios; carries the dimension of the free subspace.
    Continuum(usize),
}

/// Geometry of a continuum of optimizers: the solution set is
/// `{ center + directions * u : ||u|| = radius }`.
///
/// The direction columns are images of an orthonormal basis of the free
/// eigenspace, so they are orthonormal in the Mahalanobis metric (not the
/// Euclidean one) of the original factor space.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumSet {
    /// Shared fixed component of every optimizer, in factor coordinates.
    pub center: DVector<f64>,
    /// Free directions, one column per free dimension.
    pub directions: DMatrix<f64>,
    /// Radius of the free component in the Mahalanobis metric.
    pub radius: f64,
}

/// Result of a worst-case or target-plausibility solve.
///
/// Every reported scenario attains `pnl` and `maha_sq` (the distinct
/// optimizers differ only along P&L-neutral directions); `mu` is the
/// Lagrange shift of the optimality system, infinite when a zero-radius
/// budget pins the scenario outright.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    /// The optimizer(s), in original factor coordinates. Continuum solves
    /// materialize two antipodal representatives.
    pub scenarios: Vec<Scenario>,
    /// How many distinct optimizers exist.
    pub multiplicity: Multiplicity,
    /// Attained P&L.
    pub pnl: f64,
    /// Attained squared Mahalanobis distance.
    pub maha_sq: f64,
    /// Lagrange shift at the optimum.
    pub mu: f64,
    /// Full solution-set geometry when the multiplicity is a continuum.
    pub continuum: Option<ContinuumSet>,
}

/// Worst-case loss of a linear portfolio over the budget ellipsoid, in
/// closed form.
pub fn maxerst_linear(
    p: &LinearPortfolio,
    sigma: &DMatrix<f64>,
    budget: &PlausibilityBudget,
) -> Result<SolverOutcome> {
    let n = p.dim();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(ErstError::DimensionMismatch {
            context: "covariance vs portfolio",
            expected: n,
            got: sigma.nrows().max(sigma.ncols()),
        });
    }
    check_finite_matrix(sigma, "covariance")?;
    check_symmetric(sigma)?;
    if Cholesky::new(sigma.clone()).is_none() {
        return Err(ErstError::NotPositiveDefinite {
            min_eigenvalue: min_symmetric_eigenvalue(sigma),
        });
    }
    if p.omega().amax() == 0.0 {
        return Err(ErstError::Degenerate(
            "zero portfolio weights leave the objective flat".into(),
        ));
    }
    let q = budget.q();
    let sigma_omega = sigma * p.omega();
    let v = sigma_omega.dot(p.omega());
    if v <= 0.0 {
        return Err(ErstError::NotPositiveDefinite { min_eigenvalue: v });
    }
    // S* = -sqrt(q) Sigma w / sqrt(w' Sigma w); worst loss -sqrt(q v). A zero
    // budget degenerates cleanly: null scenario, zero loss, infinite shift.
    let spread = v.sqrt();
    let scenario = sigma_omega * (-(q.sqrt()) / spread);
    let pnl = -(q * v).sqrt();
    Ok(SolverOutcome {
        scenarios: vec![Scenario::unlabeled(scenario)?],
        multiplicity: Multiplicity::Unique,
        pnl,
        maha_sq: q,
        mu: (v / q).sqrt(),
        continuum: None,
    })
}

/// Worst-case loss of a quadratic portfolio over the budget ellipsoid.
///
/// Whitens, diagonalizes, and solves the trust-region subproblem on the
/// ball of radius sqrt(q): an interior stationary point is accepted when the
/// quadratic is convex enough to have one inside the ball; otherwise the
/// boundary shift solves `||y(mu)|| = sqrt(q)` by safeguarded iteration; and
/// when the linear term has no component on the bottom eigenspace the shift
/// pins at `-lambda_1` and the solution gains a free boundary component
/// (two symmetric points for a simple bottom eigenvalue, a sphere for a
/// degenerate one).
pub fn maxerst_quadratic(
    p: &QuadraticPortfolio,
    sigma: &DMatrix<f64>,
    budget: &PlausibilityBudget,
) -> Result<SolverOutcome> {
    let w = whiten(p, sigma)?;
    let q = budget.q();

    if q == 0.0 {
        let zero = DVector::zeros(p.dim());
        let pnl = p.pnl(&zero)?;
        return Ok(SolverOutcome {
            scenarios: vec![Scenario::new(zero, p.labels().to_vec())?],
            multiplicity: Multiplicity::Unique,
            pnl,
            maha_sq: 0.0,
            mu: f64::INFINITY,
            continuum: None,
        });
    }
    let delta = q.sqrt();
    let lambda1 = w.eigenvalues()[0];
    let ztol = w.cluster_tol();

    if lambda1 >= -ztol {
        // Convex (up to rounding). The unconstrained stationary point exists
        // when every flat direction also has zero slope; inside the ball it
        // is the optimum (reported as the minimal-norm representative when
        // flat directions make it non-unique in the P&L sense).
        let interior_ok = w
            .eigenvalues()
            .iter()
            .zip(w.beta().iter())
            .all(|(lam, b)| *lam > ztol || *b == 0.0);
        if interior_ok {
            let y0 = DVector::from_iterator(
                w.dim(),
                w.eigenvalues().iter().zip(w.beta().iter()).map(|(lam, b)| {
                    if *b != 0.0 {
                        -b / lam
                    } else {
                        0.0
                    }
                }),
            );
            if y0.norm() <= delta {
                return outcome_from_eigen(&w, p, 0.0, &y0, 0.0);
            }
        }
        let mu = solve_boundary_shift(&w, (-lambda1).max(0.0), delta)?;
        return outcome_from_eigen(&w, p, mu, &w.pinned_coords(mu), 0.0);
    }

    // Nonconvex: the optimum sits on the boundary with shift >= -lambda_1.
    let lo = -lambda1;
    if w.hard_case_available() {
        let r_lim_sq = w.radius_sq(lo);
        if r_lim_sq <= q {
            // Pinned shift; the leftover budget goes to the free component.
            let free = (q - r_lim_sq).max(0.0).sqrt();
            return outcome_from_eigen(&w, p, lo, &w.pinned_coords(lo), free);
        }
    }
    let mu = solve_boundary_shift(&w, lo, delta)?;
    outcome_from_eigen(&w, p, mu, &w.pinned_coords(mu), 0.0)
}

/// Solve `||y(mu)|| = delta` for the boundary shift by bisection with Newton
/// acceleration on the reciprocal residual `1/delta - 1/||y(mu)||`, which is
/// smooth and monotone across the whole bracket (no poles).
fn solve_boundary_shift(w: &WhitenedProblem, lo: f64, delta: f64) -> Result<f64> {
    let beta_norm = w.beta().norm();
    let lambda1 = w.eigenvalues()[0];
    let mut a = lo;
    let mut b = lo.max(0.0) + beta_norm / delta + lambda1.abs();
    if b <= a {
        b = a + 1.0;
    }
    let mut grow = 0;
    while w.radius_sq(b).sqrt() > delta {
        b = lo + (b - lo) * 2.0;
        grow += 1;
        if grow > 200 {
            return Err(ErstError::Infeasible(
                "boundary-shift bracket failed to close".into(),
            ));
        }
    }

    let tol = RADIUS_RESIDUAL_REL * delta;
    let mut mu = 0.5 * (a + b);
    for _ in 0..500 {
        let r = w.radius_sq(mu).sqrt();
        if (r - delta).abs() <= tol {
            return Ok(mu);
        }
        if r > delta {
            a = mu;
        } else {
            b = mu;
        }
        // phi = 1/delta - 1/r; phi' = radius_sq' / (2 r^3) < 0.
        let phi = 1.0 / delta - 1.0 / r;
        let dphi = w.radius_sq_deriv(mu) / (2.0 * r * r * r);
        let mut next = if dphi < 0.0 { mu - phi / dphi } else { f64::NAN };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        mu = next;
        if b - a <= 1e-15 * (1.0 + mu.abs()) {
            return Ok(mu);
        }
    }
    // The safeguarded bracket always converges in far fewer iterations; if
    // we fall out of the loop the residual is still tracked.
    let r = w.radius_sq(mu).sqrt();
    if (r - delta).abs() <= 1e-6 * delta {
        Ok(mu)
    } else {
        Err(ErstError::Infeasible(
            "boundary-shift iteration failed to converge".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptical::{chi2_quantile, Family};
    use crate::loss_driven::most_plausible_scenario;
    use crate::pnl_model::var_linear_normal;
    use crate::elliptical::std_normal_quantile;
    use approx::assert_relative_eq;

    fn spread_sigma() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.01, 0.0025, 0.0025, 0.01])
    }

    fn model2() -> EllipticalModel {
        EllipticalModel::new(DVector::zeros(2), spread_sigma(), Family::Normal).unwrap()
    }

    fn quad(a: &[f64], b: &[f64]) -> QuadraticPortfolio {
        let n = b.len();
        let labels = (1..=n).map(|i| format!("f{i}")).collect();
        QuadraticPortfolio::new(
            DMatrix::from_row_slice(n, n, a),
            DVector::from_column_slice(b),
            labels,
        )
        .unwrap()
    }

    #[test]
    fn quantile_budget_resolves_the_chi_squared_quantile() {
        let budget =
            plausibility_budget(BudgetMode::Quantile(0.95), &model2()).unwrap();
        assert_relative_eq!(budget.q(), 5.991464547107982, max_relative = 1e-9);
    }

    #[test]
    fn historical_budget_resolves_the_reference_distance() {
        let center = plausibility_budget(
            BudgetMode::Historical(DVector::zeros(2)),
            &model2(),
        )
        .unwrap();
        assert_eq!(center.q(), 0.0);
        let shocked = plausibility_budget(
            BudgetMode::Historical(DVector::from_column_slice(&[-0.10, -0.20])),
            &model2(),
        )
        .unwrap();
        assert_relative_eq!(shocked.q(), 64.0 / 15.0, max_relative = 1e-12);
    }

    #[test]
    fn linear_worst_case_matches_the_closed_form() {
        let p = LinearPortfolio::new(DVector::from_column_slice(&[1.0, -1.0])).unwrap();
        let budget = plausibility_budget(BudgetMode::Quantile(0.95), &model2()).unwrap();
        let out = maxerst_linear(&p, &spread_sigma(), &budget).unwrap();
        assert_relative_eq!(out.pnl, -0.2997865377341346, max_relative = 1e-10);
        assert_relative_eq!(
            out.scenarios[0].values()[0],
            -0.1498932688670673,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            out.scenarios[0].values()[1],
            0.1498932688670673,
            max_relative = 1e-10
        );
        assert_eq!(out.multiplicity, Multiplicity::Unique);
        assert_relative_eq!(out.maha_sq, budget.q(), max_relative = 1e-12);
        assert_relative_eq!(out.mu, (0.015 / budget.q()).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn zero_budget_pins_the_null_scenario() {
        let p = LinearPortfolio::new(DVector::from_column_slice(&[1.0, -1.0])).unwrap();
        let budget =
            plausibility_budget(BudgetMode::Historical(DVector::zeros(2)), &model2()).unwrap();
        let out = maxerst_linear(&p, &spread_sigma(), &budget).unwrap();
        assert_eq!(out.pnl, 0.0);
        assert_eq!(out.maha_sq, 0.0);
        assert!(out.scenarios[0].values().iter().all(|x| *x == 0.0));
        assert!(out.mu.is_infinite());
        let pq = quad(&[1.0, 0.0, 0.0, -1.0], &[0.3, 0.3]);
        let outq = maxerst_quadratic(&pq, &spread_sigma(), &budget).unwrap();
        assert_eq!(outq.pnl, 0.0);
        assert_eq!(outq.maha_sq, 0.0);
        assert!(outq.mu.is_infinite());
    }

    #[test]
    fn zero_weights_are_degenerate() {
        let p = LinearPortfolio::new(DVector::zeros(2)).unwrap();
        let budget = plausibility_budget(BudgetMode::Quantile(0.95), &model2()).unwrap();
        assert!(matches!(
            maxerst_linear(&p, &spread_sigma(), &budget),
            Err(ErstError::Degenerate(_))
        ));
    }

    #[test]
    fn linear_worst_case_is_proportional_to_var() {
        // MaxERST / sqrt(q) = VaR / z_alpha = -sqrt(w' Sigma w), any portfolio.
        for alpha in [0.9, 0.95, 0.99] {
            for omega in [vec![1.0, -1.0], vec![0.3, 2.0], vec![-1.5, 0.2]] {
                let p = LinearPortfolio::new(DVector::from_vec(omega)).unwrap();
                let budget =
                    plausibility_budget(BudgetMode::Quantile(alpha), &model2()).unwrap();
                let out = maxerst_linear(&p, &spread_sigma(), &budget).unwrap();
                let var = var_linear_normal(&p, &spread_sigma(), alpha).unwrap();
                let z = std_normal_quantile(alpha).unwrap();
                assert_relative_eq!(
                    out.pnl / budget.q().sqrt(),
                    var / z,
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn worst_case_never_improves_as_the_budget_grows() {
        let p = LinearPortfolio::new(DVector::from_column_slice(&[1.0, -1.0])).unwrap();
        let pq = quad(&[1.2, 0.3, 0.3, -0.8], &[0.5, -0.25]);
        let mut prev_lin = f64::INFINITY;
        let mut prev_quad = f64::INFINITY;
        for alpha in [0.5, 0.8, 0.9, 0.95, 0.99] {
            let budget = plausibility_budget(BudgetMode::Quantile(alpha), &model2()).unwrap();
            let lin = maxerst_linear(&p, &spread_sigma(), &budget).unwrap().pnl;
            let qd = maxerst_quadratic(&pq, &spread_sigma(), &budget)
                .unwrap()
                .pnl;
            assert!(lin <= prev_lin + 1e-12);
            assert!(qd <= prev_quad + 1e-12);
            prev_lin = lin;
            prev_quad = qd;
        }
    }

    #[test]
    fn quadratic_with_zero_gamma_reduces_to_the_linear_solve() {
        let omega = DVector::from_column_slice(&[1.0, -1.0]);
        let p = LinearPortfolio::new(omega.clone()).unwrap();
        let pq = QuadraticPortfolio::from_linear(&p);
        let budget = plausibility_budget(BudgetMode::Quantile(0.95), &model2()).unwrap();
        let lin = maxerst_linear(&p, &spread_sigma(), &budget).unwrap();
        let qd = maxerst_quadratic(&pq, &spread_sigma(), &budget).unwrap();
        assert_relative_eq!(qd.pnl, lin.pnl, max_relative = 1e-10);
        assert_relative_eq!(qd.mu, lin.mu, max_relative = 1e-10);
        assert_relative_eq!(
            qd.scenarios[0].values(),
            lin.scenarios[0].values(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn deep_interior_minimum_is_reported_with_zero_shift() {
        let p = quad(&[1.0, 0.0, 0.0, 1.0], &[0.1, 0.0]);
        let model =
            EllipticalModel::new(DVector::zeros(2), DMatrix::identity(2, 2), Family::Normal)
                .unwrap();
        let budget = plausibility_budget(BudgetMode::Quantile(0.95), &model).unwrap();
        let out = maxerst_quadratic(&p, &DMatrix::identity(2, 2), &budget).unwrap();
        assert_eq!(out.mu, 0.0);
        assert_eq!(out.multiplicity, Multiplicity::Unique);
        assert_relative_eq!(out.scenarios[0].values()[0], -0.1, max_relative = 1e-12);
        assert_relative_eq!(out.scenarios[0].values()[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(out.pnl, -0.005, max_relative = 1e-12);
        assert_relative_eq!(out.maha_sq, 0.01, max_relative = 1e-12);
        assert!(out.maha_sq < budget.q());
    }

    #[test]
    fn pure_gamma_worst_case_has_the_closed_form_and_pair() {
        // A = diag(2, -2), B = 0: whitened eigenvalues are
        // +/- 2 sigma^2 sqrt(1 - rho^2), so the worst loss on the ball of
        // squared radius q is -q sigma^2 sqrt(1 - rho^2).
        let (sig, rho) = (0.2f64, 0.25f64);
        let sigma = DMatrix::from_row_slice(
            2,
            2,
            &[
                sig * sig,
                rho * sig * sig,
                rho * sig * sig,
                sig * sig,
            ],
        );
        let model =
            EllipticalModel::new(DVector::zeros(2), sigma.clone(), Family::Normal).unwrap();
        let p = quad(&[2.0, 0.0, 0.0, -2.0], &[0.0, 0.0]);
        let budget = plausibility_budget(BudgetMode::Quantile(0.95), &model).unwrap();
        let out = maxerst_quadratic(&p, &sigma, &budget).unwrap();
        let expect = -budget.q() * sig * sig * (1.0 - rho * rho).sqrt();
        assert_relative_eq!(out.pnl, expect, max_relative = 1e-12);
        assert_eq!(out.multiplicity, Multiplicity::Pair);
        assert_eq!(out.scenarios.len(), 2);
        for s in &out.scenarios {
            assert_relative_eq!(
                model.maha_sq(s.values()).unwrap(),
                budget.q(),
                max_relative = 1e-8
            );
            assert_relative_eq!(p.pnl(s.values()).unwrap(), expect, max_relative = 1e-10);
        }
    }

    #[test]
    fn isotropic_negative_gamma_worst_case_is_a_continuum() {
        let p = quad(&[-1.0, 0.0, 0.0, -1.0], &[0.0, 0.0]);
        let sigma = DMatrix::identity(2, 2);
        let model =
            EllipticalModel::new(DVector::zeros(2), sigma.clone(), Family::Normal).unwrap();
        let budget = plausibility_budget(BudgetMode::Quantile(0.95), &model).unwrap();
        let out = maxerst_quadratic(&p, &sigma, &budget).unwrap();
        assert_eq!(out.multiplicity, Multiplicity::Continuum(2));
        assert_relative_eq!(out.pnl, -0.5 * budget.q(), max_relative = 1e-12);
        let set = out.continuum.as_ref().expect("continuum geometry");
        assert_relative_eq!(set.radius, budget.q().sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn tight_budget_turns_the_hard_case_into_a_boundary_iteration() {
        // Bottom eigenvector carries no delta, but the pinned-shift radius
        // 0.125 exceeds the ball: the shift must move past the pole.
        let p = quad(&[2.0, 0.0, 0.0, -2.0], &[0.5, 0.0]);
        let sigma = DMatrix::identity(2, 2);
        let model =
            EllipticalModel::new(DVector::zeros(2), sigma.clone(), Family::Normal).unwrap();
        let tight = plausibility_budget(
            BudgetMode::Historical(DVector::from_column_slice(&[0.1, 0.0])),
            &model,
        )
        .unwrap();
        assert!(tight.q().sqrt() < 0.125);
        let out = maxerst_quadratic(&p, &sigma, &tight).unwrap();
        assert_eq!(out.multiplicity, Multiplicity::Unique);
        assert!(out.mu > 2.0);
        assert_relative_eq!(out.maha_sq, tight.q(), max_relative = 1e-8);
        // A roomy budget flips the same portfolio into the hard case.
        let roomy = plausibility_budget(BudgetMode::Quantile(0.95), &model).unwrap();
        let out2 = maxerst_quadratic(&p, &sigma, &roomy).unwrap();
        assert_eq!(out2.multiplicity, Multiplicity::Pair);
        assert_relative_eq!(out2.mu, 2.0, max_relative = 1e-12);
        assert_relative_eq!(out2.maha_sq, roomy.q(), max_relative = 1e-10);
    }

    #[test]
    fn active_budgets_land_on_the_boundary() {
        let cases: Vec<(QuadraticPortfolio, DMatrix<f64>)> = vec![
            (quad(&[1.2, 0.3, 0.3, -0.8], &[0.5, -0.25]), spread_sigma()),
            (
                quad(&[-0.6, 0.1, 0.1, 0.9], &[0.0, 0.4]),
                DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]),
            ),
        ];
        for (p, sigma) in cases {
            let model =
                EllipticalModel::new(DVector::zeros(2), sigma.clone(), Family::Normal).unwrap();
            let budget = plausibility_budget(BudgetMode::Quantile(0.9), &model).unwrap();
            let out = maxerst_quadratic(&p, &sigma, &budget).unwrap();
            assert!(out.mu > 0.0);
            assert!((out.maha_sq - budget.q()).abs() <= 1e-8);
        }
    }

    #[test]
    fn extra_factor_worsens_quantile_budgets_but_not_historical_ones() {
        // Same sub-portfolio; a third independent factor with zero weight.
        let omega2 = DVector::from_column_slice(&[1.0, -1.0]);
        let omega3 = DVector::from_column_slice(&[1.0, -1.0, 0.0]);
        let mut sigma3 = DMatrix::zeros(3, 3);
        sigma3.view_mut((0, 0), (2, 2)).copy_from(&spread_sigma());
        sigma3[(2, 2)] = 0.0004;
        let model3 =
            EllipticalModel::new(DVector::zeros(3), sigma3.clone(), Family::Normal).unwrap();
        let p2 = LinearPortfolio::new(omega2).unwrap();
        let p3 = LinearPortfolio::new(omega3).unwrap();

        // Quantile mode: the budget grows with the dimension, so the worst
        // case strictly deteriorates even though the portfolio is unchanged.
        let b2 = plausibility_budget(BudgetMode::Quantile(0.95), &model2()).unwrap();
        let b3 = plausibility_budget(BudgetMode::Quantile(0.95), &model3).unwrap();
        assert!(b3.q() > b2.q());
        let out2 = maxerst_linear(&p2, &spread_sigma(), &b2).unwrap();
        let out3 = maxerst_linear(&p3, &sigma3, &b3).unwrap();
        assert!(out3.pnl < out2.pnl);

        // Historical mode: padding the reference with the new factor's
        // baseline value leaves the budget, and hence the answer, unchanged.
        let s2 = DVector::from_column_slice(&[-0.10, -0.20]);
        let s3 = DVector::from_column_slice(&[-0.10, -0.20, 0.0]);
        let h2 = plausibility_budget(BudgetMode::Historical(s2), &model2()).unwrap();
        let h3 = plausibility_budget(BudgetMode::Historical(s3), &model3).unwrap();
        assert_relative_eq!(h2.q(), h3.q(), max_relative = 1e-12);
        let hout2 = maxerst_linear(&p2, &spread_sigma(), &h2).unwrap();
        let hout3 = maxerst_linear(&p3, &sigma3, &h3).unwrap();
        assert_relative_eq!(hout2.pnl, hout3.pnl, max_relative = 1e-12);
    }

    #[test]
    fn worst_case_loss_round_trips_through_the_target_solver() {
        // Duality: feed the attained worst loss back as a target; the most
        // plausible scenario must sit at the original budget radius.
        let p = quad(&[1.2, 0.3, 0.3, -0.8], &[0.5, -0.25]);
        let sigma = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let model =
            EllipticalModel::new(DVector::zeros(2), sigma.clone(), Family::Normal).unwrap();
        let budget = plausibility_budget(BudgetMode::Quantile(0.9), &model).unwrap();
        let worst = maxerst_quadratic(&p, &sigma, &budget).unwrap();
        assert!(worst.mu > 0.0);
        let back = most_plausible_scenario(&p, &sigma, worst.pnl).unwrap();
        assert_relative_eq!(back.maha_sq, budget.q(), max_relative = 1e-6);
        let d = (back.scenarios[0].values() - worst.scenarios[0].values()).norm();
        assert!(d <= 1e-4 * (1.0 + worst.scenarios[0].values().norm()));
    }

    #[test]
    fn budget_quantile_matches_direct_chi2_inversion() {
        let model = EllipticalModel::new(
            DVector::zeros(3),
            DMatrix::identity(3, 3),
            Family::Normal,
        )
        .unwrap();
        let budget = plausibility_budget(BudgetMode::Quantile(0.99), &model).unwrap();
        assert_relative_eq!(
            budget.q(),
            chi2_quantile(0.99, 3).unwrap(),
            max_relative = 1e-12
        );
    }
}
