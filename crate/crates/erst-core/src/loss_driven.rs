//! Target-driven reverse stress testing: given a P&L target, find the most
//! plausible scenario(s) attaining it.
//!
//! Everything here works in a whitened coordinate system in which the
//! plausibility metric is the plain Euclidean norm. With Sigma = L L^T the
//! lower-triangular Cholesky factorization (equivalently Sigma = U^T U for
//! the upper factor U = L^T), the whitened shock is s_hat = L^{-1} s, so
//! Maha^2(s) = ||s_hat||^2. The quadratic P&L follows along as
//! A_hat = L^T A L and B_hat = L^T B, and a final rotation into the
//! eigenbasis of A_hat decouples the coordinates. In that basis the
//! first-order conditions for
//!
//! ```text
//! minimize ||s_hat||^2   subject to   P&L(s_hat) <= l        (l < 0)
//! ```
//!
//! read `(A_hat + mu I) s_hat = -B_hat` with a scalar shift `mu >= max(0,
//! -lambda_1)`, which reduces the search to root finding on the secular
//! function
//!
//! ```text
//! f(mu) = sum_i [ (lambda_i / 2) (beta_i / (lambda_i + mu))^2
//!                 - beta_i^2 / (lambda_i + mu) ]
//! ```
//!
//! (the attained P&L as a function of the shift), which is nondecreasing on
//! the domain. When the delta component along the bottom eigenspace
//! vanishes, the shift can sit exactly at the pole `mu = -lambda_1` and the
//! solution gains a free component in that eigenspace — a symmetric pair for
//! a simple bottom eigenvalue, a whole sphere for a degenerate one.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{ErstError, Result};
use crate::maxerst::{ContinuumSet, Multiplicity, SolverOutcome};
use crate::plausibility::Scenario;
use crate::pnl_model::QuadraticPortfolio;
use crate::tolerances::{
    BETA_SNAP_REL_TOL, CANDIDATE_TIE_REL, EIGEN_CLUSTER_REL_TOL, SECULAR_LOSS_TOL,
};
use crate::util::{check_finite_matrix, check_symmetric, min_symmetric_eigenvalue};

/// A quadratic portfolio and covariance, rotated into coordinates where the
/// plausibility metric is Euclidean and the gamma matrix is diagonal.
///
/// Built once by [`whiten`] and then shared by every solver that needs the
/// eigenstructure; the type is immutable.
#[derive(Debug, Clone)]
pub struct WhitenedProblem {
    /// Lower Cholesky factor L of Sigma (Sigma = L L^T).
    lower: DMatrix<f64>,
    /// Upper factor U = L^T (Sigma = U^T U).
    u: DMatrix<f64>,
    /// Whitened gamma matrix A_hat = L^T A L, symmetric.
    ahat: DMatrix<f64>,
    /// Whitened delta vector B_hat = L^T B.
    bhat: DVector<f64>,
    /// Eigenvalues of A_hat, ascending.
    lambda: DVector<f64>,
    /// Matching eigenvectors as columns; each column's largest-magnitude
    /// component is nonnegative, which pins the sign deterministically.
    basis: DMatrix<f64>,
    /// B_hat expressed in the eigenbasis, with negligible entries snapped to
    /// exact zero so that hard-case detection is stable.
    beta: DVector<f64>,
    /// Indices (into the sorted eigenvalues) of the bottom eigenvalue
    /// cluster; always the contiguous prefix 0..m.
    bottom: Vec<usize>,
}

impl WhitenedProblem {
    /// Factor dimension.
    pub fn dim(&self) -> usize {
        self.bhat.len()
    }

    /// Lower Cholesky factor L of Sigma.
    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Upper Cholesky factor U = L^T of Sigma.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Whitened gamma matrix A_hat.
    pub fn ahat(&self) -> &DMatrix<f64> {
        &self.ahat
    }

    /// Whitened delta vector B_hat.
    pub fn bhat(&self) -> &DVector<f64> {
        &self.bhat
    }

    /// Eigenvalues of A_hat in ascending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.lambda
    }

    /// Eigenvectors of A_hat, columns matching [`Self::eigenvalues`].
    pub fn eigenbasis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Delta coordinates in the eigenbasis (after snapping).
    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// Indices of the bottom eigenvalue cluster.
    pub fn bottom_cluster(&self) -> &[usize] {
        &self.bottom
    }

    /// Left end of the secular domain, max(0, -lambda_1).
    pub fn secular_domain_lo(&self) -> f64 {
        (-self.lambda[0]).max(0.0)
    }

    /// Map a whitened shock back to original factor coordinates, s = L s_hat.
    pub fn unwhiten(&self, s_hat: &DVector<f64>) -> DVector<f64> {
        &self.lower * s_hat
    }

    /// Map an original-coordinate shock into whitened coordinates,
    /// s_hat = L^{-1} s.
    pub fn whiten_shock(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        self.lower
            .solve_lower_triangular(s)
            .ok_or_else(|| ErstError::Degenerate("singular Cholesky factor".into()))
    }

    /// Original-coordinate scenario from eigenbasis coordinates y:
    /// s = L (basis * y).
    pub fn scenario_from_eigen(&self, y: &DVector<f64>) -> DVector<f64> {
        self.unwhiten(&(&self.basis * y))
    }

    /// Largest |eigenvalue|; the scale against which clustering and
    /// positive-semidefiniteness are judged.
    pub(crate) fn spectral_scale(&self) -> f64 {
        self.lambda.amax()
    }

    /// Tolerance below which an eigenvalue counts as belonging to a cluster.
    pub(crate) fn cluster_tol(&self) -> f64 {
        EIGEN_CLUSTER_REL_TOL * self.spectral_scale()
    }

    /// Whether the shift can sit at the bottom pole: every delta coordinate
    /// on the bottom cluster is (snapped) zero.
    pub(crate) fn hard_case_available(&self) -> bool {
        self.bottom.iter().all(|&i| self.beta[i] == 0.0)
    }

    /// Squared norm of s_hat(mu) = -(A_hat + mu I)^{-1} B_hat, coordinates
    /// with zero delta skipped (they stay identically zero).
    pub(crate) fn radius_sq(&self, mu: f64) -> f64 {
        let mut r2 = 0.0;
        for (l, b) in self.lambda.iter().zip(self.beta.iter()) {
            if *b != 0.0 {
                let d = l + mu;
                r2 += (b / d) * (b / d);
            }
        }
        r2
    }

    /// d/dmu of [`Self::radius_sq`]: -2 sum beta_i^2 / (lambda_i + mu)^3.
    pub(crate) fn radius_sq_deriv(&self, mu: f64) -> f64 {
        let mut d3 = 0.0;
        for (l, b) in self.lambda.iter().zip(self.beta.iter()) {
            if *b != 0.0 {
                let d = l + mu;
                d3 += b * b / (d * d * d);
            }
        }
        -2.0 * d3
    }

    /// The secular function f(mu); zero-delta coordinates contribute nothing.
    pub(crate) fn f_value(&self, mu: f64) -> f64 {
        let mut f = 0.0;
        for (l, b) in self.lambda.iter().zip(self.beta.iter()) {
            if *b != 0.0 {
                let d = l + mu;
                let q = b / d;
                f += 0.5 * l * q * q - b * q;
            }
        }
        f
    }

    /// f'(mu) = mu * sum beta_i^2 / (lambda_i + mu)^3, nonnegative on the
    /// secular domain.
    pub(crate) fn f_deriv(&self, mu: f64) -> f64 {
        let mut d3 = 0.0;
        for (l, b) in self.lambda.iter().zip(self.beta.iter()) {
            if *b != 0.0 {
                let d = l + mu;
                d3 += b * b / (d * d * d);
            }
        }
        mu * d3
    }

    /// Eigenbasis coordinates pinned by the shift: y_i = -beta_i /
    /// (lambda_i + mu), zero where the delta coordinate is zero.
    pub(crate) fn pinned_coords(&self, mu: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lambda.iter().zip(self.beta.iter()).map(|(l, b)| {
                if *b != 0.0 {
                    -b / (l + mu)
                } else {
                    0.0
                }
            }),
        )
    }
}

/// Whiten a quadratic portfolio against a covariance matrix.
///
/// Validates that the covariance is symmetric, finite and positive definite,
/// then produces the Cholesky factors, the whitened quadratic, its
/// eigendecomposition (ascending, deterministic signs) and the delta
/// coordinates in the eigenbasis. Delta coordinates smaller than
/// `BETA_SNAP_REL_TOL * max(1, ||beta||_inf)` are snapped to exact zero so
/// that the pole/no-pole case split does not flicker under rounding.
pub fn whiten(p: &QuadraticPortfolio, sigma: &DMatrix<f64>) -> Result<WhitenedProblem> {
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
    let chol = Cholesky::new(sigma.clone()).ok_or_else(|| ErstError::NotPositiveDefinite {
        min_eigenvalue: min_symmetric_eigenvalue(sigma),
    })?;
    let lower = chol.l();
    let u = lower.transpose();

    let ahat_raw = &u * p.a() * u.transpose();
    // The product is symmetric in exact arithmetic; make it exactly so before
    // the symmetric eigensolver sees it.
    let ahat = 0.5 * (&ahat_raw + ahat_raw.transpose());
    let bhat = &u * p.b();

    let eig = SymmetricEigen::new(ahat.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut lambda = DVector::zeros(n);
    let mut basis = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        lambda[k] = eig.eigenvalues[i];
        let mut col = eig.eigenvectors.column(i).clone_owned();
        let mut lead = 0;
        for r in 1..n {
            if col[r].abs() > col[lead].abs() {
                lead = r;
            }
        }
        if col[lead] < 0.0 {
            col = -col;
        }
        basis.set_column(k, &col);
    }

    let mut beta = basis.transpose() * &bhat;
    let snap = BETA_SNAP_REL_TOL * beta.amax().max(1.0);
    for b in beta.iter_mut() {
        if b.abs() <= snap {
            *b = 0.0;
        }
    }

    let cluster_tol = EIGEN_CLUSTER_REL_TOL * lambda.amax();
    let bottom = (0..n)
        .filter(|&i| lambda[i] - lambda[0] <= cluster_tol)
        .collect();

    Ok(WhitenedProblem {
        lower,
        u,
        ahat,
        bhat,
        lambda,
        basis,
        beta,
        bottom,
    })
}

/// The secular function f of a whitened problem, exposed as a plain curve
/// for inspection and plotting.
///
/// The curve is continuous and nondecreasing on `mu >= domain_lo()` away
/// from its poles; its value is the P&L attained by the stationary scenario
/// with shift `mu`.
#[derive(Debug, Clone)]
pub struct SecularCurve {
    lambda: DVector<f64>,
    beta: DVector<f64>,
    domain_lo: f64,
}

impl SecularCurve {
    /// Extract the curve data from a whitened problem.
    pub fn new(w: &WhitenedProblem) -> Self {
        Self {
            lambda: w.lambda.clone(),
            beta: w.beta.clone(),
            domain_lo: w.secular_domain_lo(),
        }
    }

    /// Left end of the evaluation domain, max(0, -lambda_1).
    pub fn domain_lo(&self) -> f64 {
        self.domain_lo
    }

    /// Evaluate the curve; same contract as [`secular_f`].
    pub fn eval(&self, mu: f64) -> Result<f64> {
        if mu < self.domain_lo {
            return Err(ErstError::OutOfRange {
                name: "mu",
                value: mu,
                range: ">= max(0, -lambda_1)",
            });
        }
        let mut f = 0.0;
        for (l, b) in self.lambda.iter().zip(self.beta.iter()) {
            if *b != 0.0 {
                let d = l + mu;
                if d == 0.0 {
                    return Err(ErstError::SecularPole { mu });
                }
                let q = b / d;
                f += 0.5 * l * q * q - b * q;
            }
        }
        Ok(f)
    }
}

/// Evaluate the secular function f at a shift `mu`.
///
/// `mu` must lie in the domain `mu >= max(0, -lambda_1)`; evaluating exactly
/// at a pole (a shift `-lambda_i` whose delta coordinate is nonzero) is an
/// error, while poles with zero delta coordinate are removable and simply
/// skipped.
pub fn secular_f(w: &WhitenedProblem, mu: f64) -> Result<f64> {
    SecularCurve::new(w).eval(mu)
}

/// Evaluate the secular function on its hard-case branch, at the pinned
/// shift `mu = -lambda_1` with a free bottom-eigenspace component of squared
/// length `free_radius_sq`:
///
/// ```text
/// f_hard = f_fixed(-lambda_1) + (lambda_1 / 2) * free_radius_sq
/// ```
///
/// Requires a nonpositive bottom eigenvalue and zero delta coordinates on
/// the whole bottom cluster (otherwise `-lambda_1` is a genuine pole).
pub fn secular_f_hard(w: &WhitenedProblem, free_radius_sq: f64) -> Result<f64> {
    let lambda1 = w.lambda[0];
    if lambda1 > 0.0 {
        return Err(ErstError::OutOfRange {
            name: "mu",
            value: -lambda1,
            range: ">= max(0, -lambda_1)",
        });
    }
    if !w.hard_case_available() {
        return Err(ErstError::SecularPole { mu: -lambda1 });
    }
    if free_radius_sq < 0.0 {
        return Err(ErstError::OutOfRange {
            name: "free_radius_sq",
            value: free_radius_sq,
            range: ">= 0",
        });
    }
    Ok(w.f_value(-lambda1) + 0.5 * lambda1 * free_radius_sq)
}

/// Assemble a solver outcome from eigenbasis data: the pinned coordinates,
/// the shift, and an optional free radius on the bottom cluster.
///
/// A negligible free radius collapses to a unique scenario; otherwise a
/// simple bottom eigenvalue yields the symmetric pair and a degenerate one
/// yields a continuum, reported through two antipodal representatives plus
/// the full solution-set geometry.
pub(crate) fn outcome_from_eigen(
    w: &WhitenedProblem,
    p: &QuadraticPortfolio,
    mu: f64,
    y_pinned: &DVector<f64>,
    free_radius: f64,
) -> Result<SolverOutcome> {
    let maha_sq = y_pinned.norm_squared() + free_radius * free_radius;
    let negligible = free_radius <= 1e-10 * (1.0 + maha_sq.sqrt());
    let labels = p.labels().to_vec();

    if negligible {
        let s = w.scenario_from_eigen(y_pinned);
        let pnl = p.pnl(&s)?;
        return Ok(SolverOutcome {
            scenarios: vec![Scenario::new(s, labels)?],
            multiplicity: Multiplicity::Unique,
            pnl,
            maha_sq,
            mu,
            continuum: None,
        });
    }

    let m = w.bottom.len();
    let mut y_plus = y_pinned.clone();
    let mut y_minus = y_pinned.clone();
    y_plus[w.bottom[0]] += free_radius;
    y_minus[w.bottom[0]] -= free_radius;
    let s_plus = w.scenario_from_eigen(&y_plus);
    let s_minus = w.scenario_from_eigen(&y_minus);
    let pnl = p.pnl(&s_plus)?;
    debug_assert!(
        (p.pnl(&s_minus)? - pnl).abs() <= 1e-9 * (1.0 + pnl.abs()),
        "antipodal representatives must attain the same P&L"
    );

    let continuum = if m >= 2 {
        let mut directions = DMatrix::zeros(w.dim(), m);
        for (k, &i) in w.bottom.iter().enumerate() {
            let dir = w.unwhiten(&w.basis.column(i).clone_owned());
            directions.set_column(k, &dir);
        }
        Some(ContinuumSet {
            center: w.scenario_from_eigen(y_pinned),
            directions,
            radius: free_radius,
        })
    } else {
        None
    };

    Ok(SolverOutcome {
        scenarios: vec![
            Scenario::new(s_plus, labels.clone())?,
            Scenario::new(s_minus, labels)?,
        ],
        multiplicity: if m >= 2 {
            Multiplicity::Continuum(m)
        } else {
            Multiplicity::Pair
        },
        pnl,
        maha_sq,
        mu,
        continuum,
    })
}

/// Find the shift with f(mu) = l by safeguarded bisection with Newton
/// acceleration.
///
/// `lo` is the left end of the domain; when `pole_at_lo` the function
/// diverges to -inf there and the lower bracket is nudged inward, otherwise
/// the caller guarantees f(lo) <= l. f is nondecreasing, so the bracket is
/// genuine and bisection alone already converges; Newton steps only speed it
/// up.
fn solve_f_equals(w: &WhitenedProblem, lo: f64, pole_at_lo: bool, l: f64) -> Result<f64> {
    let tol = SECULAR_LOSS_TOL * (1.0 + l.abs());

    let mut a = if pole_at_lo {
        let mut eps = 1e-6 * (1.0 + lo.abs());
        loop {
            let cand = lo + eps;
            if cand == lo || w.f_value(cand) <= l {
                break cand;
            }
            eps *= 0.125;
        }
    } else {
        lo
    };
    if !pole_at_lo && (w.f_value(a) - l).abs() <= tol {
        return Ok(a);
    }

    let mut b = a + 1.0 + a.abs();
    let mut grow = 0;
    while w.f_value(b) < l {
        b = lo + (b - lo) * 4.0;
        grow += 1;
        if grow > 300 {
            return Err(ErstError::Infeasible(
                "secular bracket failed to capture the target".into(),
            ));
        }
    }

    let mut mu = 0.5 * (a + b);
    for _ in 0..500 {
        let fm = w.f_value(mu);
        if (fm - l).abs() <= tol {
            return Ok(mu);
        }
        if fm < l {
            a = mu;
        } else {
            b = mu;
        }
        let d = w.f_deriv(mu);
        let mut next = if d > 0.0 { mu - (fm - l) / d } else { f64::NAN };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        mu = next;
        if b - a <= 1e-14 * (1.0 + mu.abs()) {
            return Ok(mu);
        }
    }
    Ok(mu)
}

/// Most plausible scenario(s) attaining a loss target.
///
/// Minimizes Maha^2(S) subject to P&L(S) <= `target_loss` (a nonpositive
/// number; for profit targets see [`profit_scenario`]). The returned
/// scenarios are in original factor coordinates; `mu` is the Lagrange shift
/// of the whitened optimality system and `maha_sq` the attained squared
/// Mahalanobis radius.
///
/// Unreachable targets (a convex P&L bounded below by more than the target)
/// are reported as [`ErstError::UnreachableTarget`] carrying the bound.
pub fn most_plausible_scenario(
    p: &QuadraticPortfolio,
    sigma: &DMatrix<f64>,
    target_loss: f64,
) -> Result<SolverOutcome> {
    if !target_loss.is_finite() {
        return Err(ErstError::NonFinite("target loss"));
    }
    if target_loss > 0.0 {
        return Err(ErstError::InvalidInput(
            "positive target is a profit; use profit_scenario".into(),
        ));
    }
    let w = whiten(p, sigma)?;

    if target_loss == 0.0 {
        // The null scenario attains a zero P&L at zero cost.
        let zero = DVector::zeros(p.dim());
        let pnl = p.pnl(&zero)?;
        return Ok(SolverOutcome {
            scenarios: vec![Scenario::new(zero, p.labels().to_vec())?],
            multiplicity: Multiplicity::Unique,
            pnl,
            maha_sq: 0.0,
            mu: 0.0,
            continuum: None,
        });
    }

    let l = target_loss;
    let lambda1 = w.lambda[0];
    let ztol = w.cluster_tol();

    if lambda1 >= -ztol {
        // Positive semidefinite quadratic: the domain starts at zero. Zero
        // eigenvalue coordinates with zero delta are inert and simply stay
        // zero; a zero eigenvalue with live delta makes f pole to -inf at
        // the origin, so every negative target is reachable.
        let pole_at_zero = w
            .lambda
            .iter()
            .zip(w.beta.iter())
            .any(|(lam, b)| *lam <= ztol && *b != 0.0);
        if pole_at_zero {
            let mu = solve_f_equals(&w, 0.0, true, l)?;
            return outcome_from_eigen(&w, p, mu, &w.pinned_coords(mu), 0.0);
        }
        let f0 = w.f_value(0.0);
        let eq_band = 1e-12 * (1.0 + f0.abs());
        if l < f0 - eq_band {
            return Err(ErstError::UnreachableTarget {
                target: l,
                bound: f0,
            });
        }
        if l <= f0 + eq_band {
            // The target is the global minimum itself: the P&L's own
            // stationary point, shift zero.
            return outcome_from_eigen(&w, p, 0.0, &w.pinned_coords(0.0), 0.0);
        }
        let mu = solve_f_equals(&w, 0.0, false, l)?;
        return outcome_from_eigen(&w, p, mu, &w.pinned_coords(mu), 0.0);
    }

    // Indefinite or negative quadratic: the domain starts at -lambda_1 > 0.
    let lo = -lambda1;
    if !w.hard_case_available() {
        // Live delta on the bottom cluster: f poles to -inf at the domain
        // edge and increases to zero, so the root is interiorly unique.
        let mu = solve_f_equals(&w, lo, true, l)?;
        return outcome_from_eigen(&w, p, mu, &w.pinned_coords(mu), 0.0);
    }

    // Hard case available: f is finite at the edge with value f_lim. Below
    // f_lim the target is only reachable by opening the free bottom
    // component at mu = -lambda_1; above it, by moving the shift. Both
    // candidates are formed when numerically admissible and the smaller
    // Maha^2 wins; a tie reports the union of the scenario sets.
    let f_lim = w.f_value(lo);
    let band = 1e-12 * (1.0 + f_lim.abs());
    let y_edge = w.pinned_coords(lo);

    let hard = if l <= f_lim + band {
        let free_sq = (2.0 * (l - f_lim) / lambda1).max(0.0);
        Some(outcome_from_eigen(&w, p, lo, &y_edge, free_sq.sqrt())?)
    } else {
        None
    };
    let iterated = if l >= f_lim - band {
        let mu = solve_f_equals(&w, lo, false, l)?;
        Some(outcome_from_eigen(&w, p, mu, &w.pinned_coords(mu), 0.0)?)
    } else {
        None
    };

    match (hard, iterated) {
        (Some(h), Some(b)) => {
            let tie =
                (h.maha_sq - b.maha_sq).abs() <= CANDIDATE_TIE_REL * (1.0 + h.maha_sq.min(b.maha_sq));
            if tie {
                Ok(merge_outcomes(h, b))
            } else if h.maha_sq <= b.maha_sq {
                Ok(h)
            } else {
                Ok(b)
            }
        }
        (Some(h), None) => Ok(h),
        (None, Some(b)) => Ok(b),
        (None, None) => Err(ErstError::Infeasible(
            "no admissible candidate for the loss target".into(),
        )),
    }
}

/// Union of two tied outcomes: scenario lists are merged with near-duplicate
/// elimination and the multiplicity is re-derived from the merged count
/// (keeping a continuum classification if either side carried one).
fn merge_outcomes(primary: SolverOutcome, other: SolverOutcome) -> SolverOutcome {
    let mut merged = primary.clone();
    for cand in other.scenarios {
        let dup = merged.scenarios.iter().any(|s| {
            (s.values() - cand.values()).norm() <= 1e-8 * (1.0 + cand.values().norm())
        });
        if !dup {
            merged.scenarios.push(cand);
        }
    }
    merged.multiplicity = match (&primary.multiplicity, &other.multiplicity) {
        (Multiplicity::Continuum(d), _) | (_, Multiplicity::Continuum(d)) => {
            Multiplicity::Continuum(*d)
        }
        _ if merged.scenarios.len() >= 2 => Multiplicity::Pair,
        _ => Multiplicity::Unique,
    };
    merged.continuum = merged.continuum.or(other.continuum);
    merged
}

/// Most plausible scenario(s) attaining a profit target.
///
/// Solves the sign-flipped problem — portfolio (-A, -B) with loss target
/// `-target_profit` — and reports the result against the original
/// portfolio, so `pnl` comes out as the attained profit. `mu` is the shift
/// of the flipped problem's optimality system.
pub fn profit_scenario(
    p: &QuadraticPortfolio,
    sigma: &DMatrix<f64>,
    target_profit: f64,
) -> Result<SolverOutcome> {
    if !target_profit.is_finite() {
        return Err(ErstError::NonFinite("target profit"));
    }
    if target_profit <= 0.0 {
        return Err(ErstError::OutOfRange {
            name: "target_profit",
            value: target_profit,
            range: "> 0",
        });
    }
    let flipped = QuadraticPortfolio::new(-p.a().clone(), -p.b().clone(), p.labels().to_vec())?;
    let mut out = match most_plausible_scenario(&flipped, sigma, -target_profit) {
        Ok(out) => out,
        Err(ErstError::UnreachableTarget { bound, .. }) => {
            // Translate the flipped bound back into profit units: the
            // portfolio's supremum profit.
            return Err(ErstError::UnreachableTarget {
                target: target_profit,
                bound: -bound,
            });
        }
        Err(e) => return Err(e),
    };
    // Same scenarios, re-read through the original portfolio.
    out.pnl = p.pnl(out.scenarios[0].values())?;
    Ok(out)
}
