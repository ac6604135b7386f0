//! Independent cross-checks for the stress solvers.
//!
//! Trusting a constrained optimizer means checking it against something that
//! cannot share its bugs. Two kinds of oracle live here:
//!
//! * **Closed forms** for the pure-gamma book: a two-factor portfolio with
//!   `P&L = S^T diag(1,-1) S` (no one-half), equal volatilities and
//!   correlation `rho`. Its worst case over the plausibility ellipsoid and
//!   its normal-approximation VaR both reduce to one-line formulas in
//!   `sigma^2 sqrt(1 - rho^2)`.
//! * **Brute force**: dense randomized search over the ellipsoid (for the
//!   budget-driven problem) and over iso-loss rays (for the loss-driven
//!   problem). Slow, dimension-capped, and entirely free of stationarity
//!   reasoning — which is exactly what makes them convincing referees.
//!
//! The oracles ship in the library rather than hiding in test code so that
//! any result can be audited after the fact.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::elliptical::{chi2_quantile, std_normal_quantile};
use crate::error::{ErstError, Result};
use crate::loss_driven::{whiten, WhitenedProblem};
use crate::plausibility::Scenario;
use crate::pnl_model::QuadraticPortfolio;

/// Fixed stream for the randomized searches: the oracles must be exactly
/// reproducible run to run.
const ORACLE_SEED: u64 = 0x0e57_0e57;

/// The pure-gamma reference portfolio: `P&L = S^T diag(1,-1) S` on two
/// factors with common volatility `sigma` and correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureGammaSpec {
    sigma: f64,
    rho: f64,
    alpha: f64,
}

impl PureGammaSpec {
    /// Spec with `sigma > 0`, `|rho| < 1` and `alpha` in (0, 1).
    pub fn new(sigma: f64, rho: f64, alpha: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ErstError::OutOfRange {
                name: "sigma",
                value: sigma,
                range: "> 0",
            });
        }
        if !(rho.is_finite() && rho.abs() < 1.0) {
            return Err(ErstError::OutOfRange {
                name: "rho",
                value: rho,
                range: "(-1, 1)",
            });
        }
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(ErstError::OutOfRange {
                name: "alpha",
                value: alpha,
                range: "(0, 1)",
            });
        }
        Ok(Self { sigma, rho, alpha })
    }

    /// Common factor volatility.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Factor correlation.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Plausibility level.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The covariance matrix the spec describes.
    pub fn covariance(&self) -> DMatrix<f64> {
        let v = self.sigma * self.sigma;
        DMatrix::from_row_slice(2, 2, &[v, self.rho * v, self.rho * v, v])
    }

    /// The same book in the one-half convention used by the solvers:
    /// `A = 2 diag(1,-1)`, `B = 0`.
    pub fn portfolio(&self) -> QuadraticPortfolio {
        QuadraticPortfolio::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -2.0]),
            DVector::zeros(2),
            vec!["f1".into(), "f2".into()],
        )
        .expect("fixed coefficients are valid")
    }
}

/// Worst P&L of the pure-gamma book over the plausibility ellipsoid:
/// `-q * sigma^2 * sqrt(1 - rho^2)` with `q` the chi-square(2) quantile at
/// `alpha`.
///
/// The saddle geometry puts the minimum on the 45-degree diagonal of the
/// whitened ellipse; the two principal variances of the covariance multiply
/// to `sigma^4 (1 - rho^2)`, whose square root gives the `sigma^2` factor.
pub fn pure_gamma_maxerst(spec: &PureGammaSpec) -> f64 {
    let q = chi2_quantile(spec.alpha, 2).expect("alpha validated at construction");
    -q * spec.sigma * spec.sigma * (1.0 - spec.rho * spec.rho).sqrt()
}

/// Normal-approximation VaR of the pure-gamma book:
/// `-2 N^{-1}(alpha) sigma^2 sqrt(1 - rho^2)`.
///
/// The P&L is a product of two independent centered normals; approximating
/// that product by a normal with the same variance gives this closed form.
/// The true product distribution has heavier tails, so Monte Carlo VaR of
/// the same book sits noticeably below this value — the gap is the paper
/// cut the approximation knowingly accepts, not a bug.
pub fn pure_gamma_var(spec: &PureGammaSpec) -> f64 {
    let z = std_normal_quantile(spec.alpha).expect("alpha validated at construction");
    -2.0 * z * spec.sigma * spec.sigma * (1.0 - spec.rho * spec.rho).sqrt()
}

/// Result of a brute-force ellipsoid search: the best P&L seen and where.
#[derive(Debug, Clone)]
pub struct GridSearchMin {
    /// Smallest P&L found.
    pub value: f64,
    /// Scenario attaining it.
    pub argmin: Scenario,
}

/// Result of a brute-force iso-loss search: the smallest squared
/// Mahalanobis radius reaching the target and where.
#[derive(Debug, Clone)]
pub struct GridSearchTarget {
    /// Smallest squared Mahalanobis radius found on the target set.
    pub maha_sq: f64,
    /// Scenario attaining it.
    pub scenario: Scenario,
}

fn guard_small_dim(n: usize) -> Result<()> {
    if n > 3 {
        return Err(ErstError::InvalidInput(format!(
            "brute-force search is capped at 3 factors, got {n}"
        )));
    }
    Ok(())
}

/// Evaluate the whitened P&L at eigen coordinates `y` without allocating:
/// `sum_i 0.5 lambda_i y_i^2 + beta_i y_i`.
fn eigen_pnl(w: &WhitenedProblem, y: &[f64]) -> f64 {
    let lambda = w.eigenvalues();
    let beta = w.beta();
    let mut acc = 0.0;
    for i in 0..y.len() {
        acc += 0.5 * lambda[i] * y[i] * y[i] + beta[i] * y[i];
    }
    acc
}

/// Draw a direction uniformly on the unit sphere into `dir`.
fn random_direction(rng: &mut ChaCha8Rng, dir: &mut [f64]) {
    loop {
        let mut norm_sq = 0.0;
        for d in dir.iter_mut() {
            *d = rng.sample(StandardNormal);
            norm_sq += *d * *d;
        }
        if norm_sq > 1e-12 {
            let inv = norm_sq.sqrt().recip();
            for d in dir.iter_mut() {
                *d *= inv;
            }
            return;
        }
    }
}

/// Minimize P&L over the plausibility ellipsoid by dense random sampling.
///
/// Sampling happens in whitened eigen coordinates where the ellipsoid is
/// the ball of radius `sqrt(q)`: half the points are placed on the boundary
/// sphere (where smooth minima live), half fill the interior with the
/// `U^(1/n)` radius law that makes the ball sampling uniform. Capped at
/// three factors; `n_points` of a few hundred thousand resolves the optimum
/// to roughly 1e-3 relative.
pub fn brute_force_maxerst(
    p: &QuadraticPortfolio,
    sigma: &DMatrix<f64>,
    q: f64,
    n_points: usize,
) -> Result<GridSearchMin> {
    guard_small_dim(p.dim())?;
    if !(q.is_finite() && q >= 0.0) {
        return Err(ErstError::OutOfRange {
            name: "q",
            value: q,
            range: ">= 0",
        });
    }
    if n_points < 2 {
        return Err(ErstError::OutOfRange {
            name: "n_points",
            value: n_points as f64,
            range: ">= 2",
        });
    }
    let w = whiten(p, sigma)?;
    let n = w.dim();
    if q == 0.0 {
        return Ok(GridSearchMin {
            value: 0.0,
            argmin: Scenario::new(DVector::zeros(n), p.labels().to_vec())?,
        });
    }
    let radius = q.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let mut dir = vec![0.0; n];
    let mut best_value = 0.0; // the center is always admissible
    let mut best_y = vec![0.0; n];
    for k in 0..n_points {
        random_direction(&mut rng, &mut dir);
        let r = if k % 2 == 0 {
            radius
        } else {
            let u: f64 = rng.random();
            radius * u.powf(1.0 / n as f64)
        };
        for d in dir.iter_mut() {
            *d *= r;
        }
        let value = eigen_pnl(&w, &dir);
        if value < best_value {
            best_value = value;
            best_y.copy_from_slice(&dir);
        }
    }
    let scenario = w.scenario_from_eigen(&DVector::from_vec(best_y));
    Ok(GridSearchMin {
        value: best_value,
        argmin: Scenario::new(scenario, p.labels().to_vec())?,
    })
}

/// Along the ray `t * dir` (t > 0), the smallest `t` where the whitened
/// P&L first reaches the loss level `l`, if any.
fn first_crossing(w: &WhitenedProblem, dir: &[f64], l: f64) -> Option<f64> {
    let lambda = w.eigenvalues();
    let beta = w.beta();
    let mut c2 = 0.0; // quadratic coefficient: sum lambda_i d_i^2
    let mut c1 = 0.0; // linear coefficient: sum beta_i d_i
    for i in 0..dir.len() {
        c2 += lambda[i] * dir[i] * dir[i];
        c1 += beta[i] * dir[i];
    }
    // Solve 0.5 c2 t^2 + c1 t = l for the smallest positive root.
    if c2.abs() < 1e-300 {
        let t = l / c1;
        return (t.is_finite() && t > 0.0).then_some(t);
    }
    let disc = c1 * c1 + 2.0 * c2 * l;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let r1 = (-c1 - sq) / c2;
    let r2 = (-c1 + sq) / c2;
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if lo > 0.0 {
        Some(lo)
    } else if hi > 0.0 {
        Some(hi)
    } else {
        None
    }
}

/// Find the smallest squared Mahalanobis radius reaching P&L `l` by ray
/// search: for random unit directions in whitened space the crossing
/// distance solves a scalar quadratic exactly, so every sampled direction
/// contributes a point that sits exactly on the iso-loss surface. A local
/// shrink search then refines the best direction. Capped at three factors.
pub fn brute_force_loss_scenario(
    p: &QuadraticPortfolio,
    sigma: &DMatrix<f64>,
    l: f64,
    n_points: usize,
) -> Result<GridSearchTarget> {
    guard_small_dim(p.dim())?;
    if !l.is_finite() {
        return Err(ErstError::NonFinite("loss target"));
    }
    if l > 0.0 {
        return Err(ErstError::InvalidInput(
            "loss target must be nonpositive".into(),
        ));
    }
    if n_points < 2 {
        return Err(ErstError::OutOfRange {
            name: "n_points",
            value: n_points as f64,
            range: ">= 2",
        });
    }
    let w = whiten(p, sigma)?;
    let n = w.dim();
    if l == 0.0 {
        return Ok(GridSearchTarget {
            maha_sq: 0.0,
            scenario: Scenario::new(DVector::zeros(n), p.labels().to_vec())?,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let mut dir = vec![0.0; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..n_points {
        random_direction(&mut rng, &mut dir);
        if let Some(t) = first_crossing(&w, &dir, l) {
            if best.as_ref().map_or(true, |(bt, _)| t < *bt) {
                best = Some((t, dir.clone()));
            }
        }
    }
    let (mut best_t, mut best_dir) = best.ok_or_else(|| {
        ErstError::Infeasible(format!(
            "no sampled direction reaches the loss level {l}"
        ))
    })?;

    // Polish the winner: perturb the direction with Gaussian noise of
    // geometrically shrinking scale, keeping any proposal that crosses
    // sooner.
    let mut scale = 0.5;
    let mut proposal = vec![0.0; n];
    while scale > 1e-7 {
        for _ in 0..8 {
            let mut norm_sq = 0.0;
            for i in 0..n {
                let bump: f64 = rng.sample(StandardNormal);
                proposal[i] = best_dir[i] + scale * bump;
                norm_sq += proposal[i] * proposal[i];
            }
            if norm_sq <= 1e-12 {
                continue;
            }
            let inv = norm_sq.sqrt().recip();
            for v in proposal.iter_mut() {
                *v *= inv;
            }
            if let Some(t) = first_crossing(&w, &proposal, l) {
                if t < best_t {
                    best_t = t;
                    best_dir.copy_from_slice(&proposal);
                }
            }
        }
        scale *= 0.8;
    }

    let y = DVector::from_iterator(n, best_dir.iter().map(|d| d * best_t));
    let scenario = w.scenario_from_eigen(&y);
    Ok(GridSearchTarget {
        maha_sq: best_t * best_t,
        scenario: Scenario::new(scenario, p.labels().to_vec())?,
    })
}
