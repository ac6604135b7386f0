//! Portfolio P&L models and their risk comparators.
//!
//! Two portfolio shapes are supported:
//!
//! * [`LinearPortfolio`]: P&L(S) = omega^T S (pure delta).
//! * [`QuadraticPortfolio`]: P&L(S) = 1/2 S^T A S + B^T S (delta-gamma).
//!   The quadratic term carries the explicit 1/2, so `A` is the Hessian of
//!   the P&L; inputs are symmetrized by averaging and the adjustment is
//!   recorded on the portfolio.
//!
//! Besides evaluation, the module provides the closed-form Gaussian VaR and
//! expected shortfall of linear portfolios and a seeded Monte Carlo VaR for
//! arbitrary quadratic portfolios under any elliptical model, which is the
//! comparator the worst-case solvers are measured against.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::elliptical::{std_normal_density, std_normal_quantile, EllipticalModel};
use crate::error::{ErstError, Result};
use crate::tolerances::SYMMETRY_TOL;
use crate::util::{check_finite_matrix, check_finite_vector, check_symmetric, max_asymmetry};

/// Pure delta portfolio: P&L(S) = omega^T S.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPortfolio {
    omega: DVector<f64>,
}

impl LinearPortfolio {
    /// Portfolio from factor weights.
    pub fn new(omega: DVector<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(ErstError::Degenerate("empty weight vector".into()));
        }
        check_finite_vector(&omega, "portfolio weights")?;
        Ok(Self { omega })
    }

    /// Factor weights.
    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    /// Number of factors.
    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// P&L at a shock vector.
    pub fn pnl(&self, s: &DVector<f64>) -> Result<f64> {
        if s.len() != self.dim() {
            return Err(ErstError::DimensionMismatch {
                context: "shock vs portfolio",
                expected: self.dim(),
                got: s.len(),
            });
        }
        Ok(self.omega.dot(s))
    }
}

/// Delta-gamma portfolio: P&L(S) = 1/2 S^T A S + B^T S.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPortfolio {
    a: DMatrix<f64>,
    b: DVector<f64>,
    labels: Vec<String>,
    symmetrized: bool,
    input_asymmetry: f64,
}

impl QuadraticPortfolio {
    /// Portfolio from gamma matrix, delta vector and factor labels.
    ///
    /// `a` is symmetrized by averaging with its transpose; whether that
    /// changed anything beyond rounding is recorded and queryable through
    /// [`QuadraticPortfolio::was_symmetrized`].
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, labels: Vec<String>) -> Result<Self> {
        let n = b.len();
        if n == 0 {
            return Err(ErstError::Degenerate("empty portfolio".into()));
        }
        if a.nrows() != n || a.ncols() != n {
            return Err(ErstError::DimensionMismatch {
                context: "gamma matrix vs delta vector",
                expected: n,
                got: a.nrows().max(a.ncols()),
            });
        }
        if labels.len() != n {
            return Err(ErstError::DimensionMismatch {
                context: "labels vs portfolio",
                expected: n,
                got: labels.len(),
            });
        }
        check_finite_matrix(&a, "gamma matrix")?;
        check_finite_vector(&b, "delta vector")?;
        let input_asymmetry = max_asymmetry(&a);
        let symmetrized = input_asymmetry > SYMMETRY_TOL * a.amax().max(1.0);
        let a_sym = 0.5 * (&a + a.transpose());
        Ok(Self {
            a: a_sym,
            b,
            labels,
            symmetrized,
            input_asymmetry,
        })
    }

    /// Quadratic view of a linear portfolio (A = 0, generated labels).
    pub fn from_linear(p: &LinearPortfolio) -> Self {
        let n = p.dim();
        let labels = (1..=n).map(|i| format!("f{i}")).collect();
        Self {
            a: DMatrix::zeros(n, n),
            b: p.omega().clone(),
            labels,
            symmetrized: false,
            input_asymmetry: 0.0,
        }
    }

    /// Symmetrized gamma matrix (the P&L Hessian).
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Delta vector.
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Factor labels.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of factors.
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Whether the input gamma matrix needed symmetrizing beyond rounding.
    pub fn was_symmetrized(&self) -> bool {
        self.symmetrized
    }

    /// Largest |a_ij - a_ji| seen on the input gamma matrix.
    pub fn input_asymmetry(&self) -> f64 {
        self.input_asymmetry
    }

    /// P&L at a shock vector.
    pub fn pnl(&self, s: &DVector<f64>) -> Result<f64> {
        if s.len() != self.dim() {
            return Err(ErstError::DimensionMismatch {
                context: "shock vs portfolio",
                expected: self.dim(),
                got: s.len(),
            });
        }
        Ok(0.5 * (&self.a * s).dot(s) + self.b.dot(s))
    }
}

/// Monte Carlo estimate with an order-statistic standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// Estimated quantile of the P&L distribution (negative for losses).
    pub value: f64,
    /// Half-width of the +/-1-sigma order-statistic bracket.
    pub std_error: f64,
}

/// Gaussian closed-form VaR of a linear portfolio:
/// `-z_alpha * sqrt(omega^T Sigma omega)`, a negative number for alpha > 1/2.
pub fn var_linear_normal(
    p: &LinearPortfolio,
    sigma: &DMatrix<f64>,
    alpha: f64,
) -> Result<f64> {
    let spread = portfolio_std(p, sigma)?;
    let z = std_normal_quantile(alpha)?;
    Ok(-z * spread)
}

/// Gaussian closed-form expected shortfall of a linear portfolio:
/// `-(phi(z_alpha) / (1 - alpha)) * sqrt(omega^T Sigma omega)`.
pub fn es_linear_normal(
    p: &LinearPortfolio,
    sigma: &DMatrix<f64>,
    alpha: f64,
) -> Result<f64> {
    let spread = portfolio_std(p, sigma)?;
    let z = std_normal_quantile(alpha)?;
    Ok(-(std_normal_density(z) / (1.0 - alpha)) * spread)
}

/// sqrt(omega^T Sigma omega) with symmetry/shape validation.
fn portfolio_std(p: &LinearPortfolio, sigma: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(sigma)?;
    if sigma.nrows() != p.dim() {
        return Err(ErstError::DimensionMismatch {
            context: "covariance vs portfolio",
            expected: p.dim(),
            got: sigma.nrows(),
        });
    }
    let v = (sigma * p.omega()).dot(p.omega());
    if v < -1e-12 * sigma.amax().max(1.0) {
        return Err(ErstError::NotPositiveDefinite { min_eigenvalue: v });
    }
    Ok(v.max(0.0).sqrt())
}

/// Seeded Monte Carlo VaR of a quadratic portfolio under an elliptical model:
/// the empirical `(1 - alpha)` lower quantile of simulated P&L.
///
/// A single ChaCha stream drives the simulation, so identical
/// `(seed, n_sims)` reproduce the estimate bit for bit.
pub fn var_monte_carlo(
    p: &QuadraticPortfolio,
    model: &EllipticalModel,
    alpha: f64,
    n_sims: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ErstError::OutOfRange {
            name: "alpha",
            value: alpha,
            range: "(0, 1)",
        });
    }
    if n_sims < 1000 {
        return Err(ErstError::OutOfRange {
            name: "n_sims",
            value: n_sims as f64,
            range: ">= 1000",
        });
    }
    if p.dim() != model.dim() {
        return Err(ErstError::DimensionMismatch {
            context: "portfolio vs model",
            expected: model.dim(),
            got: p.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pnls = Vec::with_capacity(n_sims);
    for _ in 0..n_sims {
        let s = model.sample(&mut rng);
        pnls.push(p.pnl(&s)?);
    }
    Ok(empirical_lower_quantile(pnls, 1.0 - alpha))
}

/// Lower empirical quantile with an order-statistic standard error: the
/// estimate is the ceil(p*n)-th order statistic; the error is half the gap
/// between the order statistics one binomial standard deviation away.
pub(crate) fn empirical_lower_quantile(mut xs: Vec<f64>, tail: f64) -> McEstimate {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let k = ((tail * n as f64).ceil() as usize).clamp(1, n);
    let value = xs[k - 1];
    let d = (n as f64 * tail * (1.0 - tail)).sqrt().ceil() as usize;
    let lo = k.saturating_sub(1 + d);
    let hi = (k - 1 + d).min(n - 1);
    McEstimate {
        value,
        std_error: 0.5 * (xs[hi] - xs[lo]),
    }
}
