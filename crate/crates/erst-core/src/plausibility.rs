//! Scenario plausibility and budget-respecting scenario fitting.
//!
//! A scenario's plausibility is the CDF of the model's squared-radius law at
//! its squared Mahalanobis radius: the probability that a draw from the
//! factor distribution lands closer to the center than the scenario does.
//! Small values mean "well inside the cloud", values near 1 mean "far out".
//!
//! [`fit_scenario`] rescales an implausible scenario back onto the
//! plausibility shell `alpha_max` by a homothety about the model mean: the
//! direction of the shock is preserved exactly, only its amplitude moves.
//! Scenarios already within budget are returned untouched.

use nalgebra::DVector;

use crate::elliptical::EllipticalModel;
use crate::error::{ErstError, Result};
use crate::util::check_finite_vector;

/// Labeled shock vector: one value per named risk factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    values: DVector<f64>,
    labels: Vec<String>,
}

impl Scenario {
    /// Scenario from values and matching labels.
    pub fn new(values: DVector<f64>, labels: Vec<String>) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(ErstError::DimensionMismatch {
                context: "scenario labels vs values",
                expected: values.len(),
                got: labels.len(),
            });
        }
        if values.is_empty() {
            return Err(ErstError::Degenerate("empty scenario".into()));
        }
        check_finite_vector(&values, "scenario values")?;
        Ok(Self { values, labels })
    }

    /// Scenario with generated labels `f1, f2, ...` for contexts that carry
    /// no factor names of their own.
    pub fn unlabeled(values: DVector<f64>) -> Result<Self> {
        let labels = (1..=values.len()).map(|i| format!("f{i}")).collect();
        Self::new(values, labels)
    }

    /// Shock values.
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Factor labels, aligned with [`Scenario::values`].
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of factors.
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Same values under new labels (e.g. to attach real factor names to a
    /// solver output).
    pub fn with_labels(self, labels: Vec<String>) -> Result<Self> {
        Self::new(self.values, labels)
    }
}

/// Outcome of a fit: the measured plausibility and, when the scenario had to
/// be pulled in, the rescaled version.
#[derive(Debug, Clone)]
pub struct FitReport {
    /// Plausibility of the input scenario.
    pub plausibility: f64,
    /// Squared Mahalanobis radius of the input scenario.
    pub maha_sq: f64,
    /// Plausibility ceiling the fit was asked to respect.
    pub alpha_max: f64,
    /// Squared radius of the `alpha_max` shell, `q = quantile(alpha_max)`.
    pub budget_maha_sq: f64,
    /// Homothety ratio applied to the centered shock (1 when no fit needed).
    pub ratio: f64,
    /// Rescaled scenario on the budget shell; `None` when the input was
    /// already within budget.
    pub fitted: Option<Scenario>,
}

/// Squared Mahalanobis radius of a scenario under a model.
pub fn mahalanobis_sq(scenario: &Scenario, model: &EllipticalModel) -> Result<f64> {
    model.maha_sq(scenario.values())
}

/// Plausibility of a scenario: CDF of the squared-radius law at its radius.
pub fn scenario_plausibility(scenario: &Scenario, model: &EllipticalModel) -> Result<f64> {
    let m2 = mahalanobis_sq(scenario, model)?;
    model.maha_sq_cdf(m2)
}

/// Rescale a scenario onto the `alpha_max` plausibility shell when it sits
/// outside, preserving its direction about the model mean.
///
/// The fitted scenario is `mu + K (S0 - mu)` with
/// `K = sqrt(quantile(alpha_max) / Maha^2(S0))`, so its squared radius equals
/// the budget radius exactly (up to floating-point rounding).
pub fn fit_scenario(
    scenario: &Scenario,
    alpha_max: f64,
    model: &EllipticalModel,
) -> Result<FitReport> {
    if !(alpha_max > 0.0 && alpha_max < 1.0) {
        return Err(ErstError::OutOfRange {
            name: "alpha_max",
            value: alpha_max,
            range: "(0, 1)",
        });
    }
    let maha_sq = mahalanobis_sq(scenario, model)?;
    let plausibility = model.maha_sq_cdf(maha_sq)?;
    let budget_maha_sq = model.maha_sq_quantile(alpha_max)?;

    if plausibility <= alpha_max {
        return Ok(FitReport {
            plausibility,
            maha_sq,
            alpha_max,
            budget_maha_sq,
            ratio: 1.0,
            fitted: None,
        });
    }
    if maha_sq <= 0.0 {
        // Outside the shell yet sitting at the center: no direction to scale.
        return Err(ErstError::Degenerate(
            "scenario coincides with the model mean; no direction to fit along".into(),
        ));
    }

    let ratio = (budget_maha_sq / maha_sq).sqrt();
    let centered = scenario.values() - model.mu();
    let fitted_values: DVector<f64> = model.mu() + centered * ratio;
    let fitted = Scenario::new(fitted_values, scenario.labels().to_vec())?;
    debug_assert!({
        let check = model.maha_sq(fitted.values()).unwrap();
        (check - budget_maha_sq).abs() <= 1e-9 * (1.0 + budget_maha_sq)
    });
    Ok(FitReport {
        plausibility,
        maha_sq,
        alpha_max,
        budget_maha_sq,
        ratio,
        fitted: Some(fitted),
    })
}
