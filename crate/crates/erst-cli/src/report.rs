//! Report rendering and the pre-print self-audit.
//!
//! Reports are deterministic: identical inputs and seeds produce
//! byte-identical text, so runs can be diffed and archived. Floats print in
//! the shortest form that round-trips; an infinite Lagrange shift prints as
//! `inf` (and serializes as the string `"inf"`, since JSON has no infinity).
//!
//! Before anything is printed, every scenario in a solver outcome is pushed
//! back through the P&L function and the Mahalanobis form it supposedly
//! optimizes. A mismatch aborts the run with exit code 5 — a wrong number
//! on a risk report is strictly worse than no number.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Serialize, Serializer};

use erst_core::{
    EllipticalModel, Family, FitReport, Multiplicity, PlausibilityBudget, Scenario,
    SolverOutcome, OUTCOME_SELF_TOL,
};

use crate::errors::{CliError, CliResult};

/// Shortest round-trip rendering; infinities come out as `inf` / `-inf`.
pub fn fmt_f(v: f64) -> String {
    format!("{v}")
}

/// One `label=value` list on a single line.
pub fn fmt_scenario(s: &Scenario) -> String {
    s.labels()
        .iter()
        .zip(s.values().iter())
        .map(|(l, v)| format!("{l}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Human name of the distribution family.
pub fn family_name(family: Family) -> String {
    match family {
        Family::Normal => "normal".to_string(),
        Family::StudentT { nu } => format!("student-t(nu={nu})"),
    }
}

fn close(re_evaluated: f64, reported: f64) -> bool {
    (re_evaluated - reported).abs() <= OUTCOME_SELF_TOL * (1.0 + reported.abs())
}

/// Re-evaluate every scenario of an outcome through the P&L function and
/// the model's Mahalanobis form; any disagreement with the reported numbers
/// is an audit failure.
pub fn audit_outcome(
    out: &SolverOutcome,
    pnl: impl Fn(&DVector<f64>) -> erst_core::Result<f64>,
    model: &EllipticalModel,
) -> CliResult<()> {
    for (i, s) in out.scenarios.iter().enumerate() {
        let p = pnl(s.values())?;
        if !close(p, out.pnl) {
            return Err(CliError::Audit(format!(
                "scenario {} re-prices to {p}, report says {}",
                i + 1,
                out.pnl
            )));
        }
        let m2 = model.maha_sq(s.values())?;
        if !close(m2, out.maha_sq) {
            return Err(CliError::Audit(format!(
                "scenario {} has Maha^2 {m2}, report says {}",
                i + 1,
                out.maha_sq
            )));
        }
    }
    Ok(())
}

/// Re-evaluate a fitted scenario against the budget shell it claims to sit
/// on.
pub fn audit_fit(report: &FitReport, model: &EllipticalModel) -> CliResult<()> {
    if let Some(fitted) = &report.fitted {
        let m2 = model.maha_sq(fitted.values())?;
        if !close(m2, report.budget_maha_sq) {
            return Err(CliError::Audit(format!(
                "fitted scenario has Maha^2 {m2}, budget shell is {}",
                report.budget_maha_sq
            )));
        }
    }
    Ok(())
}

/// Scenario as parallel label/value arrays.
#[derive(Serialize)]
pub struct ScenarioJson {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl ScenarioJson {
    pub fn from(s: &Scenario) -> Self {
        Self {
            labels: s.labels().to_vec(),
            values: s.values().iter().copied().collect(),
        }
    }
}

#[derive(Serialize)]
pub struct MultiplicityJson {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
}

impl MultiplicityJson {
    pub fn from(m: Multiplicity) -> Self {
        match m {
            Multiplicity::Unique => Self {
                kind: "unique",
                dimension: None,
            },
            Multiplicity::Pair => Self {
                kind: "pair",
                dimension: None,
            },
            Multiplicity::Continuum(d) => Self {
                kind: "continuum",
                dimension: Some(d),
            },
        }
    }
}

#[derive(Serialize)]
pub struct ContinuumJson {
    pub center: Vec<f64>,
    /// One inner array per free direction (unit length in the Mahalanobis
    /// metric).
    pub directions: Vec<Vec<f64>>,
    pub radius: f64,
}

fn serialize_maybe_infinite<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// JSON mirror of a solver outcome.
#[derive(Serialize)]
pub struct OutcomeJson {
    pub pnl: f64,
    pub maha_sq: f64,
    #[serde(serialize_with = "serialize_maybe_infinite")]
    pub mu: f64,
    pub multiplicity: MultiplicityJson,
    pub scenarios: Vec<ScenarioJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuum: Option<ContinuumJson>,
}

impl OutcomeJson {
    pub fn from(out: &SolverOutcome) -> Self {
        Self {
            pnl: out.pnl,
            maha_sq: out.maha_sq,
            mu: out.mu,
            multiplicity: MultiplicityJson::from(out.multiplicity),
            scenarios: out.scenarios.iter().map(ScenarioJson::from).collect(),
            continuum: out.continuum.as_ref().map(|c| ContinuumJson {
                center: c.center.iter().copied().collect(),
                directions: (0..c.directions.ncols())
                    .map(|j| c.directions.column(j).iter().copied().collect())
                    .collect(),
                radius: c.radius,
            }),
        }
    }
}

#[derive(Serialize)]
pub struct BudgetJson {
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub q: f64,
}

impl BudgetJson {
    pub fn from(budget: &PlausibilityBudget) -> Self {
        match budget.mode() {
            erst_core::BudgetMode::Quantile(alpha) => Self {
                mode: "quantile",
                alpha: Some(*alpha),
                q: budget.q(),
            },
            erst_core::BudgetMode::Historical(_) => Self {
                mode: "historical",
                alpha: None,
                q: budget.q(),
            },
        }
    }

    pub fn describe(&self) -> String {
        match self.alpha {
            Some(a) => format!("quantile alpha={a} q={}", fmt_f(self.q)),
            None => format!("historical q={}", fmt_f(self.q)),
        }
    }
}

/// Append the shared outcome block of a text report.
pub fn push_outcome_text(text: &mut String, out: &SolverOutcome) {
    _ = writeln!(text, "pnl: {}", fmt_f(out.pnl));
    _ = writeln!(text, "maha_sq: {}", fmt_f(out.maha_sq));
    _ = writeln!(text, "mu: {}", fmt_f(out.mu));
    let mult = match out.multiplicity {
        Multiplicity::Unique => "unique".to_string(),
        Multiplicity::Pair => "pair".to_string(),
        Multiplicity::Continuum(d) => format!("continuum({d})"),
    };
    _ = writeln!(text, "multiplicity: {mult}");
    for (i, s) in out.scenarios.iter().enumerate() {
        _ = writeln!(text, "scenario[{}]: {}", i + 1, fmt_scenario(s));
    }
    if let Some(c) = &out.continuum {
        _ = writeln!(
            text,
            "continuum: radius={} free_dimensions={}",
            fmt_f(c.radius),
            c.directions.ncols()
        );
    }
}
