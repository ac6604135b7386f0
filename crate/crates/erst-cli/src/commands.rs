//! The five subcommands and their shared plumbing.
//!
//! Every command resolves its covariance the same way — `--sigma` for an
//! explicit matrix file, `--panel` to estimate one from a shock panel — and
//! builds a zero-mean elliptical model over it. Seeds resolve with the
//! precedence flag > `ERST_SEED` environment variable > built-in default,
//! so pipelines can pin reproducibility globally without threading a flag
//! through every call.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use erst_core::{
    block_stress, calibrate_theta, cluster_betas, compress_portfolio, es_linear_normal,
    estimate_cov, fit_scenario, is_positive_definite, maxerst_linear, maxerst_quadratic,
    most_plausible_scenario, plausibility_budget, profit_scenario, reconstruct_scenario,
    shrink_to_pd, single_factor_stress, var_monte_carlo, BudgetMode, ClusterMap,
    EllipticalModel, Family, McConfig, PlausibilityBudget, QuadraticPortfolio, Scenario,
    SeriesPanel, Shrink, SolverOutcome, StressedCovariance, ThetaBlock, ThetaSpec,
    DEFAULT_MC_DRAWS, DEFAULT_MC_SEED, OUTCOME_SELF_TOL,
};

use crate::errors::{CliError, CliResult};
use crate::io::{
    check_labels, correlation_of, parse_inline_shock, read_covariance, read_panel,
    read_portfolio, read_shock_file, scenario_from_shocks, write_matrix, Book, ParsedPortfolio,
};
use crate::report::{
    audit_fit, audit_outcome, family_name, fmt_f, fmt_scenario, push_outcome_text, BudgetJson,
    OutcomeJson, ScenarioJson,
};

/// Distribution family flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    /// Gaussian factors; the squared radius follows a chi-square law.
    Normal,
    /// Student-t factors; the squared-radius law is tabulated by seeded
    /// Monte Carlo.
    StudentT,
}

/// Covariance source and distribution model, shared by the solve modes.
#[derive(Args)]
pub struct ModelArgs {
    /// Covariance matrix CSV (row-labeled square matrix)
    #[arg(long, value_name = "FILE", conflicts_with = "panel")]
    pub sigma: Option<PathBuf>,

    /// Shock panel CSV; the sample covariance is estimated from it
    #[arg(long, value_name = "FILE")]
    pub panel: Option<PathBuf>,

    /// Distribution family behind the plausibility law
    #[arg(long, value_enum, default_value_t = FamilyArg::Normal)]
    pub family: FamilyArg,

    /// Degrees of freedom (student-t family only)
    #[arg(long, value_name = "NU")]
    pub nu: Option<f64>,

    /// Monte Carlo draws behind the student-t radius law
    #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
    pub mc_draws: usize,

    /// RNG seed (default: ERST_SEED environment variable, then a built-in)
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ModelArgs {
    fn family(&self) -> CliResult<Family> {
        match self.family {
            FamilyArg::Normal => {
                if self.nu.is_some() {
                    return Err(CliError::Input(
                        "--nu only applies to --family student-t".into(),
                    ));
                }
                Ok(Family::Normal)
            }
            FamilyArg::StudentT => {
                let nu = self.nu.ok_or_else(|| {
                    CliError::Input("--family student-t requires --nu".into())
                })?;
                Ok(Family::StudentT { nu })
            }
        }
    }

    fn covariance(&self) -> CliResult<(Vec<String>, DMatrix<f64>)> {
        match (&self.sigma, &self.panel) {
            (Some(file), None) => read_covariance(file),
            (None, Some(file)) => {
                let panel = read_panel(file)?;
                let cov = estimate_cov(&panel)?;
                Ok((panel.labels().to_vec(), cov))
            }
            _ => Err(CliError::Input(
                "exactly one of --sigma or --panel is required".into(),
            )),
        }
    }

    fn model(&self, sigma: DMatrix<f64>) -> CliResult<EllipticalModel> {
        let n = sigma.nrows();
        let mc = McConfig {
            draws: self.mc_draws,
            seed: resolve_seed(self.seed)?,
        };
        Ok(EllipticalModel::with_mc_config(
            DVector::zeros(n),
            sigma,
            self.family()?,
            mc,
        )?)
    }
}

/// Budget specification: a confidence level or a reference scenario.
#[derive(Args)]
pub struct BudgetArgs {
    /// Confidence level; the budget is the Maha^2 quantile at this level
    #[arg(long, conflicts_with = "historical_scenario")]
    pub alpha: Option<f64>,

    /// Reference scenario file ("label value" lines); its Maha^2 becomes
    /// the budget
    #[arg(long, value_name = "FILE")]
    pub historical_scenario: Option<PathBuf>,
}

impl BudgetArgs {
    fn resolve(&self, labels: &[String], model: &EllipticalModel) -> CliResult<PlausibilityBudget> {
        match (self.alpha, &self.historical_scenario) {
            (Some(alpha), None) => {
                check_probability("--alpha", alpha)?;
                Ok(plausibility_budget(BudgetMode::Quantile(alpha), model)?)
            }
            (None, Some(file)) => {
                let pairs = read_shock_file(file)?;
                let reference = scenario_from_shocks(&pairs, labels)?;
                Ok(plausibility_budget(
                    BudgetMode::Historical(reference.values().clone()),
                    model,
                )?)
            }
            _ => Err(CliError::Input(
                "exactly one of --alpha or --historical-scenario is required".into(),
            )),
        }
    }
}

/// Output routing shared by all commands.
#[derive(Args)]
pub struct OutputArgs {
    /// Emit the report as JSON instead of text
    #[arg(long)]
    pub json: bool,

    /// Also write the report to this file
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

impl OutputArgs {
    fn emit(&self, text: String) -> CliResult<()> {
        if let Some(path) = &self.output {
            std::fs::write(path, &text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        }
        print!("{text}");
        Ok(())
    }
}

/// Seed precedence: flag, then `ERST_SEED`, then the built-in default.
pub fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("ERST_SEED") {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            CliError::Input(format!("ERST_SEED={raw:?} is not an unsigned integer"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_MC_SEED),
        Err(e) => Err(CliError::Input(format!("ERST_SEED: {e}"))),
    }
}

fn check_probability(name: &str, v: f64) -> CliResult<()> {
    if !(v.is_finite() && v > 0.0 && v < 1.0) {
        return Err(CliError::Input(format!(
            "{name} = {v} must lie strictly between 0 and 1"
        )));
    }
    Ok(())
}

fn relabel(out: &mut SolverOutcome, labels: &[String]) -> CliResult<()> {
    let scenarios = std::mem::take(&mut out.scenarios);
    for s in scenarios {
        out.scenarios.push(s.with_labels(labels.to_vec())?);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Arguments for scenario plausibility measurement and fitting.
#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Inline shock, repeatable: --shock LABEL=VALUE (unnamed factors are 0)
    #[arg(long = "shock", value_name = "LABEL=VALUE")]
    pub shocks: Vec<String>,

    /// Shock file ("label value" lines), combined with inline shocks
    #[arg(long, value_name = "FILE")]
    pub shock_file: Option<PathBuf>,

    /// Plausibility ceiling; scenarios beyond it are rescaled onto it
    #[arg(long)]
    pub alpha_max: f64,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Serialize)]
struct FitJson {
    mode: &'static str,
    family: String,
    labels: Vec<String>,
    scenario: ScenarioJson,
    maha_sq: f64,
    plausibility: f64,
    alpha_max: f64,
    budget_maha_sq: f64,
    ratio: f64,
    fitted: Option<ScenarioJson>,
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    check_probability("--alpha-max", args.alpha_max)?;
    let (labels, sigma) = args.model.covariance()?;
    let model = args.model.model(sigma)?;

    let mut pairs = Vec::new();
    if let Some(file) = &args.shock_file {
        pairs.extend(read_shock_file(file)?);
    }
    for raw in &args.shocks {
        pairs.push(parse_inline_shock(raw)?);
    }
    let scenario = scenario_from_shocks(&pairs, &labels)?;

    let report = fit_scenario(&scenario, args.alpha_max, &model)?;
    audit_fit(&report, &model)?;

    let rendered = if args.out.json {
        let doc = FitJson {
            mode: "fit",
            family: family_name(model.family()),
            labels: labels.clone(),
            scenario: ScenarioJson::from(&scenario),
            maha_sq: report.maha_sq,
            plausibility: report.plausibility,
            alpha_max: report.alpha_max,
            budget_maha_sq: report.budget_maha_sq,
            ratio: report.ratio,
            fitted: report.fitted.as_ref().map(ScenarioJson::from),
        };
        format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable"))
    } else {
        let mut text = String::new();
        _ = writeln!(text, "mode: fit");
        _ = writeln!(text, "family: {}", family_name(model.family()));
        _ = writeln!(text, "factors: {}", labels.join(", "));
        _ = writeln!(text, "scenario: {}", fmt_scenario(&scenario));
        _ = writeln!(text, "maha_sq: {}", fmt_f(report.maha_sq));
        _ = writeln!(text, "plausibility: {}", fmt_f(report.plausibility));
        _ = writeln!(text, "alpha_max: {}", fmt_f(report.alpha_max));
        _ = writeln!(text, "budget_maha_sq: {}", fmt_f(report.budget_maha_sq));
        match &report.fitted {
            Some(fitted) => {
                _ = writeln!(text, "ratio: {}", fmt_f(report.ratio));
                _ = writeln!(text, "fitted: {}", fmt_scenario(fitted));
                _ = writeln!(
                    text,
                    "fitted_maha_sq: {}",
                    fmt_f(model.maha_sq(fitted.values())?)
                );
            }
            None => {
                _ = writeln!(text, "fitted: not needed (scenario within budget)");
            }
        }
        text
    };
    args.out.emit(rendered)
}

// ---------------------------------------------------------------------------
// maxerst / loss
// ---------------------------------------------------------------------------

/// Arguments for the budget-driven worst-case solve.
#[derive(Args)]
pub struct MaxerstArgs {
    /// Portfolio spec file
    #[arg(long, value_name = "FILE")]
    pub portfolio: PathBuf,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub budget: BudgetArgs,

    /// Solve in cluster space ([clusters] section + --panel required)
    #[arg(long)]
    pub compress: bool,

    #[command(flatten)]
    pub out: OutputArgs,
}

/// Arguments for the target-driven most-plausible-scenario solve.
#[derive(Args)]
pub struct LossArgs {
    /// Portfolio spec file
    #[arg(long, value_name = "FILE")]
    pub portfolio: PathBuf,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Loss target (a non-positive P&L level)
    #[arg(long, allow_hyphen_values = true, conflicts_with = "profit")]
    pub loss: Option<f64>,

    /// Profit target (a positive P&L level)
    #[arg(long)]
    pub profit: Option<f64>,

    /// Solve in cluster space ([clusters] section + --panel required)
    #[arg(long)]
    pub compress: bool,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Serialize)]
struct ComparatorsJson {
    alpha: f64,
    var: f64,
    es: f64,
}

#[derive(Serialize)]
struct CompressionJson {
    cluster_labels: Vec<String>,
    betas: Vec<f64>,
    reconstructed: Vec<ScenarioJson>,
}

#[derive(Serialize)]
struct SolveJson {
    mode: &'static str,
    book: &'static str,
    family: String,
    labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<BudgetJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<f64>,
    outcome: OutcomeJson,
    plausibility: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparators: Option<ComparatorsJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compression: Option<CompressionJson>,
}

/// A factor book collapsed into cluster space: the compressed portfolio,
/// the aggregate-series covariance it lives on, and the fitted map.
struct Compressed {
    map: ClusterMap,
    book: QuadraticPortfolio,
    sigma: DMatrix<f64>,
    labels: Vec<String>,
}

fn build_compressed(parsed: &ParsedPortfolio, model: &ModelArgs) -> CliResult<Compressed> {
    let Some(map) = &parsed.clusters else {
        return Err(CliError::Input(
            "--compress needs a [clusters] section in the portfolio spec".into(),
        ));
    };
    let Some(panel_path) = &model.panel else {
        return Err(CliError::Input(
            "--compress needs --panel: betas and the cluster covariance come from the series"
                .into(),
        ));
    };
    let panel = read_panel(panel_path)?;
    check_labels(&parsed.labels, panel.labels(), "portfolio vs panel")?;
    let map = cluster_betas(&panel, map)?;
    let full_book = parsed.book.to_quadratic(&parsed.labels)?;
    let book = compress_portfolio(&full_book, &map)?;

    // Cluster shocks are modeled as the equal-weighted member averages, the
    // same aggregate the betas were regressed on.
    let k = map.n_clusters();
    let values = DMatrix::from_fn(panel.n_days(), k, |t, c| {
        let members = map.members(c);
        members
            .iter()
            .map(|&i| panel.values()[(t, i)])
            .sum::<f64>()
            / members.len() as f64
    });
    let labels = map.cluster_labels().to_vec();
    let agg_panel = SeriesPanel::new(panel.dates().to_vec(), labels.clone(), values)?;
    let sigma = estimate_cov(&agg_panel)?;
    Ok(Compressed {
        map,
        book,
        sigma,
        labels,
    })
}

/// Reconstruct factor-level scenarios from a cluster-level outcome and
/// verify the compression identity: the original book re-priced at the
/// reconstruction must reproduce the cluster-level P&L.
fn reconstruct_all(
    out: &SolverOutcome,
    map: &ClusterMap,
    original: &QuadraticPortfolio,
) -> CliResult<Vec<Scenario>> {
    let mut reconstructed = Vec::with_capacity(out.scenarios.len());
    for s in &out.scenarios {
        let factors = reconstruct_scenario(s, map)?;
        let p = original.pnl(factors.values())?;
        if (p - out.pnl).abs() > OUTCOME_SELF_TOL * (1.0 + out.pnl.abs()) {
            return Err(CliError::Audit(format!(
                "reconstructed scenario re-prices to {p}, cluster solve says {}",
                out.pnl
            )));
        }
        reconstructed.push(factors);
    }
    Ok(reconstructed)
}

struct SolveReport<'a> {
    mode: &'static str,
    book_kind: &'static str,
    labels: &'a [String],
    budget: Option<&'a PlausibilityBudget>,
    target: Option<f64>,
    outcome: &'a SolverOutcome,
    plausibility: f64,
    comparators: Option<(f64, f64, f64)>,
    compression: Option<(&'a ClusterMap, &'a [Scenario])>,
}

fn render_solve(model: &EllipticalModel, report: &SolveReport, json: bool) -> String {
    if json {
        let doc = SolveJson {
            mode: report.mode,
            book: report.book_kind,
            family: family_name(model.family()),
            labels: report.labels.to_vec(),
            budget: report.budget.map(BudgetJson::from),
            target: report.target,
            outcome: OutcomeJson::from(report.outcome),
            plausibility: report.plausibility,
            comparators: report.comparators.map(|(alpha, var, es)| ComparatorsJson {
                alpha,
                var,
                es,
            }),
            compression: report.compression.map(|(map, reconstructed)| CompressionJson {
                cluster_labels: map.cluster_labels().to_vec(),
                betas: map.betas().expect("fitted map").to_vec(),
                reconstructed: reconstructed.iter().map(ScenarioJson::from).collect(),
            }),
        };
        format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable"))
    } else {
        let mut text = String::new();
        _ = writeln!(text, "mode: {}", report.mode);
        _ = writeln!(text, "book: {}", report.book_kind);
        _ = writeln!(text, "family: {}", family_name(model.family()));
        _ = writeln!(text, "factors: {}", report.labels.join(", "));
        if let Some((map, _)) = report.compression {
            _ = writeln!(
                text,
                "compressed: {} factors -> {} clusters ({})",
                map.n_factors(),
                map.n_clusters(),
                map.cluster_labels().join(", ")
            );
            let betas = map
                .factor_labels()
                .iter()
                .zip(map.betas().expect("fitted map"))
                .map(|(l, b)| format!("{l}={b}"))
                .collect::<Vec<_>>()
                .join(" ");
            _ = writeln!(text, "betas: {betas}");
        }
        if let Some(budget) = report.budget {
            _ = writeln!(text, "budget: {}", BudgetJson::from(budget).describe());
        }
        if let Some(target) = report.target {
            _ = writeln!(text, "target: {}", fmt_f(target));
        }
        push_outcome_text(&mut text, report.outcome);
        _ = writeln!(text, "plausibility: {}", fmt_f(report.plausibility));
        if let Some((alpha, var, es)) = report.comparators {
            _ = writeln!(text, "var[alpha={alpha}]: {}", fmt_f(var));
            _ = writeln!(text, "es[alpha={alpha}]: {}", fmt_f(es));
        }
        if let Some((_, reconstructed)) = report.compression {
            for (i, s) in reconstructed.iter().enumerate() {
                _ = writeln!(text, "reconstructed[{}]: {}", i + 1, fmt_scenario(s));
            }
        }
        text
    }
}

pub fn cmd_maxerst(args: &MaxerstArgs) -> CliResult<()> {
    let parsed = read_portfolio(&args.portfolio)?;

    if args.compress {
        let compressed = build_compressed(&parsed, &args.model)?;
        let model = args.model.model(compressed.sigma.clone())?;
        let budget = args.budget.resolve(&compressed.labels, &model)?;
        let out = maxerst_quadratic(&compressed.book, &compressed.sigma, &budget)?;
        audit_outcome(&out, |s| compressed.book.pnl(s), &model)?;
        let full_book = parsed.book.to_quadratic(&parsed.labels)?;
        let reconstructed = reconstruct_all(&out, &compressed.map, &full_book)?;
        let plausibility = model.maha_sq_cdf(out.maha_sq)?;
        let rendered = render_solve(
            &model,
            &SolveReport {
                mode: "maxerst",
                book_kind: "quadratic",
                labels: &compressed.labels,
                budget: Some(&budget),
                target: None,
                outcome: &out,
                plausibility,
                comparators: None,
                compression: Some((&compressed.map, &reconstructed)),
            },
            args.out.json,
        );
        return args.out.emit(rendered);
    }

    let (cov_labels, sigma) = args.model.covariance()?;
    check_labels(&parsed.labels, &cov_labels, "portfolio vs covariance source")?;
    let model = args.model.model(sigma.clone())?;
    let budget = args.budget.resolve(&parsed.labels, &model)?;

    let (mut out, book_kind, comparators) = match &parsed.book {
        Book::Linear(p) => {
            let out = maxerst_linear(p, &sigma, &budget)?;
            // The comparator level: the budget's own alpha, or the implied
            // plausibility of a historical budget.
            let alpha = match budget.mode() {
                BudgetMode::Quantile(a) => *a,
                BudgetMode::Historical(_) => model.maha_sq_cdf(budget.q())?,
            };
            let comparators = if alpha > 0.0 && alpha < 1.0 {
                Some((
                    alpha,
                    erst_core::var_linear_normal(p, &sigma, alpha)?,
                    es_linear_normal(p, &sigma, alpha)?,
                ))
            } else {
                None
            };
            (out, "linear", comparators)
        }
        Book::Quadratic(p) => (maxerst_quadratic(p, &sigma, &budget)?, "quadratic", None),
    };
    relabel(&mut out, &parsed.labels)?;

    let book = parsed.book.to_quadratic(&parsed.labels)?;
    audit_outcome(&out, |s| book.pnl(s), &model)?;
    let plausibility = model.maha_sq_cdf(out.maha_sq)?;

    let rendered = render_solve(
        &model,
        &SolveReport {
            mode: "maxerst",
            book_kind,
            labels: &parsed.labels,
            budget: Some(&budget),
            target: None,
            outcome: &out,
            plausibility,
            comparators,
            compression: None,
        },
        args.out.json,
    );
    args.out.emit(rendered)
}

pub fn cmd_loss(args: &LossArgs) -> CliResult<()> {
    let (mode, target): (&'static str, f64) = match (args.loss, args.profit) {
        (Some(l), None) => {
            if !l.is_finite() || l > 0.0 {
                return Err(CliError::Input(format!(
                    "--loss {l} must be a non-positive P&L level (use --profit for gains)"
                )));
            }
            ("loss", l)
        }
        (None, Some(p)) => {
            if !p.is_finite() || p <= 0.0 {
                return Err(CliError::Input(format!(
                    "--profit {p} must be a positive P&L level"
                )));
            }
            ("profit", p)
        }
        _ => {
            return Err(CliError::Input(
                "exactly one of --loss or --profit is required".into(),
            ));
        }
    };

    let parsed = read_portfolio(&args.portfolio)?;

    let solve = |book: &QuadraticPortfolio, sigma: &DMatrix<f64>| -> CliResult<SolverOutcome> {
        Ok(match mode {
            "loss" => most_plausible_scenario(book, sigma, target)?,
            _ => profit_scenario(book, sigma, target)?,
        })
    };

    if args.compress {
        let compressed = build_compressed(&parsed, &args.model)?;
        let model = args.model.model(compressed.sigma.clone())?;
        let out = solve(&compressed.book, &compressed.sigma)?;
        audit_outcome(&out, |s| compressed.book.pnl(s), &model)?;
        let full_book = parsed.book.to_quadratic(&parsed.labels)?;
        let reconstructed = reconstruct_all(&out, &compressed.map, &full_book)?;
        let plausibility = model.maha_sq_cdf(out.maha_sq)?;
        let rendered = render_solve(
            &model,
            &SolveReport {
                mode,
                book_kind: "quadratic",
                labels: &compressed.labels,
                budget: None,
                target: Some(target),
                outcome: &out,
                plausibility,
                comparators: None,
                compression: Some((&compressed.map, &reconstructed)),
            },
            args.out.json,
        );
        return args.out.emit(rendered);
    }

    let (cov_labels, sigma) = args.model.covariance()?;
    check_labels(&parsed.labels, &cov_labels, "portfolio vs covariance source")?;
    let model = args.model.model(sigma.clone())?;

    let book = parsed.book.to_quadratic(&parsed.labels)?;
    let book_kind = match parsed.book {
        Book::Linear(_) => "linear",
        Book::Quadratic(_) => "quadratic",
    };
    let out = solve(&book, &sigma)?;
    audit_outcome(&out, |s| book.pnl(s), &model)?;
    let plausibility = model.maha_sq_cdf(out.maha_sq)?;

    let rendered = render_solve(
        &model,
        &SolveReport {
            mode,
            book_kind,
            labels: &parsed.labels,
            budget: None,
            target: Some(target),
            outcome: &out,
            plausibility,
            comparators: None,
            compression: None,
        },
        args.out.json,
    );
    args.out.emit(rendered)
}

// ---------------------------------------------------------------------------
// sigma
// ---------------------------------------------------------------------------

/// Arguments for covariance estimation, repair and stressing.
#[derive(Args)]
pub struct SigmaArgs {
    /// Shock panel CSV
    #[arg(long, value_name = "FILE")]
    pub panel: PathBuf,

    /// Global blending weight in [0, 1)
    #[arg(long, conflicts_with = "blocks")]
    pub theta: Option<f64>,

    /// Per-block stress START:END:THETA (inclusive 0-based columns),
    /// repeatable
    #[arg(long = "block", value_name = "START:END:THETA")]
    pub blocks: Vec<String>,

    /// Shrinkage intensity: "auto" or a delta in (0, 1]
    #[arg(long, value_name = "AUTO|DELTA")]
    pub shrink: Option<String>,

    /// Calibrate theta to best match this covariance CSV
    #[arg(long, value_name = "FILE")]
    pub calibrate_theta: Option<PathBuf>,

    /// Directory for covariance/correlation/provenance files
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Serialize)]
struct PdJson {
    positive_definite: bool,
    min_eigenvalue: f64,
    threshold: f64,
}

#[derive(Serialize)]
struct CalibrationJson {
    theta: f64,
    error: f64,
}

#[derive(Serialize)]
struct SigmaJson {
    mode: &'static str,
    days: usize,
    factors: Vec<String>,
    window: (String, String),
    rank_bound: usize,
    pd: PdJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    shrink_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stress: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<CalibrationJson>,
    files: Vec<String>,
}

fn parse_block(raw: &str) -> CliResult<ThetaBlock> {
    let parts: Vec<&str> = raw.split(':').collect();
    let [start, end, theta] = parts.as_slice() else {
        return Err(CliError::Input(format!(
            "--block {raw:?} is not of the form START:END:THETA"
        )));
    };
    let parse_idx = |s: &str| -> CliResult<usize> {
        s.parse()
            .map_err(|_| CliError::Input(format!("--block {raw:?}: {s:?} is not a column index")))
    };
    let theta: f64 = theta
        .parse()
        .map_err(|_| CliError::Input(format!("--block {raw:?}: {theta:?} is not a number")))?;
    check_theta(theta)?;
    Ok(ThetaBlock {
        start: parse_idx(start)?,
        end: parse_idx(end)?,
        theta,
    })
}

fn check_theta(theta: f64) -> CliResult<()> {
    if !(theta.is_finite() && (0.0..1.0).contains(&theta)) {
        return Err(CliError::Input(format!(
            "theta = {theta} must lie in [0, 1)"
        )));
    }
    Ok(())
}

fn parse_shrink(raw: &str) -> CliResult<Shrink> {
    if raw.eq_ignore_ascii_case("auto") {
        return Ok(Shrink::Auto);
    }
    let delta: f64 = raw.parse().map_err(|_| {
        CliError::Input(format!("--shrink {raw:?} is neither \"auto\" nor a number"))
    })?;
    if !(delta.is_finite() && delta > 0.0 && delta <= 1.0) {
        return Err(CliError::Input(format!(
            "--shrink delta = {delta} must lie in (0, 1]"
        )));
    }
    Ok(Shrink::Fixed(delta))
}

fn describe_stress(stressed: &StressedCovariance) -> String {
    match &stressed.provenance {
        erst_core::Provenance::ThetaStress { thetas, window } => {
            let spec = match thetas {
                ThetaSpec::Global(theta) => format!("global theta={theta}"),
                ThetaSpec::Blocks(blocks) => blocks
                    .iter()
                    .map(|b| format!("{}..={} theta={}", b.start, b.end, b.theta))
                    .collect::<Vec<_>>()
                    .join("; "),
            };
            format!("{spec} window={}..{}", window.0, window.1)
        }
        other => format!("{other:?}"),
    }
}

pub fn cmd_sigma(args: &SigmaArgs) -> CliResult<()> {
    let panel = read_panel(&args.panel)?;
    let labels = panel.labels().to_vec();
    let sample = estimate_cov(&panel)?;
    let pd = is_positive_definite(&sample)?;
    let rank_bound = (panel.n_days() - 1).min(panel.n_factors());

    std::fs::create_dir_all(&args.output_dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.output_dir.display())))?;
    let mut files = Vec::new();
    let mut write = |name: &str, matrix: &DMatrix<f64>| -> CliResult<()> {
        write_matrix(&args.output_dir.join(name), &labels, matrix)?;
        files.push(name.to_string());
        Ok(())
    };
    write("sample_covariance.csv", &sample)?;

    // Repair when asked for, or whenever the sample needs it.
    let shrink_spec = args.shrink.as_deref().map(parse_shrink).transpose()?;
    let shrunk = if shrink_spec.is_some() || !pd.positive_definite {
        let repaired = shrink_to_pd(&sample, shrink_spec.unwrap_or(Shrink::Auto))?;
        write("shrunk_covariance.csv", &repaired.sigma)?;
        match repaired.provenance {
            erst_core::Provenance::Shrunk { delta } => Some(delta),
            _ => unreachable!("shrink_to_pd reports shrink provenance"),
        }
    } else {
        None
    };

    let stressed = if let Some(theta) = args.theta {
        check_theta(theta)?;
        Some(single_factor_stress(&panel, theta)?)
    } else if !args.blocks.is_empty() {
        let blocks = args
            .blocks
            .iter()
            .map(|raw| parse_block(raw))
            .collect::<CliResult<Vec<_>>>()?;
        Some(block_stress(&panel, &blocks)?)
    } else {
        None
    };
    if let Some(stressed) = &stressed {
        write("stressed_covariance.csv", &stressed.sigma)?;
        write("stressed_correlation.csv", &correlation_of(&stressed.sigma))?;
    }

    let calibration = match &args.calibrate_theta {
        None => None,
        Some(file) => {
            let (target_labels, target) = read_covariance(file)?;
            check_labels(&labels, &target_labels, "panel vs calibration target")?;
            Some(calibrate_theta(&panel, &target)?)
        }
    };

    // Provenance: everything needed to reproduce the files, no timestamps,
    // so reruns are byte-identical.
    let (from, to) = panel.window();
    let mut prov = String::new();
    _ = writeln!(
        prov,
        "panel: {}",
        args.panel
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| args.panel.display().to_string())
    );
    _ = writeln!(prov, "window: {from}..{to}");
    _ = writeln!(prov, "days: {}", panel.n_days());
    _ = writeln!(prov, "factors: {}", labels.join(", "));
    _ = writeln!(prov, "sample: sample_covariance.csv (unbiased, divisor n-1)");
    _ = writeln!(
        prov,
        "pd: positive_definite={} min_eigenvalue={} threshold={}",
        pd.positive_definite,
        fmt_f(pd.min_eigenvalue),
        fmt_f(pd.threshold)
    );
    _ = writeln!(
        prov,
        "rank_bound: min(days-1, factors) = {rank_bound}"
    );
    if let Some(delta) = shrunk {
        _ = writeln!(
            prov,
            "shrink: delta={} -> shrunk_covariance.csv (variance-preserving, toward the diagonal)",
            fmt_f(delta)
        );
    }
    if let Some(stressed) = &stressed {
        _ = writeln!(
            prov,
            "stress: {} -> stressed_covariance.csv, stressed_correlation.csv",
            describe_stress(stressed)
        );
    }
    if let Some(c) = &calibration {
        _ = writeln!(
            prov,
            "calibration: theta={} frobenius_error={}",
            fmt_f(c.theta),
            fmt_f(c.error)
        );
    }
    std::fs::write(args.output_dir.join("provenance.txt"), &prov)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.output_dir.display())))?;
    files.push("provenance.txt".to_string());

    let rendered = if args.out.json {
        let doc = SigmaJson {
            mode: "sigma",
            days: panel.n_days(),
            factors: labels.clone(),
            window: (from.to_string(), to.to_string()),
            rank_bound,
            pd: PdJson {
                positive_definite: pd.positive_definite,
                min_eigenvalue: pd.min_eigenvalue,
                threshold: pd.threshold,
            },
            shrink_delta: shrunk,
            stress: stressed.as_ref().map(describe_stress),
            calibration: calibration
                .as_ref()
                .map(|c| CalibrationJson {
                    theta: c.theta,
                    error: c.error,
                }),
            files: files.clone(),
        };
        format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable"))
    } else {
        let mut text = String::from("mode: sigma\n");
        text.push_str(&prov);
        if !pd.positive_definite {
            _ = writeln!(
                text,
                "note: sample covariance is not positive definite ({} days cap its rank \
                 at {rank_bound}); shrunk_covariance.csv restores definiteness",
                panel.n_days()
            );
        }
        _ = writeln!(text, "written: {}", files.join(", "));
        text
    };
    args.out.emit(rendered)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// Arguments for the VaR-vs-MaxERST correlation sweep.
///
/// The book is the two-factor reference family
/// `P&L = s1^2 - s2^2 + beta (s1 + 2 s2)` on unit-volatility factors with
/// correlation rho, Gaussian model throughout.
#[derive(Args)]
pub struct SweepArgs {
    /// Smallest correlation in the grid
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.8)]
    pub rho_min: f64,

    /// Largest correlation in the grid
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.8)]
    pub rho_max: f64,

    /// Number of correlation grid points (inclusive endpoints)
    #[arg(long, default_value_t = 9)]
    pub rho_steps: usize,

    /// Delta loading beta, repeatable (one curve per value)
    #[arg(long = "beta", value_name = "BETA", required = true, allow_hyphen_values = true)]
    pub betas: Vec<f64>,

    /// Confidence level for both VaR and the plausibility budget
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,

    /// Monte Carlo paths per cell
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,

    /// RNG seed; every cell reuses it (common random numbers), so rows are
    /// comparable across the grid
    #[arg(long)]
    pub seed: Option<u64>,

    /// Write the CSV here instead of standard output
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    check_probability("--alpha", args.alpha)?;
    if args.rho_steps == 0 || args.betas.is_empty() {
        return Err(CliError::Input("the sweep grid is empty".into()));
    }
    if args.rho_steps > 1 && args.rho_max < args.rho_min {
        return Err(CliError::Input(format!(
            "--rho-max {} is below --rho-min {}",
            args.rho_max, args.rho_min
        )));
    }
    let rhos: Vec<f64> = if args.rho_steps == 1 {
        vec![args.rho_min]
    } else {
        (0..args.rho_steps)
            .map(|i| {
                args.rho_min
                    + (args.rho_max - args.rho_min) * i as f64 / (args.rho_steps - 1) as f64
            })
            .collect()
    };
    for &rho in &rhos {
        if !(rho.is_finite() && rho.abs() < 1.0) {
            return Err(CliError::Input(format!(
                "correlation {rho} is outside (-1, 1)"
            )));
        }
    }
    let seed = resolve_seed(args.seed)?;
    let labels = vec!["f1".to_string(), "f2".to_string()];

    let mut table = String::from("rho,beta,var,var_std_error,maxerst,ratio\n");
    for &beta in &args.betas {
        let book = QuadraticPortfolio::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -2.0]),
            DVector::from_vec(vec![beta, 2.0 * beta]),
            labels.clone(),
        )?;
        for &rho in &rhos {
            let sigma = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
            let model = EllipticalModel::new(DVector::zeros(2), sigma.clone(), Family::Normal)?;
            let var = var_monte_carlo(&book, &model, args.alpha, args.paths, seed)?;
            let budget = plausibility_budget(BudgetMode::Quantile(args.alpha), &model)?;
            let worst = maxerst_quadratic(&book, &sigma, &budget)?;
            let ratio = worst.pnl / var.value;
            _ = writeln!(
                table,
                "{rho},{beta},{},{},{},{}",
                fmt_f(var.value),
                fmt_f(var.std_error),
                fmt_f(worst.pnl),
                fmt_f(ratio)
            );
        }
    }

    match &args.output {
        Some(path) => std::fs::write(path, &table)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}
