//! Covariance estimation and stressing.
//!
//! A reverse stress test is only as good as the covariance behind it, so
//! this module covers the estimation workflow end to end: sample covariance
//! from a historical panel, positive-definiteness checks (short windows make
//! singular matrices — the rank can never exceed the number of observations
//! minus one), variance-preserving shrinkage to restore definiteness, and
//! the single-factor recorrelation stress
//!
//! ```text
//! S_hat[i, t] = (1 - theta) S[i, t] + (theta / n) * sum_j S[j, t]
//! ```
//!
//! which blends every series with the cross-sectional average to push
//! pairwise correlations up, then re-imposes the original per-factor
//! volatilities so that only the correlation structure moves. The blend can
//! also be applied per block of factors, and theta can be calibrated so the
//! stressed matrix best matches a target covariance.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::error::{ErstError, Result};
use crate::tolerances::{PD_EIG_REL_TOL, SHRINK_TARGET_REL};
use crate::util::{check_finite_matrix, check_symmetric, min_symmetric_eigenvalue};

/// A panel of historical factor shocks: one row per day, one column per
/// factor, with aligned labels and strictly increasing dates.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    values: DMatrix<f64>,
    labels: Vec<String>,
    dates: Vec<NaiveDate>,
}

impl SeriesPanel {
    /// Panel from raw parts; rejects shape mismatches, non-finite cells,
    /// duplicate labels and non-increasing dates.
    pub fn new(dates: Vec<NaiveDate>, labels: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != dates.len() {
            return Err(ErstError::DimensionMismatch {
                context: "panel rows vs dates",
                expected: values.nrows(),
                got: dates.len(),
            });
        }
        if values.ncols() != labels.len() {
            return Err(ErstError::DimensionMismatch {
                context: "panel columns vs labels",
                expected: values.ncols(),
                got: labels.len(),
            });
        }
        if values.is_empty() {
            return Err(ErstError::Degenerate("empty panel".into()));
        }
        check_finite_matrix(&values, "panel values")?;
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(ErstError::InvalidInput(format!(
                    "panel dates must be strictly increasing; {} follows {}",
                    w[1], w[0]
                )));
            }
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(ErstError::InvalidInput(format!("duplicate label {a:?}")));
            }
        }
        Ok(Self {
            values,
            labels,
            dates,
        })
    }

    /// Day-by-factor shock matrix.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Factor labels, aligned with the columns.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Observation dates, aligned with the rows.
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Number of observation days.
    pub fn n_days(&self) -> usize {
        self.values.nrows()
    }

    /// Number of factors.
    pub fn n_factors(&self) -> usize {
        self.values.ncols()
    }

    /// First and last observation dates.
    pub fn window(&self) -> (NaiveDate, NaiveDate) {
        (self.dates[0], *self.dates.last().expect("nonempty panel"))
    }
}

/// How a theta stress was specified.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSpec {
    /// One blending weight applied to every factor.
    Global(f64),
    /// Per-block blending weights; factors outside every block untouched.
    Blocks(Vec<ThetaBlock>),
}

/// A contiguous factor range `start..=end` stressed with one theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBlock {
    /// First factor index of the block.
    pub start: usize,
    /// Last factor index of the block (inclusive).
    pub end: usize,
    /// Blending weight for the block, in [0, 1).
    pub theta: f64,
}

/// Where a covariance matrix came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Unbiased sample covariance of a panel.
    Sample,
    /// Linear shrinkage toward the diagonal with this intensity.
    Shrunk {
        /// Shrinkage intensity delta in [0, 1].
        delta: f64,
    },
    /// Single-factor recorrelation stress of a panel window.
    ThetaStress {
        /// The blending specification.
        thetas: ThetaSpec,
        /// First and last dates of the panel the stress was computed from.
        window: (NaiveDate, NaiveDate),
    },
}

/// A covariance matrix together with how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StressedCovariance {
    /// The covariance matrix.
    pub sigma: DMatrix<f64>,
    /// How it was produced.
    pub provenance: Provenance,
}

/// Outcome of a positive-definiteness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdCheck {
    /// True when the smallest eigenvalue clears the threshold.
    pub positive_definite: bool,
    /// Smallest eigenvalue found.
    pub min_eigenvalue: f64,
    /// Threshold it was compared against.
    pub threshold: f64,
}

/// Shrinkage intensity: a fixed value or automatic selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shrink {
    /// Use exactly this intensity in (0, 1].
    Fixed(f64),
    /// Smallest grid intensity that restores definiteness.
    Auto,
}

/// Unbiased sample covariance of a panel (divisor `n_days - 1`).
///
/// The result is symmetric positive semidefinite but frequently singular:
/// its rank cannot exceed `n_days - 1`, so short windows on wide panels must
/// be shrunk before any Mahalanobis machinery can run.
pub fn estimate_cov(panel: &SeriesPanel) -> Result<DMatrix<f64>> {
    let n = panel.n_days();
    if n < 2 {
        return Err(ErstError::OutOfRange {
            name: "n_days",
            value: n as f64,
            range: ">= 2",
        });
    }
    let m = panel.n_factors();
    let mut centered = panel.values.clone();
    for j in 0..m {
        let mean = centered.column(j).sum() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    // Symmetric in exact arithmetic; remove the rounding skew.
    Ok(0.5 * (&cov + cov.transpose()))
}

/// Check positive definiteness, reporting the smallest eigenvalue.
///
/// The threshold is `PD_EIG_REL_TOL * trace / m` — definiteness relative to
/// the average variance, so badly scaled but genuinely PD matrices pass and
/// numerically singular ones do not.
pub fn is_positive_definite(sigma: &DMatrix<f64>) -> Result<PdCheck> {
    check_finite_matrix(sigma, "covariance")?;
    check_symmetric(sigma)?;
    let m = sigma.nrows().max(1);
    let min_eigenvalue = min_symmetric_eigenvalue(sigma);
    let threshold = PD_EIG_REL_TOL * sigma.trace() / m as f64;
    Ok(PdCheck {
        positive_definite: min_eigenvalue > threshold,
        min_eigenvalue,
        threshold,
    })
}

/// Shrink a PSD matrix toward its diagonal until it is positive definite:
/// `Sigma = (1 - delta) Sigma0 + delta diag(Sigma0)`.
///
/// The diagonal is preserved bit for bit and off-diagonal signs are kept
/// (entries only scale toward zero). `Auto` walks a geometric intensity grid
/// and keeps the smallest delta whose smallest eigenvalue reaches
/// `SHRINK_TARGET_REL * mean(diagonal)`; an already-definite input comes
/// back unchanged with delta 0.
pub fn shrink_to_pd(sigma0: &DMatrix<f64>, delta: Shrink) -> Result<StressedCovariance> {
    check_finite_matrix(sigma0, "covariance")?;
    check_symmetric(sigma0)?;
    let m = sigma0.nrows();
    for i in 0..m {
        if sigma0[(i, i)] <= 0.0 {
            return Err(ErstError::Degenerate(format!(
                "factor {i} has nonpositive variance {}",
                sigma0[(i, i)]
            )));
        }
    }
    match delta {
        Shrink::Fixed(d) => {
            if !(d > 0.0 && d <= 1.0) {
                return Err(ErstError::OutOfRange {
                    name: "delta",
                    value: d,
                    range: "(0, 1]",
                });
            }
            Ok(StressedCovariance {
                sigma: apply_shrink(sigma0, d),
                provenance: Provenance::Shrunk { delta: d },
            })
        }
        Shrink::Auto => {
            let target = SHRINK_TARGET_REL * sigma0.trace() / m as f64;
            if min_symmetric_eigenvalue(sigma0) >= target {
                return Ok(StressedCovariance {
                    sigma: sigma0.clone(),
                    provenance: Provenance::Shrunk { delta: 0.0 },
                });
            }
            let mut d = 1.0e-6;
            while d < 1.0 {
                let shrunk = apply_shrink(sigma0, d);
                if min_symmetric_eigenvalue(&shrunk) >= target {
                    return Ok(StressedCovariance {
                        sigma: shrunk,
                        provenance: Provenance::Shrunk { delta: d },
                    });
                }
                d *= 2.0;
            }
            let diag_only = apply_shrink(sigma0, 1.0);
            if min_symmetric_eigenvalue(&diag_only) >= target {
                return Ok(StressedCovariance {
                    sigma: diag_only,
                    provenance: Provenance::Shrunk { delta: 1.0 },
                });
            }
            Err(ErstError::Degenerate(
                "variance spread too wide: even the diagonal misses the definiteness target"
                    .into(),
            ))
        }
    }
}

/// `(1 - delta) Sigma0 + delta diag(Sigma0)`, with the diagonal copied
/// verbatim instead of recomputed so it is preserved exactly.
fn apply_shrink(sigma0: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let mut out = sigma0 * (1.0 - delta);
    for i in 0..sigma0.nrows() {
        out[(i, i)] = sigma0[(i, i)];
    }
    out
}

/// Blend every series with the cross-sectional average (weight `theta`) and
/// rebuild the covariance with the original volatilities.
///
/// `theta = 0` reproduces the sample covariance bit for bit; `theta -> 1`
/// drives all pairwise correlations toward one, which is why 1 itself is
/// excluded (every series would collapse onto the average and the
/// correlation matrix would be singular).
pub fn single_factor_stress(panel: &SeriesPanel, theta: f64) -> Result<StressedCovariance> {
    let m = panel.n_factors();
    let blocks = vec![ThetaBlock {
        start: 0,
        end: m.saturating_sub(1),
        theta,
    }];
    let sigma = stressed_sigma(panel, &blocks)?;
    Ok(StressedCovariance {
        sigma,
        provenance: Provenance::ThetaStress {
            thetas: ThetaSpec::Global(theta),
            window: panel.window(),
        },
    })
}

/// Per-block variant of [`single_factor_stress`]: each block blends only
/// with its own average, factors outside every block are left untouched, and
/// the covariance is rebuilt panel-wide with the original volatilities.
pub fn block_stress(panel: &SeriesPanel, blocks: &[ThetaBlock]) -> Result<StressedCovariance> {
    let m = panel.n_factors();
    let mut seen = vec![false; m];
    for b in blocks {
        if b.start > b.end || b.end >= m {
            return Err(ErstError::InvalidInput(format!(
                "block {}..={} is out of bounds for {m} factors",
                b.start, b.end
            )));
        }
        for i in b.start..=b.end {
            if seen[i] {
                return Err(ErstError::InvalidInput(format!(
                    "factor {i} belongs to more than one block"
                )));
            }
            seen[i] = true;
        }
    }
    let sigma = stressed_sigma(panel, blocks)?;
    Ok(StressedCovariance {
        sigma,
        provenance: Provenance::ThetaStress {
            thetas: ThetaSpec::Blocks(blocks.to_vec()),
            window: panel.window(),
        },
    })
}

/// Shared implementation of the theta stress: transform the panel, take its
/// covariance, and rescale each row/column by (original vol / transformed
/// vol). The rescale factors are exactly 1.0 for untouched columns, so
/// entries not involving a stressed factor come back bit-identical to the
/// sample covariance.
fn stressed_sigma(panel: &SeriesPanel, blocks: &[ThetaBlock]) -> Result<DMatrix<f64>> {
    for b in blocks {
        if !(0.0..1.0).contains(&b.theta) {
            return Err(ErstError::OutOfRange {
                name: "theta",
                value: b.theta,
                range: "[0, 1)",
            });
        }
    }
    let sample = estimate_cov(panel)?;
    let m = panel.n_factors();
    let n = panel.n_days();
    for i in 0..m {
        if sample[(i, i)] <= 0.0 {
            return Err(ErstError::Degenerate(format!(
                "factor {:?} has zero sample variance",
                panel.labels[i]
            )));
        }
    }

    let mut transformed = panel.values.clone();
    for b in blocks {
        if b.theta == 0.0 {
            continue;
        }
        let width = (b.end - b.start + 1) as f64;
        for t in 0..n {
            let mut avg = 0.0;
            for j in b.start..=b.end {
                avg += panel.values[(t, j)];
            }
            avg /= width;
            for j in b.start..=b.end {
                transformed[(t, j)] =
                    (1.0 - b.theta) * panel.values[(t, j)] + b.theta * avg;
            }
        }
    }

    let stressed_panel = SeriesPanel {
        values: transformed,
        labels: panel.labels.clone(),
        dates: panel.dates.clone(),
    };
    let c = estimate_cov(&stressed_panel)?;
    // scale_i = original vol / transformed vol; exactly 1.0 when the column
    // was untouched because both covariances ran the identical arithmetic.
    let mut scale = DVector::zeros(m);
    for i in 0..m {
        if c[(i, i)] <= 0.0 {
            return Err(ErstError::Degenerate(format!(
                "factor {:?} has zero variance after the theta transform",
                panel.labels[i]
            )));
        }
        scale[i] = sample[(i, i)].sqrt() / c[(i, i)].sqrt();
    }
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = c[(i, j)] * scale[i] * scale[j];
        }
        // The whole point of the rescale: volatilities are not stressed.
        out[(i, i)] = sample[(i, i)];
    }
    Ok(out)
}

/// Result of a theta calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaCalibration {
    /// Best blending weight found.
    pub theta: f64,
    /// Frobenius distance between the target and the stressed covariance at
    /// `theta`.
    pub error: f64,
}

/// Find the theta whose single-factor stress best matches a target
/// covariance (Frobenius norm), by a 0.005-step grid sweep over [0, 0.995]
/// followed by golden-section refinement around the grid minimum.
pub fn calibrate_theta(panel: &SeriesPanel, sigma_target: &DMatrix<f64>) -> Result<ThetaCalibration> {
    let m = panel.n_factors();
    if sigma_target.nrows() != m || sigma_target.ncols() != m {
        return Err(ErstError::DimensionMismatch {
            context: "target covariance vs panel",
            expected: m,
            got: sigma_target.nrows().max(sigma_target.ncols()),
        });
    }
    check_finite_matrix(sigma_target, "target covariance")?;

    let objective = |theta: f64| -> Result<f64> {
        let stressed = single_factor_stress(panel, theta)?;
        Ok((sigma_target - stressed.sigma).norm())
    };

    let mut best = (0.0, objective(0.0)?);
    let steps = 199; // 0.005 * 199 = 0.995
    for k in 1..=steps {
        let theta = k as f64 * 0.005;
        let err = objective(theta)?;
        if err < best.1 {
            best = (theta, err);
        }
    }

    // Golden-section refinement in the bracket around the grid winner.
    let mut a = (best.0 - 0.005).max(0.0);
    let mut b = (best.0 + 0.005).min(0.995);
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    for _ in 0..40 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2)?;
        }
    }
    let (theta, error) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if error < best.1 {
        best = (theta, error);
    }
    Ok(ThetaCalibration {
        theta: best.0,
        error: best.1,
    })
}
