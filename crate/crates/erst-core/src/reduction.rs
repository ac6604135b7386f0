//! Dimension reduction: factor selection and cluster compression.
//!
//! Solving for the most plausible scenario in hundreds of factors is neither
//! tractable to inspect nor easy to trust, so this module offers two ways to
//! shrink the problem first:
//!
//! * **Selection** — build the panel of per-factor P&L series, take the
//!   first principal component of its covariance, and keep the factors with
//!   the largest absolute loadings. The loading vector says which factors
//!   actually drive the portfolio's historical P&L.
//! * **Compression** — group factors into clusters, regress each member on
//!   its cluster's equal-weighted aggregate to get a beta, and collapse the
//!   portfolio into cluster space. A cluster-level solution is then expanded
//!   back to a full factor scenario through the betas.
//!
//! Compression is exact in one direction by construction: evaluating the
//! original portfolio at a reconstructed scenario always reproduces the
//! compressed portfolio's P&L at the cluster scenario. The approximation
//! lives entirely in how well the beta relation describes the factors.

use nalgebra::{DMatrix, DVector};

use crate::error::{ErstError, Result};
use crate::plausibility::Scenario;
use crate::pnl_model::QuadraticPortfolio;
use crate::sigma_tools::{estimate_cov, SeriesPanel};
use crate::tolerances::EIGEN_CLUSTER_REL_TOL;

/// Assignment of every factor to exactly one cluster, with optional
/// per-factor betas against the cluster aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMap {
    factor_labels: Vec<String>,
    cluster_labels: Vec<String>,
    assignment: Vec<usize>,
    betas: Option<Vec<f64>>,
}

impl ClusterMap {
    /// Map from labels and a factor-to-cluster index assignment; every
    /// cluster must receive at least one factor.
    pub fn new(
        factor_labels: Vec<String>,
        cluster_labels: Vec<String>,
        assignment: Vec<usize>,
    ) -> Result<Self> {
        if assignment.len() != factor_labels.len() {
            return Err(ErstError::DimensionMismatch {
                context: "cluster assignment vs factor labels",
                expected: factor_labels.len(),
                got: assignment.len(),
            });
        }
        if cluster_labels.is_empty() || factor_labels.is_empty() {
            return Err(ErstError::Degenerate("empty cluster map".into()));
        }
        let k = cluster_labels.len();
        let mut count = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            if c >= k {
                return Err(ErstError::InvalidInput(format!(
                    "factor {i} assigned to cluster {c}, but only {k} clusters exist"
                )));
            }
            count[c] += 1;
        }
        if let Some(empty) = count.iter().position(|&n| n == 0) {
            return Err(ErstError::Degenerate(format!(
                "cluster {:?} has no members",
                cluster_labels[empty]
            )));
        }
        Ok(Self {
            factor_labels,
            cluster_labels,
            assignment,
            betas: None,
        })
    }

    /// Same map with betas attached (one per factor, finite).
    pub fn with_betas(mut self, betas: Vec<f64>) -> Result<Self> {
        if betas.len() != self.assignment.len() {
            return Err(ErstError::DimensionMismatch {
                context: "betas vs factors",
                expected: self.assignment.len(),
                got: betas.len(),
            });
        }
        if let Some(bad) = betas.iter().find(|b| !b.is_finite()) {
            return Err(ErstError::InvalidInput(format!("non-finite beta {bad}")));
        }
        self.betas = Some(betas);
        Ok(self)
    }

    /// Factor labels, aligned with the assignment.
    pub fn factor_labels(&self) -> &[String] {
        &self.factor_labels
    }

    /// Cluster labels.
    pub fn cluster_labels(&self) -> &[String] {
        &self.cluster_labels
    }

    /// Cluster index of each factor.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Per-factor betas, if they have been computed.
    pub fn betas(&self) -> Option<&[f64]> {
        self.betas.as_deref()
    }

    /// Number of factors.
    pub fn n_factors(&self) -> usize {
        self.assignment.len()
    }

    /// Number of clusters.
    pub fn n_clusters(&self) -> usize {
        self.cluster_labels.len()
    }

    /// Factor indices belonging to one cluster, in ascending order.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Outcome of first-principal-component factor selection.
#[derive(Debug, Clone, PartialEq)]
pub struct FpcSelection {
    /// Indices of the kept factors, ordered by descending absolute loading
    /// (ties broken by ascending index).
    pub selected: Vec<usize>,
    /// Sign-normalized first principal component of the P&L panel
    /// covariance, one loading per factor.
    pub loadings: DVector<f64>,
    /// Share of total P&L variance the first component explains.
    pub explained_variance_ratio: f64,
}

/// Panel of per-factor P&L series: column `i` at day `t` is
/// `0.5 * A[i,i] * s[i,t]^2 + B[i] * s[i,t]`.
///
/// Cross-gamma terms have no unique owner among the factors, so they are
/// excluded; the columns sum to the exact portfolio P&L only when `A` is
/// diagonal, and the panel is an attribution device, not a repricing.
pub fn per_factor_pnl_panel(p: &QuadraticPortfolio, panel: &SeriesPanel) -> Result<SeriesPanel> {
    let m = panel.n_factors();
    if p.dim() != m {
        return Err(ErstError::DimensionMismatch {
            context: "portfolio vs panel factors",
            expected: p.dim(),
            got: m,
        });
    }
    let a = p.a();
    let b = p.b();
    let values = DMatrix::from_fn(panel.n_days(), m, |t, i| {
        let s = panel.values()[(t, i)];
        0.5 * a[(i, i)] * s * s + b[i] * s
    });
    SeriesPanel::new(panel.dates().to_vec(), panel.labels().to_vec(), values)
}

/// Keep the `k` factors with the largest absolute loadings in the first
/// principal component of the P&L panel covariance.
///
/// The component is sign-normalized (largest-|loading| entry positive) so
/// repeated runs agree. When the top two eigenvalues coincide within the
/// eigenvalue clustering tolerance the component itself is arbitrary within
/// a plane, and an ambiguity error reports both eigenvalues instead of
/// silently picking a direction.
pub fn pca_fpc_select(pnl_panel: &SeriesPanel, k: usize) -> Result<FpcSelection> {
    let m = pnl_panel.n_factors();
    if k == 0 || k > m {
        return Err(ErstError::OutOfRange {
            name: "k",
            value: k as f64,
            range: "1 ..= n_factors",
        });
    }
    let cov = estimate_cov(pnl_panel)?;
    let total = cov.trace();
    if total <= 0.0 {
        return Err(ErstError::Degenerate(
            "P&L panel has no variance to decompose".into(),
        ));
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    // nalgebra returns eigenvalues in no particular order.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let first = eig.eigenvalues[order[0]];
    if m > 1 {
        let second = eig.eigenvalues[order[1]];
        if first - second <= EIGEN_CLUSTER_REL_TOL * first.abs() {
            return Err(ErstError::AmbiguousComponent { first, second });
        }
    }

    let mut loadings: DVector<f64> = eig.eigenvectors.column(order[0]).into_owned();
    let mut arg = 0;
    for i in 1..m {
        if loadings[i].abs() > loadings[arg].abs() {
            arg = i;
        }
    }
    if loadings[arg] < 0.0 {
        loadings.neg_mut();
    }

    let mut ranked: Vec<usize> = (0..m).collect();
    ranked.sort_by(|&i, &j| {
        loadings[j]
            .abs()
            .total_cmp(&loadings[i].abs())
            .then(i.cmp(&j))
    });
    ranked.truncate(k);
    Ok(FpcSelection {
        selected: ranked,
        loadings,
        explained_variance_ratio: first / total,
    })
}

/// Compute each factor's beta against its cluster's equal-weighted
/// aggregate series: `beta_i = cov(s_i, aggregate) / var(aggregate)`.
pub fn cluster_betas(panel: &SeriesPanel, map: &ClusterMap) -> Result<ClusterMap> {
    let m = panel.n_factors();
    if map.n_factors() != m {
        return Err(ErstError::DimensionMismatch {
            context: "cluster map vs panel factors",
            expected: m,
            got: map.n_factors(),
        });
    }
    if map.factor_labels() != panel.labels() {
        return Err(ErstError::InvalidInput(
            "cluster map factor labels do not match the panel".into(),
        ));
    }
    let n = panel.n_days();
    if n < 2 {
        return Err(ErstError::OutOfRange {
            name: "n_days",
            value: n as f64,
            range: ">= 2",
        });
    }
    let values = panel.values();
    let mut betas = vec![0.0; m];
    for c in 0..map.n_clusters() {
        let members = map.members(c);
        let width = members.len() as f64;
        let mut agg = DVector::zeros(n);
        for t in 0..n {
            let mut sum = 0.0;
            for &i in &members {
                sum += values[(t, i)];
            }
            agg[t] = sum / width;
        }
        let agg_mean = agg.sum() / n as f64;
        let mut var = 0.0;
        for t in 0..n {
            var += (agg[t] - agg_mean).powi(2);
        }
        var /= n as f64 - 1.0;
        if var <= 0.0 {
            return Err(ErstError::Degenerate(format!(
                "cluster {:?} has a zero-variance aggregate",
                map.cluster_labels()[c]
            )));
        }
        for &i in &members {
            let col_mean = values.column(i).sum() / n as f64;
            let mut cov = 0.0;
            for t in 0..n {
                cov += (values[(t, i)] - col_mean) * (agg[t] - agg_mean);
            }
            cov /= n as f64 - 1.0;
            betas[i] = cov / var;
        }
    }
    map.clone().with_betas(betas)
}

/// Expand a cluster-level scenario to factor level: factor `i` moves by
/// `beta_i` times its cluster's shock.
pub fn reconstruct_scenario(cluster_scenario: &Scenario, map: &ClusterMap) -> Result<Scenario> {
    if cluster_scenario.dim() != map.n_clusters() {
        return Err(ErstError::DimensionMismatch {
            context: "cluster scenario vs clusters",
            expected: map.n_clusters(),
            got: cluster_scenario.dim(),
        });
    }
    let betas = map.betas().ok_or(ErstError::MissingBetas)?;
    let shocks = cluster_scenario.values();
    let values = DVector::from_fn(map.n_factors(), |i, _| {
        betas[i] * shocks[map.assignment()[i]]
    });
    Scenario::new(values, map.factor_labels().to_vec())
}

/// Collapse a factor-level portfolio into cluster space through the betas:
/// the compressed coefficients satisfy, for every cluster scenario `x`,
///
/// ```text
/// pnl_compressed(x) == pnl_original(reconstruct_scenario(x))
/// ```
///
/// exactly (both sides expand to the same double sum), so cluster-level
/// stress results translate back without approximation error beyond the
/// beta relation itself.
pub fn compress_portfolio(p: &QuadraticPortfolio, map: &ClusterMap) -> Result<QuadraticPortfolio> {
    let m = map.n_factors();
    if p.dim() != m {
        return Err(ErstError::DimensionMismatch {
            context: "portfolio vs cluster map factors",
            expected: m,
            got: p.dim(),
        });
    }
    let betas = map.betas().ok_or(ErstError::MissingBetas)?;
    let k = map.n_clusters();
    let a = p.a();
    let b = p.b();
    let mut a_c = DMatrix::zeros(k, k);
    let mut b_c = DVector::zeros(k);
    for i in 0..m {
        let ci = map.assignment()[i];
        b_c[ci] += betas[i] * b[i];
        for j in 0..m {
            let cj = map.assignment()[j];
            a_c[(ci, cj)] += betas[i] * betas[j] * a[(i, j)];
        }
    }
    QuadraticPortfolio::new(a_c, b_c, map.cluster_labels().to_vec())
}
