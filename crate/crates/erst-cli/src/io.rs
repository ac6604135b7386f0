//! File formats: shock panels, covariance matrices, portfolio specs and
//! shock lists.
//!
//! Panels are CSV with a header row of factor labels and ISO dates in the
//! first column; every cell must be present (no imputation). Covariance
//! matrices are row-labeled square CSV. Portfolio specs are a small
//! line-oriented format with named sections, human-editable and
//! diff-friendly:
//!
//! ```text
//! # two-factor delta-gamma book
//! [factors]
//! eq_spot
//! eq_vol
//!
//! [gamma]          # dense lower triangle of A, one row per line
//! 2.0
//! 0.0 -2.0
//!
//! [delta]
//! 1.5
//! 3.0
//! ```
//!
//! A linear book replaces `[gamma]`/`[delta]` with a single `[omega]`
//! section; an optional `[clusters]` section maps each factor to a named
//! cluster for compressed solves. Floats are written with the shortest
//! representation that round-trips, so files are byte-stable and re-reading
//! them loses nothing.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use erst_core::{
    ClusterMap, LinearPortfolio, QuadraticPortfolio, Scenario, SeriesPanel,
};

use crate::errors::{CliError, CliResult};

/// Read a shock panel: header `date,<label>,...`, one ISO-dated row per day.
pub fn read_panel(path: &Path) -> CliResult<SeriesPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(CliError::Input(format!(
            "{}: need a date column and at least one factor column",
            path.display()
        )));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let date_cell = &record[0];
        let date = NaiveDate::parse_from_str(date_cell, "%Y-%m-%d").map_err(|_| {
            CliError::Input(format!(
                "{} row {}: {date_cell:?} is not an ISO date (YYYY-MM-DD)",
                path.display(),
                r + 2
            ))
        })?;
        let mut row = Vec::with_capacity(labels.len());
        for (c, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() {
                return Err(CliError::Input(format!(
                    "{} row {}: missing value for {:?}",
                    path.display(),
                    r + 2,
                    labels[c]
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Input(format!(
                    "{} row {}: {cell:?} is not a number",
                    path.display(),
                    r + 2
                ))
            })?;
            row.push(v);
        }
        dates.push(date);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: panel has no rows", path.display())));
    }
    let values = DMatrix::from_fn(rows.len(), labels.len(), |i, j| rows[i][j]);
    Ok(SeriesPanel::new(dates, labels, values)?)
}

/// Read a row-labeled square matrix CSV (as written by [`write_matrix`]).
pub fn read_covariance(path: &Path) -> CliResult<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(CliError::Input(format!(
            "{}: need a label column and at least one factor column",
            path.display()
        )));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let m = labels.len();
    let mut entries: Vec<Vec<f64>> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if &record[0] != labels.get(r).map(String::as_str).unwrap_or("") {
            return Err(CliError::Input(format!(
                "{} row {}: row label {:?} does not match column label {:?}",
                path.display(),
                r + 2,
                &record[0],
                labels.get(r).map(String::as_str).unwrap_or("<none>")
            )));
        }
        let mut row = Vec::with_capacity(m);
        for cell in record.iter().skip(1) {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Input(format!(
                    "{} row {}: {cell:?} is not a number",
                    path.display(),
                    r + 2
                ))
            })?;
            row.push(v);
        }
        entries.push(row);
    }
    if entries.len() != m {
        return Err(CliError::Input(format!(
            "{}: expected {m} matrix rows, found {}",
            path.display(),
            entries.len()
        )));
    }
    let matrix = DMatrix::from_fn(m, m, |i, j| entries[i][j]);
    Ok((labels, matrix))
}

/// Render a row-labeled square matrix as CSV text; floats use the shortest
/// round-trip representation so output is byte-deterministic.
pub fn matrix_csv(labels: &[String], matrix: &DMatrix<f64>) -> String {
    let mut out = String::from("label");
    for l in labels {
        _ = write!(out, ",{l}");
    }
    out.push('\n');
    for (i, l) in labels.iter().enumerate() {
        _ = write!(out, "{l}");
        for j in 0..labels.len() {
            _ = write!(out, ",{}", matrix[(i, j)]);
        }
        out.push('\n');
    }
    out
}

/// Write a row-labeled square matrix CSV.
pub fn write_matrix(path: &Path, labels: &[String], matrix: &DMatrix<f64>) -> CliResult<()> {
    std::fs::write(path, matrix_csv(labels, matrix))
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Correlation matrix of a covariance matrix.
pub fn correlation_of(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let m = cov.nrows();
    DMatrix::from_fn(m, m, |i, j| {
        cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()
    })
}

/// Parse one `LABEL=VALUE` inline shock.
pub fn parse_inline_shock(arg: &str) -> CliResult<(String, f64)> {
    let (label, value) = arg.split_once('=').ok_or_else(|| {
        CliError::Input(format!("shock {arg:?} is not of the form LABEL=VALUE"))
    })?;
    if label.is_empty() {
        return Err(CliError::Input(format!("shock {arg:?} has an empty label")));
    }
    let v: f64 = value
        .parse()
        .map_err(|_| CliError::Input(format!("shock {arg:?}: {value:?} is not a number")))?;
    Ok((label.to_string(), v))
}

/// Read a shock file: one `label value` pair per line, `#` comments.
pub fn read_shock_file(path: &Path) -> CliResult<Vec<(String, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label = parts.next().expect("nonempty line");
        let value = parts.next().ok_or_else(|| {
            CliError::Input(format!(
                "{} line {}: expected \"label value\"",
                path.display(),
                idx + 1
            ))
        })?;
        if parts.next().is_some() {
            return Err(CliError::Input(format!(
                "{} line {}: expected exactly two fields",
                path.display(),
                idx + 1
            )));
        }
        let v: f64 = value.parse().map_err(|_| {
            CliError::Input(format!(
                "{} line {}: {value:?} is not a number",
                path.display(),
                idx + 1
            ))
        })?;
        pairs.push((label.to_string(), v));
    }
    if pairs.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no shocks found",
            path.display()
        )));
    }
    Ok(pairs)
}

/// Assemble a full scenario from sparse `label, value` pairs: named factors
/// take their shock, everything else is zero. Unknown or repeated labels
/// are rejected by name.
pub fn scenario_from_shocks(pairs: &[(String, f64)], labels: &[String]) -> CliResult<Scenario> {
    if pairs.is_empty() {
        return Err(CliError::Input("no shocks supplied".into()));
    }
    let mut values = DVector::zeros(labels.len());
    let mut seen = vec![false; labels.len()];
    for (label, v) in pairs {
        let i = labels.iter().position(|l| l == label).ok_or_else(|| {
            CliError::Input(format!("unknown factor label {label:?}"))
        })?;
        if seen[i] {
            return Err(CliError::Input(format!(
                "factor {label:?} shocked more than once"
            )));
        }
        seen[i] = true;
        values[i] = *v;
    }
    Ok(Scenario::new(values, labels.to_vec())?)
}

/// A parsed portfolio spec: the factor labels, the book itself, and the
/// optional cluster map.
pub struct ParsedPortfolio {
    pub labels: Vec<String>,
    pub book: Book,
    pub clusters: Option<ClusterMap>,
}

/// Linear or delta-gamma book.
pub enum Book {
    Linear(LinearPortfolio),
    Quadratic(QuadraticPortfolio),
}

impl Book {
    /// The book as a quadratic portfolio (linear books get `A = 0`),
    /// carrying the spec's factor labels.
    pub fn to_quadratic(&self, labels: &[String]) -> CliResult<QuadraticPortfolio> {
        match self {
            Book::Linear(p) => {
                let n = p.dim();
                Ok(QuadraticPortfolio::new(
                    DMatrix::zeros(n, n),
                    p.omega().clone(),
                    labels.to_vec(),
                )?)
            }
            Book::Quadratic(p) => Ok(p.clone()),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

/// Read a portfolio spec file (see the module docs for the format).
pub fn read_portfolio(path: &Path) -> CliResult<ParsedPortfolio> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut sections: Vec<(String, Vec<(usize, String)>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_lowercase();
            if sections.iter().any(|(n, _)| n == &name) {
                return Err(CliError::Input(format!(
                    "{} line {}: section [{name}] appears twice",
                    path.display(),
                    idx + 1
                )));
            }
            sections.push((name, Vec::new()));
        } else {
            let Some((_, lines)) = sections.last_mut() else {
                return Err(CliError::Input(format!(
                    "{} line {}: content before the first section header",
                    path.display(),
                    idx + 1
                )));
            };
            lines.push((idx + 1, line.to_string()));
        }
    }

    let mut factors: Option<Vec<String>> = None;
    let mut omega: Option<Vec<f64>> = None;
    let mut gamma: Option<Vec<Vec<f64>>> = None;
    let mut delta: Option<Vec<f64>> = None;
    let mut clusters: Option<Vec<(String, String)>> = None;
    for (name, lines) in sections {
        match name.as_str() {
            "factors" => {
                let mut labels = Vec::new();
                for (n, line) in lines {
                    if line.split_whitespace().count() != 1 {
                        return Err(CliError::Input(format!(
                            "{} line {n}: one factor label per line",
                            path.display()
                        )));
                    }
                    labels.push(line);
                }
                factors = Some(labels);
            }
            "omega" => omega = Some(parse_floats(path, &lines)?),
            "delta" => delta = Some(parse_floats(path, &lines)?),
            "gamma" => {
                let mut rows = Vec::new();
                for (n, line) in lines {
                    let row: Vec<f64> = line
                        .split_whitespace()
                        .map(|t| {
                            t.parse().map_err(|_| {
                                CliError::Input(format!(
                                    "{} line {n}: {t:?} is not a number",
                                    path.display()
                                ))
                            })
                        })
                        .collect::<CliResult<_>>()?;
                    if row.len() != rows.len() + 1 {
                        return Err(CliError::Input(format!(
                            "{} line {n}: lower-triangle row {} needs {} entries, found {}",
                            path.display(),
                            rows.len() + 1,
                            rows.len() + 1,
                            row.len()
                        )));
                    }
                    rows.push(row);
                }
                gamma = Some(rows);
            }
            "clusters" => {
                let mut pairs = Vec::new();
                for (n, line) in lines {
                    let mut parts = line.split_whitespace();
                    let (Some(factor), Some(cluster), None) =
                        (parts.next(), parts.next(), parts.next())
                    else {
                        return Err(CliError::Input(format!(
                            "{} line {n}: expected \"factor cluster\"",
                            path.display()
                        )));
                    };
                    pairs.push((factor.to_string(), cluster.to_string()));
                }
                clusters = Some(pairs);
            }
            other => {
                return Err(CliError::Input(format!(
                    "{}: unknown section [{other}]",
                    path.display()
                )));
            }
        }
    }

    let labels = factors.ok_or_else(|| {
        CliError::Input(format!("{}: missing [factors] section", path.display()))
    })?;
    let n = labels.len();
    if n == 0 {
        return Err(CliError::Input(format!(
            "{}: [factors] section is empty",
            path.display()
        )));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(CliError::Input(format!(
                "{}: duplicate factor label {l:?}",
                path.display()
            )));
        }
    }

    let book = match (omega, gamma, delta) {
        (Some(w), None, None) => {
            check_count(path, "omega", w.len(), n)?;
            Book::Linear(LinearPortfolio::new(DVector::from_vec(w))?)
        }
        (None, Some(g), Some(b)) => {
            check_count(path, "gamma", g.len(), n)?;
            check_count(path, "delta", b.len(), n)?;
            let mut a = DMatrix::zeros(n, n);
            for (i, row) in g.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            Book::Quadratic(QuadraticPortfolio::new(
                a,
                DVector::from_vec(b),
                labels.clone(),
            )?)
        }
        (None, None, None) => {
            return Err(CliError::Input(format!(
                "{}: need either [omega] or [gamma] + [delta]",
                path.display()
            )));
        }
        _ => {
            return Err(CliError::Input(format!(
                "{}: [omega] and [gamma]/[delta] are mutually exclusive, \
                 and [gamma] and [delta] go together",
                path.display()
            )));
        }
    };

    let clusters = match clusters {
        None => None,
        Some(pairs) => {
            let mut assignment = vec![usize::MAX; n];
            let mut cluster_labels: Vec<String> = Vec::new();
            for (factor, cluster) in &pairs {
                let i = labels.iter().position(|l| l == factor).ok_or_else(|| {
                    CliError::Input(format!(
                        "{}: [clusters] names unknown factor {factor:?}",
                        path.display()
                    ))
                })?;
                if assignment[i] != usize::MAX {
                    return Err(CliError::Input(format!(
                        "{}: factor {factor:?} assigned to two clusters",
                        path.display()
                    )));
                }
                let c = match cluster_labels.iter().position(|c| c == cluster) {
                    Some(c) => c,
                    None => {
                        cluster_labels.push(cluster.clone());
                        cluster_labels.len() - 1
                    }
                };
                assignment[i] = c;
            }
            if let Some(i) = assignment.iter().position(|&c| c == usize::MAX) {
                return Err(CliError::Input(format!(
                    "{}: factor {:?} is missing from [clusters]",
                    path.display(),
                    labels[i]
                )));
            }
            Some(ClusterMap::new(labels.clone(), cluster_labels, assignment)?)
        }
    };

    Ok(ParsedPortfolio {
        labels,
        book,
        clusters,
    })
}

fn parse_floats(path: &Path, lines: &[(usize, String)]) -> CliResult<Vec<f64>> {
    let mut out = Vec::new();
    for (n, line) in lines {
        for t in line.split_whitespace() {
            out.push(t.parse().map_err(|_| {
                CliError::Input(format!(
                    "{} line {n}: {t:?} is not a number",
                    path.display()
                ))
            })?);
        }
    }
    Ok(out)
}

fn check_count(path: &Path, section: &str, got: usize, expected: usize) -> CliResult<()> {
    if got != expected {
        return Err(CliError::Input(format!(
            "{}: [{section}] has {got} entries for {expected} factors",
            path.display()
        )));
    }
    Ok(())
}

/// Element-wise label agreement between two sources, by position.
pub fn check_labels(expected: &[String], got: &[String], context: &str) -> CliResult<()> {
    if expected.len() != got.len() {
        return Err(CliError::Input(format!(
            "{context}: {} factors vs {}",
            expected.len(),
            got.len()
        )));
    }
    for (i, (e, g)) in expected.iter().zip(got).enumerate() {
        if e != g {
            return Err(CliError::Input(format!(
                "{context}: factor {} is {e:?} on one side and {g:?} on the other",
                i + 1
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp_file(content: &str, name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("erst-io-{}-{name}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn panel_round_trip() {
        let path = temp_file(
            "date,a,b\n2024-01-02,0.01,-0.02\n2024-01-03,-0.005,0.015\n",
            "panel.csv",
        );
        let p = read_panel(&path).unwrap();
        assert_eq!(p.labels(), &["a".to_string(), "b".to_string()]);
        assert_eq!(p.n_days(), 2);
        assert_eq!(p.values()[(1, 0)], -0.005);
    }

    #[test]
    fn panel_rejects_missing_cells_and_bad_dates() {
        let missing = temp_file("date,a,b\n2024-01-02,0.01,\n", "missing.csv");
        assert!(read_panel(&missing).is_err());
        let bad_date = temp_file("date,a\n02-01-2024,0.01\n", "bad_date.csv");
        assert!(read_panel(&bad_date).is_err());
    }

    #[test]
    fn covariance_round_trips_bit_for_bit() {
        let labels = vec!["x".to_string(), "y".to_string()];
        let m = DMatrix::from_row_slice(2, 2, &[0.01, 0.0025, 0.0025, 0.01]);
        let text = matrix_csv(&labels, &m);
        let path = temp_file(&text, "cov.csv");
        let (read_labels, read_m) = read_covariance(&path).unwrap();
        assert_eq!(read_labels, labels);
        assert_eq!(read_m, m);
    }

    #[test]
    fn shock_assembly_defaults_unnamed_factors_to_zero() {
        let labels = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let s =
            scenario_from_shocks(&[("b".to_string(), -0.1)], &labels).unwrap();
        assert_eq!(s.values().as_slice(), &[0.0, -0.1, 0.0]);
        assert!(scenario_from_shocks(&[("zz".to_string(), 1.0)], &labels).is_err());
    }

    #[test]
    fn linear_portfolio_spec_parses() {
        let path = temp_file(
            "# book\n[factors]\neq\nfx\n\n[omega]\n1.0\n-0.5\n",
            "linear.txt",
        );
        let p = read_portfolio(&path).unwrap();
        assert_eq!(p.labels, vec!["eq".to_string(), "fx".to_string()]);
        match &p.book {
            Book::Linear(l) => assert_eq!(l.omega().as_slice(), &[1.0, -0.5]),
            _ => panic!("expected a linear book"),
        }
    }

    #[test]
    fn quadratic_portfolio_spec_parses_with_clusters() {
        let path = temp_file(
            "[factors]\na\nb\nc\n[gamma]\n2.0\n0.5 -2.0\n0.0 0.0 1.0\n\
             [delta]\n1.0 0.0 0.5\n[clusters]\na eq\nb eq\nc rates\n",
            "quad.txt",
        );
        let p = read_portfolio(&path).unwrap();
        let Book::Quadratic(q) = &p.book else {
            panic!("expected a quadratic book");
        };
        assert_eq!(q.a()[(1, 0)], 0.5);
        assert_eq!(q.a()[(0, 1)], 0.5);
        let map = p.clusters.unwrap();
        assert_eq!(map.cluster_labels(), &["eq".to_string(), "rates".to_string()]);
        assert_eq!(map.assignment(), &[0, 0, 1]);
    }

    #[test]
    fn portfolio_spec_rejects_mixed_and_incomplete_books() {
        let both = temp_file(
            "[factors]\na\n[omega]\n1.0\n[gamma]\n1.0\n[delta]\n0.0\n",
            "both.txt",
        );
        assert!(read_portfolio(&both).is_err());
        let gamma_only = temp_file("[factors]\na\n[gamma]\n1.0\n", "gamma_only.txt");
        assert!(read_portfolio(&gamma_only).is_err());
        let short = temp_file("[factors]\na\nb\n[omega]\n1.0\n", "short.txt");
        assert!(read_portfolio(&short).is_err());
    }
}
