//! End-to-end tests of the `erst` binary: fixture files in, reports and
//! exit codes out. Numeric correctness of the underlying solvers is covered
//! by the library's own tests; here the focus is parsing, routing, report
//! shape, determinism and the exit-code contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn erst() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_erst"));
    // Keep the ambient environment from leaking a seed into the tests.
    cmd.env_remove("ERST_SEED");
    cmd
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let out = cmd.output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("utf-8 stdout"),
        String::from_utf8(out.stderr).expect("utf-8 stderr"),
    )
}

fn line<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("missing {key:?} in report:\n{report}"))
}

fn field(report: &str, key: &str) -> f64 {
    line(report, key)
        .parse()
        .unwrap_or_else(|_| panic!("{key:?} is not a number in report:\n{report}"))
}

fn parse_scenario(rendered: &str) -> Vec<(String, f64)> {
    rendered
        .split_whitespace()
        .map(|pair| {
            let (label, value) = pair.split_once('=').expect("label=value");
            (label.to_string(), value.parse().expect("numeric shock"))
        })
        .collect()
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).expect("fixture write");
    path
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// 10% volatilities with correlation 0.25.
const REF_SIGMA: &str = "label,f1,f2\nf1,0.01,0.0025\nf2,0.0025,0.01\n";
const IDENTITY_2: &str = "label,f1,f2\nf1,1,0\nf2,0,1\n";
const LONG_SHORT: &str = "[factors]\nf1\nf2\n\n[omega]\n1 -1\n";
/// P&L = (s1^2 - s2^2) / 2: the canonical indefinite book.
const SADDLE: &str = "[factors]\nf1\nf2\n\n[gamma]\n1\n0 -1\n\n[delta]\n0 0\n";
/// P&L = -s1^2 + s2^2: bottom eigenvalue on f1, no gradient — a symmetric
/// pair of worst cases on any budget.
const NEG_SADDLE: &str = "[factors]\nf1\nf2\n\n[gamma]\n-2\n0 2\n\n[delta]\n0 0\n";
/// Convex bowl, P&L >= 0 everywhere: any negative target is unreachable.
const BOWL: &str = "[factors]\nf1\nf2\n\n[gamma]\n2\n0 2\n\n[delta]\n0 0\n";

const PANEL_8X3: &str = "date,a,b,c\n\
2024-01-01,0.012,-0.008,0.020\n\
2024-01-02,-0.006,0.014,-0.010\n\
2024-01-03,0.018,0.004,0.006\n\
2024-01-04,-0.012,-0.016,0.014\n\
2024-01-05,0.004,0.010,-0.018\n\
2024-01-08,0.008,-0.012,0.010\n\
2024-01-09,-0.016,0.006,-0.004\n\
2024-01-10,0.010,0.002,0.012\n";

#[test]
fn fit_reports_the_reference_plausibility() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let (code, out, _) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(["--shock", "f1=-0.10", "--shock", "f2=-0.20", "--alpha-max", "0.95"]));
    assert_eq!(code, 0, "report:\n{out}");
    assert!(close(field(&out, "maha_sq"), 64.0 / 15.0, 1e-12));
    assert!(close(field(&out, "plausibility"), 0.8815581709861963, 1e-9));
    assert!(line(&out, "fitted").contains("not needed"));
}

#[test]
fn fit_rescales_onto_the_ceiling_and_keeps_the_direction() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let (code, out, _) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(["--shock", "f1=-0.10", "--shock", "f2=-0.20", "--alpha-max", "0.5"]));
    assert_eq!(code, 0, "report:\n{out}");
    let ratio = field(&out, "ratio");
    assert!(ratio > 0.0 && ratio < 1.0, "shrinking rescale, got {ratio}");
    let fitted = parse_scenario(line(&out, "fitted"));
    assert!(close(fitted[0].1, -0.10 * ratio, 1e-12));
    assert!(close(fitted[1].1, -0.20 * ratio, 1e-12));
    assert!(close(
        field(&out, "fitted_maha_sq"),
        field(&out, "budget_maha_sq"),
        1e-9,
    ));
}

#[test]
fn fit_json_mirrors_the_text_report() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let (code, out, _) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(["--shock", "f1=-0.10", "--shock", "f2=-0.20", "--alpha-max", "0.95", "--json"]));
    assert_eq!(code, 0);
    let doc: serde_json::Value = serde_json::from_str(&out).expect("valid json");
    assert_eq!(doc["mode"], "fit");
    assert_eq!(doc["family"], "normal");
    assert!(close(doc["plausibility"].as_f64().unwrap(), 0.8815581709861963, 1e-9));
    assert!(doc["fitted"].is_null(), "within budget: no fitted scenario");
}

#[test]
fn the_zero_scenario_has_zero_plausibility_and_needs_no_fit() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let (code, out, _) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(["--shock", "f1=0", "--alpha-max", "0.9"]));
    assert_eq!(code, 0, "report:\n{out}");
    assert_eq!(field(&out, "maha_sq"), 0.0);
    assert_eq!(field(&out, "plausibility"), 0.0);
    assert!(line(&out, "fitted").contains("not needed"));
}

#[test]
fn a_zero_radius_budget_yields_the_zero_report() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let book = write(dir.path(), "book.txt", LONG_SHORT);
    let reference = write(dir.path(), "ref.txt", "f1 0\nf2 0\n");
    let (code, out, _) = run(erst()
        .args(["maxerst", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .arg("--historical-scenario")
        .arg(&reference));
    assert_eq!(code, 0, "report:\n{out}");
    assert_eq!(field(&out, "maha_sq"), 0.0);
    assert_eq!(field(&out, "pnl").abs(), 0.0);
    assert_eq!(line(&out, "mu"), "inf");
    assert!(!out.contains("var[alpha"), "no comparator at level 0:\n{out}");
}

#[test]
fn unknown_shock_labels_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let (code, _, err) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(["--shock", "bogus=1", "--alpha-max", "0.9"]));
    assert_eq!(code, 2, "stderr:\n{err}");
    assert!(err.contains("unknown factor label"), "stderr:\n{err}");
}

#[test]
fn non_positive_definite_covariance_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", "label,f1,f2\nf1,1,2\nf2,2,1\n");
    let (code, _, err) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(["--shock", "f1=1", "--alpha-max", "0.9"]));
    assert_eq!(code, 3, "stderr:\n{err}");
    assert!(err.contains("positive definite"), "stderr:\n{err}");
}

#[test]
fn portfolio_and_covariance_labels_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let book = write(dir.path(), "book.txt", "[factors]\na\nb\n\n[omega]\n1 -1\n");
    let (code, _, err) = run(erst()
        .args(["maxerst", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(["--alpha", "0.95"]));
    assert_eq!(code, 2, "stderr:\n{err}");
    assert!(err.contains("portfolio vs covariance source"), "stderr:\n{err}");
}

#[test]
fn linear_worst_case_matches_the_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let book = write(dir.path(), "book.txt", LONG_SHORT);
    let (code, out, _) = run(erst()
        .args(["maxerst", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(["--alpha", "0.95"]));
    assert_eq!(code, 0, "report:\n{out}");
    assert_eq!(line(&out, "book"), "linear");
    assert_eq!(line(&out, "multiplicity"), "unique");
    assert!(close(field(&out, "pnl"), -0.2997865377341346, 1e-10));
    assert!(close(field(&out, "var[alpha=0.95]"), -0.20145260437986695, 1e-10));
    assert!(close(field(&out, "es[alpha=0.95]"), -0.2526296932148468, 1e-10));
    assert!(close(field(&out, "plausibility"), 0.95, 1e-9));
    let scenario = parse_scenario(line(&out, "scenario[1]"));
    assert_eq!(scenario[0].0, "f1");
    assert_eq!(scenario[1].0, "f2");
    assert!(scenario[0].1 < 0.0 && scenario[1].1 > 0.0, "long leg down, short leg up");
}

#[test]
fn degenerate_budget_solve_prints_the_symmetric_pair() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", IDENTITY_2);
    let book = write(dir.path(), "book.txt", NEG_SADDLE);
    let (code, out, _) = run(erst()
        .args(["maxerst", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(["--alpha", "0.5"]));
    assert_eq!(code, 0, "report:\n{out}");
    assert_eq!(line(&out, "multiplicity"), "pair");
    let first = parse_scenario(line(&out, "scenario[1]"));
    let second = parse_scenario(line(&out, "scenario[2]"));
    assert!(close(first[0].1, -second[0].1, 1e-12), "mirrored on f1");
    assert!(first[1].1 == 0.0 && second[1].1 == 0.0, "no f2 component");
}

#[test]
fn loss_target_report_round_trips_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", IDENTITY_2);
    let book = write(dir.path(), "book.txt", SADDLE);
    let (code, out, _) = run(erst()
        .args(["loss", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(["--loss", "-1", "--json"]));
    assert_eq!(code, 0, "report:\n{out}");
    let doc: serde_json::Value = serde_json::from_str(&out).expect("valid json");
    assert_eq!(doc["outcome"]["multiplicity"]["kind"], "pair");
    assert!(close(doc["outcome"]["maha_sq"].as_f64().unwrap(), 2.0, 1e-9));
    let scenarios = doc["outcome"]["scenarios"].as_array().unwrap();
    assert_eq!(scenarios.len(), 2);
    let s2 = scenarios[0]["values"][1].as_f64().unwrap();
    assert!(close(s2.abs(), f64::sqrt(2.0), 1e-9));
}

#[test]
fn unreachable_targets_exit_4_and_report_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", IDENTITY_2);
    let book = write(dir.path(), "book.txt", BOWL);
    let (code, _, err) = run(erst()
        .args(["loss", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(["--loss", "-1"]));
    assert_eq!(code, 4, "stderr:\n{err}");
    assert!(err.contains("unreachable") && err.contains("bound"), "stderr:\n{err}");
}

#[test]
fn zero_loss_target_is_the_null_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", IDENTITY_2);
    let book = write(dir.path(), "book.txt", SADDLE);
    let (code, out, _) = run(erst()
        .args(["loss", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(["--loss", "0"]));
    assert_eq!(code, 0, "report:\n{out}");
    assert_eq!(field(&out, "pnl"), 0.0);
    assert_eq!(field(&out, "maha_sq"), 0.0);
    let scenario = parse_scenario(line(&out, "scenario[1]"));
    assert!(scenario.iter().all(|(_, v)| *v == 0.0));
}

#[test]
fn positive_loss_targets_point_at_the_profit_flag() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", IDENTITY_2);
    let book = write(dir.path(), "book.txt", SADDLE);
    let (code, _, err) = run(erst()
        .args(["loss", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(["--loss", "1"]));
    assert_eq!(code, 2, "stderr:\n{err}");
    assert!(err.contains("--profit"), "stderr:\n{err}");

    let (code, out, _) = run(erst()
        .args(["loss", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(["--profit", "1"]));
    assert_eq!(code, 0, "report:\n{out}");
    assert!(close(field(&out, "pnl"), 1.0, 1e-9));
    assert!(close(field(&out, "maha_sq"), 2.0, 1e-9));
}

#[test]
fn historical_budgets_report_the_reference_radius() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let book = write(dir.path(), "book.txt", LONG_SHORT);
    let reference = write(dir.path(), "ref.txt", "f1 -0.10\nf2 -0.20\n");
    let (code, out, _) = run(erst()
        .args(["maxerst", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .arg("--historical-scenario")
        .arg(&reference));
    assert_eq!(code, 0, "report:\n{out}");
    let budget = line(&out, "budget");
    assert!(budget.starts_with("historical q="), "budget line: {budget}");
    assert!(close(field(&out, "maha_sq"), 64.0 / 15.0, 1e-9));
    // Comparator VaR/ES are quoted at the budget's implied confidence level.
    assert!(out.contains("var[alpha=0.88155"), "report:\n{out}");
}

#[test]
fn student_t_family_requires_and_uses_nu() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let (code, _, err) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(["--shock", "f1=-0.10", "--alpha-max", "0.9", "--family", "student-t"]));
    assert_eq!(code, 2, "stderr:\n{err}");
    assert!(err.contains("--nu"), "stderr:\n{err}");

    let (code, out, _) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args([
            "--shock", "f1=-0.10", "--shock", "f2=-0.20",
            "--alpha-max", "0.95", "--family", "student-t", "--nu", "2",
            "--mc-draws", "50000", "--seed", "42",
        ]));
    assert_eq!(code, 0, "report:\n{out}");
    assert_eq!(line(&out, "family"), "student-t(nu=2)");
    assert!(close(field(&out, "plausibility"), 0.68, 0.03), "fat tails tame the scenario");
}

#[test]
fn seed_resolution_prefers_flag_over_environment() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let base = [
        "--shock", "f1=-0.10", "--shock", "f2=-0.20",
        "--alpha-max", "0.95", "--family", "student-t", "--nu", "2",
        "--mc-draws", "20000",
    ];
    let (_, with_flag, _) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(base)
        .args(["--seed", "12345"]));
    let (_, with_env, _) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(base)
        .env("ERST_SEED", "12345"));
    let (_, flag_beats_env, _) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(base)
        .args(["--seed", "12345"])
        .env("ERST_SEED", "777"));
    let (_, other_seed, _) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(base)
        .args(["--seed", "777"]));
    assert_eq!(with_flag, with_env, "flag and env spell the same seed");
    assert_eq!(with_flag, flag_beats_env, "the flag wins over the environment");
    assert_ne!(with_flag, other_seed, "the seed reaches the tabulated law");

    let (code, _, err) = run(erst()
        .args(["fit", "--sigma"])
        .arg(&sigma)
        .args(base)
        .env("ERST_SEED", "not-a-seed"));
    assert_eq!(code, 2, "stderr:\n{err}");
    assert!(err.contains("ERST_SEED"), "stderr:\n{err}");
}

#[test]
fn reports_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let book = write(dir.path(), "book.txt", LONG_SHORT);
    let args = [
        "--alpha", "0.95", "--family", "student-t", "--nu", "3",
        "--mc-draws", "20000", "--json",
    ];
    let (_, first, _) = run(erst()
        .args(["maxerst", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(args));
    let (_, second, _) = run(erst()
        .args(["maxerst", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(args));
    assert_eq!(first, second);

    let (_, sweep_a, _) = run(erst().args(["sweep", "--beta", "0.5", "--rho-steps", "3", "--paths", "5000"]));
    let (_, sweep_b, _) = run(erst().args(["sweep", "--beta", "0.5", "--rho-steps", "3", "--paths", "5000"]));
    assert_eq!(sweep_a, sweep_b);
}

#[test]
fn report_files_mirror_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = write(dir.path(), "sigma.csv", REF_SIGMA);
    let book = write(dir.path(), "book.txt", LONG_SHORT);
    let report = dir.path().join("report.txt");
    let (code, out, _) = run(erst()
        .args(["maxerst", "--portfolio"])
        .arg(&book)
        .arg("--sigma")
        .arg(&sigma)
        .args(["--alpha", "0.95", "--output"])
        .arg(&report));
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(&report).unwrap(), out);
}

#[test]
fn zero_theta_stress_writes_an_identical_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let panel = write(dir.path(), "panel.csv", PANEL_8X3);
    let out_dir = dir.path().join("out");
    let (code, out, _) = run(erst()
        .args(["sigma", "--panel"])
        .arg(&panel)
        .args(["--theta", "0"])
        .arg("--output-dir")
        .arg(&out_dir));
    assert_eq!(code, 0, "report:\n{out}");
    let sample = fs::read_to_string(out_dir.join("sample_covariance.csv")).unwrap();
    let stressed = fs::read_to_string(out_dir.join("stressed_covariance.csv")).unwrap();
    assert_eq!(sample, stressed, "theta = 0 must not touch a single byte");
}

#[test]
fn short_panels_are_flagged_and_repaired() {
    let dir = tempfile::tempdir().unwrap();
    let panel = write(
        dir.path(),
        "panel.csv",
        "date,a,b,c\n2024-01-01,0.01,0.02,-0.01\n2024-01-02,-0.02,0.01,0.03\n",
    );
    let out_dir = dir.path().join("out");
    let (code, out, _) = run(erst()
        .args(["sigma", "--panel"])
        .arg(&panel)
        .arg("--output-dir")
        .arg(&out_dir));
    assert_eq!(code, 0, "report:\n{out}");
    assert!(line(&out, "pd").contains("positive_definite=false"), "report:\n{out}");
    assert!(line(&out, "rank_bound").ends_with("= 1"), "report:\n{out}");
    assert!(line(&out, "note").contains("not positive definite"), "report:\n{out}");
    assert!(out_dir.join("shrunk_covariance.csv").exists());
    let prov = fs::read_to_string(out_dir.join("provenance.txt")).unwrap();
    assert!(prov.contains("shrink: delta="), "provenance:\n{prov}");
}

#[test]
fn block_stress_recorrelates_the_block_and_spares_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let panel = write(dir.path(), "panel.csv", PANEL_8X3);
    let out_dir = dir.path().join("out");
    let (code, out, _) = run(erst()
        .args(["sigma", "--panel"])
        .arg(&panel)
        .args(["--block", "0:1:0.5"])
        .arg("--output-dir")
        .arg(&out_dir));
    assert_eq!(code, 0, "report:\n{out}");

    let cell = |csv: &str, row: usize, col: usize| -> String {
        csv.lines().nth(row + 1).unwrap().split(',').nth(col + 1).unwrap().to_string()
    };
    let sample = fs::read_to_string(out_dir.join("sample_covariance.csv")).unwrap();
    let stressed = fs::read_to_string(out_dir.join("stressed_covariance.csv")).unwrap();

    // Diagonal variances survive the stress verbatim; the out-of-block
    // diagonal cell is untouched text.
    for i in 0..3 {
        assert_eq!(cell(&sample, i, i), cell(&stressed, i, i), "variance {i}");
    }
    let corr = |csv: &str| -> f64 {
        let c01: f64 = cell(csv, 0, 1).parse().unwrap();
        let c00: f64 = cell(csv, 0, 0).parse().unwrap();
        let c11: f64 = cell(csv, 1, 1).parse().unwrap();
        c01 / (c00 * c11).sqrt()
    };
    assert!(
        corr(&stressed) > corr(&sample),
        "blending toward the block average must raise the in-block correlation \
         ({} vs {})",
        corr(&stressed),
        corr(&sample),
    );
    assert!(line(&out, "stress").contains("0..=1 theta=0.5"), "report:\n{out}");
}

#[test]
fn calibration_recovers_the_stress_weight() {
    let dir = tempfile::tempdir().unwrap();
    let panel = write(dir.path(), "panel.csv", PANEL_8X3);
    let stressed_dir = dir.path().join("stressed");
    let (code, _, _) = run(erst()
        .args(["sigma", "--panel"])
        .arg(&panel)
        .args(["--theta", "0.25"])
        .arg("--output-dir")
        .arg(&stressed_dir));
    assert_eq!(code, 0);

    let cal_dir = dir.path().join("cal");
    let (code, out, _) = run(erst()
        .args(["sigma", "--panel"])
        .arg(&panel)
        .arg("--calibrate-theta")
        .arg(stressed_dir.join("stressed_covariance.csv"))
        .arg("--output-dir")
        .arg(&cal_dir));
    assert_eq!(code, 0, "report:\n{out}");
    let calibration = line(&out, "calibration");
    let theta: f64 = calibration
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("theta="))
        .expect("theta token")
        .parse()
        .expect("numeric theta");
    assert!((theta - 0.25).abs() <= 0.005, "recovered theta = {theta}");
}

#[test]
fn compressed_solves_report_betas_and_reconstructions() {
    let dir = tempfile::tempdir().unwrap();
    let panel = write(
        dir.path(),
        "panel.csv",
        "date,x1,x2,x3,x4\n\
         2024-01-01,0.011,0.009,-0.014,-0.010\n\
         2024-01-02,-0.007,-0.008,0.006,0.009\n\
         2024-01-03,0.015,0.012,0.004,0.002\n\
         2024-01-04,-0.011,-0.013,0.012,0.008\n\
         2024-01-05,0.006,0.004,-0.009,-0.012\n\
         2024-01-08,-0.013,-0.010,0.008,0.011\n",
    );
    let book = write(
        dir.path(),
        "book.txt",
        "[factors]\nx1\nx2\nx3\nx4\n\n\
         [gamma]\n0.6\n0 0.4\n0 0 -0.5\n0 0 0 0.2\n\n\
         [delta]\n0.5 -0.3 0.2 0.4\n\n\
         [clusters]\nx1 g1\nx2 g1\nx3 g2\nx4 g2\n",
    );
    let (code, out, _) = run(erst()
        .args(["maxerst", "--portfolio"])
        .arg(&book)
        .arg("--panel")
        .arg(&panel)
        .args(["--alpha", "0.9", "--compress"]));
    assert_eq!(code, 0, "report:\n{out}");
    assert!(line(&out, "compressed").contains("4 factors -> 2 clusters"), "report:\n{out}");
    assert_eq!(line(&out, "factors"), "g1, g2");
    let betas = parse_scenario(line(&out, "betas"));
    assert_eq!(betas.len(), 4);
    let reconstructed = parse_scenario(line(&out, "reconstructed[1]"));
    assert_eq!(reconstructed.len(), 4);
    assert_eq!(reconstructed[0].0, "x1");

    // Without a clusters section the same request must be rejected as input.
    let flat = write(dir.path(), "flat.txt", "[factors]\nx1\nx2\nx3\nx4\n\n[omega]\n1 1 1 1\n");
    let (code, _, err) = run(erst()
        .args(["maxerst", "--portfolio"])
        .arg(&flat)
        .arg("--panel")
        .arg(&panel)
        .args(["--alpha", "0.9", "--compress"]));
    assert_eq!(code, 2, "stderr:\n{err}");
    assert!(err.contains("[clusters]"), "stderr:\n{err}");
}

#[test]
fn sweep_emits_one_row_per_grid_cell() {
    let out_file_dir = tempfile::tempdir().unwrap();
    let csv_path = out_file_dir.path().join("sweep.csv");
    let (code, out, _) = run(erst()
        .args(["sweep", "--beta", "0", "--rho-steps", "1", "--paths", "2000", "--output"])
        .arg(&csv_path));
    assert_eq!(code, 0);
    assert!(out.is_empty(), "the table goes to the file, not stdout");
    let table = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "rho,beta,var,var_std_error,maxerst,ratio");
    assert_eq!(lines.len(), 2, "one beta, one rho: a single data row");
    assert!(lines[1].starts_with("-0.8,0,"), "row: {}", lines[1]);
}
