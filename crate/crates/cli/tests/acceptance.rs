//! The full acceptance battery, one test per criterion. Each prints a single
//! `Ck PASS|FAIL` line straight to stderr so it shows without `--nocapture`.

use lpproj_cli::config::RunConfig;
use lpproj_cli::validate::{run_criterion, Context, Oracles, Suite};
use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

// Criteria run one at a time so the runtime budgets are not shared.
static SERIAL: Mutex<()> = Mutex::new(());

fn criterion(id: usize, budget: Option<Duration>) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let cfg = RunConfig::default();
    let ctx = Context { seed: cfg.seed, windows: cfg.windows, oracles: Oracles::default() };
    let t = Instant::now();
    let report = run_criterion(&ctx, id, Suite::Full);
    let elapsed = t.elapsed();
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let ok = report.passed() && in_time;
    let mut line = format!("\nC{id} {} {}: {:.1}s", if ok { "PASS" } else { "FAIL" }, report.title, elapsed.as_secs_f64());
    if let Some(b) = budget {
        line.push_str(&format!(" (budget {}s)", b.as_secs()));
    }
    line.push_str(&format!(", {} checks", report.checks.len()));
    if !report.passed() {
        line.push_str(&format!("\n  {}", report.summary()));
    }
    writeln!(std::io::stderr(), "{line}").unwrap();
    assert!(report.passed(), "{}", report.summary());
    assert!(in_time, "C{id} took {elapsed:?}, budget {budget:?}");
}

#[test]
fn c01_moment_oracles() {
    criterion(1, Some(Duration::from_secs(60)));
}

#[test]
fn c02_cone_radius_independence() {
    criterion(2, None);
}

#[test]
fn c03_ball_closed_forms() {
    criterion(3, None);
}

#[test]
fn c04_quadrature_equivalence() {
    criterion(4, Some(Duration::from_secs(180)));
}

#[test]
fn c05_ratio_sweep() {
    criterion(5, Some(Duration::from_secs(600)));
}

#[test]
fn c06_haar_typical() {
    criterion(6, None);
}

#[test]
fn c07_epsi_scaling() {
    criterion(7, None);
}

#[test]
fn c08_large_p_limit() {
    criterion(8, None);
}

#[test]
fn c09_orlicz_equivalence() {
    criterion(9, None);
}

#[test]
fn c10_permutation_average() {
    criterion(10, None);
}

#[test]
fn c11_subset_bound() {
    criterion(11, None);
}

#[test]
fn c12_symmetric_sum() {
    criterion(12, None);
}

#[test]
fn c13_projection_decomposition() {
    criterion(13, None);
}

#[test]
fn c14_steiner_comparison() {
    criterion(14, None);
}

#[test]
fn c15_determinism() {
    criterion(15, None);
}
