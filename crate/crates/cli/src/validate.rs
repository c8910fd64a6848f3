//! The acceptance battery behind `lpproj validate`.
//!
//! Every criterion reads its windows from [`Windows`] and its oracles from
//! [`Oracles`], so a corrupted oracle can be injected to check that the suite
//! notices. Reports carry measured values only; timings go to stderr.

use crate::seeds::{direction_stream, task_stream};
use anyhow::Result;
use lpproj::linalg::SquareMatrix;
use lpproj::oracle_quad::{quad_moments_projection, QuadConfig};
use lpproj::orlicz::OrliczM;
use lpproj::permavg::{brute_avg_permutations, rearrangement_functional, ratio_window_check, RearrangementInput};
use lpproj::projest::{estimate_ef, variance_report, ProjectedBodySpec};
use lpproj::sampling::{cone_radius_correlation, estimate_g_moments, estimate_s_moments};
use lpproj::specfun::moment_s;
use lpproj::stats::MomentEstimate;
use lpproj::steiner::{projection_decomposition_check, steiner_variance_compare};
use lpproj::weights::{
    epsi_scaling_check, estimate_epsi, estimate_psi_phi, remark_limit, subset_psi_ratio, symmetric_sum_moment, Direction,
    PsiMoment,
};
use lpproj::windows::Windows;
use lpproj::PExponent;
use rand::Rng;
use serde::Serialize;
use std::time::Instant;

pub type MomentG = fn(PExponent, f64) -> lpproj::Result<f64>;

/// Closed forms the battery compares against.
#[derive(Clone, Copy)]
pub struct Oracles {
    pub moment_g: MomentG,
}

impl Default for Oracles {
    fn default() -> Self {
        Oracles { moment_g: lpproj::specfun::moment_g }
    }
}

fn corrupted_moment_g(p: PExponent, alpha: f64) -> lpproj::Result<f64> {
    Ok(lpproj::specfun::moment_g(p, alpha)? * 1.05)
}

/// Deliberate faults for checking that the battery fails when it should.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Scales the `E|g|^α` oracle by 1.05.
    MomentG,
}

impl Oracles {
    pub fn with_fault(fault: Option<Fault>) -> Self {
        match fault {
            None => Oracles::default(),
            Some(Fault::MomentG) => Oracles { moment_g: corrupted_moment_g },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Quick,
    Full,
}

#[derive(Clone)]
pub struct Context {
    pub seed: u64,
    pub windows: Windows,
    pub oracles: Oracles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// One measured quantity with the bound it was held to.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub case: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    pub pass: bool,
}

impl Check {
    /// `|mean - target| <= k·stderr`.
    fn sigma(case: String, e: &MomentEstimate, target: f64, k: f64) -> Self {
        Check { pass: e.within(target, k), ..Self::est(case, e).target(target) }
    }

    /// `lo - k·stderr <= mean <= hi + k·stderr`; pass `k = 0` for a plain window.
    fn window(case: String, e: &MomentEstimate, lo: Option<f64>, hi: Option<f64>, k: f64) -> Self {
        let slack = k * e.stderr;
        let pass = lo.is_none_or(|l| e.mean >= l - slack) && hi.is_none_or(|h| e.mean <= h + slack);
        Check { lo, hi, pass, ..Self::est(case, e) }
    }

    fn bound(case: String, value: f64, lo: Option<f64>, hi: Option<f64>) -> Self {
        let pass = value.is_finite() && lo.is_none_or(|l| value >= l) && hi.is_none_or(|h| value <= h);
        Check { case, value, stderr: None, target: None, lo, hi, pass }
    }

    fn est(case: String, e: &MomentEstimate) -> Self {
        Check { case, value: e.mean, stderr: Some(e.stderr), target: None, lo: None, hi: None, pass: false }
    }

    fn target(self, t: f64) -> Self {
        Check { target: Some(t), ..self }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: String,
    pub title: &'static str,
    pub status: Status,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    /// One line for humans: id, verdict, failing checks.
    pub fn summary(&self) -> String {
        let verdict = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let mut s = format!("{} {verdict} {} ({} checks, {failed} failed)", self.id, self.title, self.checks.len());
        if let Some(d) = &self.detail {
            s.push_str(": ");
            s.push_str(d);
        }
        for c in self.checks.iter().filter(|c| !c.pass).take(5) {
            s.push_str(&format!("\n    {}: value {} stderr {:?} target {:?} lo {:?} hi {:?}", c.case, c.value, c.stderr, c.target, c.lo, c.hi));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub const TITLES: [&str; 15] = [
    "moment oracles",
    "independence of cone point and radius",
    "Euclidean ball closed forms",
    "quadrature oracle equivalence",
    "ratio boundedness sweep",
    "Haar-typical ratio bound",
    "E psi scaling",
    "large-p limit of E psi",
    "Orlicz norm equivalence",
    "permutation average",
    "subset bound",
    "symmetric sum moments",
    "projection decomposition",
    "Steiner comparison",
    "determinism",
];

/// Criteria run by the quick suite; 7 and 9 on a reduced grid.
pub const QUICK: [usize; 5] = [1, 2, 3, 7, 9];

fn pe(p: f64) -> PExponent {
    PExponent::new(p).expect("criterion exponents are valid")
}

fn haar(ctx: &Context, n: usize, k: usize) -> lpproj::Result<Direction> {
    Direction::haar(&mut direction_stream(ctx.seed, n, k).rng(), n)
}

fn stream(ctx: &Context, id: usize, p: f64, n: usize, k: usize) -> lpproj::sampling::RngStream {
    task_stream(ctx.seed, &format!("C{id}"), p, n, k)
}

fn c1(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let k = ctx.windows.sigma_k;
    let alphas = [1.0, 2.0, 4.0];
    for p in [1.0, 1.5, 2.0, 3.0, 8.0] {
        let est = estimate_g_moments(pe(p), &alphas, 1_000_000, stream(ctx, 1, p, 1, 0));
        for (a, e) in alphas.iter().zip(&est) {
            checks.push(Check::sigma(format!("E|g|^{a} p={p}"), e, (ctx.oracles.moment_g)(pe(p), *a)?, k));
        }
        for n in [8, 64] {
            let est = estimate_s_moments(pe(p), n, &alphas, 1_000_000, stream(ctx, 1, p, n, 0));
            for (a, e) in alphas.iter().zip(&est) {
                checks.push(Check::sigma(format!("E S^{a} p={p} n={n}"), e, moment_s(pe(p), n, *a)?, k));
            }
        }
    }
    Ok(())
}

fn c2(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let n_samples = 1_000_000;
    let bound = ctx.windows.sigma_k / (n_samples as f64).sqrt();
    for p in [1.5, 3.0] {
        let r = cone_radius_correlation(pe(p), 16, n_samples, stream(ctx, 2, p, 16, 0));
        checks.push(Check::bound(format!("pearson p={p} n=16"), r, Some(-bound), Some(bound)));
    }
    Ok(())
}

fn c3(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let k = ctx.windows.sigma_k;
    let disk = ProjectedBodySpec::new(pe(2.0), Direction::axis(3, 2)?)?;
    let r = variance_report(&disk, 1_000_000, stream(ctx, 3, 2.0, 3, 0))?;
    checks.push(Check::sigma("n=3 E|X|^2".into(), &r.e_norm2, 0.5, k));
    checks.push(Check::sigma("n=3 Var|X|^2".into(), &r.var_norm2, 1.0 / 12.0, k));
    checks.push(Check::sigma("n=3 lambda^2".into(), &r.lambda2, 0.25, k));
    checks.push(Check::sigma("n=3 ratio".into(), &r.ratio, 2.0 / 3.0, k));
    // the projection of B_2^9 is B_2^8: E|X|^2 = 8/10, lambda^2 = 1/10
    let ball = ProjectedBodySpec::new(pe(2.0), Direction::axis(9, 8)?)?;
    let r = variance_report(&ball, 1_000_000, stream(ctx, 3, 2.0, 9, 0))?;
    checks.push(Check::sigma("n=9 E|X|^2".into(), &r.e_norm2, 0.8, k));
    checks.push(Check::sigma("n=9 lambda^2".into(), &r.lambda2, 0.1, k));
    Ok(())
}

fn c4(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let cfg = QuadConfig::default();
    let norm2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    for (i, p) in [1.5, 3.0].into_iter().enumerate() {
        let dir = haar(ctx, 3, i)?;
        let oracle = quad_moments_projection(pe(p), &dir, norm2, &cfg)?;
        let spec = ProjectedBodySpec::new(pe(p), dir)?;
        let e = estimate_ef(&spec, norm2, 2_000_000, stream(ctx, 4, p, 3, i))?;
        let tol = (ctx.windows.sigma_k * e.stderr).max(ctx.windows.oracle_rel * oracle.value.abs());
        let mut c = Check::est(format!("E|X|^2 p={p} n=3"), &e).target(oracle.value);
        c.pass = (e.mean - oracle.value).abs() <= tol && oracle.delta <= cfg.certify_rel;
        checks.push(c);
    }
    Ok(())
}

fn ratio_checks(ctx: &Context, checks: &mut Vec<Check>, p: f64, n: usize, k: usize, with_log: bool) -> lpproj::Result<()> {
    let max = ctx.windows.ratio_max;
    let spec = ProjectedBodySpec::new(pe(p), haar(ctx, n, k)?)?;
    let r = variance_report(&spec, 100_000, stream(ctx, 5, p, n, k))?;
    checks.push(Check::window(format!("R p={p} n={n} theta={k}"), &r.ratio, None, Some(max), 0.0));
    if with_log {
        let rl = r.ratio.scaled(1.0 / (1.0 + p).ln());
        checks.push(Check::window(format!("R/log(1+p) p={p} n={n} theta={k}"), &rl, None, Some(max), 0.0));
    }
    Ok(())
}

fn c5(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    for n in [8, 16, 32, 64] {
        for p in [1.0, 2.0, 4.0, 16.0, 64.0] {
            for k in 0..3 {
                ratio_checks(ctx, checks, p, n, k, true)?;
            }
        }
    }
    for n in [4usize, 8] {
        let p = (n * n * n) as f64;
        for k in 0..3 {
            ratio_checks(ctx, checks, p, n, k, false)?;
        }
    }
    Ok(())
}

fn c6(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let (p, n, dirs) = (16.0, 32, 50);
    let mut good = 0;
    for k in 0..dirs {
        let spec = ProjectedBodySpec::new(pe(p), haar(ctx, n, k)?)?;
        let r = variance_report(&spec, 100_000, stream(ctx, 6, p, n, k))?;
        good += usize::from(r.ratio.mean <= ctx.windows.ratio_max);
    }
    let frac = good as f64 / dirs as f64;
    checks.push(Check::bound(format!("fraction R<=max p={p} n={n}"), frac, Some(ctx.windows.haar_fraction_min), None));
    Ok(())
}

fn c7(ctx: &Context, checks: &mut Vec<Check>, suite: Suite) -> lpproj::Result<()> {
    let w = &ctx.windows;
    let (grid_n, large_n): (&[usize], &[usize]) =
        if suite == Suite::Quick { (&[8, 16], &[4, 8]) } else { (&[8, 16, 32, 64], &[4, 8, 16]) };
    for &n in grid_n {
        for p in [1.0, 2.0, 4.0, 16.0, 64.0].into_iter().filter(|&p| p <= n as f64) {
            for k in 0..3 {
                let e = estimate_epsi(pe(p), &haar(ctx, n, k)?, PsiMoment::First, 100_000, stream(ctx, 7, p, n, k))?;
                checks.push(Check::window(format!("p*Epsi p={p} n={n} theta={k}"), &e.scaled(p), Some(w.epsi_lo), None, 0.0));
                checks.push(Check::window(format!("sqrt(p)*Epsi p={p} n={n} theta={k}"), &e.scaled(p.sqrt()), None, Some(w.epsi_hi), 0.0));
            }
            let s = epsi_scaling_check(pe(p), n, 100_000, stream(ctx, 7, p, n, 99))?;
            checks.push(Check::window(format!("sqrt(p)*Epsi(theta0) p={p} n={n}"), &s.normalized, Some(w.epsi_lo), Some(w.epsi_hi), 0.0));
        }
    }
    for &n in large_n {
        let p = (n * n) as f64;
        let s = epsi_scaling_check(pe(p), n, 100_000, stream(ctx, 7, p, n, 99))?;
        checks.push(Check::window(format!("(p/sqrt(n))*Epsi(theta0) p={p} n={n}"), &s.normalized, Some(w.epsi_lo), Some(w.epsi_hi), 0.0));
    }
    Ok(())
}

fn c8(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let (p, n) = (800.0, 4);
    let w = &ctx.windows;
    let dirs = [("theta0", Direction::diagonal(n)?), ("e1", Direction::axis(n, 0)?), ("haar", haar(ctx, n, 0)?)];
    for (k, (label, dir)) in dirs.into_iter().enumerate() {
        let e = remark_limit(pe(p), &dir, 1_000_000, stream(ctx, 8, p, n, k))?;
        checks.push(Check::window(format!("p*Epsi/|theta|_1 {label}"), &e, Some(w.remark_lo), Some(w.remark_hi), w.sigma_k));
    }
    Ok(())
}

fn c9(ctx: &Context, checks: &mut Vec<Check>, suite: Suite) -> lpproj::Result<()> {
    let w = &ctx.windows;
    let (ps, ns): (&[f64], &[usize]) = if suite == Suite::Quick { (&[2.0], &[16]) } else { (&[1.5, 2.0, 4.0], &[16, 64]) };
    for &p in ps {
        let m = OrliczM::new(pe(p))?;
        for &n in ns {
            for k in 0..5 {
                let dir = haar(ctx, n, k)?;
                let norm = m.luxemburg_norm(dir.theta())?;
                let modular = m.modular(dir.theta(), norm);
                checks.push(Check::bound(format!("modular at norm p={p} n={n} theta={k}"), modular, Some(1.0 - 1e-6), Some(1.0 + 1e-6)));
                let mom = estimate_psi_phi(pe(p), &dir, 100_000, stream(ctx, 9, p, n, k))?;
                let ratio = mom.e_phi.scaled(1.0 / norm);
                checks.push(Check::window(format!("Ephi/|theta|_M p={p} n={n} theta={k}"), &ratio, Some(w.orlicz_lo), Some(w.orlicz_hi), 0.0));
            }
        }
    }
    Ok(())
}

fn c10(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let w = &ctx.windows;
    let q = 2.0;
    for n in 4..=7 {
        let r = ratio_window_check(20, n, q, stream(ctx, 10, q, n, 0))?;
        checks.push(Check::bound(format!("min ratio n={n}"), r.min, Some(w.permavg_lo), Some(w.permavg_hi)));
        checks.push(Check::bound(format!("max ratio n={n}"), r.max, Some(w.permavg_lo), Some(w.permavg_hi)));
        let ones = RearrangementInput::new(SquareMatrix::from_rows(&vec![vec![1.0; n]; n])?, q)?;
        let nf = n as f64;
        let brute = brute_avg_permutations(&ones)?;
        let f = rearrangement_functional(&ones);
        checks.push(Check::bound(format!("ones brute - sqrt(n) n={n}"), brute - nf.sqrt(), Some(-1e-12), Some(1e-12)));
        checks.push(Check::bound(format!("ones functional - (1+sqrt(n-1)) n={n}"), f - 1.0 - (nf - 1.0).sqrt(), Some(-1e-12), Some(1e-12)));
    }
    Ok(())
}

fn c11(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let n = 16;
    for p in [1.5, 4.0] {
        for k in 0..20 {
            let s = stream(ctx, 11, p, n, k);
            let mut rng = s.substream(u64::MAX).rng();
            let dir = Direction::haar(&mut rng, n)?;
            let mut set: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            if set.is_empty() {
                set.push(rng.random_range(0..n));
            }
            let r = subset_psi_ratio(pe(p), &dir, &set, 100_000, s)?;
            checks.push(Check::window(format!("subset ratio p={p} case={k} |I|={}", set.len()), &r, None, Some(1.0), ctx.windows.sigma_k));
        }
    }
    Ok(())
}

fn c12(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let n = 32;
    let w = &ctx.windows;
    for p in [1.5, 2.0, 4.0] {
        let mg = ctx.oracles.moment_g;
        let m2 = mg(pe(p), 2.0)?;
        let target = 2.0 * n as f64 * (mg(pe(p), 4.0)? - m2 * m2);
        let s2 = symmetric_sum_moment(pe(p), n, 2.0, 1_000_000, stream(ctx, 12, p, n, 2))?;
        checks.push(Check::sigma(format!("E(sum)^2 p={p}"), &s2.raw, target, w.sigma_k));
        let s4 = symmetric_sum_moment(pe(p), n, 4.0, 1_000_000, stream(ctx, 12, p, n, 4))?;
        let cap = w.sym_sum_max * (4.0 * n as f64).sqrt();
        checks.push(Check::window(format!("(E|sum|^4)^(1/4) p={p}"), &s4.root, None, Some(cap), 0.0));
    }
    Ok(())
}

fn c13(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let (p, n) = (3.0, 8);
    for k in 0..10 {
        let d = projection_decomposition_check(pe(p), &haar(ctx, n, k)?, 1_000_000, ctx.windows.sigma_k, stream(ctx, 13, p, n, k))?;
        let mut c = Check::est(format!("slack theta={k}"), &d.slack);
        c.hi = Some(0.0);
        c.pass = d.holds;
        checks.push(c);
    }
    Ok(())
}

fn c14(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let (p, n) = (1.5, 3);
    let w = &ctx.windows;
    let k_sig = w.sigma_k;
    for k in 0..=10 {
        let (label, dir) = if k < 10 { (format!("theta={k}"), haar(ctx, n, k)?) } else { ("e_n".to_string(), Direction::axis(n, n - 1)?) };
        let c = steiner_variance_compare(pe(p), &dir, 1_000_000, stream(ctx, 14, p, n, k))?;
        let comb = c.x.var_norm2.stderr.hypot(c.y.var_norm2.stderr);
        let cap = w.steiner_const * c.bound + k_sig * comb;
        let mut chk = Check::est(format!("|VarY-VarX| {label}"), &c.var_diff);
        chk.value = c.var_diff.mean.abs();
        chk.hi = Some(cap);
        chk.pass = chk.value <= cap;
        checks.push(chk);
        let comb4 = c.x.e_theta4.stderr.hypot(c.y.e_theta4.stderr);
        let gap = c.y.e_theta4.mean - c.x.e_theta4.mean;
        checks.push(Check::bound(format!("E<Y,theta>^4 - E<X,theta>^4 {label}"), gap, None, Some(k_sig * comb4)));
        if k == 10 {
            checks.push(Check::sigma("VarY-VarX e_n".into(), &c.var_diff, 0.0, k_sig));
        }
    }
    Ok(())
}

fn c15(ctx: &Context, checks: &mut Vec<Check>) -> lpproj::Result<()> {
    let mut runs = Vec::new();
    let mut within = true;
    for _ in 0..2 {
        let t = Instant::now();
        runs.push(run_suite(ctx, Suite::Quick).to_json());
        let secs = t.elapsed().as_secs_f64();
        eprintln!("C15: quick suite took {secs:.1} s");
        within &= secs <= 120.0;
    }
    let same = runs[0] == runs[1];
    checks.push(Check::bound("quick reports byte-identical".into(), f64::from(u8::from(same)), Some(1.0), None));
    checks.push(Check::bound("quick suite within 120 s".into(), f64::from(u8::from(within)), Some(1.0), None));
    Ok(())
}

/// Runs criterion `id` (1-based) at the size dictated by `suite`.
pub fn run_criterion(ctx: &Context, id: usize, suite: Suite) -> CriterionReport {
    let title = TITLES[id - 1];
    let mut report = CriterionReport { id: format!("C{id}"), title, status: Status::Skipped, checks: Vec::new(), detail: None };
    if suite == Suite::Quick && !QUICK.contains(&id) {
        report.detail = Some("not part of the quick suite".into());
        return report;
    }
    let t = Instant::now();
    let checks = &mut report.checks;
    let res = match id {
        1 => c1(ctx, checks),
        2 => c2(ctx, checks),
        3 => c3(ctx, checks),
        4 => c4(ctx, checks),
        5 => c5(ctx, checks),
        6 => c6(ctx, checks),
        7 => c7(ctx, checks, suite),
        8 => c8(ctx, checks),
        9 => c9(ctx, checks, suite),
        10 => c10(ctx, checks),
        11 => c11(ctx, checks),
        12 => c12(ctx, checks),
        13 => c13(ctx, checks),
        14 => c14(ctx, checks),
        15 => c15(ctx, checks),
        _ => unreachable!("criteria are numbered 1 to 15"),
    };
    eprintln!("C{id}: {:.1} s", t.elapsed().as_secs_f64());
    report.status = match res {
        Err(e) => {
            report.detail = Some(e.to_string());
            Status::Fail
        }
        Ok(()) if report.checks.iter().all(|c| c.pass) => Status::Pass,
        Ok(()) => Status::Fail,
    };
    report
}

pub fn run_suite(ctx: &Context, suite: Suite) -> Report {
    let criteria: Vec<CriterionReport> = (1..=15).map(|id| run_criterion(ctx, id, suite)).collect();
    Report { suite, seed: ctx.seed, passed: criteria.iter().all(CriterionReport::passed), criteria }
}

/// Runs the suite, writes the JSON report and returns whether every criterion passed.
pub fn cmd_validate(ctx: &Context, suite: Suite, out: Option<&std::path::Path>) -> Result<bool> {
    let report = run_suite(ctx, suite);
    for c in &report.criteria {
        eprintln!("{}", c.summary());
    }
    crate::table::emit(&report.to_json(), out)?;
    Ok(report.passed)
}
