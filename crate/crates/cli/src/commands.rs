//! Table-producing subcommands. Cells run in a fixed order and every cell
//! draws from its own stream, so output is identical for identical configs.

use crate::config::{read_directions, RunConfig, ThetaMode};
use crate::seeds::{direction_stream, task_stream};
use crate::table::{Cell, Table};
use anyhow::{bail, Result};
use lpproj::linalg::SquareMatrix;
use lpproj::orlicz::OrliczM;
use lpproj::permavg::{brute_avg_permutations, rearrangement_functional, sweep_matrix, RearrangementInput};
use lpproj::projest::{theoretical_scale, variance_report, ProjectedBodySpec};
use lpproj::sampling::{estimate_g_moments, estimate_s_moments};
use lpproj::specfun::{moment_g, moment_s};
use lpproj::steiner::steiner_variance_compare;
use lpproj::weights::{estimate_psi_phi, Direction};
use lpproj::{Error, PExponent};

pub const MOMENT_ALPHAS: [f64; 3] = [1.0, 2.0, 4.0];

pub const MOMENTS_HEADER: &[&str] = &["quantity", "p", "n", "alpha", "N", "empirical", "stderr", "oracle", "z"];

pub const RATIO_HEADER: &[&str] = &[
    "p", "n", "theta_mode", "theta_seed", "N", "e_norm2", "e_norm2_se", "var_norm2", "var_norm2_se", "lambda2", "ratio",
    "ratio_se", "ratio_over_log1p", "scale_n_pow", "term1", "term2", "term3", "term4",
];

pub const ORLICZ_HEADER: &[&str] = &[
    "p", "n", "theta_mode", "theta_seed", "N", "e_psi", "e_psi_se", "e_phi", "e_phi_se", "orlicz_norm", "modular_at_norm",
    "ratio", "ratio_se", "in_window",
];

pub const STEINER_HEADER: &[&str] = &[
    "p", "n", "theta_mode", "theta_seed", "N", "lk2", "var_x", "var_x_se", "var_y", "var_y_se", "var_diff", "var_diff_se",
    "bound", "ratio_x", "ratio_y", "e_theta4_x", "e_theta4_y", "within_bound",
];

pub const PERMAVG_HEADER: &[&str] = &["n", "q", "case", "brute", "functional", "ratio", "in_window"];

/// A direction with the id of the stream it was drawn from (0 for deterministic modes).
pub struct CellDirection {
    pub dir: Direction,
    pub seed: u64,
}

pub fn directions(cfg: &RunConfig, n: usize) -> Result<Vec<CellDirection>> {
    Ok(match cfg.theta {
        ThetaMode::Haar => (0..cfg.directions)
            .map(|k| {
                let s = direction_stream(cfg.seed, n, k);
                Ok(CellDirection { dir: Direction::haar(&mut s.rng(), n)?, seed: s.stream_id })
            })
            .collect::<Result<_>>()?,
        ThetaMode::Diag => vec![CellDirection { dir: Direction::diagonal(n)?, seed: 0 }],
        ThetaMode::Axis => vec![CellDirection { dir: Direction::axis(n, n - 1)?, seed: 0 }],
        ThetaMode::File => {
            let path = cfg.theta_file.as_ref().expect("validated");
            let dirs: Vec<CellDirection> = read_directions(path)?
                .into_iter()
                .filter(|v| v.len() == n)
                .map(|v| Ok(CellDirection { dir: Direction::new(v)?, seed: 0 }))
                .collect::<Result<_>>()?;
            if dirs.is_empty() {
                bail!("{} has no direction of dimension {n}", path.display());
            }
            dirs
        }
    })
}

fn pexp(p: f64) -> Result<PExponent> {
    Ok(PExponent::new(p)?)
}

pub fn cmd_moments(cfg: &RunConfig) -> Result<Table> {
    cfg.validate()?;
    let mut t = Table::new(MOMENTS_HEADER);
    let n_samples = cfg.samples;
    for &p in &cfg.p {
        let pe = pexp(p)?;
        let est = estimate_g_moments(pe, &MOMENT_ALPHAS, n_samples, task_stream(cfg.seed, "moments-g", p, 1, 0));
        for (a, e) in MOMENT_ALPHAS.iter().zip(&est) {
            let oracle = moment_g(pe, *a)?;
            t.push(vec!["g".into(), p.into(), Cell::Empty, (*a).into(), e.n_samples.into(), e.mean.into(), e.stderr.into(), oracle.into(), e.z_score(oracle).into()]);
        }
        for &n in &cfg.n {
            let est = estimate_s_moments(pe, n, &MOMENT_ALPHAS, n_samples, task_stream(cfg.seed, "moments-s", p, n, 0));
            for (a, e) in MOMENT_ALPHAS.iter().zip(&est) {
                let oracle = moment_s(pe, n, *a)?;
                t.push(vec!["S".into(), p.into(), n.into(), (*a).into(), e.n_samples.into(), e.mean.into(), e.stderr.into(), oracle.into(), e.z_score(oracle).into()]);
            }
        }
    }
    Ok(t)
}

pub fn cmd_ratio(cfg: &RunConfig) -> Result<Table> {
    cfg.validate()?;
    let mut t = Table::new(RATIO_HEADER);
    for &p in &cfg.p {
        let pe = pexp(p)?;
        for &n in &cfg.n {
            if n < 2 {
                bail!("ratio needs n >= 2");
            }
            for (k, cd) in directions(cfg, n)?.into_iter().enumerate() {
                let spec = ProjectedBodySpec::new(pe, cd.dir)?;
                let scale = theoretical_scale(&spec);
                let head: Vec<Cell> = vec![p.into(), n.into(), cfg.theta.as_str().into(), cd.seed.into()];
                let stream = task_stream(cfg.seed, "ratio", p, n, k);
                let row: Vec<Cell> = match variance_report(&spec, cfg.samples, stream) {
                    Ok(r) => {
                        let mut row = head;
                        row.extend([
                            r.e_norm2.n_samples.into(),
                            r.e_norm2.mean.into(),
                            r.e_norm2.stderr.into(),
                            r.var_norm2.mean.into(),
                            r.var_norm2.stderr.into(),
                            r.lambda2.mean.into(),
                            r.ratio.mean.into(),
                            r.ratio.stderr.into(),
                            (r.ratio.mean / (1.0 + p).ln()).into(),
                            scale.into(),
                        ]);
                        row.extend(r.terms.iter().map(|x| Cell::Num(x.mean)));
                        row
                    }
                    Err(Error::DegenerateWeight { mean, stderr }) => {
                        eprintln!("warning: degenerate weight at p={p} n={n} direction {k} (mean {mean:e}, stderr {stderr:e})");
                        let mut row = head;
                        row.push(cfg.samples.into());
                        row.extend((0..9).map(|_| Cell::Num(f64::NAN)));
                        row.push(scale.into());
                        row.extend((0..4).map(|_| Cell::Num(f64::NAN)));
                        row
                    }
                    Err(e) => return Err(e.into()),
                };
                t.push(row);
            }
        }
    }
    Ok(t)
}

pub fn cmd_orlicz(cfg: &RunConfig) -> Result<Table> {
    cfg.validate()?;
    let w = &cfg.windows;
    let mut t = Table::new(ORLICZ_HEADER);
    for &p in &cfg.p {
        let pe = pexp(p)?;
        if pe.is_one() {
            eprintln!("note: p = 1 skipped; the Orlicz function is defined for p > 1 only");
            continue;
        }
        let m = OrliczM::new(pe)?;
        for &n in &cfg.n {
            for (k, cd) in directions(cfg, n)?.into_iter().enumerate() {
                let stream = task_stream(cfg.seed, "orlicz", p, n, k);
                let mom = estimate_psi_phi(pe, &cd.dir, cfg.samples, stream)?;
                let norm = m.luxemburg_norm(cd.dir.theta())?;
                let ratio = mom.e_phi.scaled(1.0 / norm);
                let ok = ratio.mean >= w.orlicz_lo && ratio.mean <= w.orlicz_hi;
                t.push(vec![
                    p.into(),
                    n.into(),
                    cfg.theta.as_str().into(),
                    cd.seed.into(),
                    mom.e_phi.n_samples.into(),
                    mom.e_psi.mean.into(),
                    mom.e_psi.stderr.into(),
                    mom.e_phi.mean.into(),
                    mom.e_phi.stderr.into(),
                    norm.into(),
                    m.modular(cd.dir.theta(), norm).into(),
                    ratio.mean.into(),
                    ratio.stderr.into(),
                    ok.into(),
                ]);
            }
        }
    }
    Ok(t)
}

pub fn cmd_steiner(cfg: &RunConfig) -> Result<Table> {
    cfg.validate()?;
    let w = &cfg.windows;
    let mut t = Table::new(STEINER_HEADER);
    for &p in &cfg.p {
        let pe = pexp(p)?;
        for &n in &cfg.n {
            for (k, cd) in directions(cfg, n)?.into_iter().enumerate() {
                let c = steiner_variance_compare(pe, &cd.dir, cfg.samples, task_stream(cfg.seed, "steiner", p, n, k))?;
                let comb = c.x.var_norm2.stderr.hypot(c.y.var_norm2.stderr);
                let ok = c.var_diff.mean.abs() <= w.steiner_const * c.bound + w.sigma_k * comb;
                t.push(vec![
                    p.into(),
                    n.into(),
                    cfg.theta.as_str().into(),
                    cd.seed.into(),
                    cfg.samples.into(),
                    c.body.lk2.into(),
                    c.x.var_norm2.mean.into(),
                    c.x.var_norm2.stderr.into(),
                    c.y.var_norm2.mean.into(),
                    c.y.var_norm2.stderr.into(),
                    c.var_diff.mean.into(),
                    c.var_diff.stderr.into(),
                    c.bound.into(),
                    c.x.ratio.mean.into(),
                    c.y.ratio.mean.into(),
                    c.x.e_theta4.mean.into(),
                    c.y.e_theta4.mean.into(),
                    ok.into(),
                ]);
            }
        }
    }
    Ok(t)
}

pub fn cmd_permavg(cfg: &RunConfig) -> Result<Table> {
    cfg.validate()?;
    let w = &cfg.windows;
    let sizes: Vec<usize> = cfg.n.iter().copied().filter(|&n| n <= 7).collect();
    if sizes.is_empty() {
        bail!("permavg enumerates n! permutations and needs some n <= 7 (got {:?})", cfg.n);
    }
    if sizes.len() < cfg.n.len() {
        eprintln!("note: permavg skips n > 7");
    }
    let mut t = Table::new(PERMAVG_HEADER);
    let row = |t: &mut Table, n: usize, case: String, a: SquareMatrix| -> Result<()> {
        let inp = RearrangementInput::new(a, cfg.q)?;
        let brute = brute_avg_permutations(&inp)?;
        let f = rearrangement_functional(&inp);
        let r = brute / f;
        t.push(vec![n.into(), cfg.q.into(), case.into(), brute.into(), f.into(), r.into(), (r >= w.permavg_lo && r <= w.permavg_hi).into()]);
        Ok(())
    };
    for n in sizes {
        row(&mut t, n, "ones".into(), SquareMatrix::from_rows(&vec![vec![1.0; n]; n])?)?;
        let stream = task_stream(cfg.seed, "permavg", cfg.q, n, 0);
        for k in 0..cfg.cases {
            row(&mut t, n, k.to_string(), sweep_matrix(n, k, stream))?;
        }
    }
    Ok(t)
}
