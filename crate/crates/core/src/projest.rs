//! Moments of `X` uniform on the hyperplane projection `P_H B_p^n`,
//! `H = θ^⊥`, through the weighted cone representation
//!
//! ```text
//! E f(X) = E[f(P_H(G/S)) ψ_θ] / E ψ_θ.
//! ```
//!
//! Because `ψ_θ = S^{p-1} ψ_θ(G/S)` and `S` is independent of `G/S`, the
//! estimators weight by `ψ_θ(G/S)`, the same quantity evaluated at the cone
//! point. The ratio is unchanged and the factor `S^{p-1}` no longer adds noise.

use crate::error::{Error, Result};
use crate::linalg::{complement_basis, symmetric_eigen, SquareMatrix};
use crate::sampling::{gather_features, LogDraw, RngStream};
use crate::specfun::PExponent;
use crate::stats::{BatchSums, MomentEstimate};
use crate::weights::Direction;
use serde::{Deserialize, Serialize};

pub use crate::linalg::largest_eigenvalue;

/// Smallest sample count accepted by [`variance_report`].
pub const MIN_REPORT_SAMPLES: usize = 100_000;

/// Weight means closer to zero than this many standard errors are rejected.
pub const DEGENERATE_SIGMA: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedBodySpec {
    pub p: PExponent,
    pub dir: Direction,
}

impl ProjectedBodySpec {
    pub fn new(p: PExponent, dir: Direction) -> Result<Self> {
        if dir.dim() < 2 {
            return Err(Error::Domain(format!("need n >= 2, got {}", dir.dim())));
        }
        Ok(ProjectedBodySpec { p, dir })
    }

    pub fn n(&self) -> usize {
        self.dir.dim()
    }
}

/// Writes the cone point `y = G/S` and returns `ψ_θ(y)`.
#[inline]
pub(crate) fn cone_and_weight(draw: &LogDraw, p: f64, theta: &[f64], y: &mut [f64]) -> f64 {
    let ln_sp = draw.ln_s_pow_p();
    let e = (p - 1.0) / p;
    let mut acc = 0.0;
    for i in 0..y.len() {
        let l = draw.ln_w[i] - ln_sp;
        let s = draw.sign[i];
        y[i] = s * (l / p).exp();
        let pw = if p == 1.0 { s } else { s * (e * l).exp() };
        acc += pw * theta[i];
    }
    acc.abs()
}

fn check_weight(w: &MomentEstimate, k: f64) -> Result<()> {
    if !(w.mean > k * w.stderr) {
        return Err(Error::DegenerateWeight { mean: w.mean, stderr: w.stderr });
    }
    Ok(())
}

/// `E f(X)` as a ratio of means with a delta-method standard error.
pub fn estimate_ef<F>(spec: &ProjectedBodySpec, f: F, n_samples: usize, stream: RngStream) -> Result<MomentEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let p = spec.p.get();
    let theta = spec.dir.theta();
    let sums = gather_features(spec.p, spec.n(), n_samples, stream, 2, |draw, scratch, out| {
        let w = cone_and_weight(draw, p, theta, &mut scratch.a);
        let t: f64 = scratch.a.iter().zip(theta).map(|(a, b)| a * b).sum();
        scratch.b.iter_mut().zip(scratch.a.iter().zip(theta)).for_each(|(x, (y, th))| *x = y - t * th);
        out[0] = w;
        out[1] = w * f(&scratch.b);
    });
    check_weight(&sums.mean(0), DEGENERATE_SIGMA)?;
    Ok(sums.ratio(1, 0))
}

/// Second- and fourth-moment summary of `X` uniform on `P_H B_p^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub p: f64,
    pub n: usize,
    /// `E ψ_θ(G/S)`.
    pub e_weight: MomentEstimate,
    pub e_norm2: MomentEstimate,
    pub e_norm4: MomentEstimate,
    pub var_norm2: MomentEstimate,
    /// Covariance of `X` in the Gram–Schmidt basis of `H`.
    pub cov: SquareMatrix,
    /// Cross-fitted largest eigenvalue of the covariance.
    pub lambda2: MomentEstimate,
    /// Largest eigenvalue of `cov` itself; biased upward when the top eigenvalue is degenerate.
    pub lambda2_plugin: f64,
    /// `Var|X|² / (λ² E|X|²)`.
    pub ratio: MomentEstimate,
    pub terms: [MomentEstimate; 4],
    pub term_sum: MomentEstimate,
}

/// `n^{1 - 4/p}`, the order of `λ² E|X|²`.
pub fn theoretical_scale(spec: &ProjectedBodySpec) -> f64 {
    (spec.n() as f64).powf(1.0 - 4.0 / spec.p.get())
}

// scalar feature layout
const W: usize = 0;
const X2: usize = 1;
const X4: usize = 2;
const T2: usize = 3;
const T4: usize = 4;
const Y2: usize = 5;
const Y4: usize = 6;
const PER_COORD: usize = 7;

struct Pool {
    n: usize,
    d: usize,
    sums: BatchSums,
}

impl Pool {
    fn n_scalar(&self) -> usize {
        PER_COORD + 2 * self.n
    }

    fn batch_matrix(&self, s: &[f64]) -> SquareMatrix {
        let mut m = SquareMatrix::zeros(self.d);
        let mut k = self.n_scalar();
        for a in 0..self.d {
            for b in a..self.d {
                m[(a, b)] = s[k];
                m[(b, a)] = s[k];
                k += 1;
            }
        }
        m
    }
}

fn draw_pool(spec: &ProjectedBodySpec, with_cov: bool, n_samples: usize, stream: RngStream) -> Pool {
    let n = spec.n();
    let p = spec.p.get();
    let theta = spec.dir.theta();
    let basis = complement_basis(theta);
    let d = basis.len();
    let n_cov = if with_cov { d * (d + 1) / 2 } else { 0 };
    let n_feat = PER_COORD + 2 * n + n_cov;
    let sums = gather_features(spec.p, n, n_samples, stream, n_feat, |draw, scratch, out| {
        let y = &mut scratch.a;
        let w = cone_and_weight(draw, p, theta, y);
        let mut t = 0.0;
        let mut y2 = 0.0;
        for i in 0..n {
            t += y[i] * theta[i];
            let sq = y[i] * y[i];
            y2 += sq;
            out[PER_COORD + i] = w * sq;
            out[PER_COORD + n + i] = w * sq * sq;
        }
        let x2 = if with_cov {
            let u = &mut scratch.b;
            for (ua, row) in u.iter_mut().zip(&basis) {
                *ua = row.iter().zip(y.iter()).map(|(r, v)| r * v).sum();
            }
            let mut k = PER_COORD + 2 * n;
            for a in 0..d {
                let wa = w * u[a];
                for b in a..d {
                    out[k] = wa * u[b];
                    k += 1;
                }
            }
            u[..d].iter().map(|v| v * v).sum()
        } else {
            (y2 - t * t).max(0.0)
        };
        out[W] = w;
        out[X2] = w * x2;
        out[X4] = w * x2 * x2;
        out[T2] = w * t * t;
        out[T4] = w * t.powi(4);
        out[Y2] = w * y2;
        out[Y4] = w * y2 * y2;
    });
    Pool { n, d, sums }
}

fn variance_of(m: &[f64]) -> f64 {
    m[X4] / m[W] - (m[X2] / m[W]).powi(2)
}

fn terms_of(m: &[f64], n: usize) -> [f64; 4] {
    let w = m[W];
    let t1: f64 = (0..n).map(|i| m[PER_COORD + n + i] / w - (m[PER_COORD + i] / w).powi(2)).sum();
    let t12 = m[Y4] / w - (m[Y2] / w).powi(2);
    [t1, t12 - t1, m[T4] / w, 2.0 * m[Y2] * m[T2] / (w * w)]
}

fn scalar_sums(pool: &Pool, extra: impl Fn(usize, &[f64]) -> Vec<f64>) -> BatchSums {
    let k = pool.n_scalar();
    let sums = pool
        .sums
        .sums
        .iter()
        .enumerate()
        .map(|(b, s)| {
            let mut v = s[..k].to_vec();
            v.extend(extra(b, s));
            v
        })
        .collect();
    BatchSums::new(pool.sums.batch_size, sums)
}

fn terms_from(pool: &Pool, scalars: &BatchSums) -> ([MomentEstimate; 4], MomentEstimate) {
    let n = pool.n;
    let terms = std::array::from_fn(|j| scalars.jackknife(|m| terms_of(m, n)[j]));
    let sum = scalars.jackknife(|m| terms_of(m, n).iter().sum());
    (terms, sum)
}

/// Full second/fourth moment report from one pool of `n_samples` cone draws.
pub fn variance_report(spec: &ProjectedBodySpec, n_samples: usize, stream: RngStream) -> Result<VarianceReport> {
    if n_samples < MIN_REPORT_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_REPORT_SAMPLES} samples, got {n_samples}")));
    }
    let pool = draw_pool(spec, true, n_samples, stream);
    let e_weight = pool.sums.mean(W);
    check_weight(&e_weight, DEGENERATE_SIGMA)?;

    let nb = pool.sums.n_batches();
    let half = nb / 2;
    let total_w = pool.sums.totals()[W];
    let half_cov = |range: std::ops::Range<usize>| {
        let mut m = SquareMatrix::zeros(pool.d);
        let mut w = 0.0;
        for s in &pool.sums.sums[range] {
            let bm = pool.batch_matrix(s);
            for a in 0..pool.d {
                for b in 0..pool.d {
                    m[(a, b)] += bm[(a, b)];
                }
            }
            w += s[W];
        }
        (m, w)
    };
    let (cov_a, w_a) = half_cov(0..half);
    let (cov_b, w_b) = half_cov(half..nb);
    let mut cov = SquareMatrix::zeros(pool.d);
    for a in 0..pool.d {
        for b in 0..pool.d {
            cov[(a, b)] = (cov_a[(a, b)] + cov_b[(a, b)]) / total_w;
        }
    }
    let top = |m: &SquareMatrix, w: f64| -> Result<Vec<f64>> {
        let mut m = m.clone();
        for a in 0..pool.d {
            for b in 0..pool.d {
                m[(a, b)] /= w;
            }
        }
        Ok(symmetric_eigen(&m)?.vectors.swap_remove(0))
    };
    let v_a = top(&cov_a, w_a)?;
    let v_b = top(&cov_b, w_b)?;
    let lambda2_plugin = largest_eigenvalue(&cov)?;

    // Batches in one half are scored with the other half's eigenvector.
    const QA: usize = 0;
    const WA: usize = 1;
    const QB: usize = 2;
    const WB: usize = 3;
    let scalars = scalar_sums(&pool, |b, s| {
        let in_a = b < half;
        let q = pool.batch_matrix(s).quadratic_form(if in_a { &v_b } else { &v_a });
        let mut e = vec![0.0; 4];
        if in_a {
            e[QA] = q;
            e[WA] = s[W];
        } else {
            e[QB] = q;
            e[WB] = s[W];
        }
        e
    });
    let k = pool.n_scalar();
    let lambda_of = move |m: &[f64]| 0.5 * (m[k + QA] / m[k + WA] + m[k + QB] / m[k + WB]);

    let e_norm2 = pool.sums.ratio(X2, W);
    let e_norm4 = pool.sums.ratio(X4, W);
    let var_norm2 = scalars.jackknife(variance_of);
    let lambda2 = scalars.jackknife(lambda_of);
    let ratio = scalars.jackknife(|m| variance_of(m) / (lambda_of(m) * m[X2] / m[W]));
    let (terms, term_sum) = terms_from(&pool, &scalars);
    Ok(VarianceReport {
        p: spec.p.get(),
        n: spec.n(),
        e_weight,
        e_norm2,
        e_norm4,
        var_norm2,
        cov,
        lambda2,
        lambda2_plugin,
        ratio,
        terms,
        term_sum,
    })
}

/// The four summands bounding `Var|X|²`, with their sum and `Var|X|²` itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourTerms {
    pub terms: [MomentEstimate; 4],
    pub sum: MomentEstimate,
    pub var_norm2: MomentEstimate,
}

pub fn four_term_decomposition(spec: &ProjectedBodySpec, n_samples: usize, stream: RngStream) -> Result<FourTerms> {
    if n_samples < MIN_REPORT_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_REPORT_SAMPLES} samples, got {n_samples}")));
    }
    let pool = draw_pool(spec, false, n_samples, stream);
    check_weight(&pool.sums.mean(W), DEGENERATE_SIGMA)?;
    let scalars = scalar_sums(&pool, |_, _| Vec::new());
    let (terms, sum) = terms_from(&pool, &scalars);
    Ok(FourTerms { terms, sum, var_norm2: scalars.jackknife(variance_of) })
}
