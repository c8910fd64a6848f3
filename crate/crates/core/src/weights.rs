//! The projection weight `ψ_θ = |Σ |g_i|^{p-1} sign(g_i) θ_i|`, its
//! Khintchine companion `φ_θ = (Σ |g_i|^{2p-2} θ_i²)^{1/2}`, and Monte Carlo
//! estimators of their moments.

use crate::error::{Error, Result};
use crate::sampling::{gather_features, RngStream};
use crate::specfun::PExponent;
use crate::stats::MomentEstimate;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Smallest sample count accepted by the estimators in this module.
pub const MIN_SAMPLES: usize = 30_000;

/// A unit direction `θ ∈ S^{n-1}` with its cached `ℓ_1` norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    theta: Vec<f64>,
    norm1: f64,
}

impl Direction {
    /// Normalizes `v` to unit Euclidean length.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Domain("direction must have at least one coordinate".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("direction has non-finite entries".into()));
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len == 0.0 {
            return Err(Error::Domain("direction must be non-zero".into()));
        }
        let theta: Vec<f64> = v.into_iter().map(|x| x / len).collect();
        let norm1 = theta.iter().map(|x| x.abs()).sum();
        Ok(Direction { theta, norm1 })
    }

    /// Canonical basis vector `e_i` (zero-based).
    pub fn axis(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::Domain(format!("axis {i} out of range for n = {n}")));
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Direction::new(v)
    }

    /// `θ_0 = (1/√n, ..., 1/√n)`.
    pub fn diagonal(n: usize) -> Result<Self> {
        Direction::new(vec![1.0; n])
    }

    /// Haar-distributed direction: a normalized standard Gaussian vector.
    pub fn haar<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<Self> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            if v.iter().any(|x: &f64| *x != 0.0) {
                return Direction::new(v);
            }
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn norm1(&self) -> f64 {
        self.norm1
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `θ_{π(i)}` in slot `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: perm.len() });
        }
        Direction::new(perm.iter().map(|&j| self.theta[j]).collect())
    }

    /// Coordinatewise sign flips.
    pub fn with_signs(&self, signs: &[f64]) -> Result<Self> {
        if signs.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: signs.len() });
        }
        Direction::new(self.theta.iter().zip(signs).map(|(t, s)| t * s.signum()).collect())
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.theta.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

fn check_len(g: &[f64], dir: &Direction) -> Result<()> {
    if g.len() != dir.dim() {
        return Err(Error::DimensionMismatch { expected: dir.dim(), got: g.len() });
    }
    Ok(())
}

/// `|t|^{p-1}` with `0^0 = 1`, evaluated in log space and flushed to zero on underflow.
fn abs_pow(t: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if t == 0.0 {
        0.0
    } else {
        (e * t.abs().ln()).exp()
    }
}

/// `ψ_θ(g)`. A zero coordinate contributes nothing since `sign(0) = 0`.
pub fn psi(g: &[f64], p: PExponent, dir: &Direction) -> Result<f64> {
    check_len(g, dir)?;
    let e = p.get() - 1.0;
    let s: f64 = g
        .iter()
        .zip(dir.theta())
        .map(|(&gi, &t)| {
            let sign = if gi > 0.0 {
                1.0
            } else if gi < 0.0 {
                -1.0
            } else {
                0.0
            };
            abs_pow(gi, e) * sign * t
        })
        .sum();
    Ok(s.abs())
}

/// `φ_θ(g)`.
pub fn phi(g: &[f64], p: PExponent, dir: &Direction) -> Result<f64> {
    check_len(g, dir)?;
    let e = p.get() - 1.0;
    let s: f64 = g.iter().zip(dir.theta()).map(|(&gi, &t)| (abs_pow(gi, e) * t).powi(2)).sum();
    Ok(s.sqrt())
}

/// Which moment of `ψ_θ` to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsiMoment {
    First,
    Second,
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    Ok(())
}

/// `Σ |g_i|^{p-1} sign(g_i) θ_i` from a log-space draw.
#[inline]
pub(crate) fn signed_sum(draw: &crate::sampling::LogDraw, buf: &mut [f64], theta: &[f64]) -> f64 {
    draw.signed_power_into(buf);
    buf.iter().zip(theta).map(|(a, b)| a * b).sum()
}

/// Monte Carlo `E ψ_θ` or `E ψ_θ²`.
pub fn estimate_epsi(
    p: PExponent,
    dir: &Direction,
    moment: PsiMoment,
    n_samples: usize,
    stream: RngStream,
) -> Result<MomentEstimate> {
    check_samples(n_samples)?;
    let theta = dir.theta();
    let sums = gather_features(p, dir.dim(), n_samples, stream, 1, |draw, scratch, f| {
        let psi = signed_sum(draw, &mut scratch.a, theta).abs();
        f[0] = match moment {
            PsiMoment::First => psi,
            PsiMoment::Second => psi * psi,
        };
    });
    Ok(sums.mean(0))
}

/// Joint moments of `ψ_θ` and `φ_θ` from one sample pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiPhiMoments {
    pub e_psi: MomentEstimate,
    pub e_psi2: MomentEstimate,
    pub e_phi: MomentEstimate,
    pub e_phi2: MomentEstimate,
    /// `E ψ_θ / E φ_θ`.
    pub psi_over_phi: MomentEstimate,
}

pub fn estimate_psi_phi(p: PExponent, dir: &Direction, n_samples: usize, stream: RngStream) -> Result<PsiPhiMoments> {
    check_samples(n_samples)?;
    let theta = dir.theta();
    let sums = gather_features(p, dir.dim(), n_samples, stream, 4, |draw, scratch, f| {
        let psi = signed_sum(draw, &mut scratch.a, theta).abs();
        let phi2: f64 = scratch.a.iter().zip(theta).map(|(a, t)| (a * t).powi(2)).sum();
        f[0] = psi;
        f[1] = psi * psi;
        f[2] = phi2.sqrt();
        f[3] = phi2;
    });
    Ok(PsiPhiMoments {
        e_psi: sums.mean(0),
        e_psi2: sums.mean(1),
        e_phi: sums.mean(2),
        e_phi2: sums.mean(3),
        psi_over_phi: sums.ratio(0, 2),
    })
}

/// Growth regime of `E ψ_{θ_0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingRegime {
    /// `p <= n`: normalized by `√p`.
    Moderate,
    /// `p > n`: normalized by `p/√n`.
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsiScaling {
    pub p: f64,
    pub n: usize,
    pub regime: ScalingRegime,
    pub e_psi_theta0: MomentEstimate,
    pub normalized: MomentEstimate,
}

/// `√p·E ψ_{θ_0}` when `p <= n`, `(p/√n)·E ψ_{θ_0}` otherwise.
pub fn epsi_scaling_check(p: PExponent, n: usize, n_samples: usize, stream: RngStream) -> Result<EpsiScaling> {
    let dir = Direction::diagonal(n)?;
    let e = estimate_epsi(p, &dir, PsiMoment::First, n_samples, stream)?;
    let pf = p.get();
    let (regime, factor) =
        if pf <= n as f64 { (ScalingRegime::Moderate, pf.sqrt()) } else { (ScalingRegime::Large, pf / (n as f64).sqrt()) };
    Ok(EpsiScaling { p: pf, n, regime, e_psi_theta0: e, normalized: e.scaled(factor) })
}

/// `p·E ψ_θ / ‖θ‖_1`, which tends to one as `p → ∞`.
pub fn remark_limit(p: PExponent, dir: &Direction, n_samples: usize, stream: RngStream) -> Result<MomentEstimate> {
    let e = estimate_epsi(p, dir, PsiMoment::First, n_samples, stream)?;
    Ok(e.scaled(p.get() / dir.norm1()))
}

/// `E|Σ_{i∈I} |g_i|^{p-1} sign(g_i) θ_i| / E ψ_θ` with a delta-method stderr.
/// Indices are zero-based.
pub fn subset_psi_ratio(
    p: PExponent,
    dir: &Direction,
    index_set: &[usize],
    n_samples: usize,
    stream: RngStream,
) -> Result<MomentEstimate> {
    check_samples(n_samples)?;
    let n = dir.dim();
    if let Some(&bad) = index_set.iter().find(|&&i| i >= n) {
        return Err(Error::Domain(format!("index {bad} out of range for n = {n}")));
    }
    let (nb, bs) = crate::stats::batch_layout(n_samples);
    if index_set.is_empty() {
        return Ok(MomentEstimate { mean: 0.0, stderr: 0.0, n_samples: nb * bs, n_batches: nb });
    }
    let mut mask = vec![false; n];
    index_set.iter().for_each(|&i| mask[i] = true);
    let theta = dir.theta();
    let sums = gather_features(p, n, n_samples, stream, 2, |draw, scratch, f| {
        draw.signed_power_into(&mut scratch.a);
        let (mut full, mut part) = (0.0, 0.0);
        for i in 0..n {
            let t = scratch.a[i] * theta[i];
            full += t;
            if mask[i] {
                part += t;
            }
        }
        f[0] = part.abs();
        f[1] = full.abs();
    });
    Ok(sums.ratio(0, 1))
}

/// Moments of `Σ_i (g_i² − ḡ_i²)` with `ḡ` an independent copy of `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricSumMoment {
    pub alpha: f64,
    /// `E|Σ(g_i² − ḡ_i²)|^α`.
    pub raw: MomentEstimate,
    /// `(E|Σ(g_i² − ḡ_i²)|^α)^{1/α}`.
    pub root: MomentEstimate,
}

/// Estimates the `α`-th moment for `α ∈ {2, 4, 8}` with `α <= e^p`.
pub fn symmetric_sum_moment(
    p: PExponent,
    n: usize,
    alpha: f64,
    n_samples: usize,
    stream: RngStream,
) -> Result<SymmetricSumMoment> {
    check_samples(n_samples)?;
    if ![2.0, 4.0, 8.0].contains(&alpha) || alpha > p.get().exp() {
        return Err(Error::AlphaOutOfRange { alpha, p: p.get() });
    }
    if n == 0 {
        return Err(Error::Domain("dimension n must be >= 1".into()));
    }
    let pf = p.get();
    // One draw of length 2n supplies both g and its independent copy.
    let sums = gather_features(p, 2 * n, n_samples, stream, 1, |draw, _, f| {
        let sq = |l: f64| (2.0 * l / pf).exp();
        let s: f64 = (0..n).map(|i| sq(draw.ln_w[i]) - sq(draw.ln_w[n + i])).sum();
        f[0] = s.abs().powf(alpha);
    });
    let raw = sums.mean(0);
    let root = raw.mean.powf(1.0 / alpha);
    // d/dm m^{1/α} = m^{1/α - 1}/α
    let stderr = root / (alpha * raw.mean) * raw.stderr;
    Ok(SymmetricSumMoment { alpha, raw, root: MomentEstimate { mean: root, stderr, ..raw } })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarFraction {
    pub fraction: f64,
    pub e_psi_theta0: f64,
    pub threshold: f64,
    /// `E ψ_θ` for each sampled direction, in draw order.
    pub e_psi: Vec<f64>,
}

/// Fraction of Haar directions with `E ψ_θ >= threshold · E ψ_{θ_0}`.
pub fn haar_direction_fraction(
    p: PExponent,
    n: usize,
    n_dirs: usize,
    n_samples: usize,
    threshold: f64,
    stream: RngStream,
) -> Result<HaarFraction> {
    if n_dirs < 50 {
        return Err(Error::Domain(format!("need at least 50 directions, got {n_dirs}")));
    }
    let e0 = estimate_epsi(p, &Direction::diagonal(n)?, PsiMoment::First, n_samples, stream.substream(0))?.mean;
    let mut dir_rng = stream.substream(1).rng();
    let mut e_psi = Vec::with_capacity(n_dirs);
    for k in 0..n_dirs {
        let dir = Direction::haar(&mut dir_rng, n)?;
        e_psi.push(estimate_epsi(p, &dir, PsiMoment::First, n_samples, stream.substream(2 + k as u64))?.mean);
    }
    let passed = e_psi.iter().filter(|&&e| e >= threshold * e0).count();
    Ok(HaarFraction { fraction: passed as f64 / n_dirs as f64, e_psi_theta0: e0, threshold, e_psi })
}
