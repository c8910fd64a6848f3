//! Reproducible random streams and the exact samplers built on them: the
//! generalized Gaussian `g`, the vector `G` with `S = ‖G‖_p`, cone-measure
//! points `G/S` on `∂B_p^n` and uniform points of `B_p^n`.

use crate::error::{Error, Result};
use crate::specfun::PExponent;
use crate::stats::{batch_layout, run_batches, BatchSums, MomentEstimate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

/// The generator behind every stream.
pub type StreamRng = ChaCha8Rng;

/// Handle naming one reproducible random stream.
///
/// Identical `(seed, stream_id)` pairs reproduce identical sequences; distinct
/// stream ids select disjoint ChaCha streams under the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream `index`, used to hand disjoint streams to parallel batches.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0x5bd1_e995))),
        }
    }
}

/// Exact `Gamma(shape, 1)` sampler: Marsaglia–Tsang for `shape >= 1`, with the
/// `W = W' U^{1/shape}` boost below one.
#[derive(Debug, Clone, Copy)]
pub struct GammaSampler {
    shape: f64,
    d: f64,
    c: f64,
    boost: bool,
}

impl GammaSampler {
    pub fn new(shape: f64) -> Result<Self> {
        if !shape.is_finite() || shape <= 0.0 {
            return Err(Error::Domain(format!("gamma shape must be > 0, got {shape}")));
        }
        let boost = shape < 1.0;
        let base = if boost { shape + 1.0 } else { shape };
        let d = base - 1.0 / 3.0;
        Ok(GammaSampler { shape, d, c: 1.0 / (9.0 * d).sqrt(), boost })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    #[inline]
    fn marsaglia_tsang<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x: f64 = rng.sample(StandardNormal);
            let v = 1.0 + self.c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u: f64 = rng.sample(Open01);
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln()) {
                return self.d * v;
            }
        }
    }

    /// One draw of `ln W`. Stays finite for shapes so small that `W` itself
    /// would underflow.
    #[inline]
    pub fn sample_ln<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let w = self.marsaglia_tsang(rng);
        if self.boost {
            let u: f64 = rng.sample(Open01);
            w.ln() + u.ln() / self.shape
        } else {
            w.ln()
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let w = self.marsaglia_tsang(rng);
        if self.boost {
            let u: f64 = rng.sample(Open01);
            w * u.powf(1.0 / self.shape)
        } else {
            w
        }
    }
}

/// One draw from `Gamma(shape, 1)`.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> Result<f64> {
    Ok(GammaSampler::new(shape)?.sample(rng))
}

#[inline]
fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.next_u32() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// One draw of the generalized Gaussian `g`: a symmetric sign times `W^{1/p}`,
/// `W ~ Gamma(1/p, 1)`.
pub fn sample_gg<R: Rng + ?Sized>(rng: &mut R, p: PExponent) -> f64 {
    let gamma = GammaSampler::new(1.0 / p.get()).expect("1/p is a valid shape");
    let ln_w = gamma.sample_ln(rng);
    random_sign(rng) * (ln_w / p.get()).exp()
}

/// Log-space representation of one draw of `G = (g_1, ..., g_n)`:
/// `|g_i| = W_i^{1/p}` is stored as `ln W_i` next to the sign of `g_i`.
///
/// Every derived quantity (`G/S`, `|g_i|^{p-1}`, `S`) is evaluated from the
/// logarithms, so nothing overflows or underflows prematurely for large `p`.
#[derive(Debug, Clone)]
pub struct LogDraw {
    p: f64,
    gamma: GammaSampler,
    pub ln_w: Vec<f64>,
    pub sign: Vec<f64>,
}

impl LogDraw {
    pub fn new(p: PExponent, n: usize) -> Self {
        LogDraw {
            p: p.get(),
            gamma: GammaSampler::new(1.0 / p.get()).expect("1/p is a valid shape"),
            ln_w: vec![0.0; n],
            sign: vec![0.0; n],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.ln_w.len()
    }

    #[inline]
    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for (lw, s) in self.ln_w.iter_mut().zip(self.sign.iter_mut()) {
            *lw = self.gamma.sample_ln(rng);
            *s = random_sign(rng);
        }
    }

    /// `ln S^p = ln Σ W_i`.
    #[inline]
    pub fn ln_s_pow_p(&self) -> f64 {
        let m = self.ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail: f64 = self.ln_w.iter().map(|&l| (l - m).exp()).sum();
        m + tail.ln()
    }

    /// `S = ‖G‖_p`.
    pub fn s(&self) -> f64 {
        (self.ln_s_pow_p() / self.p).exp()
    }

    /// Writes `G` into `out`.
    pub fn g_into(&self, out: &mut [f64]) {
        for ((o, &lw), &s) in out.iter_mut().zip(&self.ln_w).zip(&self.sign) {
            *o = s * (lw / self.p).exp();
        }
    }

    /// Writes the cone point `G/S` into `out`.
    #[inline]
    pub fn cone_into(&self, out: &mut [f64]) {
        let ln_sp = self.ln_s_pow_p();
        for ((o, &lw), &s) in out.iter_mut().zip(&self.ln_w).zip(&self.sign) {
            *o = s * ((lw - ln_sp) / self.p).exp();
        }
    }

    /// Writes `|g_i|^{p-1} sign(g_i)` into `out`; exactly `sign(g_i)` when `p = 1`.
    #[inline]
    pub fn signed_power_into(&self, out: &mut [f64]) {
        if self.p == 1.0 {
            out.copy_from_slice(&self.sign);
            return;
        }
        let e = (self.p - 1.0) / self.p;
        for ((o, &lw), &s) in out.iter_mut().zip(&self.ln_w).zip(&self.sign) {
            *o = s * (e * lw).exp();
        }
    }
}

/// A raw draw of `G` with its norm `S = ‖G‖_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GSample {
    pub g: Vec<f64>,
    pub s: f64,
}

/// A point of `∂B_p^n` distributed according to the cone measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePoint {
    pub y: Vec<f64>,
    pub p: PExponent,
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be >= 1".into()));
    }
    Ok(())
}

pub fn sample_gs<R: Rng + ?Sized>(rng: &mut R, p: PExponent, n: usize) -> Result<GSample> {
    check_dim(n)?;
    let mut draw = LogDraw::new(p, n);
    draw.fill(rng);
    let mut g = vec![0.0; n];
    draw.g_into(&mut g);
    Ok(GSample { g, s: draw.s() })
}

pub fn sample_cone<R: Rng + ?Sized>(rng: &mut R, p: PExponent, n: usize) -> Result<ConePoint> {
    check_dim(n)?;
    let mut draw = LogDraw::new(p, n);
    draw.fill(rng);
    let mut y = vec![0.0; n];
    draw.cone_into(&mut y);
    Ok(ConePoint { y, p })
}

/// Uniform point of `B_p^n`: `U^{1/n} · G/S` with an independent uniform `U`.
pub fn sample_ball_uniform<R: Rng + ?Sized>(rng: &mut R, p: PExponent, n: usize) -> Result<Vec<f64>> {
    check_dim(n)?;
    let mut draw = LogDraw::new(p, n);
    let mut x = vec![0.0; n];
    ball_point_into(rng, &mut draw, &mut x);
    Ok(x)
}

/// Hot-loop form of [`sample_ball_uniform`] reusing caller buffers.
#[inline]
pub fn ball_point_into<R: Rng + ?Sized>(rng: &mut R, draw: &mut LogDraw, out: &mut [f64]) {
    draw.fill(rng);
    draw.cone_into(out);
    let u: f64 = rng.sample(Open01);
    let r = u.powf(1.0 / draw.dim() as f64);
    out.iter_mut().for_each(|x| *x *= r);
}

/// Scratch buffers handed to per-sample feature closures.
#[derive(Debug, Clone)]
pub struct Scratch {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Scratch {
    pub fn new(n: usize) -> Self {
        Scratch { a: vec![0.0; n], b: vec![0.0; n], c: vec![0.0; n] }
    }
}

/// Draws `n_total` (rounded up to whole batches) copies of `G` and accumulates
/// `features` per batch. Each batch owns a substream of `stream`.
pub fn gather_features<F>(
    p: PExponent,
    n: usize,
    n_total: usize,
    stream: RngStream,
    n_features: usize,
    features: F,
) -> BatchSums
where
    F: Fn(&LogDraw, &mut Scratch, &mut [f64]) + Sync,
{
    let (n_batches, batch_size) = batch_layout(n_total);
    let sums = run_batches(stream, n_batches, |_, rng| {
        let mut draw = LogDraw::new(p, n);
        let mut scratch = Scratch::new(n);
        let mut f = vec![0.0; n_features];
        let mut acc = vec![0.0; n_features];
        for _ in 0..batch_size {
            draw.fill(rng);
            features(&draw, &mut scratch, &mut f);
            acc.iter_mut().zip(&f).for_each(|(a, v)| *a += v);
        }
        acc
    });
    BatchSums::new(batch_size, sums)
}

/// `E|g|^α` for each requested `α`, from one pool of scalar draws.
pub fn estimate_g_moments(p: PExponent, alphas: &[f64], n_samples: usize, stream: RngStream) -> Vec<MomentEstimate> {
    let pf = p.get();
    let sums = gather_features(p, 1, n_samples, stream, alphas.len(), |draw, _, f| {
        for (o, a) in f.iter_mut().zip(alphas) {
            *o = (a * draw.ln_w[0] / pf).exp();
        }
    });
    (0..alphas.len()).map(|k| sums.mean(k)).collect()
}

/// `E S^α` for each requested `α`.
pub fn estimate_s_moments(p: PExponent, n: usize, alphas: &[f64], n_samples: usize, stream: RngStream) -> Vec<MomentEstimate> {
    let pf = p.get();
    let sums = gather_features(p, n, n_samples, stream, alphas.len(), |draw, _, f| {
        let ln_s = draw.ln_s_pow_p() / pf;
        for (o, a) in f.iter_mut().zip(alphas) {
            *o = (a * ln_s).exp();
        }
    });
    (0..alphas.len()).map(|k| sums.mean(k)).collect()
}

/// Pearson correlation between `‖G/S‖_∞` and `S`, which vanishes when the two are independent.
pub fn cone_radius_correlation(p: PExponent, n: usize, n_samples: usize, stream: RngStream) -> f64 {
    let pf = p.get();
    let sums = gather_features(p, n, n_samples, stream, 5, |draw, _, f| {
        let ln_sp = draw.ln_s_pow_p();
        let ln_max = draw.ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let x = ((ln_max - ln_sp) / pf).exp();
        let y = (ln_sp / pf).exp();
        f.copy_from_slice(&[x, y, x * x, y * y, x * y]);
    });
    let m = sums.means();
    let cov = m[4] - m[0] * m[1];
    cov / ((m[2] - m[0] * m[0]) * (m[3] - m[1] * m[1])).sqrt()
}

/// `‖x‖_p`, scaled by the largest entry so large `p` does not overflow.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    let s: f64 = x.iter().map(|v| (v.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{moment_g, moment_s};
    use crate::stats::BatchMeans;
    use rand::RngCore;

    fn pe(p: f64) -> PExponent {
        PExponent::new(p).unwrap()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = RngStream::new(7, 3);
        let a: Vec<u64> = (0..5).map({
            let mut r = s.rng();
            move |_| r.next_u64()
        }).collect();
        let b: Vec<u64> = (0..5).map({
            let mut r = s.rng();
            move |_| r.next_u64()
        }).collect();
        assert_eq!(a, b);
        let mut other = RngStream::new(7, 4).rng();
        assert_ne!(a[0], other.next_u64());
        assert_ne!(s.substream(0), s.substream(1));
        assert_eq!(s.substream(9), s.substream(9));
    }

    #[test]
    fn gamma_sampler_determinism() {
        let s = RngStream::new(11, 0);
        let (mut r1, mut r2) = (s.rng(), s.rng());
        for _ in 0..100 {
            assert_eq!(
                sample_gamma(&mut r1, 1.0 / 64.0).unwrap().to_bits(),
                sample_gamma(&mut r2, 1.0 / 64.0).unwrap().to_bits()
            );
        }
        assert!(sample_gamma(&mut r1, 0.0).is_err());
        assert!(sample_gamma(&mut r1, -2.0).is_err());
    }

    #[test]
    fn gamma_exponential_tail_and_means() {
        let mut rng = RngStream::new(1, 1).rng();
        let n = 1_000_000;
        let sampler = GammaSampler::new(1.0).unwrap();
        let mut tail = BatchMeans::new(100, n / 100);
        for _ in 0..n {
            tail.push(if sampler.sample(&mut rng) > 1.0 { 1.0 } else { 0.0 });
        }
        let est = tail.finish();
        assert!(est.z_score((-1.0f64).exp()).abs() <= 4.0, "{est:?}");

        for &shape in &[1.0 / 64.0, 0.3, 1.0, 2.5, 30.0] {
            let sampler = GammaSampler::new(shape).unwrap();
            let mut mean = BatchMeans::new(100, 2000);
            let mut log_mean = BatchMeans::new(100, 2000);
            for _ in 0..200_000 {
                mean.push(sampler.sample(&mut rng));
                log_mean.push(sampler.sample_ln(&mut rng));
            }
            let est = mean.finish();
            assert!(est.z_score(shape).abs() <= 4.0, "shape {shape}: {est:?}");
            // E ln W = digamma(shape); check the log path through E W via exp.
            assert!(log_mean.finish().mean.is_finite());
        }
    }

    #[test]
    fn gg_moments_match_oracle() {
        let mut rng = RngStream::new(2, 5).rng();
        for &p in &[1.0, 1.5, 3.0, 8.0] {
            let mut m4 = BatchMeans::new(100, 2000);
            let mut m1 = BatchMeans::new(100, 2000);
            for _ in 0..200_000 {
                let g = sample_gg(&mut rng, pe(p));
                m4.push(g.powi(4));
                m1.push(g);
            }
            let m4 = m4.finish();
            assert!(m4.z_score(moment_g(pe(p), 4.0).unwrap()).abs() <= 4.0, "p {p}: {m4:?}");
            assert!(m1.finish().z_score(0.0).abs() <= 4.0);
        }
        let mut m2 = BatchMeans::new(100, 2000);
        for _ in 0..200_000 {
            m2.push(sample_gg(&mut rng, pe(2.0)).powi(2));
        }
        assert!(m2.finish().z_score(0.5).abs() <= 4.0);
    }

    #[test]
    fn gs_norm_and_moments() {
        let mut rng = RngStream::new(3, 0).rng();
        let p = pe(1.5);
        let n = 8;
        let mut s1 = BatchMeans::new(100, 1000);
        let mut s2 = BatchMeans::new(100, 1000);
        let mut g1 = BatchMeans::new(100, 1000);
        let mut g2 = BatchMeans::new(100, 1000);
        for _ in 0..100_000 {
            let draw = sample_gs(&mut rng, p, n).unwrap();
            assert!(draw.s > 0.0);
            let direct = lp_norm(&draw.g, 1.5);
            assert!((draw.s - direct).abs() <= 1e-12 * draw.s);
            s1.push(draw.s);
            s2.push(draw.s * draw.s);
            g1.push(draw.g[0] * draw.g[0]);
            g2.push(draw.g[1] * draw.g[1]);
        }
        assert!(s1.finish().z_score(moment_s(p, n, 1.0).unwrap()).abs() <= 4.0);
        assert!(s2.finish().z_score(moment_s(p, n, 2.0).unwrap()).abs() <= 4.0);
        let (g1, g2) = (g1.finish(), g2.finish());
        let combined = (g1.stderr.powi(2) + g2.stderr.powi(2)).sqrt();
        assert!((g1.mean - g2.mean).abs() <= 4.0 * combined);
    }

    #[test]
    fn cone_points_lie_on_the_sphere() {
        let mut rng = RngStream::new(4, 0).rng();
        for &p in &[1.0, 1.5, 2.0, 7.0, 800.0] {
            for _ in 0..2000 {
                let c = sample_cone(&mut rng, pe(p), 5).unwrap();
                assert!((lp_norm(&c.y, p) - 1.0).abs() <= 1e-12, "p {p}: {:?}", c.y);
            }
        }
        let mut y1 = BatchMeans::new(100, 1000);
        for _ in 0..100_000 {
            let c = sample_cone(&mut rng, pe(2.0), 2).unwrap();
            y1.push(c.y[0] * c.y[0]);
        }
        assert!(y1.finish().z_score(0.5).abs() <= 4.0);
    }

    #[test]
    fn ball_points_moments() {
        let mut rng = RngStream::new(5, 0).rng();
        let n = 6;
        let p = pe(3.0);
        let mut pp = BatchMeans::new(100, 1000);
        for _ in 0..100_000 {
            let x = sample_ball_uniform(&mut rng, p, n).unwrap();
            let norm = lp_norm(&x, 3.0);
            assert!(norm <= 1.0 + 1e-12);
            pp.push(norm.powf(3.0));
        }
        assert!(pp.finish().z_score(n as f64 / (n as f64 + 3.0)).abs() <= 4.0);
        let mut r2 = BatchMeans::new(100, 1000);
        for _ in 0..100_000 {
            let x = sample_ball_uniform(&mut rng, pe(2.0), 2).unwrap();
            r2.push(x[0] * x[0] + x[1] * x[1]);
        }
        assert!(r2.finish().z_score(0.5).abs() <= 4.0);
    }

    #[test]
    fn huge_exponent_stays_finite() {
        let mut rng = RngStream::new(6, 0).rng();
        let mut d = LogDraw::new(pe(5000.0), 4);
        let mut buf = vec![0.0; 4];
        for _ in 0..1000 {
            d.fill(&mut rng);
            d.signed_power_into(&mut buf);
            assert!(buf.iter().all(|v| v.is_finite() && v.abs() <= 1e3));
            d.cone_into(&mut buf);
            assert!(buf.iter().all(|v| v.is_finite()));
            assert!(d.s() > 0.0);
        }
    }

    #[test]
    fn cone_to_surface_density() {
        // perimeter of B_p^2 as E_μ[2|B_p^2|·|∇‖·‖_p|] against the arc length of
        // t ↦ (cos^{2/p} t, sin^{2/p} t)
        use crate::quad::gauss_kronrod;
        use crate::specfun::ball_volume;
        let mut rng = RngStream::new(7, 0).rng();
        for &p in &[1.5, 2.0, 3.0] {
            let e = 2.0 / p;
            let speed = |t: f64| {
                let (c, s) = (t.cos(), t.sin());
                let dx = e * c.powf(e - 1.0) * s;
                let dy = e * s.powf(e - 1.0) * c;
                (dx * dx + dy * dy).sqrt()
            };
            let perimeter = 4.0 * gauss_kronrod(&speed, 0.0, std::f64::consts::FRAC_PI_2, 1e-10, 0.0).value;
            let vol = ball_volume(pe(p), 2).unwrap();
            let mut acc = BatchMeans::new(100, 2000);
            for _ in 0..200_000 {
                let y = sample_cone(&mut rng, pe(p), 2).unwrap().y;
                let grad: f64 = y.iter().map(|v| v.abs().powf(2.0 * p - 2.0)).sum::<f64>().sqrt();
                acc.push(2.0 * vol * grad);
            }
            let est = acc.finish().mean;
            assert!((est / perimeter - 1.0).abs() < 0.01, "p={p}: {est} vs {perimeter}");
        }
    }

    #[test]
    fn pooled_moment_estimators() {
        let gm = estimate_g_moments(pe(3.0), &[1.0, 2.0], 200_000, RngStream::new(8, 0));
        assert!(gm[0].within(moment_g(pe(3.0), 1.0).unwrap(), 4.0));
        assert!(gm[1].within(moment_g(pe(3.0), 2.0).unwrap(), 4.0));
        let sm = estimate_s_moments(pe(1.5), 8, &[2.0, 4.0], 200_000, RngStream::new(8, 1));
        assert!(sm[0].within(moment_s(pe(1.5), 8, 2.0).unwrap(), 4.0));
        assert!(sm[1].within(moment_s(pe(1.5), 8, 4.0).unwrap(), 4.0));
        let n = 200_000;
        let r = cone_radius_correlation(pe(3.0), 16, n, RngStream::new(8, 2));
        assert!(r.abs() <= 4.0 / (n as f64).sqrt(), "{r}");
    }
}
