//! Chords of `B_p^n` along a direction, membership in the projection
//! `P_H B_p^n`, and Steiner symmetrization of the volume-one dilate of `B_p^n`.

use crate::error::{Error, Result};
use crate::linalg::{largest_eigenvalue, SquareMatrix};
use crate::sampling::{ball_point_into, LogDraw, RngStream};
use crate::specfun::{ball_volume, moment_g, moment_s, PExponent};
use crate::stats::{run_batches, BatchSums, MomentEstimate, N_BATCHES};
use crate::weights::Direction;
use rand::Rng;
use serde::{Deserialize, Serialize};

const ORTHO_TOL: f64 = 1e-10;
const MEMBERSHIP_TOL: f64 = 1e-10;
const ROOT_TOL: f64 = 1e-13;

/// The segment `{y + tθ : a <= t <= b}` of a body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chord {
    pub a: f64,
    pub b: f64,
}

impl Chord {
    pub fn half_length(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }
}

/// `‖y + tθ‖_p` without allocating.
pub fn fiber_norm(p: f64, y: &[f64], theta: &[f64], t: f64) -> f64 {
    let m = y.iter().zip(theta).fold(0.0f64, |m, (a, b)| m.max((a + t * b).abs()));
    if m == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return y.iter().zip(theta).map(|(a, b)| (a + t * b).abs()).sum();
    }
    let s: f64 = y.iter().zip(theta).map(|(a, b)| ((a + t * b).abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// `n^{max(0, 1/2 - 1/p)}`, the Euclidean circumradius of `B_p^n`.
pub fn circumradius(p: f64, n: usize) -> f64 {
    (n as f64).powf((0.5 - 1.0 / p).max(0.0))
}

/// Golden-section minimum of a convex function on `[lo, hi]`.
fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    let t = 0.5 * (lo + hi);
    let ft = f(t);
    [(x1, f1), (x2, f2), (t, ft)].into_iter().fold((t, ft), |best, c| if c.1 < best.1 { c } else { best })
}

/// Root of the increasing-on-bracket function `f` with `f(inside) <= 0 < f(outside)`,
/// by Illinois false position falling back to bisection.
fn boundary_root<F: Fn(f64) -> f64>(f: F, inside: f64, outside: f64) -> f64 {
    let (mut a, mut b) = (inside, outside);
    let (mut fa, mut fb) = (f(a), f(b));
    let mut side = 0i8;
    for it in 0..200 {
        if (b - a).abs() <= ROOT_TOL * a.abs().max(b.abs()).max(1.0) {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if it % 4 == 3 || !c.is_finite() || (c - a) * (c - b) >= 0.0 {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    // the last inside point keeps the endpoint in the body
    if fa.abs() <= fb.abs() { a } else { b }
}

fn check_orthogonal(dir: &Direction, y: &[f64]) -> Result<()> {
    if y.len() != dir.dim() {
        return Err(Error::DimensionMismatch { expected: dir.dim(), got: y.len() });
    }
    let d = dir.dot(y);
    if d.abs() > ORTHO_TOL {
        return Err(Error::Domain(format!("point is not orthogonal to θ (⟨y, θ⟩ = {d:e})")));
    }
    Ok(())
}

/// Chord of `level·B_p^n` through `y` knowing that `y + t_in θ` lies inside.
fn chord_from_interior(p: f64, theta: &[f64], y: &[f64], t_in: f64, level: f64, reach: f64) -> Chord {
    let h = |t: f64| fiber_norm(p, y, theta, t) - level;
    let b = boundary_root(h, t_in, reach);
    let a = boundary_root(h, t_in, -reach);
    Chord { a, b }
}

fn min_over_fiber(p: f64, theta: &[f64], y: &[f64]) -> (f64, f64) {
    let ny = fiber_norm(p, y, theta, 0.0);
    let nt = fiber_norm(p, &vec![0.0; y.len()], theta, 1.0);
    let span = 2.0 * ny / nt + 1e-12;
    golden_min(|t| fiber_norm(p, y, theta, t), -span, span, 1e-12)
}

/// `{t : ‖y + tθ‖_p <= 1}` for `y ∈ θ^⊥`, or `None` when the line misses the ball.
pub fn chord(p: PExponent, dir: &Direction, y: &[f64]) -> Result<Option<Chord>> {
    check_orthogonal(dir, y)?;
    let n = dir.dim();
    let r = circumradius(p.get(), n);
    if y.iter().map(|v| v * v).sum::<f64>().sqrt() > r {
        return Ok(None);
    }
    let (t_min, h_min) = min_over_fiber(p.get(), dir.theta(), y);
    if h_min > 1.0 {
        return Ok(None);
    }
    Ok(Some(chord_from_interior(p.get(), dir.theta(), y, t_min, 1.0, 1.001 * r + 1e-9)))
}

/// Whether `y ∈ θ^⊥` lies in `P_H B_p^n`.
pub fn membership_projection(p: PExponent, dir: &Direction, y: &[f64]) -> Result<bool> {
    check_orthogonal(dir, y)?;
    if y.iter().map(|v| v * v).sum::<f64>().sqrt() > circumradius(p.get(), dir.dim()) * (1.0 + MEMBERSHIP_TOL) {
        return Ok(false);
    }
    Ok(min_over_fiber(p.get(), dir.theta(), y).1 <= 1.0 + MEMBERSHIP_TOL)
}

/// `K̃ = |B_p^n|^{-1/n} B_p^n` with its axis second moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicBodySpec {
    pub p: PExponent,
    pub n: usize,
    pub scale: f64,
    /// `E⟨X, e_1⟩²` for `X` uniform on `K̃`.
    pub lk2: f64,
}

pub fn isotropic_spec(p: PExponent, n: usize) -> Result<IsotropicBodySpec> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be >= 1".into()));
    }
    let scale = ball_volume(p, n)?.powf(-1.0 / n as f64);
    let nf = n as f64;
    let lk2 = scale * scale * nf / (nf + 2.0) * moment_g(p, 2.0)? / moment_s(p, n, 2.0)?;
    Ok(IsotropicBodySpec { p, n, scale, lk2 })
}

/// Splits `n_samples` over the batches so the total is exact.
fn exact_layout(n_samples: usize) -> Vec<usize> {
    let base = n_samples / N_BATCHES;
    let extra = n_samples % N_BATCHES;
    (0..N_BATCHES).map(|b| base + usize::from(b < extra)).collect()
}

/// Uniform point `x` of `K̃` and its Steiner image `y` along `θ`, sharing the projection.
struct PairSampler {
    p: f64,
    scale: f64,
    reach: f64,
    draw: LogDraw,
    x: Vec<f64>,
    y: Vec<f64>,
    base: Vec<f64>,
}

impl PairSampler {
    fn new(body: &IsotropicBodySpec) -> Self {
        let n = body.n;
        PairSampler {
            p: body.p.get(),
            scale: body.scale,
            reach: 1.001 * circumradius(body.p.get(), n) * body.scale + 1e-9,
            draw: LogDraw::new(body.p, n),
            x: vec![0.0; n],
            y: vec![0.0; n],
            base: vec![0.0; n],
        }
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R, theta: &[f64]) {
        ball_point_into(rng, &mut self.draw, &mut self.x);
        self.x.iter_mut().for_each(|v| *v *= self.scale);
        let t0: f64 = self.x.iter().zip(theta).map(|(a, b)| a * b).sum();
        for i in 0..self.x.len() {
            self.base[i] = self.x[i] - t0 * theta[i];
        }
        let c = chord_from_interior(self.p, theta, &self.base, t0, self.scale, self.reach);
        let t = rng.random_range(-1.0..=1.0) * c.half_length();
        for i in 0..self.x.len() {
            self.y[i] = self.base[i] + t * theta[i];
        }
    }
}

/// Exactly `n_samples` points uniform on `S_θ(K̃)`.
pub fn sample_steiner(stream: RngStream, p: PExponent, dir: &Direction, n_samples: usize) -> Result<Vec<Vec<f64>>> {
    let body = isotropic_spec(p, dir.dim())?;
    let layout = exact_layout(n_samples);
    let parts = run_batches(stream, N_BATCHES, |b, rng| {
        let mut s = PairSampler::new(&body);
        (0..layout[b])
            .map(|_| {
                s.next(rng, dir.theta());
                s.y.clone()
            })
            .collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Per-body feature block: `|Z|², |Z|⁴, ⟨Z,θ⟩², ⟨Z,θ⟩⁴, ⟨Z,e_i⟩²⟨Z,θ⟩²` (n), then `Z Zᵀ` upper triangle.
fn body_features(z: &[f64], theta: &[f64], out: &mut [f64]) {
    let n = z.len();
    let r2: f64 = z.iter().map(|v| v * v).sum();
    let t: f64 = z.iter().zip(theta).map(|(a, b)| a * b).sum();
    let t2 = t * t;
    out[0] = r2;
    out[1] = r2 * r2;
    out[2] = t2;
    out[3] = t2 * t2;
    for i in 0..n {
        out[4 + i] = z[i] * z[i] * t2;
    }
    let mut k = 4 + n;
    for a in 0..n {
        for b in a..n {
            out[k] = z[a] * z[b];
            k += 1;
        }
    }
}

fn block_len(n: usize) -> usize {
    4 + n + n * (n + 1) / 2
}

fn second_moment_matrix(m: &[f64], n: usize) -> SquareMatrix {
    let mut s = SquareMatrix::zeros(n);
    let mut k = 4 + n;
    for a in 0..n {
        for b in a..n {
            s[(a, b)] = m[k];
            s[(b, a)] = m[k];
            k += 1;
        }
    }
    s
}

/// Moments of one body in a [`SteinerComparison`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyMoments {
    pub e_norm2: MomentEstimate,
    pub var_norm2: MomentEstimate,
    pub e_theta2: MomentEstimate,
    pub e_theta4: MomentEstimate,
    /// `E⟨Z, e_i⟩²⟨Z, θ⟩²` per coordinate.
    pub mixed: Vec<MomentEstimate>,
    pub lambda2: f64,
    /// `Var|Z|² / (λ² E|Z|²)`.
    pub ratio: MomentEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinerComparison {
    pub body: IsotropicBodySpec,
    /// Uniform on `K̃`.
    pub x: BodyMoments,
    /// Uniform on `S_θ(K̃)`.
    pub y: BodyMoments,
    /// `Var|Y|² - Var|X|²` from the paired samples.
    pub var_diff: MomentEstimate,
    /// `n L_K⁴`.
    pub bound: f64,
}

fn body_moments(sums: &BatchSums, offset: usize, n: usize) -> Result<BodyMoments> {
    let means = sums.means();
    let lambda2 = largest_eigenvalue(&second_moment_matrix(&means[offset..], n))?;
    let var = move |m: &[f64]| m[offset + 1] - m[offset] * m[offset];
    Ok(BodyMoments {
        e_norm2: sums.mean(offset),
        var_norm2: sums.jackknife(var),
        e_theta2: sums.mean(offset + 2),
        e_theta4: sums.mean(offset + 3),
        mixed: (0..n).map(|i| sums.mean(offset + 4 + i)).collect(),
        lambda2,
        ratio: sums.jackknife(|m| var(m) / (lambda2 * m[offset])),
    })
}

/// `Var|Y|²` on `S_θ(K̃)` against `Var|X|²` on `K̃`, from one paired pool.
pub fn steiner_variance_compare(
    p: PExponent,
    dir: &Direction,
    n_samples: usize,
    stream: RngStream,
) -> Result<SteinerComparison> {
    let n = dir.dim();
    let body = isotropic_spec(p, n)?;
    let layout = exact_layout(n_samples);
    if layout.iter().any(|&b| b == 0) {
        return Err(Error::Domain(format!("need at least {N_BATCHES} samples")));
    }
    let bl = block_len(n);
    let theta = dir.theta();
    let sums = run_batches(stream, N_BATCHES, |b, rng| {
        let mut s = PairSampler::new(&body);
        let mut f = vec![0.0; 2 * bl];
        let mut acc = vec![0.0; 2 * bl];
        for _ in 0..layout[b] {
            s.next(rng, theta);
            body_features(&s.x, theta, &mut f[..bl]);
            body_features(&s.y, theta, &mut f[bl..]);
            acc.iter_mut().zip(&f).for_each(|(a, v)| *a += v);
        }
        // rescale to the common batch size so unequal batches weigh equally
        let k = layout[0] as f64 / layout[b] as f64;
        acc.iter_mut().for_each(|a| *a *= k);
        acc
    });
    let sums = BatchSums::new(layout[0], sums);
    let x = body_moments(&sums, 0, n)?;
    let y = body_moments(&sums, bl, n)?;
    let var_diff = sums.jackknife(|m| (m[bl + 1] - m[bl] * m[bl]) - (m[1] - m[0] * m[0]));
    Ok(SteinerComparison { body, x, y, var_diff, bound: n as f64 * body.lk2 * body.lk2 })
}

/// `|√Var|X|² − √Var|P_E X|²|` against `√Var|P_{E⊥} X|²` for `X` uniform on `K̃`, `E = θ^⊥`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDecomposition {
    pub var_full: MomentEstimate,
    pub var_proj: MomentEstimate,
    pub var_perp: MomentEstimate,
    /// `|√var_full − √var_proj| − √var_perp`; non-positive when the inequality holds.
    pub slack: MomentEstimate,
    pub holds: bool,
}

pub fn projection_decomposition_check(
    p: PExponent,
    dir: &Direction,
    n_samples: usize,
    k_sigma: f64,
    stream: RngStream,
) -> Result<ProjectionDecomposition> {
    let n = dir.dim();
    let body = isotropic_spec(p, n)?;
    let (nb, bs) = crate::stats::batch_layout(n_samples);
    let theta = dir.theta();
    let sums = run_batches(stream, nb, |_, rng| {
        let mut draw = LogDraw::new(p, n);
        let mut x = vec![0.0; n];
        let mut acc = [0.0; 6];
        for _ in 0..bs {
            ball_point_into(rng, &mut draw, &mut x);
            let r2 = body.scale * body.scale * x.iter().map(|v| v * v).sum::<f64>();
            let t = body.scale * x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
            let t2 = t * t;
            let e2 = r2 - t2;
            for (a, v) in acc.iter_mut().zip([r2, r2 * r2, e2, e2 * e2, t2, t2 * t2]) {
                *a += v;
            }
        }
        acc.to_vec()
    });
    let sums = BatchSums::new(bs, sums);
    let v = |m: &[f64], k: usize| m[k + 1] - m[k] * m[k];
    let slack = sums.jackknife(|m| (v(m, 0).sqrt() - v(m, 2).sqrt()).abs() - v(m, 4).sqrt());
    Ok(ProjectionDecomposition {
        var_full: sums.jackknife(|m| v(m, 0)),
        var_proj: sums.jackknife(|m| v(m, 2)),
        var_perp: sums.jackknife(|m| v(m, 4)),
        holds: slack.mean <= k_sigma * slack.stderr,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pe(p: f64) -> PExponent {
        PExponent::new(p).unwrap()
    }

    #[test]
    fn chord_examples() {
        let e3 = Direction::axis(3, 2).unwrap();
        let c = chord(pe(2.0), &e3, &[0.0, 0.0, 0.0]).unwrap().unwrap();
        assert!((c.a + 1.0).abs() < 1e-12 && (c.b - 1.0).abs() < 1e-12);
        let c = chord(pe(1.0), &e3, &[0.5, 0.0, 0.0]).unwrap().unwrap();
        assert!((c.a + 0.5).abs() < 1e-12 && (c.b - 0.5).abs() < 1e-12);
        assert!(chord(pe(2.0), &e3, &[1.2, 0.0, 0.0]).unwrap().is_none());
        assert!(chord(pe(2.0), &e3, &[0.1, 0.0, 0.1]).is_err());
    }

    #[test]
    fn chord_certificates_on_random_fibers() {
        let mut rng = RngStream::new(31, 0).rng();
        for &p in &[1.0, 1.5, 3.0, 40.0] {
            for _ in 0..200 {
                let dir = Direction::haar(&mut rng, 4).unwrap();
                let mut y: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let d = dir.dot(&y);
                y.iter_mut().zip(dir.theta()).for_each(|(v, t)| *v -= d * t);
                let inside = membership_projection(pe(p), &dir, &y).unwrap();
                match chord(pe(p), &dir, &y).unwrap() {
                    Some(c) => {
                        assert!(inside);
                        for t in [c.a, c.b] {
                            let h = fiber_norm(p, &y, dir.theta(), t);
                            assert!((h - 1.0).abs() <= 1e-9, "p={p} h={h}");
                        }
                        assert!(fiber_norm(p, &y, dir.theta(), c.midpoint()) <= 1.0 + 1e-12);
                    }
                    None => assert!(!inside),
                }
            }
        }
    }

    #[test]
    fn euclidean_projection_membership() {
        let mut rng = RngStream::new(32, 0).rng();
        let dir = Direction::haar(&mut rng, 3).unwrap();
        let basis = crate::linalg::complement_basis(dir.theta());
        assert!(membership_projection(pe(2.0), &dir, &[0.0; 3]).unwrap());
        for r in [0.5, 0.99, 1.01, 1.5] {
            let y: Vec<f64> = basis[0].iter().map(|v| v * r).collect();
            assert_eq!(membership_projection(pe(2.0), &dir, &y).unwrap(), r <= 1.0);
        }
    }

    #[test]
    fn isotropic_constants() {
        let s = isotropic_spec(pe(1.0), 2).unwrap();
        assert!((s.lk2 - 1.0 / 12.0).abs() < 1e-14);
        let s = isotropic_spec(pe(2.0), 2).unwrap();
        assert!((s.lk2 - 0.25 / std::f64::consts::PI).abs() < 1e-14);
        let s = isotropic_spec(pe(3.0), 5).unwrap();
        assert!((ball_volume(pe(3.0), 5).unwrap() * s.scale.powi(5) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn steiner_sample_count_and_support() {
        let dir = Direction::new(vec![1.0, 2.0, -1.0]).unwrap();
        let body = isotropic_spec(pe(1.5), 3).unwrap();
        let pts = sample_steiner(RngStream::new(33, 0), pe(1.5), &dir, 1234).unwrap();
        assert_eq!(pts.len(), 1234);
        for y in &pts {
            let t = dir.dot(y);
            let base: Vec<f64> = y.iter().zip(dir.theta()).map(|(v, th)| (v - t * th) / body.scale).collect();
            let c = chord(pe(1.5), &dir, &base).unwrap().unwrap();
            assert!((t / body.scale).abs() <= c.half_length() + 1e-9);
        }
    }

    #[test]
    fn axis_symmetrization_is_identity_in_law() {
        let dir = Direction::axis(3, 2).unwrap();
        let c = steiner_variance_compare(pe(1.5), &dir, 200_000, RngStream::new(34, 0)).unwrap();
        assert!(c.var_diff.within(0.0, 4.0), "{:?}", c.var_diff);
        let comb = (c.x.e_theta4.stderr.powi(2) + c.y.e_theta4.stderr.powi(2)).sqrt();
        assert!((c.x.e_theta4.mean - c.y.e_theta4.mean).abs() <= 4.0 * comb);
        for i in 0..2 {
            let a = c.x.mixed[i];
            let b = c.y.mixed[i];
            assert!(b.mean <= a.mean + 4.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt());
        }
    }

    #[test]
    fn ball_decomposition_closed_forms() {
        let n = 5usize;
        let dir = Direction::axis(n, 0).unwrap();
        let r = projection_decomposition_check(pe(2.0), &dir, 400_000, 4.0, RngStream::new(35, 0)).unwrap();
        let s2 = isotropic_spec(pe(2.0), n).unwrap().scale.powi(2);
        let nf = n as f64;
        let var_full = s2 * s2 * (nf / (nf + 4.0) - (nf / (nf + 2.0)).powi(2));
        let var_perp = s2 * s2 * (3.0 / ((nf + 2.0) * (nf + 4.0)) - 1.0 / (nf + 2.0).powi(2));
        assert!(r.var_full.within(var_full, 4.0), "{:?} {var_full}", r.var_full);
        assert!(r.var_perp.within(var_perp, 4.0), "{:?} {var_perp}", r.var_perp);
        assert!(r.var_perp.mean > 0.0);
        assert!(r.holds);
    }
}
