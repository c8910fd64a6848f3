//! Monte Carlo estimators against the deterministic quadrature oracles.

use lpproj::oracle_quad::{quad_epsi, quad_moments_ball, quad_moments_projection, QuadConfig};
use lpproj::projest::{estimate_ef, ProjectedBodySpec};
use lpproj::sampling::RngStream;
use lpproj::steiner::{isotropic_spec, steiner_variance_compare};
use lpproj::weights::{estimate_epsi, Direction, PsiMoment};
use lpproj::PExponent;

fn pe(p: f64) -> PExponent {
    PExponent::new(p).unwrap()
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[test]
fn weighted_estimator_matches_projection_quadrature() {
    let cfg = QuadConfig::default();
    for (k, p) in [1.5, 3.0, 8.0].into_iter().enumerate() {
        let mut rng = RngStream::new(100, k as u64).rng();
        let dir = Direction::haar(&mut rng, 3).unwrap();
        let oracle = quad_moments_projection(pe(p), &dir, norm2, &cfg).unwrap();
        let spec = ProjectedBodySpec::new(pe(p), dir).unwrap();
        let est = estimate_ef(&spec, norm2, 300_000, RngStream::new(101, k as u64)).unwrap();
        let slack = (4.0 * est.stderr).max(0.01 * oracle.value);
        assert!((est.mean - oracle.value).abs() <= slack, "p={p}: {est:?} vs {oracle:?}");
    }
}

#[test]
fn fourth_moment_on_projection_matches_quadrature() {
    let cfg = QuadConfig::default();
    let dir = Direction::new(vec![0.2, 0.5, -0.8]).unwrap();
    let f = |x: &[f64]| norm2(x).powi(2);
    let oracle = quad_moments_projection(pe(1.0), &dir, f, &cfg).unwrap();
    let spec = ProjectedBodySpec::new(pe(1.0), dir).unwrap();
    let est = estimate_ef(&spec, f, 300_000, RngStream::new(102, 0)).unwrap();
    assert!(est.within(oracle.value, 4.0), "{est:?} vs {oracle:?}");
}

#[test]
fn psi_mean_matches_quadrature() {
    let cfg = QuadConfig::default();
    let mut rng = RngStream::new(103, 0).rng();
    for p in [1.0, 1.5, 3.0] {
        for n in [2usize, 3] {
            let dir = Direction::haar(&mut rng, n).unwrap();
            let oracle = quad_epsi(pe(p), &dir, &cfg).unwrap();
            let est = estimate_epsi(pe(p), &dir, PsiMoment::First, 300_000, RngStream::new(104, n as u64)).unwrap();
            let slack = (4.0 * est.stderr).max(0.01 * oracle.value);
            assert!((est.mean - oracle.value).abs() <= slack, "p={p} n={n}: {est:?} vs {oracle:?}");
        }
    }
}

#[test]
fn isotropic_constant_matches_quadrature() {
    let cfg = QuadConfig::default();
    for (p, closed) in [(2.0, 0.25 / std::f64::consts::PI), (1.0, 1.0 / 12.0), (3.0, f64::NAN)] {
        let body = isotropic_spec(pe(p), 2).unwrap();
        let q = quad_moments_ball(pe(p), &[2, 0], &cfg).unwrap().value * body.scale.powi(2);
        assert!((q - body.lk2).abs() < 1e-3 * body.lk2, "p={p}");
        if closed.is_finite() {
            assert!((body.lk2 - closed).abs() < 1e-12);
        }
    }
}

#[test]
fn steiner_preserves_moments_orthogonal_to_axis() {
    let p = pe(3.0);
    let dir = Direction::axis(3, 2).unwrap();
    let c = steiner_variance_compare(p, &dir, 300_000, RngStream::new(105, 0)).unwrap();
    let lk2 = c.body.lk2;
    assert!(c.x.e_norm2.within(3.0 * lk2, 4.0));
    assert!(c.y.e_norm2.within(3.0 * lk2, 4.0));
    assert!(c.y.e_theta2.within(lk2, 4.0));
    let comb = (c.x.var_norm2.stderr.powi(2) + c.y.var_norm2.stderr.powi(2)).sqrt();
    assert!((c.y.var_norm2.mean - c.x.var_norm2.mean).abs() <= 4.0 * comb);
}

#[test]
fn steiner_fourth_moment_monotone_along_theta() {
    let mut rng = RngStream::new(106, 0).rng();
    for k in 0..3 {
        let dir = Direction::haar(&mut rng, 3).unwrap();
        let c = steiner_variance_compare(pe(1.5), &dir, 200_000, RngStream::new(107, k)).unwrap();
        assert!(c.y.e_theta4.mean <= c.x.e_theta4.mean + 4.0 * c.y.e_theta4.stderr.hypot(c.x.e_theta4.stderr));
        assert!(c.y.e_theta2.mean <= c.x.e_theta2.mean + 4.0 * c.y.e_theta2.stderr.hypot(c.x.e_theta2.stderr));
    }
}
