//! Deterministic reference values for `n ∈ {2, 3}`: moments over `B_p^n`,
//! moments over the projection `P_H B_p^n`, and `E ψ_θ`.
//!
//! Every value is computed at several refinement levels and is only returned
//! when the last two agree to the configured relative tolerance.

use crate::error::{Error, Result};
use crate::linalg::complement_basis;
use crate::quad::{gauss_kronrod, gauss_legendre};
use crate::specfun::{log_gamma, reg_lower_inc_gamma, PExponent};
use crate::steiner::fiber_norm;
use crate::weights::Direction;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    /// Finest angular resolution for two-dimensional projections.
    pub grid_points_per_axis: usize,
    pub refinement_levels: usize,
    /// Relative agreement required between the last two levels.
    pub certify_rel: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { grid_points_per_axis: 2048, refinement_levels: 3, certify_rel: 1e-4 }
    }
}

impl QuadConfig {
    fn validate(&self) -> Result<()> {
        if self.refinement_levels < 2 {
            return Err(Error::Domain("refinement_levels must be >= 2".into()));
        }
        if self.grid_points_per_axis >> (self.refinement_levels - 1) < 8 {
            return Err(Error::Domain("grid too coarse for the requested refinement levels".into()));
        }
        Ok(())
    }

    /// Absolute tolerance handed to adaptive rules at `level`.
    fn tol(&self, level: usize) -> f64 {
        1e-7 * 10f64.powi(-(level as i32))
    }
}

/// A reference value with the relative change over its last refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certified {
    pub value: f64,
    pub delta: f64,
}

/// Runs `level_value` for every level and certifies the last step. `scale`
/// guards the relative change for values that vanish by symmetry.
fn certify<F: Fn(usize) -> Result<(f64, f64)>>(cfg: &QuadConfig, level_value: F) -> Result<Certified> {
    cfg.validate()?;
    let mut prev: Option<f64> = None;
    let mut out = Certified { value: f64::NAN, delta: f64::INFINITY };
    for level in 0..cfg.refinement_levels {
        let (v, scale) = level_value(level)?;
        if let Some(pv) = prev {
            out = Certified { value: v, delta: (v - pv).abs() / v.abs().max(scale).max(f64::MIN_POSITIVE) };
        }
        prev = Some(v);
    }
    if !(out.delta <= cfg.certify_rel) {
        return Err(Error::OracleUncertified { delta: out.delta, tol: cfg.certify_rel });
    }
    Ok(out)
}

fn check_n(n: usize) -> Result<()> {
    if !(2..=3).contains(&n) {
        return Err(Error::Domain(format!("quadrature oracles support n ∈ {{2, 3}}, got {n}")));
    }
    Ok(())
}

/// `∫_{-y}^{y} t^k dt`.
fn power_integral(y: f64, k: u32) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        2.0 * y.powi(k as i32 + 1) / (k as f64 + 1.0)
    }
}

/// `(1 - |x|^p)^{1/p}` clipped at zero.
fn section(p: f64, rem: f64) -> f64 {
    if rem <= 0.0 {
        0.0
    } else {
        rem.powf(1.0 / p)
    }
}

/// `∫_{B_p^n} Π x_i^{k_i} dx` with the last coordinate integrated in closed form.
fn ball_integral(p: f64, exps: &[u32], abs_tol: f64) -> f64 {
    let last = *exps.last().expect("non-empty");
    let xpow = |x: f64, k: u32| if k == 0 { 1.0 } else { x.powi(k as i32) };
    match exps.len() {
        2 => {
            let f = |x: f64| xpow(x, exps[0]) * power_integral(section(p, 1.0 - x.abs().powf(p)), last);
            gauss_kronrod(&f, -1.0, 0.0, abs_tol, 0.0).value + gauss_kronrod(&f, 0.0, 1.0, abs_tol, 0.0).value
        }
        _ => {
            let outer = |x1: f64| {
                let r1 = 1.0 - x1.abs().powf(p);
                let y2 = section(p, r1);
                if y2 == 0.0 {
                    return 0.0;
                }
                let inner = |x2: f64| xpow(x2, exps[1]) * power_integral(section(p, r1 - x2.abs().powf(p)), last);
                let v = gauss_kronrod(&inner, -y2, 0.0, abs_tol, 0.0).value + gauss_kronrod(&inner, 0.0, y2, abs_tol, 0.0).value;
                xpow(x1, exps[0]) * v
            };
            gauss_kronrod(&outer, -1.0, 0.0, abs_tol, 0.0).value + gauss_kronrod(&outer, 0.0, 1.0, abs_tol, 0.0).value
        }
    }
}

/// `E Π x_i^{k_i}` for `x` uniform on `B_p^n`.
pub fn quad_moments_ball(p: PExponent, exps: &[u32], cfg: &QuadConfig) -> Result<Certified> {
    check_n(exps.len())?;
    let abs_exps: Vec<u32> = exps.iter().map(|k| k + k % 2).collect();
    let zero = vec![0u32; exps.len()];
    certify(cfg, |level| {
        let tol = cfg.tol(level);
        let vol = ball_integral(p.get(), &zero, tol);
        let v = ball_integral(p.get(), exps, tol) / vol;
        // moment of |x|^k as the scale for odd monomials
        let scale = if exps.iter().any(|k| k % 2 == 1) { ball_integral(p.get(), &abs_exps, tol) / vol } else { 0.0 };
        Ok((v, scale))
    })
}

/// `1 / min_t ‖u + tθ‖_p`: the radial function of `P_H B_p^n` at the unit vector `u ∈ H`.
fn radial(p: f64, theta: &[f64], u: &[f64]) -> f64 {
    // the minimizer lies where ‖u + tθ‖_p <= ‖u‖_p, so |t| <= 2‖u‖_p / ‖θ‖_p
    let zero = vec![0.0; u.len()];
    let span = 2.0 * fiber_norm(p, u, theta, 0.0) / fiber_norm(p, &zero, theta, 1.0) + 1e-12;
    let (mut lo, mut hi) = (-span, span);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let h = |t: f64| fiber_norm(p, u, theta, t);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (h(x1), h(x2));
    while hi - lo > 1e-13 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = h(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = h(x2);
        }
    }
    1.0 / f1.min(f2).min(h(0.5 * (lo + hi)))
}

/// Pairwise sum with a fixed tree so results do not depend on scheduling.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `E f(X)` for `X` uniform on `P_H B_p^n`, `H = θ^⊥`, integrating in polar
/// coordinates of the Gram–Schmidt basis of `H`.
pub fn quad_moments_projection<F>(p: PExponent, dir: &Direction, f: F, cfg: &QuadConfig) -> Result<Certified>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = dir.dim();
    check_n(n)?;
    let pf = p.get();
    let theta = dir.theta();
    let basis = complement_basis(theta);
    let point = |coords: &[f64]| -> Vec<f64> {
        (0..n).map(|i| basis.iter().zip(coords).map(|(b, c)| b[i] * c).sum()).collect()
    };
    certify(cfg, |level| {
        let steps = cfg.grid_points_per_axis >> (cfg.refinement_levels - 1 - level);
        if n == 2 {
            let rho = radial(pf, theta, &basis[0]);
            let (x, w) = gauss_legendre(8 * steps.min(64));
            let vals: Vec<f64> = x.iter().zip(&w).map(|(t, wt)| 0.5 * wt * f(&point(&[rho * t]))).collect();
            let abs: Vec<f64> = x.iter().zip(&w).map(|(t, wt)| 0.5 * wt * f(&point(&[rho * t])).abs()).collect();
            return Ok((pairwise_sum(&vals), pairwise_sum(&abs)));
        }
        let (x, w) = gauss_legendre(24);
        let dphi = 2.0 * std::f64::consts::PI / steps as f64;
        let rows: Vec<(f64, f64, f64)> = (0..steps)
            .into_par_iter()
            .map(|k| {
                let phi = (k as f64 + 0.5) * dphi;
                let u = [phi.cos(), phi.sin()];
                let rho = radial(pf, theta, &point(&u));
                // ∫_0^ρ f(r u) r dr by Gauss–Legendre on [0, ρ]
                let (mut s, mut sa) = (0.0, 0.0);
                for (t, wt) in x.iter().zip(&w) {
                    let r = 0.5 * rho * (t + 1.0);
                    let v = f(&point(&[r * u[0], r * u[1]])) * r * 0.5 * rho * wt;
                    s += v;
                    sa += v.abs();
                }
                (s, sa, 0.5 * rho * rho)
            })
            .collect();
        let num = pairwise_sum(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
        let abs = pairwise_sum(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
        let area = pairwise_sum(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
        Ok((num / area, abs / area))
    })
}

/// `E|c + bZ|` for `Z = sign(g)|g|^{p-1}`:
/// `|c| + |b| e^{-y}/Γ(1/p) − |c| Q(1/p, y)` with `y = (|c|/|b|)^{p*}`.
fn shifted_abs_mean(c: f64, b: f64, p: f64, dual: f64, inv_gamma: f64) -> f64 {
    let (c, b) = (c.abs(), b.abs());
    if b == 0.0 {
        return c;
    }
    let y = (c / b).powf(dual);
    if y > 745.0 {
        return c;
    }
    let upper = 1.0 - reg_lower_inc_gamma(1.0 / p, y).unwrap_or(1.0);
    c + b * (-y).exp() * inv_gamma - c * upper
}

/// `E ψ_θ` for `n ∈ {2, 3}`.
///
/// For `p = 1`, `ψ_θ = |Σ sign(g_i) θ_i|` is averaged over the `2^n` sign patterns.
/// Otherwise the last coordinate is integrated in closed form and the remaining
/// one or two by nested adaptive Gauss–Kronrod over `|g_i|` on `[0, R]`.
pub fn quad_epsi(p: PExponent, dir: &Direction, cfg: &QuadConfig) -> Result<Certified> {
    let n = dir.dim();
    check_n(n)?;
    let theta = dir.theta();
    let Some(dual) = p.dual() else {
        let total: f64 = (0..1u32 << n)
            .map(|mask| {
                (0..n).map(|i| if mask >> i & 1 == 1 { -theta[i] } else { theta[i] }).sum::<f64>().abs()
            })
            .sum();
        cfg.validate()?;
        return Ok(Certified { value: total / (1u32 << n) as f64, delta: 0.0 });
    };
    let pf = p.get();
    let inv_gamma = (-log_gamma(1.0 / pf)?).exp();
    let dens_norm = (-log_gamma(1.0 + 1.0 / pf)?).exp();
    // e^{-x^p} < 1e-19 beyond R
    let r_max = 45f64.powf(1.0 / pf);
    let dens = move |x: f64| (-x.powf(pf)).exp() * dens_norm;
    let pw = move |x: f64| x.powf(pf - 1.0);
    let b = theta[n - 1];
    certify(cfg, |level| {
        let tol = cfg.tol(level);
        let v = if n == 2 {
            let f = |x: f64| dens(x) * shifted_abs_mean(theta[0] * pw(x), b, pf, dual, inv_gamma);
            gauss_kronrod(&f, 0.0, r_max, tol, 0.0).value
        } else {
            let outer = |x1: f64| {
                let c1 = theta[0] * pw(x1);
                let inner = |x2: f64| {
                    let c2 = theta[1] * pw(x2);
                    dens(x2)
                        * 0.5
                        * (shifted_abs_mean(c1 + c2, b, pf, dual, inv_gamma)
                            + shifted_abs_mean(c1 - c2, b, pf, dual, inv_gamma))
                };
                dens(x1) * gauss_kronrod(&inner, 0.0, r_max, 0.1 * tol, 0.0).value
            };
            gauss_kronrod(&outer, 0.0, r_max, tol, 0.0).value
        };
        Ok((v, 0.0))
    })
}
