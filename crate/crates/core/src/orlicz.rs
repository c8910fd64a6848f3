//! The Orlicz function attached to `X = |g|^{p-1}` with `q = 2`, and its
//! Luxemburg norm.
//!
//! After substituting `r = x^p` the defining double integral becomes
//!
//! ```text
//! M(s) = 2/(p Γ(1+1/p)) ∫_0^s ( t γ(2 - 1/p, t^{-p*}) + e^{-t^{-p*}} ) dt
//! ```
//!
//! with `γ` the lower incomplete gamma function.

use crate::error::{Error, Result};
use crate::quad::gauss_kronrod;
use crate::sampling::RngStream;
use crate::specfun::{log_gamma, reg_lower_inc_gamma, PExponent};
use crate::stats::MomentEstimate;
use crate::weights::{estimate_psi_phi, Direction};
use serde::{Deserialize, Serialize};

const GRID_LO: i32 = -40;
const GRID_HI: i32 = 40;
const PANEL_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OrliczM {
    p: PExponent,
    dual: f64,
    normalization: f64,
    /// `Γ(2 - 1/p)`
    gamma_a: f64,
    /// `(s, M(s))` at `s = 0` and `s = 2^k`.
    grid: Vec<(f64, f64)>,
}

impl OrliczM {
    pub fn new(p: PExponent) -> Result<Self> {
        let dual = p.dual().ok_or(Error::UnsupportedExponent(p.get()))?;
        let pf = p.get();
        let normalization = 2.0 / (pf * log_gamma(1.0 + 1.0 / pf)?.exp());
        let gamma_a = log_gamma(2.0 - 1.0 / pf)?.exp();
        let mut m = OrliczM { p, dual, normalization, gamma_a, grid: Vec::new() };
        let mut grid = vec![(0.0, 0.0)];
        let mut prev = 0.0;
        let mut acc = 0.0;
        for k in GRID_LO..=GRID_HI {
            let s = 2f64.powi(k);
            acc += m.panel(prev, s);
            grid.push((s, acc));
            prev = s;
        }
        m.grid = grid;
        Ok(m)
    }

    pub fn p(&self) -> PExponent {
        self.p
    }

    /// `2 / (p Γ(1 + 1/p))`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn grid(&self) -> &[(f64, f64)] {
        &self.grid
    }

    /// Integrand without the normalization.
    fn integrand(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let ln_x = -self.dual * t.ln();
        if ln_x > 700f64.ln() {
            return t * self.gamma_a;
        }
        let x = ln_x.exp();
        let lower = reg_lower_inc_gamma(2.0 - 1.0 / self.p.get(), x).unwrap_or(1.0);
        t * self.gamma_a * lower + (-x).exp()
    }

    fn panel(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let f = |t: f64| self.integrand(t);
        self.normalization * gauss_kronrod(&f, a, b, 0.0, PANEL_REL).value
    }

    /// `M(s)`; the tabulated value at the nearest grid point below `s` plus an
    /// exact integral over the remainder.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("M(s) needs finite s >= 0, got {s}")));
        }
        let idx = self.grid.partition_point(|&(g, _)| g <= s) - 1;
        let (s0, m0) = self.grid[idx];
        Ok(m0 + self.panel(s0, s))
    }

    fn eval_unchecked(&self, s: f64) -> f64 {
        self.eval(s).unwrap_or(f64::INFINITY)
    }

    /// `Σ M(|x_i| / ρ)`.
    pub fn modular(&self, x: &[f64], rho: f64) -> f64 {
        x.iter().filter(|v| **v != 0.0).map(|v| self.eval_unchecked(v.abs() / rho)).sum()
    }

    /// `inf{ρ > 0 : Σ M(|x_i|/ρ) <= 1}` by bisection in `ln ρ`.
    pub fn luxemburg_norm(&self, x: &[f64]) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("vector has non-finite entries".into()));
        }
        let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (sup, sup);
        while self.modular(x, hi) > 1.0 {
            hi *= 2.0;
        }
        while self.modular(x, lo) <= 1.0 {
            lo *= 0.5;
        }
        while hi / lo - 1.0 > 1e-13 {
            let mid = (lo * hi).sqrt();
            if self.modular(x, mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

/// Monte Carlo `E φ_θ` against `‖θ‖_M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrliczComparison {
    pub e_phi: MomentEstimate,
    pub norm: f64,
    /// `Σ M(|θ_i| / ‖θ‖_M)`, which should equal one.
    pub modular_at_norm: f64,
    pub ratio: MomentEstimate,
}

pub fn orlicz_vs_mc(p: PExponent, dir: &Direction, n_samples: usize, stream: RngStream) -> Result<OrliczComparison> {
    let m = OrliczM::new(p)?;
    orlicz_vs_mc_with(&m, dir, n_samples, stream)
}

/// [`orlicz_vs_mc`] reusing a prebuilt table.
pub fn orlicz_vs_mc_with(m: &OrliczM, dir: &Direction, n_samples: usize, stream: RngStream) -> Result<OrliczComparison> {
    let norm = m.luxemburg_norm(dir.theta())?;
    let mom = estimate_psi_phi(m.p(), dir, n_samples, stream)?;
    Ok(OrliczComparison {
        e_phi: mom.e_phi,
        norm,
        modular_at_norm: m.modular(dir.theta(), norm),
        ratio: mom.e_phi.scaled(1.0 / norm),
    })
}
