//! Special functions and the closed-form moment oracles of the generalized
//! Gaussian `g` with density `exp(-|t|^p) / (2 Γ(1 + 1/p))`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A validated exponent `p ∈ [1, ∞)` together with its dual `p* = p/(p-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PExponent {
    p: f64,
    /// `None` when `p = 1`, where the dual exponent is infinite.
    dual: Option<f64>,
}

impl PExponent {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(Error::Domain(format!("p must be finite and >= 1, got {p}")));
        }
        let dual = if p == 1.0 { None } else { Some(p / (p - 1.0)) };
        Ok(PExponent { p, dual })
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.p
    }

    /// The dual exponent, `None` for `p = 1`.
    #[inline]
    pub fn dual(self) -> Option<f64> {
        self.dual
    }

    #[inline]
    pub fn is_one(self) -> bool {
        self.dual.is_none()
    }
}

impl TryFrom<f64> for PExponent {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        PExponent::new(p)
    }
}

impl From<PExponent> for f64 {
    fn from(p: PExponent) -> f64 {
        p.p
    }
}

impl std::fmt::Display for PExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.p)
    }
}

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("log_gamma needs x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

const INC_GAMMA_EPS: f64 = 1e-15;
const INC_GAMMA_MAX_ITER: usize = 10_000;

/// Regularized lower incomplete gamma `P(a, x) = γ(a, x) / Γ(a)`.
///
/// Series expansion below `x = a + 1`, Lentz continued fraction for the
/// complement above it.
pub fn reg_lower_inc_gamma(a: f64, x: f64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!("incomplete gamma needs a > 0, got {a}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("incomplete gamma needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    let ln_prefix = -x + a * x.ln() - ln_gamma_unchecked(a);
    if x < a + 1.0 {
        Ok((ln_prefix.exp() * lower_series(a, x)).min(1.0))
    } else {
        Ok((1.0 - ln_prefix.exp() * upper_fraction(a, x)).clamp(0.0, 1.0))
    }
}

/// `Σ x^k / (a (a+1) ... (a+k))`.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..INC_GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * INC_GAMMA_EPS {
            break;
        }
    }
    sum
}

/// Continued fraction for `Γ(a, x) e^x x^{-a}`.
fn upper_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..INC_GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < INC_GAMMA_EPS {
            break;
        }
    }
    h
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::Domain(format!("moment order must be >= 0, got {alpha}")));
    }
    Ok(())
}

/// `E|g|^α = Γ((α+1)/p) / Γ(1/p)`.
pub fn moment_g(p: PExponent, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let p = p.get();
    Ok((ln_gamma_unchecked((alpha + 1.0) / p) - ln_gamma_unchecked(1.0 / p)).exp())
}

/// `E S^α = Γ((n+α)/p) / Γ(n/p)` with `S = ‖G‖_p`.
pub fn moment_s(p: PExponent, n: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::Domain("dimension n must be >= 1".into()));
    }
    let (p, n) = (p.get(), n as f64);
    Ok((ln_gamma_unchecked((n + alpha) / p) - ln_gamma_unchecked(n / p)).exp())
}

/// `ln |B_p^n|`.
pub fn ln_ball_volume(p: PExponent, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be >= 1".into()));
    }
    let (p, nf) = (p.get(), n as f64);
    Ok(nf * (2.0f64.ln() + ln_gamma_unchecked(1.0 + 1.0 / p)) - ln_gamma_unchecked(1.0 + nf / p))
}

/// `|B_p^n| = (2Γ(1+1/p))^n / Γ(1+n/p)`.
pub fn ball_volume(p: PExponent, n: usize) -> Result<f64> {
    ln_ball_volume(p, n).map(f64::exp)
}
