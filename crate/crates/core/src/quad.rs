//! One-dimensional quadrature rules: adaptive Simpson, globally adaptive
//! Gauss–Kronrod (7/15) and Gauss–Legendre nodes.

use std::collections::BinaryHeap;

/// Adaptive Simpson with Richardson correction on each accepted panel.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_489_0,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// One 15-point Kronrod panel: `(estimate, |K15 - G7|)`.
fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(PartialEq)]
struct Panel {
    err: f64,
    a: f64,
    b: f64,
    val: f64,
}

impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive Gauss–Kronrod: bisects the panel with the largest error
/// estimate until the total estimate drops below `max(abs_tol, rel_tol·|I|)`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> QuadResult {
    gauss_kronrod_split(f, &[a, b], abs_tol, rel_tol)
}

/// [`gauss_kronrod`] starting from the given breakpoints (sorted, first = lower limit).
pub fn gauss_kronrod_split<F: Fn(f64) -> f64>(f: &F, points: &[f64], abs_tol: f64, rel_tol: f64) -> QuadResult {
    const MAX_PANELS: usize = 2000;
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (val, e) = kronrod_panel(f, w[0], w[1]);
        total += val;
        err += e;
        heap.push(Panel { err: e, a: w[0], b: w[1], val });
    }
    while err > abs_tol.max(rel_tol * total.abs()) && heap.len() < MAX_PANELS {
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            break;
        }
        let (lv, le) = kronrod_panel(f, worst.a, m);
        let (rv, re) = kronrod_panel(f, m, worst.b);
        total += lv + rv - worst.val;
        err += le + re - worst.err;
        heap.push(Panel { err: le, a: worst.a, b: m, val: lv });
        heap.push(Panel { err: re, a: m, b: worst.b, val: rv });
    }
    // re-sum to shed accumulated cancellation error
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.val, e + p.err));
    QuadResult { value, error }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_on_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(&|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-13);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn kronrod_handles_endpoint_singularity() {
        let r = gauss_kronrod(&|x: f64| x.sqrt().recip(), 0.0, 1.0, 1e-12, 1e-12);
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
        let r = gauss_kronrod(&|x: f64| x.powf(0.3) * (1.0 - x).powf(1.5), 0.0, 1.0, 1e-13, 1e-13);
        // B(1.3, 2.5)
        let beta = (crate::specfun::log_gamma(1.3).unwrap() + crate::specfun::log_gamma(2.5).unwrap()
            - crate::specfun::log_gamma(3.8).unwrap())
        .exp();
        assert!((r.value - beta).abs() < 1e-11);
    }

    #[test]
    fn kronrod_with_kink_breakpoint() {
        let r = gauss_kronrod_split(&|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], 1e-14, 1e-14);
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 24] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((approx - exact).abs() < 1e-13);
            let even = 2 * (n - 1);
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(even as i32)).sum();
            assert!((approx - 2.0 / (even + 1) as f64).abs() < 1e-13, "n={n}");
        }
    }
}
