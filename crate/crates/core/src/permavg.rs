//! Average over permutations of `(Σ_i |a_{i,π(i)}|^q)^{1/q}` and the
//! decreasing-rearrangement expression it is equivalent to.

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::sampling::{sample_gg, RngStream};
use crate::specfun::PExponent;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest size accepted by [`brute_avg_permutations`].
pub const MAX_BRUTE_N: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangementInput {
    pub a: SquareMatrix,
    /// `q ∈ [1, ∞]`; `f64::INFINITY` selects the max.
    pub q: f64,
}

impl RearrangementInput {
    pub fn new(a: SquareMatrix, q: f64) -> Result<Self> {
        if !(q >= 1.0) {
            return Err(Error::Domain(format!("q must be >= 1, got {q}")));
        }
        if a.dim() == 0 {
            return Err(Error::Domain("matrix must be non-empty".into()));
        }
        if (0..a.dim()).any(|i| a.row(i).iter().any(|v| !v.is_finite())) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        Ok(RearrangementInput { a, q })
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }
}

fn q_norm(v: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        v.fold(0.0, f64::max)
    } else if q == 1.0 {
        v.sum()
    } else {
        v.map(|x| x.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// `(1/n) Σ_{k<=n} a*_k + ((1/n) Σ_{k>n} (a*_k)^q)^{1/q}`.
pub fn rearrangement_functional(inp: &RearrangementInput) -> f64 {
    let n = inp.n();
    let mut s: Vec<f64> = (0..n).flat_map(|i| inp.a.row(i).iter().map(|v| v.abs())).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    let head = s[..n].iter().sum::<f64>() / n as f64;
    let nf = n as f64;
    let tail = if inp.q.is_infinite() {
        s.get(n).copied().unwrap_or(0.0)
    } else {
        (s[n..].iter().map(|x| x.powf(inp.q)).sum::<f64>() / nf).powf(1.0 / inp.q)
    };
    head + tail
}

/// Next permutation in lexicographic order; `false` after the last one.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Exact average over all `n!` permutations.
pub fn brute_avg_permutations(inp: &RearrangementInput) -> Result<f64> {
    let n = inp.n();
    if n > MAX_BRUTE_N {
        return Err(Error::SizeLimit { size: n, limit: MAX_BRUTE_N });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let (mut total, mut count) = (0.0, 0u64);
    loop {
        total += q_norm((0..n).map(|i| inp.a[(i, perm[i])].abs()), inp.q);
        count += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioWindow {
    pub min: f64,
    pub max: f64,
    /// brute / functional per case, in case order.
    pub ratios: Vec<f64>,
}

/// Case `k` of the sweep: case 0 is a positive rank-one matrix, the rest have
/// generalized Gaussian entries with `p` cycling through `{1, 2, 4}`.
pub fn sweep_matrix(n: usize, k: usize, stream: RngStream) -> SquareMatrix {
    let mut rng = stream.substream(k as u64).rng();
    let pe = |p: f64| PExponent::new(p).expect("valid exponent");
    if k == 0 {
        let u: Vec<f64> = (0..n).map(|_| sample_gg(&mut rng, pe(2.0)).abs()).collect();
        let v: Vec<f64> = (0..n).map(|_| sample_gg(&mut rng, pe(2.0)).abs()).collect();
        let rows: Vec<Vec<f64>> = u.iter().map(|x| v.iter().map(|y| x * y).collect()).collect();
        return SquareMatrix::from_rows(&rows).expect("square");
    }
    let p = pe([1.0, 2.0, 4.0][k % 3]);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| sample_gg(&mut rng, p)).collect()).collect();
    SquareMatrix::from_rows(&rows).expect("square")
}

pub fn ratio_window_check(n_cases: usize, n: usize, q: f64, stream: RngStream) -> Result<RatioWindow> {
    if n == 0 || n > 7 {
        return Err(Error::SizeLimit { size: n, limit: 7 });
    }
    if n_cases == 0 {
        return Err(Error::Domain("need at least one case".into()));
    }
    let ratios = (0..n_cases)
        .into_par_iter()
        .map(|k| {
            let inp = RearrangementInput::new(sweep_matrix(n, k, stream), q)?;
            Ok(brute_avg_permutations(&inp)? / rearrangement_functional(&inp))
        })
        .collect::<Result<Vec<f64>>>()?;
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RatioWindow { min, max, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn input(rows: Vec<Vec<f64>>, q: f64) -> RearrangementInput {
        RearrangementInput::new(SquareMatrix::from_rows(&rows).unwrap(), q).unwrap()
    }

    #[test]
    fn one_by_one() {
        let i = input(vec![vec![-2.5]], 2.0);
        assert_eq!(rearrangement_functional(&i), 2.5);
        assert_eq!(brute_avg_permutations(&i).unwrap(), 2.5);
    }

    #[test]
    fn all_ones() {
        for n in 1..=7 {
            let i = input(vec![vec![1.0; n]; n], 2.0);
            let nf = n as f64;
            assert!((rearrangement_functional(&i) - (1.0 + (nf - 1.0).sqrt())).abs() < 1e-12);
            assert!((brute_avg_permutations(&i).unwrap() - nf.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_entry_and_identity() {
        let mut rows = vec![vec![0.0; 4]; 4];
        rows[1][2] = -3.0;
        assert!((rearrangement_functional(&input(rows, 2.0)) - 0.75).abs() < 1e-15);
        let id = input(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 2.0);
        let expect = (3f64.sqrt() + 3.0) / 6.0;
        assert!((brute_avg_permutations(&id).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn permutation_count_and_limits() {
        let mut perm: Vec<usize> = (0..5).collect();
        let mut count = 1;
        while next_permutation(&mut perm) {
            count += 1;
        }
        assert_eq!(count, 120);
        let big = input(vec![vec![1.0; 9]; 9], 2.0);
        assert!(matches!(brute_avg_permutations(&big), Err(Error::SizeLimit { .. })));
        assert!(RearrangementInput::new(SquareMatrix::identity(2), 0.5).is_err());
    }

    #[test]
    fn infinite_q_is_max() {
        let i = input(vec![vec![1.0, 4.0], vec![2.0, 3.0]], f64::INFINITY);
        // permutations: (1,3) -> 3, (4,2) -> 4
        assert_eq!(brute_avg_permutations(&i).unwrap(), 3.5);
        assert_eq!(rearrangement_functional(&i), 3.5 + 2.0);
    }

    #[test]
    fn sweep_stays_in_window() {
        let w = ratio_window_check(12, 5, 2.0, RngStream::new(41, 0)).unwrap();
        assert!(w.min >= 0.2 && w.max <= 5.0, "{w:?}");
        assert!(ratio_window_check(3, 8, 2.0, RngStream::new(41, 0)).is_err());
    }

    fn matrix_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..6).prop_flat_map(|n| (Just(n), prop::collection::vec(-5.0f64..5.0, n * n)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetries((n, v) in matrix_strategy(), q in prop::sample::select(vec![1.0, 2.0, 3.5]), lam in 0.1f64..10.0, shift in 0usize..6) {
            let rows: Vec<Vec<f64>> = v.chunks(n).map(|r| r.to_vec()).collect();
            let base = input(rows.clone(), q);
            let (f0, b0) = (rearrangement_functional(&base), brute_avg_permutations(&base).unwrap());

            let mut moved = rows.clone();
            moved.rotate_left(shift % n);
            for r in moved.iter_mut() {
                r.reverse();
                r.iter_mut().step_by(2).for_each(|x| *x = -*x);
            }
            let m = input(moved, q);
            prop_assert!((rearrangement_functional(&m) - f0).abs() <= 1e-12 * f0.max(1.0));
            prop_assert!((brute_avg_permutations(&m).unwrap() - b0).abs() <= 1e-12 * b0.max(1.0));

            let scaled = input(rows.iter().map(|r| r.iter().map(|x| x * lam).collect()).collect(), q);
            prop_assert!((rearrangement_functional(&scaled) - lam * f0).abs() <= 1e-12 * (lam * f0).max(1.0));
            prop_assert!((brute_avg_permutations(&scaled).unwrap() - lam * b0).abs() <= 1e-12 * (lam * b0).max(1.0));

            let bigger = input(rows.iter().map(|r| r.iter().map(|x| x.abs() + 0.5).collect()).collect(), q);
            prop_assert!(rearrangement_functional(&bigger) >= f0);
        }
    }
}
