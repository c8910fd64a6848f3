//! Small dense linear algebra: a square matrix type, the cyclic Jacobi
//! eigensolver and orthonormal completion of a direction.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        SquareMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        (0..dim).for_each(|i| m[(i, i)] = 1.0);
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        Ok(SquareMatrix { dim, data: rows.concat() })
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        d.iter().enumerate().for_each(|(i, &v)| m[(i, i)] = v);
        m
    }

    /// `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = v[i] * v[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.dim).map(|i| x[i] * self.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).sum()
    }

    /// `Bᵀ A B` for a basis given as `cols` vectors of length `dim`.
    pub fn congruence(&self, basis: &[Vec<f64>]) -> SquareMatrix {
        let k = basis.len();
        let ab: Vec<Vec<f64>> = basis
            .iter()
            .map(|b| (0..self.dim).map(|i| self.row(i).iter().zip(b).map(|(a, x)| a * x).sum()).collect())
            .collect();
        let mut out = SquareMatrix::zeros(k);
        for i in 0..k {
            for j in 0..k {
                out[(i, j)] = basis[i].iter().zip(&ab[j]).map(|(a, b)| a * b).sum();
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

const SYMMETRY_TOL: f64 = 1e-8;

/// Eigenvalues (descending) and matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
pub fn symmetric_eigen(a: &SquareMatrix) -> Result<SymmetricEigen> {
    let scale = a.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Asymmetric(asym));
    }
    let n = a.dim;
    let mut m = a.clone();
    // symmetrize exactly
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let mut v = SquareMatrix::identity(n);
    let frob: f64 = m.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * frob || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    Ok(SymmetricEigen {
        values: order.iter().map(|&i| m[(i, i)]).collect(),
        vectors: order.iter().map(|&i| (0..n).map(|k| v[(k, i)]).collect()).collect(),
    })
}

/// Largest eigenvalue of a symmetric matrix.
pub fn largest_eigenvalue(a: &SquareMatrix) -> Result<f64> {
    if a.dim() == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    Ok(symmetric_eigen(a)?.values[0])
}

/// Orthonormal basis of `θ^⊥`: modified Gram–Schmidt over `θ, e_1, ..., e_n`,
/// dropping the canonical vectors that are (numerically) dependent.
pub fn complement_basis(theta: &[f64]) -> Vec<Vec<f64>> {
    let n = theta.len();
    let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut accepted: Vec<Vec<f64>> = vec![theta.iter().map(|x| x / norm).collect()];
    for i in 0..n {
        if accepted.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for u in &accepted {
                let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
            }
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-6 {
            v.iter_mut().for_each(|x| *x /= len);
            accepted.push(v);
        }
    }
    accepted.remove(0);
    accepted
}
