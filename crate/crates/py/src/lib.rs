//! Python bindings. Exponents and directions cross the boundary as plain
//! floats and lists; Monte Carlo results come back as `MomentEstimate` objects.

use lpproj::oracle_quad::{quad_epsi, quad_moments_projection, QuadConfig};
use lpproj::orlicz::OrliczM as CoreOrlicz;
use lpproj::permavg::{brute_avg_permutations, rearrangement_functional, RearrangementInput};
use lpproj::projest::ProjectedBodySpec;
use lpproj::sampling::RngStream;
use lpproj::stats::MomentEstimate as CoreEstimate;
use lpproj::weights::{Direction as CoreDirection, PsiMoment};
use lpproj::{linalg::SquareMatrix, specfun, PExponent};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: lpproj::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pexp(p: f64) -> PyResult<PExponent> {
    PExponent::new(p).map_err(err)
}

/// Mean with its batch standard error.
#[pyclass(frozen, get_all, skip_from_py_object, module = "lpproj")]
#[derive(Clone, Copy)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl From<CoreEstimate> for MomentEstimate {
    fn from(e: CoreEstimate) -> Self {
        MomentEstimate { mean: e.mean, stderr: e.stderr, n_samples: e.n_samples }
    }
}

#[pymethods]
impl MomentEstimate {
    fn z_score(&self, target: f64) -> f64 {
        CoreEstimate { mean: self.mean, stderr: self.stderr, n_samples: self.n_samples, n_batches: 0 }.z_score(target)
    }

    fn __repr__(&self) -> String {
        format!("MomentEstimate(mean={}, stderr={}, n_samples={})", self.mean, self.stderr, self.n_samples)
    }
}

/// Unit direction θ.
#[pyclass(frozen, skip_from_py_object, module = "lpproj")]
#[derive(Clone)]
pub struct Direction(CoreDirection);

#[pymethods]
impl Direction {
    /// Normalizes `theta`.
    #[new]
    fn new(theta: Vec<f64>) -> PyResult<Self> {
        CoreDirection::new(theta).map(Direction).map_err(err)
    }

    /// The `i`-th coordinate vector (zero-based).
    #[staticmethod]
    fn axis(n: usize, i: usize) -> PyResult<Self> {
        CoreDirection::axis(n, i).map(Direction).map_err(err)
    }

    /// `(1, ..., 1)/√n`.
    #[staticmethod]
    fn diagonal(n: usize) -> PyResult<Self> {
        CoreDirection::diagonal(n).map(Direction).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, seed, stream = 0))]
    fn haar(n: usize, seed: u64, stream: u64) -> PyResult<Self> {
        CoreDirection::haar(&mut RngStream::new(seed, stream).rng(), n).map(Direction).map_err(err)
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.0.theta().to_vec()
    }

    #[getter]
    fn norm1(&self) -> f64 {
        self.0.norm1()
    }

    fn __len__(&self) -> usize {
        self.0.dim()
    }

    fn __repr__(&self) -> String {
        format!("Direction({:?})", self.0.theta())
    }
}

/// Summary of `X` uniform on the projection of `B_p^n` onto `θ^⊥`.
#[pyclass(frozen, get_all, module = "lpproj")]
pub struct VarianceReport {
    pub p: f64,
    pub n: usize,
    pub e_weight: MomentEstimate,
    pub e_norm2: MomentEstimate,
    pub e_norm4: MomentEstimate,
    pub var_norm2: MomentEstimate,
    pub lambda2: MomentEstimate,
    pub lambda2_plugin: f64,
    pub ratio: MomentEstimate,
    pub terms: Vec<MomentEstimate>,
    pub term_sum: MomentEstimate,
    /// Covariance in the Gram–Schmidt basis of the hyperplane, as rows.
    pub cov: Vec<Vec<f64>>,
}

/// Young function of the Orlicz comparison, tabulated once per `p > 1`.
#[pyclass(frozen, module = "lpproj")]
pub struct OrliczM(CoreOrlicz);

#[pymethods]
impl OrliczM {
    #[new]
    fn new(p: f64) -> PyResult<Self> {
        CoreOrlicz::new(pexp(p)?).map(OrliczM).map_err(err)
    }

    fn __call__(&self, s: f64) -> PyResult<f64> {
        self.0.eval(s).map_err(err)
    }

    fn modular(&self, x: Vec<f64>, rho: f64) -> f64 {
        self.0.modular(&x, rho)
    }

    fn luxemburg_norm(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.luxemburg_norm(&x).map_err(err)
    }
}

#[pyfunction]
fn moment_g(p: f64, alpha: f64) -> PyResult<f64> {
    specfun::moment_g(pexp(p)?, alpha).map_err(err)
}

#[pyfunction]
fn moment_s(p: f64, n: usize, alpha: f64) -> PyResult<f64> {
    specfun::moment_s(pexp(p)?, n, alpha).map_err(err)
}

#[pyfunction]
fn ball_volume(p: f64, n: usize) -> PyResult<f64> {
    specfun::ball_volume(pexp(p)?, n).map_err(err)
}

/// Monte Carlo estimate of the variance ratio and its four-term bound.
#[pyfunction]
#[pyo3(signature = (p, direction, samples = 100_000, seed = 0, stream = 0))]
fn variance_report(py: Python<'_>, p: f64, direction: &Direction, samples: usize, seed: u64, stream: u64) -> PyResult<VarianceReport> {
    let spec = ProjectedBodySpec::new(pexp(p)?, direction.0.clone()).map_err(err)?;
    let r = py
        .detach(|| lpproj::projest::variance_report(&spec, samples, RngStream::new(seed, stream)))
        .map_err(err)?;
    Ok(VarianceReport {
        p: r.p,
        n: r.n,
        e_weight: r.e_weight.into(),
        e_norm2: r.e_norm2.into(),
        e_norm4: r.e_norm4.into(),
        var_norm2: r.var_norm2.into(),
        lambda2: r.lambda2.into(),
        lambda2_plugin: r.lambda2_plugin,
        ratio: r.ratio.into(),
        terms: r.terms.iter().map(|&t| t.into()).collect(),
        term_sum: r.term_sum.into(),
        cov: (0..r.cov.dim()).map(|i| r.cov.row(i).to_vec()).collect(),
    })
}

/// `E ψ_θ` (or `E ψ_θ²` with `second=True`).
#[pyfunction]
#[pyo3(signature = (p, direction, samples = 100_000, seed = 0, stream = 0, second = false))]
fn estimate_epsi(
    py: Python<'_>,
    p: f64,
    direction: &Direction,
    samples: usize,
    seed: u64,
    stream: u64,
    second: bool,
) -> PyResult<MomentEstimate> {
    let p = pexp(p)?;
    let moment = if second { PsiMoment::Second } else { PsiMoment::First };
    py.detach(|| lpproj::weights::estimate_epsi(p, &direction.0, moment, samples, RngStream::new(seed, stream)))
        .map(Into::into)
        .map_err(err)
}

/// `E φ_θ / ‖θ‖_M` as `(ratio, luxemburg_norm)`.
#[pyfunction]
#[pyo3(signature = (p, direction, samples = 100_000, seed = 0, stream = 0))]
fn orlicz_vs_mc(py: Python<'_>, p: f64, direction: &Direction, samples: usize, seed: u64, stream: u64) -> PyResult<(MomentEstimate, f64)> {
    let p = pexp(p)?;
    let c = py.detach(|| lpproj::orlicz::orlicz_vs_mc(p, &direction.0, samples, RngStream::new(seed, stream))).map_err(err)?;
    Ok((c.ratio.into(), c.norm))
}

/// Steiner comparison as a dict of the headline numbers.
#[pyfunction]
#[pyo3(signature = (p, direction, samples = 100_000, seed = 0, stream = 0))]
fn steiner_compare(
    py: Python<'_>,
    p: f64,
    direction: &Direction,
    samples: usize,
    seed: u64,
    stream: u64,
) -> PyResult<std::collections::BTreeMap<&'static str, MomentEstimate>> {
    let p = pexp(p)?;
    let c = py
        .detach(|| lpproj::steiner::steiner_variance_compare(p, &direction.0, samples, RngStream::new(seed, stream)))
        .map_err(err)?;
    let fixed = |v: f64| MomentEstimate { mean: v, stderr: 0.0, n_samples: 0 };
    Ok([
        ("var_x", c.x.var_norm2.into()),
        ("var_y", c.y.var_norm2.into()),
        ("var_diff", c.var_diff.into()),
        ("e_theta4_x", c.x.e_theta4.into()),
        ("e_theta4_y", c.y.e_theta4.into()),
        ("lk2", fixed(c.body.lk2)),
        ("bound", fixed(c.bound)),
    ]
    .into_iter()
    .collect())
}

/// `(brute-force permutation average, rearrangement functional)`.
#[pyfunction]
#[pyo3(signature = (matrix, q = 2.0))]
fn permutation_average(matrix: Vec<Vec<f64>>, q: f64) -> PyResult<(f64, f64)> {
    let inp = RearrangementInput::new(SquareMatrix::from_rows(&matrix).map_err(err)?, q).map_err(err)?;
    Ok((brute_avg_permutations(&inp).map_err(err)?, rearrangement_functional(&inp)))
}

/// Certified quadrature of `E|X|²` on the projection, for `n ∈ {2, 3}`; returns `(value, delta)`.
#[pyfunction]
fn quad_norm2(py: Python<'_>, p: f64, direction: &Direction) -> PyResult<(f64, f64)> {
    let p = pexp(p)?;
    let c = py
        .detach(|| quad_moments_projection(p, &direction.0, |x| x.iter().map(|v| v * v).sum(), &QuadConfig::default()))
        .map_err(err)?;
    Ok((c.value, c.delta))
}

/// Certified quadrature of `E ψ_θ`, for `n ∈ {2, 3}`; returns `(value, delta)`.
#[pyfunction(name = "quad_epsi")]
fn quad_epsi_py(py: Python<'_>, p: f64, direction: &Direction) -> PyResult<(f64, f64)> {
    let p = pexp(p)?;
    let c = py.detach(|| quad_epsi(p, &direction.0, &QuadConfig::default())).map_err(err)?;
    Ok((c.value, c.delta))
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<MomentEstimate>()?;
    m.add_class::<Direction>()?;
    m.add_class::<VarianceReport>()?;
    m.add_class::<OrliczM>()?;
    m.add_function(wrap_pyfunction!(moment_g, m)?)?;
    m.add_function(wrap_pyfunction!(moment_s, m)?)?;
    m.add_function(wrap_pyfunction!(ball_volume, m)?)?;
    m.add_function(wrap_pyfunction!(variance_report, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_epsi, m)?)?;
    m.add_function(wrap_pyfunction!(orlicz_vs_mc, m)?)?;
    m.add_function(wrap_pyfunction!(steiner_compare, m)?)?;
    m.add_function(wrap_pyfunction!(permutation_average, m)?)?;
    m.add_function(wrap_pyfunction!(quad_norm2, m)?)?;
    m.add_function(wrap_pyfunction!(quad_epsi_py, m)?)?;
    Ok(())
}

#[pymodule(name = "lpproj")]
fn lpproj_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
