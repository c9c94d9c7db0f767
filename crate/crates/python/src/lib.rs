//! Python bindings. Matrices cross the boundary as nested lists (row
//! major) or flat column-major buffers; results come back as plain Python
//! values wrapped in small classes.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use sketchrank_core::io::{read_matrix as core_read, write_matrix as core_write, MatrixFormat};
use sketchrank_core::rangefinder::{qb_error as core_qb_error, re_rangefinder};
use sketchrank_core::rank::{estimate_rank as core_estimate, estimate_rank_adaptive};
use sketchrank_core::synthetic::{
    family, make_test_matrix as core_make, spectrum as core_spectrum,
};
use sketchrank_core::theory::{self, SampleRequirement};
use sketchrank_core::{
    DenseMatrix, Error, FixedPrecisionConfig, RankEstimateConfig, RankStatus, SketchKind, SvMethod,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn kind(name: &str) -> PyResult<SketchKind> {
    name.parse().map_err(to_py)
}

/// Dense real matrix.
#[pyclass(name = "Matrix", module = "sketchrank", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMatrix {
    inner: DenseMatrix,
}

#[pymethods]
impl PyMatrix {
    /// Builds a matrix from a list of equal-length rows.
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: DenseMatrix::from_rows(&rows).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: DenseMatrix::from_col_major(rows, cols, data).map_err(to_py)?,
        })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let (m, n) = self.inner.shape();
        if i >= m || j >= n {
            return Err(PyValueError::new_err(format!(
                "index ({i}, {j}) out of range for {m}x{n}"
            )));
        }
        Ok(self.inner.get(i, j))
    }

    /// Rows as nested lists.
    fn to_list(&self) -> Vec<Vec<f64>> {
        (0..self.inner.rows()).map(|i| self.inner.row(i)).collect()
    }

    fn col_major(&self) -> Vec<f64> {
        self.inner.as_slice().to_vec()
    }

    fn singular_values(&self) -> PyResult<Vec<f64>> {
        Ok(sketchrank_core::linalg::singular_values(&self.inner)
            .map_err(to_py)?
            .into_vec())
    }

    fn __repr__(&self) -> String {
        let (m, n) = self.inner.shape();
        format!("Matrix({m}x{n})")
    }
}

#[pyclass(name = "RankReport", module = "sketchrank", frozen)]
pub struct PyRankReport {
    #[pyo3(get)]
    r_hat: usize,
    #[pyo3(get)]
    sv_estimates: Vec<f64>,
    #[pyo3(get)]
    oversample_estimates: Vec<f64>,
    /// `(r1, r1_tilde, r2)` per round.
    #[pyo3(get)]
    rounds: Vec<(usize, usize, usize)>,
    /// `"converged"` or `"hit_cap"`.
    #[pyo3(get)]
    status: &'static str,
    #[pyo3(get)]
    seed: u64,
}

#[pymethods]
impl PyRankReport {
    fn __repr__(&self) -> String {
        format!("RankReport(r_hat={}, status={:?})", self.r_hat, self.status)
    }
}

impl From<sketchrank_core::RankReport> for PyRankReport {
    fn from(r: sketchrank_core::RankReport) -> Self {
        Self {
            r_hat: r.r_hat,
            oversample_estimates: r.oversample_estimates,
            rounds: r.rounds.iter().map(|x| (x.r1, x.r1_tilde, x.r2)).collect(),
            status: match r.status {
                RankStatus::Converged => "converged",
                RankStatus::HitCap => "hit_cap",
            },
            seed: r.seed,
            sv_estimates: r.sv_estimates.into_vec(),
        }
    }
}

/// Estimates the number of singular values of `a` above `eps` from a
/// two-sided sketch with `r1` leading columns.
#[pyfunction]
#[pyo3(signature = (a, eps, r1, seed=0, sketch="srtt", left_sketch="srtt", adaptive=false, sv_method="full-svd"))]
#[allow(clippy::too_many_arguments)]
fn estimate_rank(
    py: Python<'_>,
    a: &PyMatrix,
    eps: f64,
    r1: usize,
    seed: u64,
    sketch: &str,
    left_sketch: &str,
    adaptive: bool,
    sv_method: &str,
) -> PyResult<PyRankReport> {
    let mut cfg = RankEstimateConfig::new(eps, r1)
        .with_seed(seed)
        .with_right_kind(kind(sketch)?);
    cfg.left_kind = kind(left_sketch)?;
    cfg.sv_method = match sv_method {
        "full-svd" => SvMethod::FullSvd,
        "qr-diag" => SvMethod::QrDiag,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown sv_method '{other}'"
            )))
        }
    };
    let a = &a.inner;
    let rep = py
        .detach(|| {
            if adaptive {
                estimate_rank_adaptive(a, &cfg)
            } else {
                core_estimate(a, &cfg)
            }
        })
        .map_err(to_py)?;
    Ok(rep.into())
}

/// Fixed-precision QB factorization. Returns `(Q, B, report)`; the
/// report's `r_hat` is the chosen target rank.
#[pyfunction]
#[pyo3(signature = (a, eps, r1, p=10, seed=0, sketch="srtt"))]
fn fixed_precision_qb(
    py: Python<'_>,
    a: &PyMatrix,
    eps: f64,
    r1: usize,
    p: usize,
    seed: u64,
    sketch: &str,
) -> PyResult<(PyMatrix, PyMatrix, PyRankReport)> {
    let mut cfg = FixedPrecisionConfig::new(eps, r1).with_seed(seed);
    cfg.p = p;
    cfg.right_kind = kind(sketch)?;
    let a = &a.inner;
    let (qb, rep) = py.detach(|| re_rangefinder(a, &cfg)).map_err(to_py)?;
    Ok((
        PyMatrix { inner: qb.q },
        PyMatrix { inner: qb.b },
        rep.into(),
    ))
}

/// `‖A − Q·B‖_F`.
#[pyfunction]
fn qb_error(a: &PyMatrix, q: &PyMatrix, b: &PyMatrix) -> PyResult<f64> {
    let qb = sketchrank_core::QbFactors {
        rank: q.inner.cols(),
        q: q.inner.clone(),
        b: b.inner.clone(),
    };
    core_qb_error(&a.inner, &qb).map_err(to_py)
}

/// Synthetic `m × n` matrix from a named family (`sp`, `fp`, `se`, `fe`,
/// `gap-coherent`, `gap-incoherent`).
#[pyfunction]
#[pyo3(signature = (name, m, n, seed=0))]
fn make_test_matrix(name: &str, m: usize, n: usize, seed: u64) -> PyResult<PyMatrix> {
    let (spec, factors) = family(name).map_err(to_py)?;
    Ok(PyMatrix {
        inner: core_make(m, n, &spec, factors, seed).map_err(to_py)?,
    })
}

/// The first `n` singular values of a named family.
#[pyfunction]
fn spectrum(name: &str, n: usize) -> PyResult<Vec<f64>> {
    let (spec, _) = family(name).map_err(to_py)?;
    Ok(core_spectrum(&spec, n).map_err(to_py)?.into_vec())
}

#[pyfunction]
fn read_matrix(path: &str) -> PyResult<PyMatrix> {
    Ok(PyMatrix {
        inner: core_read(path).map_err(to_py)?,
    })
}

/// Writes `a` as `raw`, `mtx` or `mm-coordinate`.
#[pyfunction]
#[pyo3(signature = (path, a, format="raw"))]
fn write_matrix(path: &str, a: &PyMatrix, format: &str) -> PyResult<()> {
    let format: MatrixFormat = format.parse().map_err(to_py)?;
    core_write(path, &a.inner, format).map_err(to_py)
}

/// `(lower, upper)` bracket on `σᵢ(AX)/σᵢ(A)` for a Gaussian sketch.
#[pyfunction]
#[pyo3(signature = (i, r, n, tail_ratio, t=0.0))]
fn gauss_ratio_bounds(
    i: usize,
    r: usize,
    n: usize,
    tail_ratio: f64,
    t: f64,
) -> PyResult<(f64, f64)> {
    let b = theory::gauss_ratio_bounds(i, r, n, tail_ratio, t).map_err(to_py)?;
    Ok((b.lower, b.upper))
}

#[pyfunction]
fn mp_expectation_bounds(m: usize, n: usize) -> PyResult<(f64, f64)> {
    theory::mp_expectation_bounds(m, n).map_err(to_py)
}

#[pyfunction]
fn spiked_limit(sigma: f64, noise: f64, c: f64) -> PyResult<f64> {
    theory::spiked_limit(sigma, noise, c).map_err(to_py)
}

/// `(feasible, samples)` for an SRTT left sketch.
#[pyfunction]
#[pyo3(signature = (r1, m, eps, delta, eta=2.0))]
fn srtt_required_samples(
    r1: usize,
    m: usize,
    eps: f64,
    delta: f64,
    eta: f64,
) -> PyResult<(bool, u64)> {
    Ok(
        match theory::srtt_required_samples(r1, m, eps, delta, eta).map_err(to_py)? {
            SampleRequirement::Feasible(s) => (true, s),
            SampleRequirement::Infeasible(s) => (false, s),
        },
    )
}

#[pymodule]
fn sketchrank(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyRankReport>()?;
    m.add_function(wrap_pyfunction!(estimate_rank, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_precision_qb, m)?)?;
    m.add_function(wrap_pyfunction!(qb_error, m)?)?;
    m.add_function(wrap_pyfunction!(make_test_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(read_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(write_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_ratio_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(mp_expectation_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(spiked_limit, m)?)?;
    m.add_function(wrap_pyfunction!(srtt_required_samples, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
