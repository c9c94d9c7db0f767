//! Synthetic test spectra and matrices with known singular values.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{qr_thin, DenseMatrix, SingularValues};
use crate::rng::derive_seed;
use crate::sketch::gaussian_matrix;

/// Largest matrix (in entries) the generators will allocate.
pub const MAX_ENTRIES: usize = 200_000_000;

/// Closed-form singular value profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SpectrumSpec {
    /// `σᵢ = i^(−p)`.
    PolyDecay { p: f64 },
    /// `σᵢ = 10^(−q(i−1))`.
    ExpDecay { q: f64 },
    /// Blocks of `count` equal values, then `tail` for every later index.
    Steps {
        levels: Vec<(f64, usize)>,
        tail: f64,
    },
}

impl SpectrumSpec {
    /// Slow polynomial decay, `p = 1`.
    pub fn slow_poly() -> Self {
        SpectrumSpec::PolyDecay { p: 1.0 }
    }

    /// Fast polynomial decay, `p = 3`.
    pub fn fast_poly() -> Self {
        SpectrumSpec::PolyDecay { p: 3.0 }
    }

    /// Slow exponential decay, `q = 0.01`.
    pub fn slow_exp() -> Self {
        SpectrumSpec::ExpDecay { q: 0.01 }
    }

    /// Fast exponential decay, `q = 0.5`.
    pub fn fast_exp() -> Self {
        SpectrumSpec::ExpDecay { q: 0.5 }
    }

    /// Four plateaus of 100 values at 1, 1e-4, 1e-8 and 1e-12 over a 1e-16
    /// floor.
    pub fn gapped() -> Self {
        SpectrumSpec::Steps {
            levels: vec![(1.0, 100), (1e-4, 100), (1e-8, 100), (1e-12, 100)],
            tail: 1e-16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self {
            SpectrumSpec::PolyDecay { p } if !(p.is_finite() && *p >= 0.0) => bad(format!(
                "polynomial decay rate must be nonnegative, got {p}"
            )),
            SpectrumSpec::ExpDecay { q } if !(q.is_finite() && *q >= 0.0) => bad(format!(
                "exponential decay rate must be nonnegative, got {q}"
            )),
            SpectrumSpec::Steps { levels, tail } => {
                if levels.iter().any(|(v, _)| !(v.is_finite() && *v > 0.0)) {
                    return bad("step levels must be positive".into());
                }
                if levels.windows(2).any(|w| w[0].0 <= w[1].0) {
                    return bad("step levels must be strictly decreasing".into());
                }
                let last = levels.last().map_or(f64::INFINITY, |l| l.0);
                if !(tail.is_finite() && *tail >= 0.0 && *tail <= last) {
                    return bad(format!("tail value {tail} must lie in [0, {last}]"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `σᵢ` for 1-based `i`.
    fn value(&self, i: usize) -> f64 {
        match self {
            SpectrumSpec::PolyDecay { p } => (i as f64).powf(-p),
            SpectrumSpec::ExpDecay { q } => 10f64.powf(-q * (i - 1) as f64),
            SpectrumSpec::Steps { levels, tail } => {
                let mut end = 0;
                for &(v, count) in levels {
                    end += count;
                    if i <= end {
                        return v;
                    }
                }
                *tail
            }
        }
    }
}

/// The first `n` values of `spec`. Fast exponential profiles underflow to
/// zero deep in the tail.
pub fn spectrum(spec: &SpectrumSpec, n: usize) -> Result<SingularValues> {
    spec.validate()?;
    if n == 0 {
        return dim_err("spectrum length must be positive");
    }
    SingularValues::new((1..=n).map(|i| spec.value(i)).collect())
}

/// Number of `σᵢ > eps`, `i ≤ n`.
pub fn true_eps_rank(spec: &SpectrumSpec, n: usize, eps: f64) -> Result<usize> {
    Ok(crate::rank::count_above_threshold(&spectrum(spec, n)?, eps))
}

/// Factor structure of a generated matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    /// Orthogonal factors from QR of seeded Gaussian matrices.
    HaarIncoherent,
    /// `U = V = I`, so the matrix is the spectrum itself.
    CoherentDiagonal,
}

/// Named test families: `sp`, `fp`, `se`, `fe` (incoherent, decaying
/// spectra) and `gap-coherent` / `gap-incoherent` (stepped spectrum).
pub fn family(name: &str) -> Result<(SpectrumSpec, FactorKind)> {
    let incoherent = FactorKind::HaarIncoherent;
    Ok(match name {
        "sp" => (SpectrumSpec::slow_poly(), incoherent),
        "fp" => (SpectrumSpec::fast_poly(), incoherent),
        "se" => (SpectrumSpec::slow_exp(), incoherent),
        "fe" => (SpectrumSpec::fast_exp(), incoherent),
        "gap-coherent" => (SpectrumSpec::gapped(), FactorKind::CoherentDiagonal),
        "gap-incoherent" => (SpectrumSpec::gapped(), incoherent),
        other => {
            return Err(Error::Config(format!(
                "unknown family '{other}' (expected sp, fp, se, fe, gap-coherent, gap-incoherent)"
            )))
        }
    })
}

/// A generated matrix together with its factors.
#[derive(Clone, Debug)]
pub struct TestMatrix {
    pub a: DenseMatrix,
    pub sigma: SingularValues,
    /// Left factor, `m × n`; `None` for the diagonal kind.
    pub u: Option<DenseMatrix>,
    /// Right factor, `n × n`; `None` for the diagonal kind.
    pub v: Option<DenseMatrix>,
}

/// Haar-distributed `rows × cols` matrix with orthonormal columns.
pub fn haar_orthonormal(rows: usize, cols: usize, seed: u64) -> Result<DenseMatrix> {
    let g = gaussian_matrix(rows, cols, seed);
    let f = qr_thin(&g)?;
    // Fixing diag(R) > 0 makes Q exactly Haar.
    let signs: Vec<f64> =
        f.r.diagonal()
            .iter()
            .map(|d| if *d < 0.0 { -1.0 } else { 1.0 })
            .collect();
    let mut q = f.q;
    for (j, s) in signs.iter().enumerate() {
        if *s < 0.0 {
            q.col_mut(j).iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(q)
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if n == 0 || m < n {
        return dim_err(format!("test matrices need m >= n >= 1, got {m}x{n}"));
    }
    if m.saturating_mul(n) > MAX_ENTRIES {
        return dim_err(format!("{m}x{n} exceeds the {MAX_ENTRIES}-entry budget"));
    }
    Ok(())
}

/// `U·diag(σ)·Vᵀ` with its factors retained.
pub fn make_test_factors(
    m: usize,
    n: usize,
    spec: &SpectrumSpec,
    factors: FactorKind,
    seed: u64,
) -> Result<TestMatrix> {
    check_dims(m, n)?;
    let sigma = spectrum(spec, n)?;
    match factors {
        FactorKind::CoherentDiagonal => Ok(TestMatrix {
            a: DenseMatrix::from_diagonal(m, n, &sigma)?,
            sigma,
            u: None,
            v: None,
        }),
        FactorKind::HaarIncoherent => {
            let u = haar_orthonormal(m, n, derive_seed(seed, "left-factor"))?;
            let v = haar_orthonormal(n, n, derive_seed(seed, "right-factor"))?;
            let mut us = u.clone();
            for (j, s) in sigma.iter().enumerate() {
                us.col_mut(j).iter_mut().for_each(|x| *x *= s);
            }
            let a = us.matmul(&v.transpose())?;
            Ok(TestMatrix {
                a,
                sigma,
                u: Some(u),
                v: Some(v),
            })
        }
    }
}

/// `m × n` matrix with singular values `spectrum(spec, n)`.
pub fn make_test_matrix(
    m: usize,
    n: usize,
    spec: &SpectrumSpec,
    factors: FactorKind,
    seed: u64,
) -> Result<DenseMatrix> {
    Ok(make_test_factors(m, n, spec, factors, seed)?.a)
}
