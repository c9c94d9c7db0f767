//! Random embeddings.
//!
//! Three families are supported, each realized deterministically from a
//! seed:
//!
//! - Gaussian: `X = G/√r` with iid standard normal `G`.
//! - SRTT: `X = √(n/r)·D·F·S` with random signs `D`, an orthogonal
//!   trigonometric transform `F` and a column subsample `S` drawn without
//!   replacement. As a left operator, `Θ = √(m/r)·S·F·D`.
//! - HRTT: the SRTT with `S` replaced by a CountSketch hash (every ambient
//!   coordinate lands in one random bucket with a random sign), unscaled.
//!
//! Only unscaled randomness is stored; the scale for the current sketch
//! dimension is applied when an operator is used, so extending a sketch
//! never alters its existing entries.
//!
//! `F` denotes the orthonormal DCT-II matrix (or the normalized Walsh-
//! Hadamard matrix) and [`Direction::Forward`] computes `F·v`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::{fill_normal_column, stream_rng, STREAM_HASH, STREAM_SAMPLE, STREAM_SIGNS};

/// Largest Gaussian block (entries) kept in memory; bigger blocks are
/// regenerated column by column at application time.
pub const GAUSSIAN_STORE_LIMIT: usize = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Dct,
    Hadamard,
}

impl TransformKind {
    /// Flatness `η = n·max|F_ij|²`.
    pub fn eta(self) -> f64 {
        match self {
            TransformKind::Dct => 2.0,
            TransformKind::Hadamard => 1.0,
        }
    }

    pub fn check_len(self, n: usize) -> Result<()> {
        if n == 0 {
            return dim_err("transform length must be positive");
        }
        if self == TransformKind::Hadamard && !n.is_power_of_two() {
            return dim_err(format!(
                "Hadamard transform needs a power-of-two length, got {n}"
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "transform", rename_all = "lowercase")]
pub enum SketchKind {
    Gaussian,
    Srtt(TransformKind),
    Hrtt(TransformKind),
}

impl SketchKind {
    pub fn transform(self) -> Option<TransformKind> {
        match self {
            SketchKind::Gaussian => None,
            SketchKind::Srtt(t) | SketchKind::Hrtt(t) => Some(t),
        }
    }
}

impl Default for SketchKind {
    fn default() -> Self {
        SketchKind::Srtt(TransformKind::Dct)
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SketchKind::Gaussian => "gaussian",
            SketchKind::Srtt(TransformKind::Dct) => "srtt",
            SketchKind::Srtt(TransformKind::Hadamard) => "srtt-hadamard",
            SketchKind::Hrtt(TransformKind::Dct) => "hrtt",
            SketchKind::Hrtt(TransformKind::Hadamard) => "hrtt-hadamard",
        };
        f.write_str(name)
    }
}

impl FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "gaussian" => SketchKind::Gaussian,
            "srtt" | "srtt-dct" => SketchKind::Srtt(TransformKind::Dct),
            "srtt-hadamard" => SketchKind::Srtt(TransformKind::Hadamard),
            "hrtt" | "hrtt-dct" => SketchKind::Hrtt(TransformKind::Dct),
            "hrtt-hadamard" => SketchKind::Hrtt(TransformKind::Hadamard),
            other => return Err(Error::Config(format!("unknown sketch kind '{other}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Adjoint,
}

/// A planned orthonormal transform of fixed length.
#[derive(Clone)]
pub(crate) struct Transform {
    len: usize,
    dct: Option<Arc<dyn TransformType2And3<f64>>>,
}

impl Transform {
    pub(crate) fn new(kind: TransformKind, len: usize) -> Result<Self> {
        kind.check_len(len)?;
        let dct = match kind {
            TransformKind::Dct => Some(DctPlanner::new().plan_dct2(len)),
            TransformKind::Hadamard => None,
        };
        Ok(Self { len, dct })
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.dct.as_ref().map_or(0, |d| d.get_scratch_len())
    }

    /// Transforms `v` in place; `scratch` must hold [`Self::scratch_len`]
    /// values.
    pub(crate) fn apply(&self, v: &mut [f64], dir: Direction, scratch: &mut [f64]) {
        debug_assert_eq!(v.len(), self.len);
        let n = self.len as f64;
        match (&self.dct, dir) {
            (None, _) => fwht(v),
            (Some(d), Direction::Forward) => {
                d.process_dct2_with_scratch(v, scratch);
                let (s0, sk) = ((1.0 / n).sqrt(), (2.0 / n).sqrt());
                v[0] *= s0;
                v[1..].iter_mut().for_each(|x| *x *= sk);
            }
            (Some(d), Direction::Adjoint) => {
                // rustdct's DCT-III halves the first input
                let (s0, sk) = ((1.0 / n).sqrt(), (2.0 / n).sqrt());
                v[0] *= 2.0 * s0;
                v[1..].iter_mut().for_each(|x| *x *= sk);
                d.process_dct3_with_scratch(v, scratch);
            }
        }
    }
}

/// Normalized fast Walsh-Hadamard transform; its own inverse.
fn fwht(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    let s = 1.0 / (n as f64).sqrt();
    v.iter_mut().for_each(|x| *x *= s);
}

/// Applies the orthonormal transform `F` (or `Fᵀ`) to `v`.
pub fn orthonormal_transform(v: &[f64], kind: TransformKind, dir: Direction) -> Result<Vec<f64>> {
    let t = Transform::new(kind, v.len())?;
    let mut out = v.to_vec();
    let mut scratch = vec![0.0; t.scratch_len()];
    t.apply(&mut out, dir, &mut scratch);
    Ok(out)
}

#[derive(Clone, Debug)]
enum Randomness {
    /// Unscaled `ambient × sketch` block, or `None` when it is regenerated
    /// on demand.
    Gaussian(Option<DenseMatrix>),
    /// `samples[..sketch_dim]` are the selected coordinates.
    Srtt {
        signs: Vec<f64>,
        samples: Vec<usize>,
    },
    Hrtt {
        signs: Vec<f64>,
        buckets: Vec<usize>,
        hash_signs: Vec<f64>,
    },
}

/// A realized random embedding.
#[derive(Clone, Debug)]
pub struct SketchOperator {
    kind: SketchKind,
    ambient_dim: usize,
    sketch_dim: usize,
    seed: u64,
    randomness: Randomness,
}

fn random_signs(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_SIGNS);
    (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// First `r` positions of a seeded Fisher-Yates shuffle of `0..n`. The
/// prefix for `r` is a prefix of the one for any larger `r`.
fn sample_without_replacement(seed: u64, n: usize, r: usize) -> Vec<usize> {
    let mut rng = stream_rng(seed, STREAM_SAMPLE);
    let mut idx: Vec<usize> = (0..n).collect();
    for k in 0..r {
        let j = rng.random_range(k..n);
        idx.swap(k, j);
    }
    idx.truncate(r);
    idx
}

fn gaussian_block(seed: u64, rows: usize, cols: Range<usize>) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(rows, cols.len());
    for (k, c) in cols.enumerate() {
        fill_normal_column(seed, c, g.col_mut(k));
    }
    g
}

/// Builds an `ambient_dim → sketch_dim` embedding.
pub fn build_sketch(
    kind: SketchKind,
    ambient_dim: usize,
    sketch_dim: usize,
    seed: u64,
) -> Result<SketchOperator> {
    if sketch_dim == 0 || ambient_dim == 0 {
        return dim_err("sketch and ambient dimensions must be positive");
    }
    if let Some(t) = kind.transform() {
        t.check_len(ambient_dim)?;
    }
    let randomness = match kind {
        SketchKind::Gaussian => {
            if sketch_dim > ambient_dim {
                return dim_err(format!(
                    "sketch dimension {sketch_dim} exceeds ambient dimension {ambient_dim}"
                ));
            }
            let stored = ambient_dim.saturating_mul(sketch_dim) <= GAUSSIAN_STORE_LIMIT;
            Randomness::Gaussian(stored.then(|| gaussian_block(seed, ambient_dim, 0..sketch_dim)))
        }
        SketchKind::Srtt(_) => {
            if sketch_dim > ambient_dim {
                return Err(Error::Exhausted {
                    requested: sketch_dim,
                    available: ambient_dim,
                });
            }
            Randomness::Srtt {
                signs: random_signs(seed, ambient_dim),
                samples: sample_without_replacement(seed, ambient_dim, sketch_dim),
            }
        }
        SketchKind::Hrtt(_) => {
            if sketch_dim > ambient_dim {
                return dim_err(format!(
                    "sketch dimension {sketch_dim} exceeds ambient dimension {ambient_dim}"
                ));
            }
            let mut rng = stream_rng(seed, STREAM_HASH);
            let mut buckets = Vec::with_capacity(ambient_dim);
            let mut hash_signs = Vec::with_capacity(ambient_dim);
            for _ in 0..ambient_dim {
                buckets.push(rng.random_range(0..sketch_dim));
                hash_signs.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
            }
            Randomness::Hrtt {
                signs: random_signs(seed, ambient_dim),
                buckets,
                hash_signs,
            }
        }
    };
    Ok(SketchOperator {
        kind,
        ambient_dim,
        sketch_dim,
        seed,
        randomness,
    })
}

/// Grows a sketch to `new_sketch_dim`.
///
/// Gaussian and SRTT operators keep their existing columns (samples)
/// unchanged and append fresh ones. HRTT buckets depend on the number of
/// buckets, so an HRTT operator is re-hashed.
pub fn extend_sketch(x: &SketchOperator, new_sketch_dim: usize) -> Result<SketchOperator> {
    if new_sketch_dim <= x.sketch_dim {
        return Err(Error::Config(format!(
            "extension must grow the sketch ({} -> {new_sketch_dim})",
            x.sketch_dim
        )));
    }
    match &x.randomness {
        Randomness::Gaussian(Some(block)) => {
            if new_sketch_dim > x.ambient_dim {
                return dim_err(format!(
                    "sketch dimension {new_sketch_dim} exceeds ambient dimension {}",
                    x.ambient_dim
                ));
            }
            let stored = x.ambient_dim.saturating_mul(new_sketch_dim) <= GAUSSIAN_STORE_LIMIT;
            let block = if stored {
                let fresh = gaussian_block(x.seed, x.ambient_dim, x.sketch_dim..new_sketch_dim);
                Some(block.hcat(&fresh)?)
            } else {
                None
            };
            Ok(SketchOperator {
                sketch_dim: new_sketch_dim,
                randomness: Randomness::Gaussian(block),
                ..x.clone()
            })
        }
        // The stream layout makes a fresh build an extension.
        _ => build_sketch(x.kind, x.ambient_dim, new_sketch_dim, x.seed),
    }
}

impl SketchOperator {
    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn sketch_dim(&self) -> usize {
        self.sketch_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sampled coordinates of an SRTT operator (0-based).
    pub fn sample_indices(&self) -> Option<&[usize]> {
        match &self.randomness {
            Randomness::Srtt { samples, .. } => Some(samples),
            _ => None,
        }
    }

    /// Random sign diagonal of a trigonometric operator.
    pub fn signs(&self) -> Option<&[f64]> {
        match &self.randomness {
            Randomness::Srtt { signs, .. } | Randomness::Hrtt { signs, .. } => Some(signs),
            Randomness::Gaussian(_) => None,
        }
    }

    /// Target bucket of every ambient coordinate of an HRTT operator.
    pub fn hash_buckets(&self) -> Option<&[usize]> {
        match &self.randomness {
            Randomness::Hrtt { buckets, .. } => Some(buckets),
            _ => None,
        }
    }

    /// Whether extending keeps existing sketch columns (rows) unchanged.
    pub fn is_nested(&self) -> bool {
        !matches!(self.kind, SketchKind::Hrtt(_))
    }

    /// Scale applied to the stored randomness at the current dimension.
    pub fn scale(&self) -> f64 {
        match self.kind {
            SketchKind::Gaussian => 1.0 / (self.sketch_dim as f64).sqrt(),
            SketchKind::Srtt(_) => (self.ambient_dim as f64 / self.sketch_dim as f64).sqrt(),
            SketchKind::Hrtt(_) => 1.0,
        }
    }

    fn transform(&self) -> Option<Result<Transform>> {
        self.kind
            .transform()
            .map(|t| Transform::new(t, self.ambient_dim))
    }

    /// Right-mixing stage for trigonometric kinds: returns `(A·D·F)ᵀ`
    /// (`n × m`), whose columns are the mixed rows of `A`.
    pub(crate) fn mix_rows(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_right(a)?;
        let signs = self.signs().expect("mixing needs a trigonometric sketch");
        let t = self.transform().expect("trigonometric sketch")?;
        let mut mixed = a.transpose();
        let mut scratch = vec![0.0; t.scratch_len()];
        for j in 0..mixed.cols() {
            let col = mixed.col_mut(j);
            col.iter_mut().zip(signs).for_each(|(x, s)| *x *= s);
            t.apply(col, Direction::Adjoint, &mut scratch);
        }
        Ok(mixed)
    }

    /// Left-mixing stage for trigonometric kinds: returns `F·D·B`.
    pub(crate) fn mix_columns(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_left(b)?;
        let signs = self.signs().expect("mixing needs a trigonometric sketch");
        let t = self.transform().expect("trigonometric sketch")?;
        let mut mixed = b.clone();
        let mut scratch = vec![0.0; t.scratch_len()];
        for j in 0..mixed.cols() {
            let col = mixed.col_mut(j);
            col.iter_mut().zip(signs).for_each(|(x, s)| *x *= s);
            t.apply(col, Direction::Forward, &mut scratch);
        }
        Ok(mixed)
    }

    /// Unscaled sketch columns `cols` of `A·X`. `mixed` is the output of
    /// [`Self::mix_rows`] for trigonometric kinds and ignored for Gaussian.
    /// HRTT requires the full column range.
    pub(crate) fn right_columns(
        &self,
        a: &DenseMatrix,
        mixed: Option<&DenseMatrix>,
        cols: Range<usize>,
    ) -> Result<DenseMatrix> {
        assert!(
            cols.end <= self.sketch_dim,
            "sketch column range out of bounds"
        );
        let m = a.rows();
        match &self.randomness {
            Randomness::Gaussian(block) => {
                self.check_right(a)?;
                match block {
                    Some(g) => a.matmul(&g.columns(cols)),
                    None => {
                        // regenerate in panels to bound memory
                        const PANEL: usize = 64;
                        let mut out = DenseMatrix::zeros(m, 0);
                        let mut start = cols.start;
                        while start < cols.end {
                            let end = (start + PANEL).min(cols.end);
                            let g = gaussian_block(self.seed, self.ambient_dim, start..end);
                            out = out.hcat(&a.matmul(&g)?)?;
                            start = end;
                        }
                        Ok(out)
                    }
                }
            }
            Randomness::Srtt { samples, .. } => {
                let mixed = mixed.expect("SRTT columns need the mixed rows");
                let sel = &samples[cols];
                Ok(DenseMatrix::from_fn(m, sel.len(), |i, k| {
                    mixed.get(sel[k], i)
                }))
            }
            Randomness::Hrtt {
                buckets,
                hash_signs,
                ..
            } => {
                assert!(
                    cols == (0..self.sketch_dim),
                    "HRTT sketches are produced whole"
                );
                let mixed = mixed.expect("HRTT columns need the mixed rows");
                let mut out_t = DenseMatrix::zeros(self.sketch_dim, m);
                for i in 0..m {
                    let (src, dst) = (mixed.col(i), out_t.col_mut(i));
                    for ((&b, &s), v) in buckets.iter().zip(hash_signs).zip(src) {
                        dst[b] += s * v;
                    }
                }
                Ok(out_t.transpose())
            }
        }
    }

    /// Unscaled sketch rows `rows` of `Θ·B`. `mixed` is the output of
    /// [`Self::mix_columns`] for trigonometric kinds and `B` itself for
    /// Gaussian. HRTT requires the full row range.
    pub(crate) fn left_rows(&self, mixed: &DenseMatrix, rows: Range<usize>) -> Result<DenseMatrix> {
        assert!(
            rows.end <= self.sketch_dim,
            "sketch row range out of bounds"
        );
        self.check_left(mixed)?;
        let c = mixed.cols();
        match &self.randomness {
            Randomness::Gaussian(block) => {
                let g = match block {
                    Some(g) => g.columns(rows),
                    None => gaussian_block(self.seed, self.ambient_dim, rows),
                };
                g.t_matmul(mixed)
            }
            Randomness::Srtt { samples, .. } => {
                let sel = &samples[rows];
                Ok(DenseMatrix::from_fn(sel.len(), c, |k, j| {
                    mixed.get(sel[k], j)
                }))
            }
            Randomness::Hrtt {
                buckets,
                hash_signs,
                ..
            } => {
                assert!(
                    rows == (0..self.sketch_dim),
                    "HRTT sketches are produced whole"
                );
                let mut out = DenseMatrix::zeros(self.sketch_dim, c);
                for j in 0..c {
                    let src = mixed.col(j);
                    let dst = out.col_mut(j);
                    for ((&b, &s), v) in buckets.iter().zip(hash_signs).zip(src) {
                        dst[b] += s * v;
                    }
                }
                Ok(out)
            }
        }
    }

    fn check_right(&self, a: &DenseMatrix) -> Result<()> {
        if a.cols() != self.ambient_dim {
            return dim_err(format!(
                "right sketch expects {} columns, matrix has {}",
                self.ambient_dim,
                a.cols()
            ));
        }
        Ok(())
    }

    fn check_left(&self, b: &DenseMatrix) -> Result<()> {
        if b.rows() != self.ambient_dim {
            return dim_err(format!(
                "left sketch expects {} rows, matrix has {}",
                self.ambient_dim,
                b.rows()
            ));
        }
        Ok(())
    }
}

/// `A·X` for a right sketch `X` (`n × r`).
pub fn apply_right(a: &DenseMatrix, x: &SketchOperator) -> Result<DenseMatrix> {
    x.check_right(a)?;
    let mixed = match x.kind {
        SketchKind::Gaussian => None,
        _ => Some(x.mix_rows(a)?),
    };
    let mut out = x.right_columns(a, mixed.as_ref(), 0..x.sketch_dim)?;
    out.scale_in_place(x.scale());
    Ok(out)
}

/// `Θ·B` for a left sketch `Θ` (`r × m`).
pub fn apply_left(y: &SketchOperator, b: &DenseMatrix) -> Result<DenseMatrix> {
    y.check_left(b)?;
    let mut out = match y.kind {
        SketchKind::Gaussian => y.left_rows(b, 0..y.sketch_dim)?,
        _ => y.left_rows(&y.mix_columns(b)?, 0..y.sketch_dim)?,
    };
    out.scale_in_place(y.scale());
    Ok(out)
}

/// Draws an `rows × cols` standard normal matrix from a seed.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    gaussian_block(seed, rows, 0..cols)
}
