//! Numerical ε-rank estimation from a two-sided sketch `Θ·A·X`.
//!
//! The right sketch `X` has `r̃₁ = round(1.1·r₁)` columns; the left sketch
//! `Θ` has `r₂ = 2·r̃₁` rows. The leading `r₁` singular values of `ΘAX`
//! estimate those of `A`, the trailing oversampling estimates are reported
//! but never thresholded. When every estimate exceeds ε the adaptive driver
//! doubles `r₁`, extending both sketches in place.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{qr_diag_estimates, singular_values, DenseMatrix, SingularValues};
use crate::rng::derive_seed;
use crate::sketch::{build_sketch, extend_sketch, SketchKind, SketchOperator};

/// How singular values of the small sketch are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvMethod {
    #[default]
    FullSvd,
    /// Sorted `|diag(R)|` of a QR factorization.
    QrDiag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEstimateConfig {
    pub eps: f64,
    pub r1: usize,
    pub oversample_frac: f64,
    pub r2_factor: usize,
    pub right_kind: SketchKind,
    pub left_kind: SketchKind,
    pub sv_method: SvMethod,
    pub seed: u64,
    pub max_doublings: usize,
}

impl RankEstimateConfig {
    pub fn new(eps: f64, r1: usize) -> Self {
        Self {
            eps,
            r1,
            oversample_frac: 0.1,
            r2_factor: 2,
            right_kind: SketchKind::default(),
            left_kind: SketchKind::default(),
            sv_method: SvMethod::FullSvd,
            seed: 0,
            max_doublings: 6,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_right_kind(mut self, kind: SketchKind) -> Self {
        self.right_kind = kind;
        self
    }

    /// Checks the configuration against an `m × n` input.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.r1 == 0 {
            return Err(Error::Config("r1 must be at least 1".into()));
        }
        if !(self.oversample_frac.is_finite() && self.oversample_frac >= 0.0) {
            return Err(Error::Config(
                "oversample fraction must be nonnegative".into(),
            ));
        }
        if self.r2_factor == 0 {
            return Err(Error::Config("r2 factor must be at least 1".into()));
        }
        self.sketch_dims(self.r1, m, n).map(|_| ())
    }

    /// `(r̃₁, r₂)` for a given `r₁`; `r₂` is clamped to `m`.
    pub fn sketch_dims(&self, r1: usize, m: usize, n: usize) -> Result<(usize, usize)> {
        let r1t = oversampled(r1, self.oversample_frac);
        if r1t > m.min(n) {
            return Err(Error::Config(format!(
                "oversampled sketch size {r1t} exceeds min dimension {} of a {m}x{n} matrix",
                m.min(n)
            )));
        }
        Ok((r1t, (self.r2_factor * r1t).min(m)))
    }

    fn max_r1(&self, m: usize, n: usize) -> usize {
        let cap = m.min(n);
        (1..=cap)
            .rev()
            .find(|&r| oversampled(r, self.oversample_frac) <= cap)
            .unwrap_or(0)
    }
}

/// `r₁` plus `round(frac·r₁)` oversampling columns (half rounds up), with at
/// least one extra column when `r₁ < 10`.
pub fn oversampled(r1: usize, frac: f64) -> usize {
    let extra = (frac * r1 as f64 + 0.5).floor() as usize;
    r1 + if r1 < 10 { extra.max(1) } else { extra }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub r1: usize,
    pub r1_tilde: usize,
    pub r2: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankStatus {
    Converged,
    HitCap,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub r_hat: usize,
    /// Leading `r₁` estimates of the final round.
    pub sv_estimates: SingularValues,
    /// Trailing `r̃₁ − r₁` estimates of the final round (not thresholded).
    pub oversample_estimates: Vec<f64>,
    pub rounds: Vec<Round>,
    pub status: RankStatus,
    pub seed: u64,
}

/// Number of values strictly greater than `eps`.
pub fn count_above_threshold(sv: &[f64], eps: f64) -> usize {
    sv.iter().filter(|&&v| v > eps).count()
}

/// Rank estimate from the R factor of a QR of `ΘAX`: the number of
/// `|R_ii| > eps`.
pub fn gn_free_rank(r_factor: &DenseMatrix, eps: f64) -> Result<usize> {
    for j in 0..r_factor.cols() {
        if r_factor.col(j).iter().skip(j + 1).any(|v| *v != 0.0) {
            return Err(Error::NotTriangular);
        }
    }
    let diag: Vec<f64> = r_factor.diagonal().into_iter().map(f64::abs).collect();
    Ok(count_above_threshold(&diag, eps))
}

/// Growing two-sided sketch of a fixed matrix.
///
/// Unscaled products are cached; growing the sketch computes only the new
/// columns of `AX` and the new rows and columns of `ΘAX`.
pub(crate) struct TwoSidedSketch<'a> {
    a: &'a DenseMatrix,
    x: SketchOperator,
    y: SketchOperator,
    /// `(A·D·F)ᵀ` for trigonometric right sketches.
    mixed_rows: Option<DenseMatrix>,
    ax: DenseMatrix,
    /// `F·D·(AX)` for trigonometric left sketches.
    left_mixed: Option<DenseMatrix>,
    yax: DenseMatrix,
}

impl<'a> TwoSidedSketch<'a> {
    pub(crate) fn new(
        a: &'a DenseMatrix,
        right: SketchKind,
        left: SketchKind,
        cols: usize,
        rows: usize,
        seed: u64,
    ) -> Result<Self> {
        let x = build_sketch(right, a.cols(), cols, derive_seed(seed, "right-sketch"))?;
        let y = build_sketch(left, a.rows(), rows, derive_seed(seed, "left-sketch"))?;
        let mixed_rows = match right {
            SketchKind::Gaussian => None,
            _ => Some(x.mix_rows(a)?),
        };
        let ax = x.right_columns(a, mixed_rows.as_ref(), 0..cols)?;
        let left_mixed = match left {
            SketchKind::Gaussian => None,
            _ => Some(y.mix_columns(&ax)?),
        };
        let yax = y.left_rows(left_mixed.as_ref().unwrap_or(&ax), 0..rows)?;
        Ok(Self {
            a,
            x,
            y,
            mixed_rows,
            ax,
            left_mixed,
            yax,
        })
    }

    pub(crate) fn cols(&self) -> usize {
        self.x.sketch_dim()
    }

    pub(crate) fn rows(&self) -> usize {
        self.y.sketch_dim()
    }

    /// Grows to at least `cols` sketch columns and `rows` sketch rows.
    pub(crate) fn grow(&mut self, cols: usize, rows: usize) -> Result<()> {
        let (old_c, old_r) = (self.cols(), self.rows());
        let (cols, rows) = (cols.max(old_c), rows.max(old_r));
        if cols == old_c && rows == old_r {
            return Ok(());
        }
        let mut rebuild_left = false;
        if cols > old_c {
            self.x = extend_sketch(&self.x, cols)?;
            if self.x.is_nested() {
                let fresh = self
                    .x
                    .right_columns(self.a, self.mixed_rows.as_ref(), old_c..cols)?;
                if let Some(lm) = &mut self.left_mixed {
                    *lm = lm.hcat(&self.y.mix_columns(&fresh)?)?;
                }
                self.ax = self.ax.hcat(&fresh)?;
            } else {
                self.ax = self
                    .x
                    .right_columns(self.a, self.mixed_rows.as_ref(), 0..cols)?;
                if self.left_mixed.is_some() {
                    self.left_mixed = Some(self.y.mix_columns(&self.ax)?);
                }
                rebuild_left = true;
            }
        }
        if rows > old_r {
            self.y = extend_sketch(&self.y, rows)?;
        }
        let src = self.left_mixed.as_ref().unwrap_or(&self.ax);
        if rebuild_left || !self.y.is_nested() {
            self.yax = self.y.left_rows(src, 0..rows)?;
        } else {
            let mut top = self.yax.clone();
            if cols > old_c {
                let new_cols = src.columns(old_c..cols);
                top = top.hcat(&self.y.left_rows(&new_cols, 0..old_r)?)?;
            }
            if rows > old_r {
                top = top.vcat(&self.y.left_rows(src, old_r..rows)?)?;
            }
            self.yax = top;
        }
        Ok(())
    }

    /// Scaled `Θ·A·X`.
    pub(crate) fn sketch(&self) -> DenseMatrix {
        self.yax.scaled(self.x.scale() * self.y.scale())
    }

    /// First `k` columns of `A·X`, unscaled.
    pub(crate) fn ax_columns(&self, k: usize) -> DenseMatrix {
        self.ax.columns(0..k)
    }
}

/// All `r̃₁` singular value estimates of the current sketch.
pub(crate) fn sketch_estimates(
    sk: &TwoSidedSketch<'_>,
    method: SvMethod,
) -> Result<SingularValues> {
    let s = sk.sketch();
    match method {
        SvMethod::FullSvd => singular_values(&s),
        SvMethod::QrDiag => qr_diag_estimates(&s),
    }
}

/// Scaled two-sided sketch `Θ·A·X` for the first round of `cfg`.
pub fn two_sided_sketch(a: &DenseMatrix, cfg: &RankEstimateConfig) -> Result<DenseMatrix> {
    cfg.validate(a.rows(), a.cols())?;
    let (r1t, r2) = cfg.sketch_dims(cfg.r1, a.rows(), a.cols())?;
    let sk = TwoSidedSketch::new(a, cfg.right_kind, cfg.left_kind, r1t, r2, cfg.seed)?;
    Ok(sk.sketch())
}

/// Single round: returns `HitCap` with `r_hat = r₁` when every leading
/// estimate exceeds ε.
pub fn estimate_rank(a: &DenseMatrix, cfg: &RankEstimateConfig) -> Result<RankReport> {
    run(a, cfg, 0)
}

/// Doubles `r₁` on `HitCap`, at most `cfg.max_doublings` times, reusing the
/// existing sketch products.
pub fn estimate_rank_adaptive(a: &DenseMatrix, cfg: &RankEstimateConfig) -> Result<RankReport> {
    run(a, cfg, cfg.max_doublings)
}

fn run(a: &DenseMatrix, cfg: &RankEstimateConfig, doublings: usize) -> Result<RankReport> {
    let (m, n) = a.shape();
    cfg.validate(m, n)?;
    let max_r1 = cfg.max_r1(m, n);
    let mut r1 = cfg.r1;
    let (r1t, r2) = cfg.sketch_dims(r1, m, n)?;
    let mut sk = TwoSidedSketch::new(a, cfg.right_kind, cfg.left_kind, r1t, r2, cfg.seed)?;
    let mut rounds = Vec::new();
    let mut done = 0;
    loop {
        rounds.push(Round {
            r1,
            r1_tilde: sk.cols(),
            r2: sk.rows(),
        });
        let all = sketch_estimates(&sk, cfg.sv_method)?;
        let head = all.truncated(r1);
        let r_hat = count_above_threshold(&head, cfg.eps);
        let converged = r_hat < r1;
        let next = (2 * r1).min(max_r1);
        if converged || done == doublings || next <= r1 {
            return Ok(RankReport {
                r_hat,
                oversample_estimates: all[r1..].to_vec(),
                sv_estimates: head,
                rounds,
                status: if converged {
                    RankStatus::Converged
                } else {
                    RankStatus::HitCap
                },
                seed: cfg.seed,
            });
        }
        r1 = next;
        done += 1;
        let (r1t, r2) = cfg.sketch_dims(r1, m, n)?;
        sk.grow(r1t, r2)?;
    }
}
