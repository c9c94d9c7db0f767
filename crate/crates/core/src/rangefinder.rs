//! Randomized rangefinder (`A ≈ Q·B`) and the fixed-precision driver that
//! picks its rank from sketched singular values.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{frobenius_norm, qr_thin, DenseMatrix};
use crate::rank::{
    sketch_estimates, RankEstimateConfig, RankReport, RankStatus, Round, SvMethod, TwoSidedSketch,
};
use crate::sketch::{apply_right, build_sketch, SketchKind};

/// `A ≈ Q·B` with `Q` (`m × rank`) orthonormal and `B = QᵀA`.
#[derive(Clone, Debug)]
pub struct QbFactors {
    pub q: DenseMatrix,
    pub b: DenseMatrix,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPrecisionConfig {
    /// Target Frobenius error.
    pub eps: f64,
    /// Rangefinder oversampling.
    pub p: usize,
    pub r1: usize,
    pub seed: u64,
    pub oversample_frac: f64,
    pub r2_factor: usize,
    pub right_kind: SketchKind,
    pub left_kind: SketchKind,
    pub max_doublings: usize,
}

impl FixedPrecisionConfig {
    pub fn new(eps: f64, r1: usize) -> Self {
        let base = RankEstimateConfig::new(eps, r1);
        Self {
            eps,
            p: 10,
            r1,
            seed: 0,
            oversample_frac: base.oversample_frac,
            r2_factor: base.r2_factor,
            right_kind: base.right_kind,
            left_kind: base.left_kind,
            max_doublings: base.max_doublings,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn rank_config(&self) -> RankEstimateConfig {
        RankEstimateConfig {
            eps: self.eps,
            r1: self.r1,
            oversample_frac: self.oversample_frac,
            r2_factor: self.r2_factor,
            right_kind: self.right_kind,
            left_kind: self.left_kind,
            sv_method: SvMethod::FullSvd,
            seed: self.seed,
            max_doublings: self.max_doublings,
        }
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.p < 2 {
            return Err(Error::Config(format!(
                "oversampling p must be at least 2, got {}",
                self.p
            )));
        }
        self.rank_config().validate(m, n)
    }
}

/// Gaussian-sketch expectation bound on `‖A − QB‖_F` for target rank `r`
/// and oversampling `p`: `(1 + r/(p−1))^½ · (Σ_{j>r} σⱼ²)^½`.
pub fn qb_error_bound(sigma: &[f64], r: usize, p: usize) -> f64 {
    let tail: f64 = sigma.iter().skip(r).map(|s| s * s).sum();
    (1.0 + r as f64 / (p as f64 - 1.0)).sqrt() * tail.sqrt()
}

/// Smallest `r ≤ len(sv)` whose error bound, with every index past the
/// estimates filled by the last estimate up to `n`, is at most `eps`.
pub fn choose_rank_from_bound(sv: &[f64], n: usize, eps: f64, p: usize) -> Option<usize> {
    let k = sv.len();
    if k == 0 || p < 2 {
        return None;
    }
    let fill = sv[k - 1] * sv[k - 1] * n.saturating_sub(k) as f64;
    // suffix[r] = Σ_{j>r} over the estimates (0-based j ≥ r)
    let mut suffix = vec![0.0; k + 1];
    for j in (0..k).rev() {
        suffix[j] = suffix[j + 1] + sv[j] * sv[j];
    }
    (1..=k).find(|&r| (1.0 + r as f64 / (p as f64 - 1.0)).sqrt() * (suffix[r] + fill).sqrt() <= eps)
}

/// Basic randomized rangefinder with `r + p` sketch columns.
pub fn rangefinder_qb(
    a: &DenseMatrix,
    r: usize,
    p: usize,
    kind: SketchKind,
    seed: u64,
) -> Result<QbFactors> {
    let (m, n) = a.shape();
    if r < 2 || p < 2 {
        return Err(Error::Config(format!(
            "rangefinder needs r >= 2 and p >= 2, got r={r}, p={p}"
        )));
    }
    if r + p > m.min(n) {
        return dim_err(format!(
            "r + p = {} exceeds min dimension {}",
            r + p,
            m.min(n)
        ));
    }
    let x = build_sketch(kind, n, r + p, seed)?;
    qb_from_sketch(a, &apply_right(a, &x)?)
}

fn qb_from_sketch(a: &DenseMatrix, ax: &DenseMatrix) -> Result<QbFactors> {
    let q = qr_thin(ax)?.q;
    let b = q.t_matmul(a)?;
    Ok(QbFactors {
        rank: q.cols(),
        q,
        b,
    })
}

/// `‖A − QB‖_F`.
pub fn qb_error(a: &DenseMatrix, qb: &QbFactors) -> Result<f64> {
    Ok(frobenius_norm(&a.sub(&qb.q.matmul(&qb.b)?)?))
}

/// Fixed-precision QB: estimate singular values from the two-sided sketch,
/// choose the smallest rank whose error bound meets `eps`, and reuse the
/// right sketch for the rangefinder. Doubles `r₁` while no rank qualifies.
///
/// The report's `r_hat` is the chosen target rank `r`; the factorization
/// has `r + p` columns (fewer when the matrix is too small). On `HitCap`
/// the factorization uses every available sketch column.
pub fn re_rangefinder(
    a: &DenseMatrix,
    cfg: &FixedPrecisionConfig,
) -> Result<(QbFactors, RankReport)> {
    let (m, n) = a.shape();
    cfg.validate(m, n)?;
    let rcfg = cfg.rank_config();
    let cap = m.min(n);
    let max_r1 = (1..=cap)
        .rev()
        .find(|&r| rcfg.sketch_dims(r, m, n).is_ok())
        .unwrap_or(0);
    let mut r1 = cfg.r1;
    let (r1t, r2) = rcfg.sketch_dims(r1, m, n)?;
    let mut sk = TwoSidedSketch::new(a, cfg.right_kind, cfg.left_kind, r1t, r2, cfg.seed)?;
    let mut rounds = Vec::new();
    let mut done = 0;
    loop {
        rounds.push(Round {
            r1,
            r1_tilde: sk.cols(),
            r2: sk.rows(),
        });
        let all = sketch_estimates(&sk, SvMethod::FullSvd)?;
        let head = all.truncated(r1);
        let chosen = choose_rank_from_bound(&head, n, cfg.eps, cfg.p);
        let next = (2 * r1).min(max_r1);
        if chosen.is_some() || done == cfg.max_doublings || next <= r1 {
            let (r_hat, k, status) = match chosen {
                Some(r) => {
                    let r = r.max(2);
                    (r, (r + cfg.p).min(cap), RankStatus::Converged)
                }
                None => (r1, sk.cols(), RankStatus::HitCap),
            };
            if k > sk.cols() {
                sk.grow(k, sk.rows())?;
            }
            let qb = qb_from_sketch(a, &sk.ax_columns(k))?;
            let report = RankReport {
                r_hat,
                oversample_estimates: all[r1..].to_vec(),
                sv_estimates: head,
                rounds,
                status,
                seed: cfg.seed,
            };
            return Ok((qb, report));
        }
        r1 = next;
        done += 1;
        let (r1t, r2) = rcfg.sketch_dims(r1, m, n)?;
        sk.grow(r1t, r2)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_error, singular_values};
    use crate::sketch::{gaussian_matrix, TransformKind};
    use crate::synthetic::{make_test_matrix, spectrum, FactorKind, SpectrumSpec};

    fn low_rank(m: usize, n: usize, k: usize, seed: u64) -> DenseMatrix {
        gaussian_matrix(m, k, seed)
            .matmul(&gaussian_matrix(k, n, seed + 1))
            .unwrap()
    }

    /// Direct evaluation of the filled bound, one candidate at a time.
    fn scan_oracle(sv: &[f64], n: usize, eps: f64, p: usize) -> Option<usize> {
        let last = *sv.last().unwrap();
        let filled: Vec<f64> = (0..n)
            .map(|i| if i < sv.len() { sv[i] } else { last })
            .collect();
        (1..=sv.len()).find(|&r| qb_error_bound(&filled, r, p) <= eps)
    }

    #[test]
    fn bound_selection_examples() {
        assert_eq!(choose_rank_from_bound(&[1.0, 1e-8], 100, 1e-6, 5), Some(1));
        let bound = (1.25f64).sqrt() * 99f64.sqrt() * 1e-8;
        assert!((bound - 1.1124e-7).abs() < 1e-10);
        assert_eq!(choose_rank_from_bound(&[1.0; 10], 100, 1e-6, 10), None);
        assert_eq!(choose_rank_from_bound(&[0.0; 6], 100, 1e-6, 10), Some(1));
        assert_eq!(choose_rank_from_bound(&[], 100, 1e-6, 10), None);
    }

    #[test]
    fn bound_selection_matches_scan() {
        let mut s = 12345u64;
        for trial in 0..200 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let k = 1 + (s >> 58) as usize;
            let mut sv: Vec<f64> = (0..k)
                .map(|i| 10f64.powf(-(((s >> (i % 50)) % 13) as f64) * 0.5))
                .collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            let n = k + (trial % 50);
            let eps = 10f64.powf(-((trial % 9) as f64));
            let p = 2 + trial % 9;
            assert_eq!(
                choose_rank_from_bound(&sv, n, eps, p),
                scan_oracle(&sv, n, eps, p)
            );
        }
    }

    #[test]
    fn exact_rank_is_captured() {
        let a = low_rank(80, 60, 5, 3);
        let qb = rangefinder_qb(&a, 5, 5, SketchKind::Gaussian, 1).unwrap();
        assert_eq!(qb.rank, 10);
        assert!(orthonormality_error(&qb.q).unwrap() < 1e-13);
        assert!(qb_error(&a, &qb).unwrap() <= 1e-10 * frobenius_norm(&a));
        let qb = rangefinder_qb(&a, 5, 5, SketchKind::Srtt(TransformKind::Dct), 1).unwrap();
        assert!(qb_error(&a, &qb).unwrap() <= 1e-10 * frobenius_norm(&a));
    }

    #[test]
    fn zero_matrix_qb() {
        let a = DenseMatrix::zeros(30, 20);
        let qb = rangefinder_qb(&a, 2, 3, SketchKind::Gaussian, 0).unwrap();
        assert_eq!(frobenius_norm(&qb.b), 0.0);
        assert_eq!(qb_error(&a, &qb).unwrap(), 0.0);
        let (qb, rep) = re_rangefinder(&a, &FixedPrecisionConfig::new(1e-6, 5)).unwrap();
        assert_eq!(rep.r_hat, 2);
        assert_eq!(qb.rank, 12);
        assert_eq!(qb_error(&a, &qb).unwrap(), 0.0);
    }

    #[test]
    fn rangefinder_preconditions() {
        let a = DenseMatrix::identity(10);
        assert!(rangefinder_qb(&a, 1, 3, SketchKind::Gaussian, 0).is_err());
        assert!(rangefinder_qb(&a, 3, 1, SketchKind::Gaussian, 0).is_err());
        assert!(rangefinder_qb(&a, 6, 5, SketchKind::Gaussian, 0).is_err());
        let mut cfg = FixedPrecisionConfig::new(1e-3, 3);
        cfg.p = 1;
        assert!(re_rangefinder(&a, &cfg).is_err());
    }

    #[test]
    fn projector_complement_error() {
        let a = gaussian_matrix(8, 5, 2);
        let q = DenseMatrix::identity(8).columns(0..3);
        let b = q.t_matmul(&a).unwrap();
        let qb = QbFactors { q, b, rank: 3 };
        let rest = frobenius_norm(&a.row_block(3..8));
        assert!((qb_error(&a, &qb).unwrap() - rest).abs() < 1e-14);
    }

    #[test]
    fn residual_identities() {
        let a = make_test_matrix(
            120,
            90,
            &SpectrumSpec::fast_poly(),
            FactorKind::HaarIncoherent,
            4,
        )
        .unwrap();
        let qb = rangefinder_qb(&a, 10, 5, SketchKind::Gaussian, 7).unwrap();
        let err = qb_error(&a, &qb).unwrap();
        let total = frobenius_norm(&a).powi(2);
        assert!((err * err + frobenius_norm(&qb.b).powi(2) - total).abs() <= 1e-10 * total);
        let resid = a.sub(&qb.q.matmul(&qb.b).unwrap()).unwrap();
        let sv_sq: f64 = singular_values(&resid).unwrap().iter().map(|s| s * s).sum();
        assert!((sv_sq.sqrt() - err).abs() <= 1e-10 * err.max(1e-300));
    }

    #[test]
    fn fixed_precision_meets_target_on_fast_exponential() {
        let a = make_test_matrix(
            300,
            300,
            &SpectrumSpec::fast_exp(),
            FactorKind::HaarIncoherent,
            9,
        )
        .unwrap();
        for seed in 0..10 {
            let cfg = FixedPrecisionConfig::new(1e-6, 20).with_seed(seed);
            let (qb, rep) = re_rangefinder(&a, &cfg).unwrap();
            assert_eq!(rep.status, RankStatus::Converged);
            assert!(qb_error(&a, &qb).unwrap() <= 1e-6);
            assert!(orthonormality_error(&qb.q).unwrap() < 1e-12);
        }
    }

    #[test]
    fn fixed_precision_restarts_and_extends() {
        let spec = SpectrumSpec::slow_exp();
        let a = make_test_matrix(400, 400, &spec, FactorKind::HaarIncoherent, 2).unwrap();
        let cfg = FixedPrecisionConfig::new(1e-1, 8).with_seed(3);
        let (qb, rep) = re_rangefinder(&a, &cfg).unwrap();
        assert_eq!(rep.status, RankStatus::Converged);
        assert!(rep.rounds.len() > 1);
        assert_eq!(qb.rank, rep.r_hat + cfg.p);
        assert!(qb_error(&a, &qb).unwrap() <= 1e-1);
        let sigma = spectrum(&spec, 400).unwrap();
        let exact = (1..=400)
            .find(|&r| qb_error_bound(&sigma, r, cfg.p) <= cfg.eps)
            .unwrap();
        assert!(
            rep.r_hat as f64 <= 1.1 * exact as f64 + 5.0,
            "{} vs {exact}",
            rep.r_hat
        );
    }

    #[test]
    fn exact_rank_fixed_precision() {
        let a = low_rank(150, 120, 7, 11);
        let (qb, rep) =
            re_rangefinder(&a, &FixedPrecisionConfig::new(1e-8, 10).with_seed(1)).unwrap();
        assert!(rep.r_hat <= 7 + 2);
        assert!(qb_error(&a, &qb).unwrap() <= 1e-8);
    }
}
