//! Closed-form bounds on sketched singular values and Monte-Carlo checks
//! that the bounds hold.
//!
//! Logarithms are natural. Vacuous bounds (negative lower bounds, sample
//! sizes above the ambient dimension) are returned as they are.
//!
//! Experiments with Gaussian embeddings exploit rotational invariance:
//! `σ(U·Σ·Vᵀ·G)` has the law of `σ(Σ·G)`, so they run on diagonal inputs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{coherence, singular_values, svd, DenseMatrix};
use crate::rng::{derive_seed, trial_seed};
use crate::sketch::{
    apply_left, apply_right, build_sketch, gaussian_matrix, SketchKind, TransformKind,
};
use crate::synthetic::TestMatrix;

/// Relative slack for checks of deterministic inequalities.
pub const DETERMINISTIC_RTOL: f64 = 1e-10;

/// Trial count below which Monte-Carlo frequencies are dominated by noise.
pub const MIN_TRIALS: usize = 500;

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Outcome of checking an inequality over many trials or indices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheckReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Violations tolerated before the check fails.
    pub allowed_violations: f64,
    /// Worst slack per singular value index (negative means violated).
    pub per_index_margins: Vec<f64>,
    pub params: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl BoundCheckReport {
    fn new(name: &str, trials: usize) -> Self {
        Self {
            name: name.to_string(),
            trials,
            violations: 0,
            allowed_violations: 0.0,
            per_index_margins: Vec::new(),
            params: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn warn_if_few(&mut self, trials: usize) {
        if trials < MIN_TRIALS {
            self.notes.push(format!(
                "{trials} trials is below the noise floor of {MIN_TRIALS}; frequencies are unreliable"
            ));
        }
    }

    pub fn passed(&self) -> bool {
        self.violations as f64 <= self.allowed_violations
    }
}

/// Violations tolerated among `trials` events of probability at most `p`:
/// the mean plus three binomial standard deviations.
pub fn binomial_budget(trials: usize, p: f64) -> f64 {
    let n = trials as f64;
    let p = p.clamp(0.0, 1.0);
    n * p + 3.0 * (n * p * (1.0 - p)).sqrt()
}

/// `(√m − √n, √m + √n)`: bracket on the expected extreme singular values of
/// an `m × n` standard Gaussian matrix.
pub fn mp_expectation_bounds(m: usize, n: usize) -> Result<(f64, f64)> {
    if n == 0 || m < n {
        return Err(domain(format!("need m >= n >= 1, got m={m}, n={n}")));
    }
    let (sm, sn) = ((m as f64).sqrt(), (n as f64).sqrt());
    Ok((sm - sn, sm + sn))
}

/// `e^(−t²/2)`: bound on the probability of either extreme singular value
/// leaving its bracket by more than `t`.
pub fn mp_tail_probability(t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(domain(format!("t must be nonnegative, got {t}")));
    }
    Ok((-t * t / 2.0).exp())
}

/// Bracket on `σᵢ(AX)/σᵢ(A)` for a Gaussian embedding `X = G/√r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioBounds {
    pub lower: f64,
    pub upper: f64,
    pub index: usize,
    pub sketch_dim: usize,
    pub ambient: usize,
    pub tail_ratio: f64,
    pub t: f64,
}

/// Gaussian ratio bracket for index `i` (1-based), sketch size `r`,
/// ambient dimension `n`, `tail_ratio = σ_{r+1}/σᵢ` and deviation `t`.
/// With `t = 0` these are expectation brackets; otherwise they hold with
/// probability at least `1 − 3e^(−t²/2)`.
pub fn gauss_ratio_bounds(
    i: usize,
    r: usize,
    n: usize,
    tail_ratio: f64,
    t: f64,
) -> Result<RatioBounds> {
    if !(1 <= i && i <= r && r <= n) {
        return Err(domain(format!(
            "need 1 <= i <= r <= n, got i={i}, r={r}, n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&tail_ratio) {
        return Err(domain(format!(
            "tail ratio must lie in [0, 1], got {tail_ratio}"
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(domain(format!("t must be nonnegative, got {t}")));
    }
    let (i_f, r_f, n_f) = (i as f64, r as f64, n as f64);
    let dev = t / r_f.sqrt();
    let lower = 1.0 - (i_f / r_f).sqrt() - dev;
    let upper = 1.0
        + ((r_f - i_f + 1.0) / r_f).sqrt()
        + tail_ratio * (1.0 + ((n_f - r_f) / r_f).sqrt())
        + dev * (1.0 + tail_ratio);
    Ok(RatioBounds {
        lower,
        upper,
        index: i,
        sketch_dim: r,
        ambient: n,
        tail_ratio,
        t,
    })
}

/// Bracket on `σᵢ(AX)/σᵢ(A)` when `X` embeds the leading right singular
/// subspace with distortion `eps`: `(1 − eps, √((1+eps)² + (tail·‖X‖)²))`
/// where `tail = σ_{r̃+1}/σᵢ`.
pub fn embed_ratio_bounds(eps: f64, tail_over_sigma: f64, x_norm: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&eps) {
        return Err(domain(format!("eps must lie in [0, 1), got {eps}")));
    }
    if !(tail_over_sigma >= 0.0
        && x_norm >= 0.0
        && tail_over_sigma.is_finite()
        && x_norm.is_finite())
    {
        return Err(domain("tail ratio and norm must be nonnegative"));
    }
    let t = tail_over_sigma * x_norm;
    Ok((1.0 - eps, ((1.0 + eps).powi(2) + t * t).sqrt()))
}

/// Large-dimension limit of `σᵢ(AX)` for a Gaussian sketch of a spiked
/// spectrum with noise floor `noise` and aspect ratio `c = n/r`.
pub fn spiked_limit(sigma_i: f64, noise: f64, c: f64) -> Result<f64> {
    if !(noise > 0.0 && noise.is_finite() && sigma_i >= noise && sigma_i.is_finite()) {
        return Err(domain(format!(
            "need sigma_i >= noise > 0, got {sigma_i}, {noise}"
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(domain(format!("c must be positive, got {c}")));
    }
    if sigma_i > noise * (1.0 + c.sqrt()).sqrt() {
        let n2 = noise * noise;
        Ok(sigma_i * (1.0 + c * n2 / (sigma_i * sigma_i - n2)).sqrt())
    } else {
        Ok(noise * (1.0 + c.sqrt()))
    }
}

/// Left-sketch size sufficient for an SRTT to embed an `r1`-dimensional
/// subspace of `F^m` with distortion `eps` and failure probability `3δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "samples", rename_all = "snake_case")]
pub enum SampleRequirement {
    Feasible(u64),
    /// The requirement exceeds `m`; the value is still reported.
    Infeasible(u64),
}

/// Unrounded `6η·ε⁻²·(√r₁ + √(8 log(m/δ)))²·log(r₁/δ)`.
pub fn srtt_sample_bound(r1: usize, m: usize, eps: f64, delta: f64, eta: f64) -> Result<f64> {
    if r1 == 0 || m == 0 {
        return Err(domain("r1 and m must be positive"));
    }
    if !(eps > 0.0 && eps < 1.0 / 3.0) {
        return Err(domain(format!("eps must lie in (0, 1/3), got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if eta != 1.0 && eta != 2.0 {
        return Err(domain(format!("eta must be 1 or 2, got {eta}")));
    }
    let r = r1 as f64;
    let mix = r.sqrt() + (8.0 * (m as f64 / delta).ln()).sqrt();
    Ok(6.0 * eta / (eps * eps) * mix * mix * (r / delta).ln())
}

pub fn srtt_required_samples(
    r1: usize,
    m: usize,
    eps: f64,
    delta: f64,
    eta: f64,
) -> Result<SampleRequirement> {
    let need = srtt_sample_bound(r1, m, eps, delta, eta)?.ceil() as u64;
    Ok(if need <= m as u64 {
        SampleRequirement::Feasible(need)
    } else {
        SampleRequirement::Infeasible(need)
    })
}

/// `(η/m)(√r + √(8 log(m/δ)))²`: coherence of `F·D·U` for an `m × r`
/// orthonormal `U`, holding with probability at least `1 − δ`.
pub fn mixing_coherence_bound(r: usize, m: usize, delta: f64, eta: f64) -> Result<f64> {
    if r == 0 || m < r {
        return Err(domain(format!("need 1 <= r <= m, got r={r}, m={m}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(domain(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(domain(format!("eta must be positive, got {eta}")));
    }
    let mf = m as f64;
    let mix = (r as f64).sqrt() + (8.0 * (mf / delta).ln()).sqrt();
    Ok(eta / mf * mix * mix)
}

fn sigma_min(a: &DenseMatrix) -> Result<f64> {
    Ok(*singular_values(a)?.last().expect("nonempty"))
}

fn sigma_max(a: &DenseMatrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(singular_values(a)?[0])
}

/// Relative slack of `lo ≤ value ≤ hi`; negative when violated.
fn slack(lo: f64, value: f64, hi: f64) -> f64 {
    let scale = value
        .abs()
        .max(hi.abs())
        .max(lo.abs())
        .max(f64::MIN_POSITIVE);
    ((value - lo) / scale).min((hi - value) / scale)
}

/// Checks the deterministic sandwich on `σᵢ(AG)/σᵢ(A)`, `i = 1..r`, for an
/// `m × n` matrix `a` (`m ≥ n`) and an `n × r` matrix `g` (`r ≤ n`),
/// together with the two intermediate bounds through `B₁ = U₁Σ₁G₁`.
///
/// Indices where `σᵢ(A)` or `σᵢ(B₁)` vanish are skipped.
pub fn verify_deterministic_sandwich(a: &DenseMatrix, g: &DenseMatrix) -> Result<BoundCheckReport> {
    let (m, n) = a.shape();
    let r = g.cols();
    if m < n || g.rows() != n || r == 0 || r > n {
        return dim_err(format!(
            "need a: m x n with m >= n and g: n x r with 1 <= r <= n, got {m}x{n} and {}x{r}",
            g.rows()
        ));
    }
    if n > 2000 {
        return dim_err("sandwich check needs a full SVD; n must be at most 2000");
    }
    let f = svd(a)?;
    let sa = &f.s;
    let g1 = f.v.columns(0..r).t_matmul(g)?;
    let g2_norm = if r < n {
        sigma_max(&f.v.columns(r..n).t_matmul(g)?)?
    } else {
        0.0
    };
    let tail = if r < n { sa[r] } else { 0.0 };
    let s1g1 = DenseMatrix::from_fn(r, r, |i, j| sa[i] * g1.get(i, j));
    let s_b1 = singular_values(&s1g1)?;
    let s_ag = singular_values(&a.matmul(g)?)?;

    let mut report = BoundCheckReport::new("sandwich", r)
        .param("m", m as f64)
        .param("n", n as f64)
        .param("r", r as f64);
    for i in 1..=r {
        let (sai, sbi, sgi) = (sa[i - 1], s_b1[i - 1], s_ag[i - 1]);
        if sai <= 0.0 || sbi <= 0.0 {
            report.per_index_margins.push(f64::INFINITY);
            continue;
        }
        let lo_g = sigma_min(&g1.row_block(0..i))?;
        let hi_g = sigma_max(&g1.row_block(i - 1..r))?;
        let main_hi = (hi_g * hi_g + (tail * g2_norm / sai).powi(2)).sqrt();
        let inter_a_hi = (1.0 + (tail * g2_norm / sbi).powi(2)).sqrt();
        let margin = slack(lo_g, sgi / sai, main_hi)
            .min(slack(1.0, sgi / sbi, inter_a_hi))
            .min(slack(lo_g, sbi / sai, hi_g));
        if margin < -DETERMINISTIC_RTOL {
            report.violations += 1;
        }
        report.per_index_margins.push(margin);
    }
    Ok(report)
}

/// Runs the sandwich check on `pairs` random `(A, G)` pairs with `A` of
/// size `(n + n/5) × n` and `G` of size `n × r`. Even trials use a Gaussian
/// `A`, odd trials a matrix with polynomially decaying spectrum.
pub fn sandwich_suite(pairs: usize, n: usize, r: usize, seed: u64) -> Result<BoundCheckReport> {
    let m = n + n / 5;
    let reports: Vec<BoundCheckReport> = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let s = trial_seed(seed, k);
            let a = if k % 2 == 0 {
                gaussian_matrix(m, n, derive_seed(s, "sandwich-a"))
            } else {
                let spec = crate::synthetic::SpectrumSpec::PolyDecay {
                    p: 1.0 + (k % 5) as f64,
                };
                crate::synthetic::make_test_matrix(
                    m,
                    n,
                    &spec,
                    crate::synthetic::FactorKind::HaarIncoherent,
                    derive_seed(s, "sandwich-a"),
                )?
            };
            let g = gaussian_matrix(n, r, derive_seed(s, "sandwich-g"));
            verify_deterministic_sandwich(&a, &g)
        })
        .collect::<Result<_>>()?;
    let mut out = BoundCheckReport::new("sandwich", pairs)
        .param("pairs", pairs as f64)
        .param("n", n as f64)
        .param("r", r as f64);
    out.per_index_margins = vec![f64::INFINITY; r];
    for rep in &reports {
        out.violations += rep.violations;
        for (w, m) in out.per_index_margins.iter_mut().zip(&rep.per_index_margins) {
            *w = w.min(*m);
        }
    }
    Ok(out)
}

/// Extreme singular values of seeded `m × n` Gaussian draws.
fn gaussian_extremes(m: usize, n: usize, trials: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    (0..trials)
        .into_par_iter()
        .map(|k| {
            let s = singular_values(&gaussian_matrix(m, n, trial_seed(seed, k)))?;
            Ok((*s.last().unwrap(), s[0]))
        })
        .collect()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Sample means of the extreme singular values of `m × n` Gaussian
/// matrices against their expectation bracket, with three standard errors
/// of slack.
pub fn mp_expectation_check(
    m: usize,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<BoundCheckReport> {
    let (lo, hi) = mp_expectation_bounds(m, n)?;
    if trials < 2 {
        return Err(domain("need at least two trials"));
    }
    let draws = gaussian_extremes(m, n, trials, seed)?;
    let (mean_min, se_min) = mean_and_se(&draws.iter().map(|d| d.0).collect::<Vec<_>>());
    let (mean_max, se_max) = mean_and_se(&draws.iter().map(|d| d.1).collect::<Vec<_>>());
    let mut rep = BoundCheckReport::new("mp-expectation", trials)
        .param("m", m as f64)
        .param("n", n as f64)
        .param("mean_sigma_min", mean_min)
        .param("mean_sigma_max", mean_max)
        .param("lower", lo)
        .param("upper", hi);
    rep.warn_if_few(trials);
    let margin_min = mean_min - (lo - 3.0 * se_min);
    let margin_max = (hi + 3.0 * se_max) - mean_max;
    rep.violations = (margin_min < 0.0) as usize + (margin_max < 0.0) as usize;
    rep.per_index_margins = vec![margin_min, margin_max];
    Ok(rep)
}

/// Frequency of Gaussian draws whose extreme singular values leave the
/// bracket widened by `t`, against `2·e^(−t²/2)` per draw.
pub fn mp_tail_check(
    m: usize,
    n: usize,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<BoundCheckReport> {
    let (lo, hi) = mp_expectation_bounds(m, n)?;
    let p = 2.0 * mp_tail_probability(t)?;
    let draws = gaussian_extremes(m, n, trials, seed)?;
    let mut rep = BoundCheckReport::new("mp-tail", trials)
        .param("m", m as f64)
        .param("n", n as f64)
        .param("t", t)
        .param("probability_bound", p);
    rep.warn_if_few(trials);
    let mut worst_lo = f64::INFINITY;
    let mut worst_hi = f64::INFINITY;
    for (smin, smax) in draws {
        if smin <= lo - t || smax >= hi + t {
            rep.violations += 1;
        }
        worst_lo = worst_lo.min(smin - (lo - t));
        worst_hi = worst_hi.min(hi + t - smax);
    }
    rep.allowed_violations = binomial_budget(trials, p);
    rep.per_index_margins = vec![worst_lo, worst_hi];
    Ok(rep)
}

/// `σ(Σ·G)/√r` for a diagonal `Σ` (`n` values) and a seeded `n × r`
/// Gaussian `G`: a Gaussian sketch of any matrix with singular values `Σ`.
fn gaussian_sketch_of_spectrum(sigma: &[f64], r: usize, seed: u64) -> Result<Vec<f64>> {
    let mut g = gaussian_matrix(sigma.len(), r, seed);
    let scale = 1.0 / (r as f64).sqrt();
    for j in 0..r {
        for (v, s) in g.col_mut(j).iter_mut().zip(sigma) {
            *v *= s * scale;
        }
    }
    Ok(singular_values(&g)?.into_vec())
}

/// Monte-Carlo mean of `σᵢ(AX)/σᵢ(A)` for Gaussian `X` against the `t = 0`
/// brackets, for `i ≤ max_index`, with three standard errors of slack.
pub fn gauss_ratio_check(
    sigma: &[f64],
    r: usize,
    max_index: usize,
    trials: usize,
    seed: u64,
) -> Result<BoundCheckReport> {
    let n = sigma.len();
    if !(1 <= max_index && max_index <= r && r < n) {
        return Err(domain(format!(
            "need 1 <= max_index <= r < n, got {max_index}, {r}, {n}"
        )));
    }
    if trials < 2 {
        return Err(domain("need at least two trials"));
    }
    let samples: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|k| gaussian_sketch_of_spectrum(sigma, r, trial_seed(seed, k)))
        .collect::<Result<_>>()?;
    let mut rep = BoundCheckReport::new("gauss-ratio", trials)
        .param("n", n as f64)
        .param("r", r as f64)
        .param("max_index", max_index as f64);
    rep.warn_if_few(trials);
    for i in 1..=max_index {
        let ratios: Vec<f64> = samples.iter().map(|s| s[i - 1] / sigma[i - 1]).collect();
        let (mean, se) = mean_and_se(&ratios);
        let b = gauss_ratio_bounds(i, r, n, sigma[r] / sigma[i - 1], 0.0)?;
        let margin = (mean - (b.lower - 3.0 * se)).min(b.upper + 3.0 * se - mean);
        if margin < 0.0 {
            rep.violations += 1;
        }
        rep.per_index_margins.push(margin);
    }
    Ok(rep)
}

/// Checks the general-embedding bracket for a trigonometric right sketch.
///
/// For each seed, the distortion `eps` is measured from `σ(Ṽ₁ᵀX)` with
/// `Ṽ₁` the leading `r_tilde` right singular vectors; the bracket is then
/// checked for `i ≤ r_tilde`. Seeds with `eps ≥ 1` are counted as skipped.
pub fn embedding_ratio_check(
    tm: &TestMatrix,
    r_tilde: usize,
    r: usize,
    kind: SketchKind,
    trials: usize,
    seed: u64,
) -> Result<BoundCheckReport> {
    let n = tm.a.cols();
    let eye = DenseMatrix::identity(n);
    let v = tm.v.as_ref().unwrap_or(&eye);
    if !(1 <= r_tilde && r_tilde <= r && r <= n && r_tilde < n) {
        return Err(domain(format!(
            "need 1 <= r_tilde <= r <= n, got {r_tilde}, {r}, {n}"
        )));
    }
    let v1 = v.columns(0..r_tilde);
    let sigma = &tm.sigma;
    let per_seed: Vec<(Vec<f64>, bool)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let x_op = build_sketch(kind, n, r, trial_seed(seed, k))?;
            let x = apply_right(&eye, &x_op)?;
            let s = singular_values(&v1.t_matmul(&x)?)?;
            let eps = s.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
            if eps >= 1.0 {
                return Ok((Vec::new(), false));
            }
            let x_norm = singular_values(&x)?[0];
            let est = singular_values(&tm.a.matmul(&x)?)?;
            let margins = (1..=r_tilde)
                .map(|i| {
                    let (lo, hi) = embed_ratio_bounds(eps, sigma[r_tilde] / sigma[i - 1], x_norm)?;
                    Ok(slack(lo, est[i - 1] / sigma[i - 1], hi))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((margins, true))
        })
        .collect::<Result<_>>()?;
    let mut rep = BoundCheckReport::new("embedding-ratio", trials * r_tilde)
        .param("n", n as f64)
        .param("r", r as f64)
        .param("r_tilde", r_tilde as f64);
    rep.per_index_margins = vec![f64::INFINITY; r_tilde];
    let mut skipped = 0;
    for (margins, used) in per_seed {
        if !used {
            skipped += 1;
            continue;
        }
        for (w, m) in rep.per_index_margins.iter_mut().zip(&margins) {
            if *m < -DETERMINISTIC_RTOL {
                rep.violations += 1;
            }
            *w = w.min(*m);
        }
    }
    if skipped > 0 {
        rep.notes
            .push(format!("{skipped} seeds skipped: measured distortion >= 1"));
    }
    rep.trials = (trials - skipped) * r_tilde;
    rep.allowed_violations = 0.01 * rep.trials as f64;
    Ok(rep)
}

/// Coherence of `F·D·U` over seeded sign draws against the mixing bound at
/// failure probability `delta`.
pub fn mixing_coherence_check(
    u: &DenseMatrix,
    transform: TransformKind,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<BoundCheckReport> {
    let (m, r) = u.shape();
    let bound = mixing_coherence_bound(r, m, delta, transform.eta())?;
    coherence(u)?;
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let y = build_sketch(SketchKind::Srtt(transform), m, m, trial_seed(seed, k))?;
            // A full SRTT sample is a row permutation of F·D, which leaves
            // the coherence unchanged.
            coherence(&apply_left(&y, u)?)
        })
        .collect::<Result<_>>()?;
    let mut rep = BoundCheckReport::new("mixing-coherence", trials)
        .param("m", m as f64)
        .param("r", r as f64)
        .param("delta", delta)
        .param("bound", bound);
    rep.warn_if_few(trials);
    rep.violations = values.iter().filter(|&&c| c > bound).count();
    rep.allowed_violations = binomial_budget(trials, delta);
    rep.per_index_margins = vec![values
        .iter()
        .map(|c| bound - c)
        .fold(f64::INFINITY, f64::min)];
    Ok(rep)
}

/// Worst relative singular value error `max |σᵢ(ΘB) − σᵢ(B)|/σᵢ(B)` of a
/// left sketch with `r2` rows, per seed.
pub fn left_sketch_errors(
    b: &DenseMatrix,
    sigma: &[f64],
    kind: SketchKind,
    r2: usize,
    seeds: &[u64],
) -> Result<Vec<f64>> {
    seeds
        .par_iter()
        .map(|&s| {
            let y = build_sketch(kind, b.rows(), r2, s)?;
            let est = singular_values(&apply_left(&y, b)?)?;
            Ok(est
                .iter()
                .zip(sigma)
                .filter(|(_, t)| **t > 0.0)
                .map(|(e, t)| (e - t).abs() / t)
                .fold(0.0, f64::max))
        })
        .collect()
}

/// Mean Gaussian-sketch estimates for spectra sharing a head and differing
/// in their tails.
#[derive(Clone, Debug, Serialize)]
pub struct TailProfile {
    /// `‖Σ₂‖_F` of each tail variant.
    pub tail_norms: Vec<f64>,
    /// Mean `σᵢ(AX)`, `i = 1..r`, per tail variant.
    pub mean_curves: Vec<Vec<f64>>,
}

/// Reproduces the tail-effect experiment: each spectrum is `head` followed
/// by `tail_start · τ_k` (`τ = spectrum(tail)`) up to length `n`, sketched
/// with an `n × r` Gaussian embedding; returns mean estimates.
pub fn tail_effect_profile(
    head: &[f64],
    tails: &[crate::synthetic::SpectrumSpec],
    tail_start: f64,
    n: usize,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<TailProfile> {
    let h = head.len();
    if h == 0 || h >= n || r == 0 || r >= n {
        return Err(domain(format!(
            "need 0 < head < n and 0 < r < n, got {h}, {r}, {n}"
        )));
    }
    if !(tail_start > 0.0 && tail_start <= head[h - 1]) {
        return Err(domain("tail must start at or below the last head value"));
    }
    let mut tail_norms = Vec::new();
    let mut mean_curves = Vec::new();
    for spec in tails {
        let tau = crate::synthetic::spectrum(spec, n - h)?;
        let mut sigma = head.to_vec();
        sigma.extend(tau.iter().map(|v| tail_start * v));
        tail_norms.push(
            tau.iter()
                .map(|v| (tail_start * v).powi(2))
                .sum::<f64>()
                .sqrt(),
        );
        // Variants share seeds so differences reflect the tails only.
        let runs: Vec<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|k| gaussian_sketch_of_spectrum(&sigma, r, trial_seed(seed, k)))
            .collect::<Result<_>>()?;
        let mut mean = vec![0.0; r];
        for run in &runs {
            for (m, v) in mean.iter_mut().zip(run) {
                *m += v / trials as f64;
            }
        }
        mean_curves.push(mean);
    }
    Ok(TailProfile {
        tail_norms,
        mean_curves,
    })
}

/// Checks that heavier tails (larger `‖Σ₂‖_F`) give strictly larger mean
/// estimates at the last `last` indices of the profile.
pub fn tail_ordering_check(profile: &TailProfile, last: usize) -> BoundCheckReport {
    let r = profile.mean_curves.first().map_or(0, Vec::len);
    let mut order: Vec<usize> = (0..profile.tail_norms.len()).collect();
    order.sort_by(|&a, &b| profile.tail_norms[b].total_cmp(&profile.tail_norms[a]));
    let mut rep = BoundCheckReport::new("tail-ordering", last.min(r));
    for i in r.saturating_sub(last)..r {
        let margin = order
            .windows(2)
            .map(|w| {
                let (heavy, light) = (profile.mean_curves[w[0]][i], profile.mean_curves[w[1]][i]);
                (heavy - light) / heavy.abs().max(f64::MIN_POSITIVE)
            })
            .fold(f64::INFINITY, f64::min);
        if margin <= 0.0 {
            rep.violations += 1;
        }
        rep.per_index_margins.push(margin);
    }
    rep
}

/// Largest singular value of `M` by power iteration on `MᵀM`.
fn top_singular_value(mat: &DenseMatrix) -> f64 {
    let (n, r) = mat.shape();
    let mut v = vec![1.0 / (r as f64).sqrt(); r];
    let mut u = vec![0.0; n];
    let mut sigma = 0.0;
    for _ in 0..1000 {
        u.iter_mut().for_each(|x| *x = 0.0);
        for (j, vj) in v.iter().enumerate() {
            for (ui, mij) in u.iter_mut().zip(mat.col(j)) {
                *ui += mij * vj;
            }
        }
        let next_sigma = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = mat.col(j).iter().zip(&u).map(|(a, b)| a * b).sum();
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        if (next_sigma - sigma).abs() <= 1e-12 * next_sigma {
            return next_sigma;
        }
        sigma = next_sigma;
    }
    sigma
}

/// Mean leading Gaussian-sketch estimate for a single spike over a flat
/// noise floor, against the large-dimension limit.
pub fn spiked_check(
    n: usize,
    r: usize,
    spike: f64,
    noise: f64,
    trials: usize,
    rel_tol: f64,
    seed: u64,
) -> Result<BoundCheckReport> {
    if r == 0 || r >= n {
        return Err(domain(format!("need 0 < r < n, got r={r}, n={n}")));
    }
    let predicted = spiked_limit(spike, noise, n as f64 / r as f64)?;
    let estimates: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut g = gaussian_matrix(n, r, trial_seed(seed, k));
            let scale = 1.0 / (r as f64).sqrt();
            for j in 0..r {
                let col = g.col_mut(j);
                col[0] *= spike * scale;
                col[1..].iter_mut().for_each(|v| *v *= noise * scale);
            }
            top_singular_value(&g)
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / trials.max(1) as f64;
    let rel = (mean - predicted).abs() / predicted;
    let mut rep = BoundCheckReport::new("spiked", trials)
        .param("n", n as f64)
        .param("r", r as f64)
        .param("spike", spike)
        .param("noise", noise)
        .param("predicted", predicted)
        .param("mean_estimate", mean)
        .param("relative_error", rel);
    rep.violations = (rel > rel_tol) as usize;
    rep.per_index_margins = vec![rel_tol - rel];
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::SpectrumSpec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn mp_bracket_values() {
        assert_eq!(mp_expectation_bounds(400, 100).unwrap(), (10.0, 30.0));
        let (lo, hi) = mp_expectation_bounds(49, 49).unwrap();
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 14.0);
        assert!(mp_expectation_bounds(3, 4).is_err());
    }

    #[test]
    fn mp_tail_values() {
        assert_eq!(mp_tail_probability(0.0).unwrap(), 1.0);
        let p = mp_tail_probability(4.0).unwrap();
        assert!(close(p, 1.0 / 8f64.exp(), 1e-15));
        assert!((p - 3.35e-4).abs() < 1e-6);
        assert!(mp_tail_probability(-1.0).is_err());
    }

    #[test]
    fn gauss_ratio_bracket_values() {
        let b = gauss_ratio_bounds(1, 100, 1000, 0.0, 0.0).unwrap();
        assert!(close(b.lower, 0.9, 1e-15) && close(b.upper, 2.0, 1e-15));
        let b = gauss_ratio_bounds(25, 25, 100, 0.1, 2.0).unwrap();
        assert!(close(b.lower, -0.4, 1e-15));
        assert!(b.lower <= 0.0);
        assert!(gauss_ratio_bounds(0, 5, 10, 0.0, 0.0).is_err());
        assert!(gauss_ratio_bounds(6, 5, 10, 0.0, 0.0).is_err());
        assert!(gauss_ratio_bounds(2, 5, 10, 1.5, 0.0).is_err());
    }

    #[test]
    fn gauss_ratio_matches_independent_expression() {
        for (i, r, n, tr, t) in [
            (3, 10, 40, 0.2, 1.0),
            (7, 7, 9, 1.0, 0.0),
            (1, 50, 51, 0.01, 3.0),
        ] {
            let b = gauss_ratio_bounds(i, r, n, tr, t).unwrap();
            let (i, r, n) = (i as f64, r as f64, n as f64);
            let lower = (r.sqrt() - i.sqrt() - t) / r.sqrt();
            let upper = (r.sqrt()
                + (r - i + 1.0).sqrt()
                + tr * (r.sqrt() + (n - r).sqrt())
                + t * (1.0 + tr))
                / r.sqrt();
            assert!(close(b.lower, lower, 1e-12) && close(b.upper, upper, 1e-12));
        }
    }

    #[test]
    fn embed_bracket_values() {
        assert_eq!(embed_ratio_bounds(0.5, 0.0, 3.0).unwrap(), (0.5, 1.5));
        let (lo, hi) = embed_ratio_bounds(0.0, 0.5, 2.0).unwrap();
        assert_eq!(lo, 1.0);
        assert!(close(hi, 2f64.sqrt(), 1e-15));
        assert!(embed_ratio_bounds(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn spiked_values() {
        let v = spiked_limit(2.0, 1.0, 1.0).unwrap();
        assert!(close(v, 2.0 * (4.0f64 / 3.0).sqrt(), 1e-15));
        assert!((v - 2.3094).abs() < 1e-4);
        assert_eq!(spiked_limit(1.2, 1.0, 1.0).unwrap(), 2.0);
        assert!(close(spiked_limit(3.0, 1.0, 1e-14).unwrap(), 3.0, 1e-13));
        assert!(spiked_limit(0.5, 1.0, 1.0).is_err());
        // continuity at the phase transition
        let c: f64 = 2.0;
        let edge = (1.0 + c.sqrt()).sqrt();
        let above = spiked_limit(edge + 1e-9, 1.0, c).unwrap();
        assert!(close(above, 1.0 + c.sqrt(), 1e-6));
    }

    #[test]
    fn srtt_samples() {
        let need = srtt_required_samples(50, 4096, 0.3, 0.1, 2.0).unwrap();
        let SampleRequirement::Infeasible(v) = need else {
            panic!("expected infeasible, got {need:?}");
        };
        // independent evaluation
        let mix = 50f64.sqrt() + (8.0 * (4096.0f64 / 0.1).ln()).sqrt();
        let want = 12.0 / 0.09 * mix.powi(2) * (500.0f64).ln();
        assert_eq!(v, want.ceil() as u64);
        assert!((v as f64 - 219_900.0).abs() / 219_900.0 < 1e-3);
        let two = srtt_sample_bound(20, 1000, 0.2, 0.05, 2.0).unwrap();
        let one = srtt_sample_bound(20, 1000, 0.2, 0.05, 1.0).unwrap();
        assert!(close(one * 2.0, two, 1e-15));
        let tighter = srtt_sample_bound(20, 1000, 0.1, 0.05, 2.0).unwrap();
        assert!(tighter > two);
        assert!(srtt_required_samples(20, 1000, 0.4, 0.05, 2.0).is_err());
        assert!(srtt_required_samples(20, 1000, 0.2, 1.0, 2.0).is_err());
        assert!(srtt_required_samples(20, 1000, 0.2, 0.1, 3.0).is_err());
        assert!(matches!(
            srtt_required_samples(1, 1 << 40, 0.3, 0.5, 1.0).unwrap(),
            SampleRequirement::Feasible(_)
        ));
    }

    #[test]
    fn mixing_bound_values() {
        let b = mixing_coherence_bound(1, 1024, 1.0, 2.0).unwrap();
        let want = 2.0 / 1024.0 * (1.0 + (8.0 * 1024f64.ln()).sqrt()).powi(2);
        assert!(close(b, want, 1e-14));
        let mut last = f64::INFINITY;
        for m in [64, 128, 1024, 1 << 14] {
            let b = mixing_coherence_bound(4, m, 0.01, 2.0).unwrap();
            assert!(b < last);
            last = b;
        }
        assert!(mixing_coherence_bound(5, 4, 0.1, 1.0).is_err());
    }

    #[test]
    fn binomial_budget_values() {
        assert_eq!(binomial_budget(100, 0.0), 0.0);
        assert!(close(
            binomial_budget(100, 0.25),
            25.0 + 3.0 * 18.75f64.sqrt(),
            1e-14
        ));
    }

    #[test]
    fn sandwich_on_diagonal_with_identity_is_tight() {
        let a = DenseMatrix::from_diagonal(6, 6, &[5.0, 4.0, 3.0, 2.0, 1.0, 0.5]).unwrap();
        let rep = verify_deterministic_sandwich(&a, &DenseMatrix::identity(6)).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(
            rep.per_index_margins.iter().all(|m| m.abs() < 1e-12),
            "{:?}",
            rep.per_index_margins
        );
    }

    #[test]
    fn sandwich_on_exact_rank() {
        let sigma = [3.0, 2.0, 1.0];
        let a = DenseMatrix::from_diagonal(10, 8, &sigma).unwrap();
        let g = gaussian_matrix(8, 3, 4);
        let rep = verify_deterministic_sandwich(&a, &g).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.per_index_margins.len(), 3);
    }

    #[test]
    fn sandwich_random_pairs() {
        let rep = sandwich_suite(20, 40, 12, 7).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.passed());
    }

    #[test]
    fn sandwich_rejects_bad_shapes() {
        assert!(verify_deterministic_sandwich(
            &DenseMatrix::identity(4),
            &DenseMatrix::zeros(3, 2)
        )
        .is_err());
        assert!(verify_deterministic_sandwich(
            &DenseMatrix::zeros(3, 4),
            &DenseMatrix::zeros(4, 2)
        )
        .is_err());
    }

    #[test]
    fn mp_checks_small() {
        let rep = mp_expectation_check(400, 100, 60, 1).unwrap();
        assert!(rep.passed());
        assert!(!rep.notes.is_empty());
        let rep = mp_tail_check(400, 100, 4.0, 10, 1).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.notes[0].contains("noise floor"));
    }

    #[test]
    fn tail_profile_identical_tails_agree() {
        let head: Vec<f64> = (1..=20).map(|i| 1.0 / i as f64).collect();
        let tails = vec![SpectrumSpec::fast_exp(), SpectrumSpec::fast_exp()];
        let p = tail_effect_profile(&head, &tails, 0.05, 200, 19, 50, 3).unwrap();
        assert_eq!(p.mean_curves[0], p.mean_curves[1]);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let g = gaussian_matrix(80, 30, 2);
        let want = singular_values(&g).unwrap()[0];
        assert!(close(top_singular_value(&g), want, 1e-9));
    }

    #[test]
    fn reports_are_deterministic() {
        let a = gauss_ratio_check(
            &(1..=60).map(|i| (i as f64).powi(-3)).collect::<Vec<_>>(),
            10,
            8,
            20,
            5,
        )
        .unwrap();
        let b = gauss_ratio_check(
            &(1..=60).map(|i| (i as f64).powi(-3)).collect::<Vec<_>>(),
            10,
            8,
            20,
            5,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
