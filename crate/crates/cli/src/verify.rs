use anyhow::{bail, Result};
use serde::Serialize;
use sketchrank_core::rng::derive_seed;
use sketchrank_core::synthetic::{make_test_factors, spectrum};
use sketchrank_core::theory::{
    embedding_ratio_check, gauss_ratio_check, mixing_coherence_check, mp_expectation_check,
    mp_tail_check, sandwich_suite, spiked_check, tail_effect_profile, tail_ordering_check,
    BoundCheckReport,
};
use sketchrank_core::{DenseMatrix, FactorKind, SketchKind, SpectrumSpec, TransformKind};

pub const SUITES: [&str; 6] = ["sandwich", "mp", "gauss-ratio", "srtt", "tails", "spiked"];

#[derive(Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub suite: String,
    pub seed: u64,
    pub trials: Option<usize>,
    pub passed: bool,
    pub checks: Vec<BoundCheckReport>,
}

fn or(trials: Option<usize>, default: usize) -> usize {
    trials.unwrap_or(default)
}

/// Runs one named suite at desk scale. `trials` overrides every default
/// trial count in the suite.
pub fn run_suite(name: &str, seed: u64, trials: Option<usize>) -> Result<Vec<BoundCheckReport>> {
    let s = derive_seed(seed, name);
    Ok(match name {
        "sandwich" => vec![sandwich_suite(or(trials, 200), 100, 30, s)?],
        "mp" => vec![
            mp_expectation_check(400, 100, or(trials, 500), s)?,
            mp_tail_check(400, 100, 4.0, or(trials, 10_000), s ^ 1)?,
        ],
        "gauss-ratio" => {
            let sigma = spectrum(&SpectrumSpec::fast_poly(), 500)?;
            vec![gauss_ratio_check(&sigma, 50, 45, or(trials, 500), s)?]
        }
        "srtt" => {
            let e1 = DenseMatrix::from_fn(1024, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
            let coherent = DenseMatrix::from_fn(1024, 8, |i, j| if i == j { 1.0 } else { 0.0 });
            let tm = make_test_factors(
                512,
                512,
                &SpectrumSpec::slow_exp(),
                FactorKind::HaarIncoherent,
                s,
            )?;
            vec![
                mixing_coherence_check(&e1, TransformKind::Dct, 0.01, or(trials, 100), s)?,
                mixing_coherence_check(
                    &coherent,
                    TransformKind::Hadamard,
                    0.01,
                    or(trials, 100),
                    s ^ 1,
                )?,
                embedding_ratio_check(
                    &tm,
                    10,
                    40,
                    SketchKind::Srtt(TransformKind::Dct),
                    or(trials, 100),
                    s ^ 2,
                )?,
            ]
        }
        "tails" => {
            let head: Vec<f64> = (0..20).map(|i| 10f64.powf(-(i as f64) / 19.0)).collect();
            let tails = [
                SpectrumSpec::PolyDecay { p: 0.0 },
                SpectrumSpec::PolyDecay { p: 0.5 },
                SpectrumSpec::ExpDecay { q: 0.5 },
            ];
            let profile =
                tail_effect_profile(&head, &tails, head[19], 1000, 19, or(trials, 1000), s)?;
            vec![tail_ordering_check(&profile, 3)]
        }
        "spiked" => vec![spiked_check(4000, 2000, 4.0, 1.0, or(trials, 50), 0.1, s)?],
        other => bail!(
            "unknown suite '{other}' (expected one of {}, all)",
            SUITES.join(", ")
        ),
    })
}
