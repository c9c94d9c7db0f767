//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset.

use std::process::ExitCode;
use std::time::Instant;

use sketchrank_core::linalg::{qr_r, qr_r_pivoted, singular_values};
use sketchrank_core::rangefinder::{
    choose_rank_from_bound, qb_error, qb_error_bound, rangefinder_qb, re_rangefinder,
};
use sketchrank_core::rank::{count_above_threshold, estimate_rank, gn_free_rank, two_sided_sketch};
use sketchrank_core::rng::trial_seed;
use sketchrank_core::synthetic::{
    haar_orthonormal, make_test_factors, make_test_matrix, spectrum, true_eps_rank,
};
use sketchrank_core::theory::{
    gauss_ratio_check, left_sketch_errors, mp_tail_check, sandwich_suite, spiked_check,
    tail_effect_profile, tail_ordering_check,
};
use sketchrank_core::{
    DenseMatrix, FactorKind, FixedPrecisionConfig, RankEstimateConfig, RankStatus, Result,
    SketchKind, SpectrumSpec, TransformKind,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// `σᵢ` for 1-based `i`, with `σ₀ = ∞` and zeros past the end.
fn sigma_at(sigma: &[f64], i: usize) -> f64 {
    match i {
        0 => f64::INFINITY,
        i if i > sigma.len() => 0.0,
        i => sigma[i - 1],
    }
}

fn c1_sandwich() -> Result<Outcome> {
    let rep = sandwich_suite(200, 100, 30, 101)?;
    let worst = rep
        .per_index_margins
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    outcome(
        rep.violations == 0,
        format!(
            "200 pairs, {} violations, worst margin {worst:.2e}",
            rep.violations
        ),
    )
}

fn c2_gauss_ratio() -> Result<Outcome> {
    let sigma = spectrum(&SpectrumSpec::fast_poly(), 500)?;
    let rep = gauss_ratio_check(&sigma, 50, 45, 500, 202)?;
    let worst = rep
        .per_index_margins
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    outcome(
        rep.passed(),
        format!(
            "500 seeds, {} of 45 indices outside, worst margin {worst:.3}",
            rep.violations
        ),
    )
}

fn c3_mp_support() -> Result<Outcome> {
    let rep = mp_tail_check(400, 100, 4.0, 10_000, 303)?;
    outcome(
        rep.passed(),
        format!(
            "10000 draws, {} outside, budget {:.2}",
            rep.violations, rep.allowed_violations
        ),
    )
}

fn c4_left_sketch() -> Result<Outcome> {
    let (m, n) = (10_000, 500);
    let sigma: Vec<f64> = (1..=n).map(|i| (i as f64).powi(-3)).collect();
    let u = haar_orthonormal(m, n, 404)?;
    let b = DenseMatrix::from_fn(m, n, |i, j| u.get(i, j) * sigma[j]);
    let b = b.matmul(&haar_orthonormal(n, n, 405)?.transpose())?;
    let seeds: Vec<u64> = (0..10).map(|k| trial_seed(406, k)).collect();
    let errs = left_sketch_errors(
        &b,
        &sigma,
        SketchKind::Srtt(TransformKind::Dct),
        1000,
        &seeds,
    )?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let ok = errs.iter().filter(|e| **e < 0.5).count();
    outcome(
        ok == 10,
        format!("{ok}/10 seeds below 0.5, worst relative error {worst:.3}"),
    )
}

fn c5_desiderata() -> Result<Outcome> {
    let n = 2000;
    let mut worst = 1.0f64;
    let mut details = Vec::new();
    for (name, spec) in [
        ("se", SpectrumSpec::slow_exp()),
        ("fp", SpectrumSpec::fast_poly()),
    ] {
        let a = make_test_matrix(n, n, &spec, FactorKind::HaarIncoherent, 505)?;
        let sigma = spectrum(&spec, n)?;
        for eps in [1e-2, 1e-4, 1e-6] {
            let rank = true_eps_rank(&spec, n, eps)?;
            let mut good = 0;
            for s in 0..100 {
                let cfg = RankEstimateConfig::new(eps, 2 * rank).with_seed(trial_seed(506, s));
                let r = estimate_rank(&a, &cfg)?.r_hat;
                if sigma_at(&sigma, r + 1) < 10.0 * eps && sigma_at(&sigma, r) > 0.1 * eps {
                    good += 1;
                }
            }
            worst = worst.min(good as f64 / 100.0);
            details.push(format!("{name}/{eps:.0e}: {good}%"));
        }
    }
    outcome(worst >= 0.95, details.join(", "))
}

fn c6_gap() -> Result<Outcome> {
    let n = 1000;
    let spec = SpectrumSpec::gapped();
    let mut counts = Vec::new();
    for (factors, right) in [
        (
            FactorKind::HaarIncoherent,
            SketchKind::Srtt(TransformKind::Dct),
        ),
        (
            FactorKind::CoherentDiagonal,
            SketchKind::Hrtt(TransformKind::Dct),
        ),
    ] {
        let a = make_test_matrix(n, n, &spec, factors, 606)?;
        let mut hits = 0;
        for s in 0..100 {
            let cfg = RankEstimateConfig::new(1e-2, 210)
                .with_seed(trial_seed(607, s))
                .with_right_kind(right);
            if estimate_rank(&a, &cfg)?.r_hat == 100 {
                hits += 1;
            }
        }
        counts.push(hits);
    }
    outcome(
        counts[0] >= 99 && counts[1] >= 95,
        format!(
            "incoherent/srtt {}/100, coherent/hrtt {}/100",
            counts[0], counts[1]
        ),
    )
}

fn c7_fixed_precision() -> Result<Outcome> {
    let n = 1000;
    let spec = SpectrumSpec::slow_exp();
    let a = make_test_matrix(n, n, &spec, FactorKind::HaarIncoherent, 707)?;
    let sigma = spectrum(&spec, n)?;
    let mut ok = true;
    let mut details = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3] {
        let exact = choose_rank_from_bound(&sigma, n, eps, 10).expect("exact spectrum meets eps");
        let (mut met, mut small, mut max_rank) = (0, 0, 0);
        for s in 0..100 {
            let cfg = FixedPrecisionConfig::new(eps, 50).with_seed(trial_seed(708, s));
            let (qb, rep) = re_rangefinder(&a, &cfg)?;
            if qb_error(&a, &qb)? <= eps {
                met += 1;
            }
            if rep.status == RankStatus::Converged && rep.r_hat as f64 <= 1.1 * exact as f64 + 5.0 {
                small += 1;
            }
            max_rank = max_rank.max(rep.r_hat);
        }
        ok &= met >= 95 && small == 100;
        details.push(format!(
            "eps {eps:.0e}: met {met}%, rank <= {max_rank} (exact {exact})"
        ));
    }
    outcome(ok, details.join(", "))
}

fn c8_rangefinder_bound() -> Result<Outcome> {
    let (n, r, p) = (1000, 30, 10);
    let spec = SpectrumSpec::fast_poly();
    let tm = make_test_factors(n, n, &spec, FactorKind::HaarIncoherent, 808)?;
    let bound = qb_error_bound(&tm.sigma, r, p);
    let mut total = 0.0;
    for s in 0..200 {
        let qb = rangefinder_qb(&tm.a, r, p, SketchKind::Gaussian, trial_seed(809, s))?;
        total += qb_error(&tm.a, &qb)?;
    }
    let mean = total / 200.0;
    outcome(
        mean <= bound,
        format!("mean residual {mean:.4e} vs bound {bound:.4e}"),
    )
}

fn c9_tail_effect() -> Result<Outcome> {
    let (n, head_len) = (1000, 20);
    let head: Vec<f64> = (0..head_len)
        .map(|i| 10f64.powf(-(i as f64) / 19.0))
        .collect();
    let tails = [
        SpectrumSpec::PolyDecay { p: 0.0 },
        SpectrumSpec::PolyDecay { p: 0.5 },
        SpectrumSpec::ExpDecay { q: 0.5 },
    ];
    let last = head[head_len - 1];
    let profile = tail_effect_profile(&head, &tails, last, n, 19, 1000, 909)?;
    let order = tail_ordering_check(&profile, 3);

    let gapped = tail_effect_profile(&head, &tails, last * 1e-4, n, 25, 1000, 910)?;
    let ratios: Vec<f64> = gapped
        .mean_curves
        .iter()
        .map(|c| c[head_len - 1] / c[head_len])
        .collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let worst = order
        .per_index_margins
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    outcome(
        order.violations == 0 && min_ratio > 1e2,
        format!("ordering margin {worst:.3e} at last 3 indices, smallest gap ratio {min_ratio:.1}"),
    )
}

fn c10_spiked() -> Result<Outcome> {
    let rep = spiked_check(4000, 2000, 4.0, 1.0, 50, 0.1, 1010)?;
    outcome(
        rep.passed(),
        format!(
            "mean {:.4} vs limit {:.4} (relative error {:.3})",
            rep.params["mean_estimate"], rep.params["predicted"], rep.params["relative_error"]
        ),
    )
}

fn c11_free_rank() -> Result<Outcome> {
    let n = 1000;
    let a = make_test_matrix(
        n,
        n,
        &SpectrumSpec::gapped(),
        FactorKind::HaarIncoherent,
        1111,
    )?;
    let eps = 1e-2;
    let truth = count_above_threshold(&singular_values(&a)?, eps);
    let (mut agree, mut agree_unpivoted) = (0, 0);
    for s in 0..100 {
        let cfg = RankEstimateConfig::new(eps, 210).with_seed(trial_seed(1112, s));
        let sk = two_sided_sketch(&a, &cfg)?;
        if gn_free_rank(&qr_r_pivoted(&sk)?, eps)? == truth {
            agree += 1;
        }
        if gn_free_rank(&qr_r(&sk)?, eps)? == truth {
            agree_unpivoted += 1;
        }
    }
    outcome(
        agree >= 95,
        format!("pivoted {agree}/100 agree with rank {truth} (unpivoted {agree_unpivoted}/100)"),
    )
}

fn c12_complexity() -> Result<Outcome> {
    let m = 4000;
    let spec = SpectrumSpec::slow_exp();
    let mut times = Vec::new();
    for n in [1000, 2000, 4000] {
        let a = make_test_matrix(m, n, &spec, FactorKind::HaarIncoherent, 1212)?;
        let cfg = RankEstimateConfig::new(1e-2, 100).with_seed(1213);
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let t = Instant::now();
            estimate_rank(&a, &cfg)?;
            best = best.min(t.elapsed().as_secs_f64());
        }
        times.push(best);
    }
    let ratios: Vec<f64> = times.windows(2).map(|w| w[1] / w[0]).collect();
    outcome(
        ratios.iter().all(|r| *r < 2.6),
        format!(
            "times {:.3}/{:.3}/{:.3} s, ratios {:.2}, {:.2}",
            times[0], times[1], times[2], ratios[0], ratios[1]
        ),
    )
}

type Criterion = (usize, &'static str, fn() -> Result<Outcome>);

const CRITERIA: [Criterion; 12] = [
    (1, "deterministic sandwich", c1_sandwich),
    (2, "gaussian ratio brackets", c2_gauss_ratio),
    (3, "extreme singular value support", c3_mp_support),
    (4, "left sketch accuracy", c4_left_sketch),
    (5, "rank estimator desiderata", c5_desiderata),
    (6, "exact gap recovery", c6_gap),
    (7, "fixed-precision qb", c7_fixed_precision),
    (8, "rangefinder expectation bound", c8_rangefinder_bound),
    (9, "tail-effect ordering", c9_tail_effect),
    (10, "spiked limit", c10_spiked),
    (11, "free rank from r diagonal", c11_free_rank),
    (12, "complexity scaling", c12_complexity),
];

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {id:>2} {name}: {detail} [{secs:.1} s]",
            if pass { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
