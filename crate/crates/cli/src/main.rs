//! `sketchrank`: rank estimation, fixed-precision QB, test-matrix
//! generation, bound verification and timing from the command line.
//!
//! Exit codes: 0 on success, 1 on usage, I/O or configuration errors (and
//! failed bound checks), 2 when the estimator stopped at its rank cap.

mod report;
mod verify;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sketchrank_core::io::{read_matrix, write_matrix, MatrixFormat};
use sketchrank_core::linalg::singular_values;
use sketchrank_core::rangefinder::{qb_error, re_rangefinder};
use sketchrank_core::rank::{estimate_rank, estimate_rank_adaptive};
use sketchrank_core::synthetic::{family, make_test_matrix, spectrum};
use sketchrank_core::{
    DenseMatrix, FixedPrecisionConfig, RankEstimateConfig, RankStatus, SketchKind, SvMethod,
};

use report::{ConfigEcho, FactorFiles, Report, SCHEMA_VERSION};

#[derive(Parser)]
#[command(
    name = "sketchrank",
    version,
    about = "Numerical rank estimation by two-sided sketching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the numerical rank of a matrix file.
    Estimate(EstimateArgs),
    /// Fixed-precision QB factorization of a matrix file.
    Qb(QbArgs),
    /// Generate a synthetic test matrix and its spectrum.
    Gen(GenArgs),
    /// Run Monte-Carlo and deterministic checks of the sketching bounds.
    Verify(VerifyArgs),
    /// Time the estimator over a grid of r1 values.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct SketchArgs {
    /// Rank threshold (estimate) or Frobenius target (qb).
    #[arg(long)]
    eps: f64,
    /// Initial rank bound.
    #[arg(long)]
    r1: usize,
    /// Right sketch: gaussian, srtt, srtt-hadamard, hrtt, hrtt-hadamard.
    #[arg(long, default_value = "srtt")]
    sketch: SketchKind,
    /// Left sketch, same choices as --sketch.
    #[arg(long, default_value = "srtt")]
    left_sketch: SketchKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of extra right-sketch columns.
    #[arg(long, default_value_t = 0.1)]
    oversample: f64,
    /// Left sketch rows per right sketch column.
    #[arg(long, default_value_t = 2)]
    r2_factor: usize,
    /// Maximum number of r1 doublings.
    #[arg(long, default_value_t = 6)]
    max_doublings: usize,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    sketch: SketchArgs,
    /// Double r1 until the estimate falls below it.
    #[arg(long)]
    adaptive: bool,
    #[arg(long, value_enum, default_value = "full-svd")]
    sv_method: SvMethodArg,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QbArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    sketch: SketchArgs,
    /// Rangefinder oversampling.
    #[arg(long, default_value_t = 10)]
    p: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write Q as a raw matrix file.
    #[arg(long)]
    q_out: Option<PathBuf>,
    /// Write B as a raw matrix file.
    #[arg(long)]
    b_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// sp, fp, se, fe, gap-coherent or gap-incoherent.
    #[arg(long)]
    family: String,
    /// Rows; defaults to n.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// raw, mtx or mm-coordinate; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<MatrixFormat>,
}

#[derive(Args)]
struct VerifyArgs {
    /// sandwich, mp, gauss-ratio, srtt, tails, spiked or all.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override every trial count.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, conflicts_with = "family", required_unless_present = "family")]
    input: Option<PathBuf>,
    /// Generate the input from a family instead of reading a file.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long)]
    m: Option<usize>,
    /// Comma-separated r1 values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    r1: Vec<usize>,
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long, default_value = "srtt")]
    sketch: SketchKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timed runs per grid point; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SvMethodArg {
    FullSvd,
    QrDiag,
}

impl From<SvMethodArg> for SvMethod {
    fn from(m: SvMethodArg) -> Self {
        match m {
            SvMethodArg::FullSvd => SvMethod::FullSvd,
            SvMethodArg::QrDiag => SvMethod::QrDiag,
        }
    }
}

fn rank_config(s: &SketchArgs, sv_method: SvMethod) -> RankEstimateConfig {
    RankEstimateConfig {
        eps: s.eps,
        r1: s.r1,
        oversample_frac: s.oversample,
        r2_factor: s.r2_factor,
        right_kind: s.sketch,
        left_kind: s.left_sketch,
        sv_method,
        seed: s.seed,
        max_doublings: s.max_doublings,
    }
}

fn echo(s: &SketchArgs, p: Option<usize>, adaptive: bool, sv_method: SvMethod) -> ConfigEcho {
    ConfigEcho {
        eps: s.eps,
        r1: s.r1,
        p,
        seed: s.seed,
        right_sketch: s.sketch.to_string(),
        left_sketch: s.left_sketch.to_string(),
        oversample_frac: s.oversample,
        r2_factor: s.r2_factor,
        max_doublings: s.max_doublings,
        adaptive,
        sv_method: match sv_method {
            SvMethod::FullSvd => "full-svd",
            SvMethod::QrDiag => "qr-diag",
        }
        .to_string(),
    }
}

fn load(path: &Path) -> Result<DenseMatrix> {
    read_matrix(path).with_context(|| format!("reading {}", path.display()))
}

fn emit_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => {
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?
        }
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{text}")?;
        }
    }
    Ok(())
}

fn status_code(status: RankStatus) -> u8 {
    match status {
        RankStatus::Converged => 0,
        RankStatus::HitCap => {
            eprintln!("warning: rank cap reached; the estimate is a lower bound");
            2
        }
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<u8> {
    let a = load(&args.input)?;
    let method = SvMethod::from(args.sv_method);
    let cfg = rank_config(&args.sketch, method);
    let start = Instant::now();
    let rep = if args.adaptive {
        estimate_rank_adaptive(&a, &cfg)?
    } else {
        estimate_rank(&a, &cfg)?
    };
    let mut report = Report::from_rank(
        "estimate",
        args.input.display().to_string(),
        a.shape(),
        echo(&args.sketch, None, args.adaptive, method),
        &rep,
    );
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    emit_json(&report, args.out.as_deref())?;
    Ok(status_code(rep.status))
}

fn cmd_qb(args: QbArgs) -> Result<u8> {
    let a = load(&args.input)?;
    let s = &args.sketch;
    let cfg = FixedPrecisionConfig {
        eps: s.eps,
        p: args.p,
        r1: s.r1,
        seed: s.seed,
        oversample_frac: s.oversample,
        r2_factor: s.r2_factor,
        right_kind: s.sketch,
        left_kind: s.left_sketch,
        max_doublings: s.max_doublings,
    };
    let start = Instant::now();
    let (qb, rep) = re_rangefinder(&a, &cfg)?;
    let elapsed = start.elapsed();
    let mut report = Report::from_rank(
        "qb",
        args.input.display().to_string(),
        a.shape(),
        echo(s, Some(args.p), true, SvMethod::FullSvd),
        &rep,
    );
    report.wall_time_ms = elapsed.as_secs_f64() * 1e3;
    report.achieved_residual = Some(qb_error(&a, &qb)?);
    report.factor_rank = Some(qb.rank);
    if let (Some(q), Some(b)) = (&args.q_out, &args.b_out) {
        report.factors = Some(FactorFiles {
            q: q.display().to_string(),
            b: b.display().to_string(),
        });
    }
    if let Some(q) = &args.q_out {
        write_matrix(q, &qb.q, MatrixFormat::RawF64)
            .with_context(|| format!("writing {}", q.display()))?;
    }
    if let Some(b) = &args.b_out {
        write_matrix(b, &qb.b, MatrixFormat::RawF64)
            .with_context(|| format!("writing {}", b.display()))?;
    }
    emit_json(&report, args.out.as_deref())?;
    Ok(status_code(rep.status))
}

/// Sidecar spectrum file written next to a generated matrix.
fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".sigma.csv");
    PathBuf::from(s)
}

fn cmd_gen(args: GenArgs) -> Result<u8> {
    let (spec, factors) = family(&args.family)?;
    let m = args.m.unwrap_or(args.n);
    let a = make_test_matrix(m, args.n, &spec, factors, args.seed)?;
    let format = args
        .format
        .unwrap_or_else(|| MatrixFormat::from_path(&args.out));
    write_matrix(&args.out, &a, format)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let side = sidecar_path(&args.out);
    let mut w =
        csv::Writer::from_path(&side).with_context(|| format!("writing {}", side.display()))?;
    w.write_record(["index", "sigma"])?;
    for (i, v) in spectrum(&spec, args.n)?.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    eprintln!(
        "wrote {m}x{} matrix to {} and spectrum to {}",
        args.n,
        args.out.display(),
        side.display()
    );
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let names: Vec<&str> = if args.suite == "all" {
        verify::SUITES.to_vec()
    } else {
        vec![args.suite.as_str()]
    };
    let mut checks = Vec::new();
    for name in names {
        checks.extend(verify::run_suite(name, args.seed, args.trials)?);
    }
    for c in &checks {
        for note in &c.notes {
            eprintln!("warning: {}: {note}", c.name);
        }
        eprintln!(
            "{} {}: {} violations (allowed {:.2})",
            if c.passed() { "pass" } else { "FAIL" },
            c.name,
            c.violations,
            c.allowed_violations
        );
    }
    let passed = checks.iter().all(|c| c.passed());
    let report = verify::VerifyReport {
        schema_version: SCHEMA_VERSION,
        command: "verify",
        suite: args.suite,
        seed: args.seed,
        trials: args.trials,
        passed,
        checks,
    };
    emit_json(&report, args.out.as_deref())?;
    if !passed {
        eprintln!("error: bound checks failed");
    }
    Ok(if passed { 0 } else { 1 })
}

#[derive(Serialize)]
struct BenchRow {
    r1: usize,
    wall_time_ms: f64,
    r_hat: usize,
    status: RankStatus,
    /// `σ_{r̂+1}/ε` from the exact spectrum; empty when unknown.
    sigma_next_over_eps: Option<f64>,
    sigma_rhat_over_eps: Option<f64>,
}

fn cmd_bench(args: BenchArgs) -> Result<u8> {
    let mut grid = args.r1.clone();
    if grid.is_empty() {
        bail!("the r1 grid is empty");
    }
    if args.repeats == 0 {
        bail!("--repeats must be positive");
    }
    grid.sort_unstable();
    let (a, sigma) = match (&args.input, &args.family) {
        (Some(path), _) => {
            let a = load(path)?;
            let sigma = (a.rows().min(a.cols()) <= 4000)
                .then(|| singular_values(&a).map(|s| s.into_vec()))
                .transpose()?;
            (a, sigma)
        }
        (None, Some(name)) => {
            let (spec, factors) = family(name)?;
            let a = make_test_matrix(args.m.unwrap_or(args.n), args.n, &spec, factors, args.seed)?;
            (a, Some(spectrum(&spec, args.n)?.into_vec()))
        }
        (None, None) => bail!("either --input or --family is required"),
    };
    let sigma_at = |i: usize| -> Option<f64> {
        let s = sigma.as_ref()?;
        Some(match i {
            0 => f64::INFINITY,
            i if i > s.len() => 0.0,
            i => s[i - 1],
        })
    };
    let mut rows = Vec::new();
    for &r1 in &grid {
        let cfg = RankEstimateConfig::new(args.eps, r1)
            .with_seed(args.seed)
            .with_right_kind(args.sketch);
        let mut best = f64::INFINITY;
        let mut rep = None;
        for _ in 0..args.repeats {
            let t = Instant::now();
            let r = estimate_rank(&a, &cfg)?;
            best = best.min(t.elapsed().as_secs_f64() * 1e3);
            rep = Some(r);
        }
        let rep = rep.expect("at least one repeat");
        rows.push(BenchRow {
            r1,
            wall_time_ms: best,
            r_hat: rep.r_hat,
            status: rep.status,
            sigma_next_over_eps: sigma_at(rep.r_hat + 1).map(|v| v / args.eps),
            sigma_rhat_over_eps: sigma_at(rep.r_hat).map(|v| v / args.eps),
        });
    }
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("writing {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(0)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SKETCHRANK_THREADS") {
        let n: usize =
            v.parse().ok().filter(|n| *n > 0).with_context(|| {
                format!("SKETCHRANK_THREADS must be a positive integer, got '{v}'")
            })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Qb(a) => cmd_qb(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
