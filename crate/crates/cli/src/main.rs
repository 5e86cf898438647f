//! `ewens-hoeffding`: sampling, matrix generation, exact verification,
//! simulation, bound tables and the canned experiments.
//!
//! Exit codes: 0 success, 1 verification or domination failure, 2 usage or
//! input error, 3 infeasible sampling.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ewens_hoeffding::bounds::{BoundInputs, TailCurve};
use ewens_hoeffding::ewens::DEFAULT_ITERATION_CAP;
use ewens_hoeffding::experiment::{self, ExperimentPreset};
use ewens_hoeffding::io::{self as fmt, MatrixSidecar, PermutationBatch, SCHEMA_VERSION};
use ewens_hoeffding::montecarlo::{
    self, B1Mode, GeneratorSpec, MatrixSource, SimulationConfig, SimulationSummary,
};
use ewens_hoeffding::oracle;
use ewens_hoeffding::rng::{substream, MATRIX_STREAM};
use ewens_hoeffding::{Error, EwensParams, SamplerKind, TestMatrixGenerator};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ewens-hoeffding",
    version,
    about = "Concentration bounds for Hoeffding statistics of Ewens permutations"
)]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo worker threads; 1 is the single-threaded audit mode.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Output file (sample, matrix-gen, verify, bounds-table).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output directory (simulate, experiment).
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Crp,
    #[value(name = "ar", alias = "accept-reject", alias = "accept_reject")]
    Ar,
}

impl From<SamplerArg> for SamplerKind {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Crp => SamplerKind::Crp,
            SamplerArg::Ar => SamplerKind::AcceptReject,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum B1ModeArg {
    NegativeCorrelation,
    EssSupTheoretical,
}

impl From<B1ModeArg> for B1Mode {
    fn from(m: B1ModeArg) -> Self {
        match m {
            B1ModeArg::NegativeCorrelation => B1Mode::NegativeCorrelation,
            B1ModeArg::EssSupTheoretical => B1Mode::EssSupTheoretical,
        }
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a finite positive number, got {s:?}")),
    }
}

fn nonnegative_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("expected a finite nonnegative number, got {s:?}")),
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, value_parser = positive_f64)]
    theta: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Draw Ewens permutations.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum, default_value_t = SamplerArg::Crp)]
        sampler: SamplerArg,
        /// Proposal cap per accept-reject draw.
        #[arg(long, default_value_t = DEFAULT_ITERATION_CAP)]
        cap: u64,
    },
    /// Generate a centered random score matrix and its JSON sidecar.
    MatrixGen {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = nonnegative_f64, default_value_t = 0.2)]
        variance: f64,
        /// Redraw until a pilot run shows Cov(|R|, exp(sY)) < 0 on (0, 2/c].
        #[arg(long)]
        negative_correlation: bool,
    },
    /// Exact enumeration checks for n <= 8.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        /// Matrix CSV; centered with --theta.
        #[arg(long, conflicts_with = "random", required_unless_present = "random")]
        matrix: Option<PathBuf>,
        /// Use a generated matrix drawn from --seed.
        #[arg(long)]
        random: bool,
    },
    /// Monte Carlo estimates, tail curves and bound curves.
    Simulate(SimulateArgs),
    /// Evaluate the three bounds on a grid of t.
    BoundsTable {
        #[arg(long, value_parser = nonnegative_f64)]
        sigma2: f64,
        #[arg(long, value_parser = nonnegative_f64)]
        b1: f64,
        #[arg(long, value_parser = nonnegative_f64)]
        b2: f64,
        #[arg(long, value_parser = positive_f64)]
        c: f64,
        #[arg(long, value_parser = positive_f64)]
        t_max: f64,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(2..))]
        points: u64,
    },
    /// Run one of the four canned experiments end to end.
    Experiment {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        id: u8,
        /// Fraction of the preset sample count, in (0, 1].
        #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
        scale: f64,
        /// Also write the generated matrix as CSV.
        #[arg(long)]
        save_matrix: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with SimulationConfig fields; flags below then only
    /// override seed and workers.
    #[arg(long, conflicts_with_all = ["n", "theta", "matrix"])]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), required_unless_present = "config")]
    n: Option<u64>,
    #[arg(long, value_parser = positive_f64, required_unless_present = "config")]
    theta: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    #[arg(long, value_enum, default_value_t = SamplerArg::Crp)]
    sampler: SamplerArg,
    /// Matrix CSV; a generated matrix is used when absent.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = B1ModeArg::NegativeCorrelation)]
    b1_mode: B1ModeArg,
    /// Emit the B1 = B2 = 0 comparison curve.
    #[arg(long)]
    comparison: bool,
    /// c for the comparison curve (default 20 M).
    #[arg(long, value_parser = positive_f64)]
    comparison_c: Option<f64>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible { .. } | Error::NegativeCorrelation(_) => EXIT_INFEASIBLE,
            Error::Degenerate(_) => EXIT_FAILED,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn failed(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_FAILED,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> CmdResult {
    let seed = cli.seed.unwrap_or(0);
    let workers = cli.workers.unwrap_or(1) as usize;
    match &cli.command {
        Command::Sample {
            model,
            count,
            sampler,
            cap,
        } => cmd_sample(cli, model, *count, (*sampler).into(), *cap, seed, workers),
        Command::MatrixGen {
            model,
            variance,
            negative_correlation,
        } => cmd_matrix_gen(cli, model, *variance, *negative_correlation, seed),
        Command::Verify { model, matrix, .. } => cmd_verify(cli, model, matrix.as_deref(), seed),
        Command::Simulate(args) => cmd_simulate(cli, args),
        Command::BoundsTable {
            sigma2,
            b1,
            b2,
            c,
            t_max,
            points,
        } => cmd_bounds_table(
            cli,
            BoundInputs::new(*sigma2, *b1, *b2, *c)?,
            *t_max,
            *points as usize,
        ),
        Command::Experiment {
            id,
            scale,
            save_matrix,
        } => cmd_experiment(cli, *id, *scale, *save_matrix, seed, workers),
    }
}

/// Writes `bytes` to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                    path: parent.into(),
                    source: e,
                })?;
            }
            std::fs::write(path, bytes).map_err(|e| Error::Io {
                path: path.into(),
                source: e,
            })?;
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| failed(e.to_string()))?,
    }
    Ok(())
}

fn pretty(value: &impl serde::Serialize) -> Result<Vec<u8>, Failure> {
    let mut v = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    v.push(b'\n');
    Ok(v)
}

/// Human-readable lines go to stdout when data goes to a file, else stderr.
fn report(cli: &Cli, line: &str) {
    if cli.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn cmd_sample(
    cli: &Cli,
    model: &ModelArgs,
    count: usize,
    sampler: SamplerKind,
    cap: u64,
    seed: u64,
    workers: usize,
) -> CmdResult {
    let params = EwensParams::new(model.n as usize, model.theta)?;
    let draws = montecarlo::sample_permutations(&params, sampler, count, seed, workers, cap)?;
    let perms: Vec<_> = draws.iter().map(|d| d.0.clone()).collect();
    let bytes = match cli.format {
        Format::Csv => {
            let mut buf = Vec::new();
            fmt::write_permutations_csv(&mut buf, &perms)?;
            buf
        }
        Format::Json => pretty(&PermutationBatch::new(params.n(), params.theta(), &perms))?,
    };
    emit(cli.out.as_deref(), &bytes)?;
    if count > 0 {
        let mean_cycles = perms.iter().map(|p| p.cycle_count() as f64).sum::<f64>() / count as f64;
        report(
            cli,
            &format!(
                "mean cycle count: {mean_cycles:.4} (exact {:.4})",
                params.expected_cycle_count()
            ),
        );
        if sampler == SamplerKind::AcceptReject {
            let mean_iter = draws.iter().map(|d| d.1 as f64).sum::<f64>() / count as f64;
            report(
                cli,
                &format!(
                    "mean accept-reject iterations: {mean_iter:.2} (C = {:.2})",
                    params.ln_acceptance_constant().exp()
                ),
            );
        }
    }
    Ok(())
}

fn cmd_matrix_gen(
    cli: &Cli,
    model: &ModelArgs,
    variance: f64,
    negative: bool,
    seed: u64,
) -> CmdResult {
    let Some(out) = cli.out.as_deref() else {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "matrix-gen needs --out PATH".into(),
        });
    };
    let generator = TestMatrixGenerator::new(model.n as usize).with_variance(variance);
    let mut rng = substream(seed, MATRIX_STREAM);
    let matrix = if negative {
        let spec = GeneratorSpec::default();
        montecarlo::generate_negatively_correlated(&generator, model.theta, &spec.pilot, &mut rng)?
            .0
    } else {
        generator.generate(model.theta, &mut rng)?
    };
    fmt::save_matrix_csv(out, matrix.matrix())?;
    let sidecar = fmt::sidecar_path(out);
    fmt::write_json(&sidecar, &MatrixSidecar::for_matrix(&matrix))?;
    println!(
        "wrote {} and {} (n = {}, M = {:.6})",
        out.display(),
        sidecar.display(),
        matrix.n(),
        matrix.m_max()
    );
    Ok(())
}

fn cmd_verify(cli: &Cli, model: &ModelArgs, matrix: Option<&Path>, seed: u64) -> CmdResult {
    let n = model.n as usize;
    if !(oracle::MIN_ORACLE_N..=oracle::MAX_ORACLE_N).contains(&n) {
        return Err(Error::OracleRange {
            n,
            min: oracle::MIN_ORACLE_N,
            max: oracle::MAX_ORACLE_N,
        }
        .into());
    }
    let centered = match matrix {
        Some(path) => {
            let raw = fmt::read_matrix_csv(path)?;
            if raw.n() != n {
                return Err(Error::InvalidParameter(format!(
                    "{} is {0}x{0}, not {n}x{n}",
                    raw.n()
                ))
                .into());
            }
            raw.center(model.theta)
        }
        None => TestMatrixGenerator::new(n)
            .generate(model.theta, &mut substream(seed, MATRIX_STREAM))?,
    };
    let report_doc = oracle::verify(&centered)?;
    emit(cli.out.as_deref(), &pretty(&report_doc)?)?;
    match report_doc.failures.first() {
        None => Ok(()),
        Some(first) => Err(failed(format!("verification failed: {first}"))),
    }
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> CmdResult {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str::<SimulationConfig>(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        }
        None => SimulationConfig {
            params: EwensParams::new(args.n.unwrap_or(0) as usize, args.theta.unwrap_or(0.0))?,
            matrix_source: match &args.matrix {
                Some(p) => MatrixSource::File(p.clone()),
                None => MatrixSource::Generator(GeneratorSpec::default()),
            },
            sample_count: args.count,
            seed: 0,
            worker_count: 1,
            sampler: args.sampler.into(),
            s_grid: None,
            t_grid: None,
            b1_mode: args.b1_mode.into(),
            comparison_curve: args.comparison || args.comparison_c.is_some(),
            comparison_c: args.comparison_c,
            iteration_cap: DEFAULT_ITERATION_CAP,
        },
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(w) = cli.workers {
        config.worker_count = w as usize;
    }
    let outdir = cli.outdir.clone().unwrap_or_else(|| PathBuf::from("."));
    let run = montecarlo::run_simulation_detailed(&config)?;
    let summary = &run.summary;
    write_outputs(
        &outdir,
        "",
        summary,
        &json!({ "schema": SCHEMA_VERSION, "config": config, "summary": summary }),
    )?;
    print_summary(summary);
    check_summary(summary, true)
}

fn write_outputs(
    outdir: &Path,
    prefix: &str,
    summary: &SimulationSummary,
    doc: &serde_json::Value,
) -> CmdResult {
    fmt::write_json(&outdir.join(format!("{prefix}summary.json")), doc)?;
    fmt::save_tail_csv(&outdir.join(format!("{prefix}tail.csv")), summary)?;
    fmt::save_cov_csv(&outdir.join(format!("{prefix}cov.csv")), &summary.cov_curve)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

fn print_summary(s: &SimulationSummary) {
    println!(
        "n = {}, theta = {}, samples = {}",
        s.n, s.theta, s.sample_count
    );
    println!("sigma2_hat = {:.4} (se {:.4})", s.sigma2_hat, s.sigma2_se);
    println!(
        "B1_hat = {:.4}   theoretical B1: general {}, negatively correlated {}",
        s.b1_hat,
        opt(s.theoretical.b1_general),
        opt(s.theoretical.b1_negatively_correlated)
    );
    println!(
        "B2_hat = {:.4}   theoretical B2: {}",
        s.b2_hat,
        opt(s.theoretical.b2)
    );
    println!(
        "M = {:.4}, c = {:.4}, sample support = [{:.4}, {:.4}], Cov(Y,|R|) = {:.6}",
        s.m_max, s.c, s.support_min, s.support_max, s.cov_y_absr
    );
    println!(
        "negative correlation on s grid: {}",
        s.negative_correlation_holds
    );
    if let Some(p) = s.bound3_alpha_cov {
        println!(
            "Cov(exp(sY),|R|) at bound-3 alpha s = {:.6}: {:.6}",
            p.s, p.cov
        );
    }
    if let Some(it) = s.mean_ar_iterations {
        println!("mean accept-reject iterations: {it:.2}");
    }
    println!("|T| bound violations: {}", s.t_bound_violations);
}

fn check_summary(s: &SimulationSummary, all_bounds: bool) -> CmdResult {
    if s.degenerate {
        return Err(failed("degenerate matrix: sample variance of Y is 0"));
    }
    if s.t_bound_violations > 0 {
        return Err(failed(format!(
            "{} samples violate the |T| bound",
            s.t_bound_violations
        )));
    }
    if all_bounds && !s.passed() {
        return Err(failed(format!(
            "empirical tail exceeds a bound: {:?}",
            s.domination
        )));
    }
    Ok(())
}

fn cmd_bounds_table(cli: &Cli, inputs: BoundInputs, t_max: f64, points: usize) -> CmdResult {
    let grid: Vec<f64> = (0..points)
        .map(|k| t_max * k as f64 / (points - 1) as f64)
        .collect();
    let curve = TailCurve::evaluate(&grid, &inputs)?;
    let bytes = match cli.format {
        Format::Csv => {
            let mut buf = Vec::new();
            fmt::write_bounds_table_csv(&mut buf, &curve)?;
            buf
        }
        Format::Json => {
            pretty(&json!({ "schema": SCHEMA_VERSION, "inputs": inputs, "curve": curve }))?
        }
    };
    emit(cli.out.as_deref(), &bytes)
}

fn cmd_experiment(
    cli: &Cli,
    id: u8,
    scale: f64,
    save_matrix: bool,
    seed: u64,
    workers: usize,
) -> CmdResult {
    let outdir = cli
        .outdir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("experiment{id}")));
    let run = experiment::run_experiment(id, scale, seed, workers)?;
    let summary = &run.run.summary;
    let preset: ExperimentPreset = run.preset;
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "preset": preset,
        "scale_factor": scale,
        "headline_bounds": preset.headline_bounds(),
        "headline_holds": run.headline_holds(),
        "config": run.config,
        "summary": summary,
    });
    write_outputs(&outdir, "", summary, &doc)?;
    let matrix = &run.run.matrix.matrix;
    fmt::write_json(
        &outdir.join("matrix.json"),
        &MatrixSidecar::for_matrix(matrix),
    )?;
    if save_matrix {
        fmt::save_matrix_csv(&outdir.join("matrix.csv"), matrix.matrix())?;
    }
    println!("experiment {id} (scale {scale}) -> {}", outdir.display());
    print_summary(summary);
    if !run.headline_holds() {
        return Err(failed(format!(
            "headline bounds not dominating: {:?}",
            summary.domination
        )));
    }
    check_summary(summary, true)
}
