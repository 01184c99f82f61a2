use anyhow::{bail, Context, Result};
use clap::builder::TypedValueParser as _;
use clap::{Args, CommandFactory, Parser, Subcommand};
use sbp_core::analytic::{
    alpha_c, gauss_p, k_c, log_expected_solutions, mu2, ModelParams,
};
use sbp_core::cube::{
    count_solutions, count_solutions_pruned, generate_instance, run_capacity_with, solve_exact,
    solve_pruned, CapacityOptions, Instance, SolveReport,
};
use sbp_core::experiments::{run_experiment, ExperimentConfig, ExperimentKind, Metadata};
use sbp_core::second_moment::{q_endpoint_decay, ratio_exact, DEFAULT_DELTA};
use sbp_core::shape::{free_energy_profile, verify_shape, DEFAULT_GRID_STEP};
use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

const INTERRUPTED: u8 = 130;

#[derive(Parser, Debug)]
#[command(name = "sbp", version, about = "Symmetric binary perceptron numerics and experiments")]
struct Cli {
    /// Worker threads for trial-parallel work (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Acceptance probability, critical density and related scalars.
    Threshold(ThresholdArgs),
    /// Pair free energy on a beta grid, with its shape verdict.
    FreeEnergy(FreeEnergyArgs),
    /// Grid certification of the free-energy shape at the critical density.
    ShapeVerify(ShapeArgs),
    /// Exact second-moment ratio, or the endpoint decay fit.
    SecondMoment(SecondMomentArgs),
    /// Exact discrepancy of one random instance.
    Solve(InstanceArgs),
    /// Exact solution count of one random instance.
    Count(CountArgs),
    /// Row-by-row solution-set trace until it empties.
    Capacity(CapacityArgs),
    /// Monte Carlo experiment; writes <kind>.csv and <kind>.json.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct BoundArgs {
    /// Bound K.
    #[arg(long = "K", value_name = "K")]
    #[serde(rename = "K")]
    k: Option<f64>,
    /// Constraint density alpha.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct ThresholdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    bound: BoundArgs,
    /// Dimension used for the integer row count.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Write JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct FreeEnergyArgs {
    #[arg(long = "K", value_name = "K")]
    #[serde(rename = "K")]
    k: f64,
    /// Density; defaults to alpha_c(K).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of equally spaced beta values in [0, 1].
    #[arg(long, default_value_t = 101)]
    points: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    grid_step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ShapeArgs {
    #[arg(long = "K", value_name = "K")]
    #[serde(rename = "K")]
    k: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    grid_step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SecondMomentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    bound: BoundArgs,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Explicit row count; overrides the density.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Fit the endpoint gap 1 - q(1/n)/p over these n instead (comma-separated).
    #[arg(long, value_delimiter = ',')]
    decay_n_list: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize, clap::ValueEnum, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Method {
    /// Gray-code enumeration of the half cube.
    Gray,
    /// Branch and bound.
    Pruned,
}

#[derive(Args, Debug, Serialize)]
struct InstanceArgs {
    #[arg(long)]
    n: usize,
    /// Row count; defaults to round(alpha_c(1) n).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, value_enum, default_value_t = Method::Gray)]
    method: Method,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct CountArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: InstanceArgs,
    /// Bound; defaults to K_c(m / n).
    #[arg(long = "K", value_name = "K")]
    #[serde(rename = "K")]
    k: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct CapacityArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "K", value_name = "K", default_value_t = 1.0)]
    #[serde(rename = "K")]
    k: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Overlap pairs sampled at each checkpoint.
    #[arg(long, default_value_t = 0)]
    overlap_samples: usize,
    /// Rows at which overlaps are sampled (comma-separated); default every row.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    max_rows: Option<usize>,
    /// Also write the (t, size, q_t, y_t) table here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// window, capacity, tail_lower, success_at_kc, anticoncentration or martingale.
    #[arg(long, value_parser = kind_parser())]
    kind: ExperimentKind,
    #[command(flatten)]
    bound: BoundArgs,
    /// Dimensions (comma-separated).
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "SBP_OUTPUT_DIR", default_value = ".")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    y_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    overlap_samples: Option<usize>,
    #[arg(long)]
    coupled_factor: Option<f64>,
    /// Allow n above the default cap (up to 30).
    #[arg(long)]
    allow_large_n: bool,
}

fn kind_parser() -> impl clap::builder::TypedValueParser<Value = ExperimentKind> {
    let names: Vec<&'static str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
    clap::builder::PossibleValuesParser::new(names).map(|s| s.parse::<ExperimentKind>().expect("listed name"))
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn envelope(command: &str, config: impl Serialize, result: impl Serialize) -> Result<Value> {
    Ok(json!({
        "command": command,
        "config": serde_json::to_value(config)?,
        "metadata": serde_json::to_value(Metadata::current())?,
        "result": serde_json::to_value(result)?,
    }))
}

/// `(K, alpha)` from exactly one of the two flags.
fn resolve_bound(bound: &BoundArgs) -> Result<(f64, f64)> {
    match (bound.k, bound.alpha) {
        (Some(k), None) => Ok((k, alpha_c(k)?)),
        (None, Some(alpha)) => Ok((k_c(alpha)?, alpha)),
        _ => bail!(sbp_core::Error::Domain("exactly one of --K and --alpha must be given".into())),
    }
}

fn threshold(args: &ThresholdArgs) -> Result<()> {
    let (k, alpha) = resolve_bound(&args.bound)?;
    let params = ModelParams::new(k, alpha, args.n)?;
    let result = json!({
        "K": k,
        "alpha": alpha,
        "p": gauss_p(k)?,
        "alpha_c": alpha_c(k)?,
        "k_c": k_c(alpha)?,
        "mu2": mu2(k)?,
        "m": params.m,
        "log_expected_solutions": log_expected_solutions(&params),
    });
    emit(&envelope("threshold", args, result)?, args.out.as_deref())
}

fn free_energy_cmd(args: &FreeEnergyArgs) -> Result<()> {
    if args.points < 2 {
        bail!(sbp_core::Error::Domain("points must be at least 2".into()));
    }
    let alpha = match args.alpha {
        Some(a) => a,
        None => alpha_c(args.k)?,
    };
    let params = ModelParams::new(args.k, alpha, args.n)?;
    let last = (args.points - 1) as f64;
    let grid: Vec<f64> = (0..args.points).map(|i| i as f64 / last).collect();
    let profile = free_energy_profile(&params, &grid, args.grid_step)?;
    emit(&envelope("free-energy", args, profile)?, args.out.as_deref())
}

/// Exit status 1 when the shape could not be certified.
fn shape_verify(args: &ShapeArgs) -> Result<ExitCode> {
    let verdict = verify_shape(args.k, args.grid_step)?;
    let ok = verdict.verified;
    emit(&envelope("shape-verify", args, &verdict)?, args.out.as_deref())?;
    if !ok {
        eprintln!("shape verification failed: {:?}", verdict.failure);
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn second_moment(args: &SecondMomentArgs) -> Result<()> {
    if let Some(n_list) = &args.decay_n_list {
        let k = args.bound.k.unwrap_or(1.0);
        let decay = q_endpoint_decay(k, n_list)?;
        return emit(&envelope("second-moment", args, decay)?, args.out.as_deref());
    }
    let params = match (args.m, args.bound.k, args.bound.alpha) {
        (Some(m), Some(k), None) => ModelParams::from_rows(k, args.n, m)?,
        (Some(m), None, None) => ModelParams::from_rows(k_c(m as f64 / args.n as f64)?, args.n, m)?,
        (None, None, Some(alpha)) => ModelParams::critical_rows(alpha, args.n)?,
        (None, Some(k), None) => ModelParams::critical(k, args.n)?,
        (None, Some(k), Some(alpha)) => ModelParams::new(k, alpha, args.n)?,
        (None, None, None) => ModelParams::critical_rows(alpha_c(1.0)?, args.n)?,
        _ => bail!(sbp_core::Error::Domain("--m cannot be combined with --alpha".into())),
    };
    let report = ratio_exact(&params, args.delta)?;
    emit(&envelope("second-moment", args, report)?, args.out.as_deref())
}

fn build_instance(args: &InstanceArgs) -> Result<Instance> {
    let m = match args.m {
        Some(m) => m,
        None => (alpha_c(1.0)? * args.n as f64).round_ties_even() as usize,
    };
    Ok(generate_instance(args.n, m, args.seed, args.stream)?)
}

fn solve(args: &InstanceArgs) -> Result<()> {
    let inst = build_instance(args)?;
    let report: SolveReport = match args.method {
        Method::Gray => solve_exact(&inst)?,
        Method::Pruned => solve_pruned(&inst)?,
    };
    let result = json!({ "m": inst.m(), "report": report });
    emit(&envelope("solve", args, result)?, args.out.as_deref())
}

fn count(args: &CountArgs) -> Result<()> {
    let inst = build_instance(&args.instance)?;
    let k = match args.k {
        Some(k) => k,
        None => k_c(inst.m() as f64 / inst.n as f64)?,
    };
    let total = match args.instance.method {
        Method::Gray => count_solutions(&inst, k)?,
        Method::Pruned => count_solutions_pruned(&inst, k)?,
    };
    let result = json!({ "m": inst.m(), "K": k, "count": total });
    emit(&envelope("count", args, result)?, args.instance.out.as_deref())
}

fn capacity(args: &CapacityArgs) -> Result<()> {
    let options = CapacityOptions { max_rows: args.max_rows, checkpoints: args.checkpoints.clone() };
    let trace = run_capacity_with(args.n, args.k, args.seed, args.stream, args.overlap_samples, &options)?;
    if let Some(path) = &args.csv {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        trace.write_csv(std::io::BufWriter::new(file))?;
    }
    emit(&envelope("capacity", args, trace)?, args.out.as_deref())
}

fn experiment(args: &ExperimentArgs, interrupt: &AtomicBool) -> Result<ExitCode> {
    let mut config = ExperimentConfig::new(args.kind, args.n_list.clone(), args.trials, args.seed);
    config.k = args.bound.k;
    config.alpha = args.bound.alpha;
    if config.k.is_none() && config.alpha.is_none() {
        config.k = Some(1.0);
    }
    config.output_path = Some(args.out.clone());
    if let Some(v) = &args.y_grid {
        config.y_grid = v.clone();
    }
    if let Some(v) = &args.eps_list {
        config.eps_list = v.clone();
    }
    if let Some(x) = args.x {
        config.x = x;
    }
    if let Some(s) = args.overlap_samples {
        config.overlap_samples = s;
    }
    if let Some(f) = args.coupled_factor {
        config.coupled_factor = f;
    }
    config.allow_large_n = args.allow_large_n;

    let output = run_experiment(&config, Some(interrupt))?;
    let (csv, json) = output.write_files(&args.out)?;
    for line in output.summary_lines() {
        println!("{line}");
    }
    println!("wrote {} and {}", csv.display(), json.display());
    if output.interrupted {
        eprintln!("interrupted: partial results written");
        return Ok(ExitCode::from(INTERRUPTED));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!(sbp_core::Error::Domain("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let interrupt = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&interrupt);
    ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed))?;

    match &cli.command {
        Command::Threshold(a) => threshold(a)?,
        Command::FreeEnergy(a) => free_energy_cmd(a)?,
        Command::ShapeVerify(a) => return shape_verify(a),
        Command::SecondMoment(a) => second_moment(a)?,
        Command::Solve(a) => solve(a)?,
        Command::Count(a) => count(a)?,
        Command::Capacity(a) => capacity(a)?,
        Command::Experiment(a) => return experiment(a, &interrupt),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            let text = err.to_string();
            if err.use_stderr() && !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
