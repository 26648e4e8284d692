//! `mixprice`: solve, search, evaluate and generate pricing instances.
//!
//! Exit codes: 0 on success (a certified solve), 2 when a solve stops on a
//! time or node limit, 1 on any error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixprice_core::instances::{
    continuous_ml_revenue, intel_instance, parking_instance_from_profiles, random_instance, random_small_instance,
    synthetic_profiles, ParkingParams,
};
use mixprice_core::io::{
    read_instance, surface_to_string, to_json_full_precision, trace_to_string, write_instance, InstanceFile,
    LocalResult, ParkingSource, SolveResult,
};
use mixprice_core::{local_search, solve, Error, LocalSearchConfig, PriceVector, SolveConfig, SolveStatus};

#[derive(Parser)]
#[command(name = "mixprice", version, about = "Global pricing under discrete mixed logit demand")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a globally optimal price vector by branch and bound.
    Solve(SolveArgs),
    /// Multi-start trust-region local search.
    Local(LocalArgs),
    /// Revenue and market shares at given prices.
    Evaluate(EvaluateArgs),
    /// Write a generated instance file.
    Generate(GenerateArgs),
    /// Revenue on a grid over the box of a two-product instance.
    Surface(SurfaceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Intel,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Instance file (JSON).
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Built-in instance.
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
}

impl Source {
    fn load(&self) -> Result<InstanceFile, Error> {
        match (&self.instance, self.builtin) {
            (Some(path), _) => read_instance(path),
            (None, Some(Builtin::Intel)) => Ok(intel_instance().into()),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    /// Relative optimality gap to certify.
    #[arg(long, default_value_t = 1e-5)]
    gap: f64,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Maximum number of processed nodes.
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results are reproducible only with 1.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Local-search starts per node.
    #[arg(long, default_value_t = 1)]
    local_starts: usize,
    /// Output directory for result.json and trace.txt.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Write zero wall times so identical runs give identical files.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct LocalArgs {
    #[command(flatten)]
    source: Source,
    /// Number of seeded random starts.
    #[arg(long, default_value_t = 10)]
    starts: usize,
    /// Seed of the first start; start k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for local.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated prices of the priced alternatives, in file order.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    prices: Vec<f64>,
    /// Monte-Carlo samples for the continuous model of parking instances
    /// (0 disables).
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    /// The three-product Intel case.
    Intel,
    /// Random products over seven segments.
    Random,
    /// Random two-product instance with box [0, 10]^2.
    Small,
    /// Parking case with synthetic customers.
    Parking,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    family: Family,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Priced products (random family).
    #[arg(long, default_value_t = 3)]
    products: usize,
    /// Segments (random family).
    #[arg(long, default_value_t = 7)]
    segments: usize,
    /// Customers (parking family).
    #[arg(long, default_value_t = 10)]
    customers: usize,
    /// Taste-grid points per axis (parking family).
    #[arg(long, default_value_t = 3)]
    n_grid: usize,
    /// Destination file.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SurfaceArgs {
    #[command(flatten)]
    source: Source,
    /// Grid points per axis.
    #[arg(long, default_value_t = 101)]
    resolution: usize,
    /// Output directory for surface.txt.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode, Error> {
    let file = args.source.load()?;
    let inst = &file.instance;
    let config = SolveConfig {
        gap_tolerance: args.gap,
        time_limit: args.time_limit,
        node_limit: args.node_limit,
        seed: args.seed,
        threads: args.threads,
        local_starts: args.local_starts,
        ..SolveConfig::default()
    };
    let report = solve(inst, &config)?;
    let result = SolveResult::from_report(inst, &report);
    write_file(&args.out, "result.json", &to_json_full_precision(&result))?;
    write_file(&args.out, "trace.txt", &trace_to_string(&report.trace, args.deterministic))?;
    println!(
        "status {} value {:.10} upper_bound {:.10} gap {:.3e} nodes {}",
        result.status, result.value, result.upper_bound, result.gap, result.nodes_processed
    );
    for p in &result.prices {
        println!("  {} {:.10}", p.alternative, p.price);
    }
    Ok(match report.status {
        SolveStatus::OptimalWithinTol => ExitCode::SUCCESS,
        SolveStatus::TimeLimit | SolveStatus::NodeLimit => ExitCode::from(2),
    })
}

fn cmd_local(args: &LocalArgs) -> Result<ExitCode, Error> {
    if args.starts == 0 {
        return Err(Error::Config("at least one start is required".into()));
    }
    let file = args.source.load()?;
    let inst = &file.instance;
    let mut best: Option<(PriceVector, f64)> = None;
    let mut values = Vec::with_capacity(args.starts);
    for k in 0..args.starts as u64 {
        let (p, v) = local_search(inst, &LocalSearchConfig::with_seed(args.seed.wrapping_add(k)), None)?;
        values.push(v);
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((p, v));
        }
    }
    let (p, v) = best.expect("at least one start ran");
    let result = LocalResult::new(inst, &p, v, values);
    write_file(&args.out, "local.json", &to_json_full_precision(&result))?;
    println!("value {v:.10}");
    for p in &result.prices {
        println!("  {} {:.10}", p.alternative, p.price);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExitCode, Error> {
    let file = args.source.load()?;
    let inst = &file.instance;
    inst.check_in_box(&args.prices, 0.0)?;
    if !inst.is_feasible(&args.prices, 0.0) {
        return Err(Error::InfeasiblePrice("prices violate the linear constraints".into()));
    }
    let revenue = inst.expected_revenue(&args.prices)?;
    let shares = inst.market_shares(&args.prices)?;
    println!("revenue {revenue:.16e}");
    println!("alternative share_percent");
    for (alt, s) in inst.alternatives().iter().zip(&shares) {
        println!("{} {s:.16e}", alt.name);
    }
    if let (Some(src), true) = (&file.parking, args.mc_samples > 0) {
        let est = continuous_ml_revenue(
            &src.params,
            &src.profiles,
            &PriceVector(args.prices.clone()),
            args.mc_samples,
            args.seed,
        )?;
        println!("continuous_revenue {:.16e} std_error {:.16e}", est.mean, est.std_error);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_generate(args: &GenerateArgs) -> Result<ExitCode, Error> {
    let file = match args.family {
        Family::Intel => intel_instance().into(),
        Family::Random => random_instance(args.seed, args.products, args.segments)?.into(),
        Family::Small => random_small_instance(args.seed).into(),
        Family::Parking => {
            let params = ParkingParams::default();
            let profiles = synthetic_profiles(args.seed, args.customers);
            InstanceFile {
                instance: parking_instance_from_profiles(&params, &profiles, args.n_grid)?,
                parking: Some(ParkingSource {
                    params,
                    profiles,
                    n_grid: args.n_grid,
                }),
            }
        }
    };
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_instance(&file, &args.output)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_surface(args: &SurfaceArgs) -> Result<ExitCode, Error> {
    let file = args.source.load()?;
    let text = surface_to_string(&file.instance, args.resolution)?;
    write_file(&args.out, "surface.txt", &text)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            // Exit code 2 is reserved for solves that hit a limit.
            return if usage_error { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Local(a) => cmd_local(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Surface(a) => cmd_surface(a),
    };
    result.unwrap_or_else(|e| {
        log::debug!("{e:?}");
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
