//! `domp` command line: generate instances, solve, verify against brute
//! force, and run benchmark sweeps.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use domp::bench::{run_bench, write_csv_with, BenchConfig};
use domp::engine::{BnbConfig, Strategy};
use domp::instance::{generate_instance, load_instance, save_instance, Instance, InstanceError};
use domp::methods::{solve, Method, MethodError, SolveConfig, WarmStart};
use domp::objective::{brute_force, ObjectiveError, DEFAULT_SUBSET_LIMIT};
use domp::report::{verify_solution, SolutionJson, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MISMATCH: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "domp", version, about = "Discrete ordered median problem solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write random instances.
    Generate(GenerateArgs),
    /// Solve one instance.
    Solve(SolveArgs),
    /// Recompute the optimum by enumeration and check a solution file.
    Verify(VerifyArgs),
    /// Solve many instances with several methods and write CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(short = 'n', long)]
    n: usize,
    #[arg(short = 'p', long)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long, default_value = ".")]
    output: PathBuf,
    /// File name prefix.
    #[arg(long, default_value = "domp")]
    name: String,
    /// Zero cost for serving a client from its own site.
    #[arg(long)]
    self_service_zero: bool,
}

#[derive(Debug, Args, Clone)]
struct Limits {
    /// Seconds per solve.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    mip_gap: f64,
    #[arg(long, default_value_t = 50)]
    root_rounds: usize,
    #[arg(long, default_value_t = 500)]
    cuts_per_round: usize,
    /// Largest n for which every SOC is materialized.
    #[arg(long, default_value_t = domp::methods::DEFAULT_SIZE_GUARD)]
    size_guard: usize,
    /// Heuristic iterations for the initial incumbent; 0 disables it.
    #[arg(long, default_value_t = domp::methods::DEFAULT_ITERATIONS)]
    warm_iterations: usize,
    #[arg(long, default_value_t = domp::methods::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    warm_seed: u64,
}

impl Limits {
    fn config(&self) -> Result<SolveConfig, CliError> {
        let time_limit = match self.time_limit {
            Some(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(CliError::Usage(format!("--time-limit must be positive, got {t}")))
            }
            t => t.map(Duration::from_secs_f64),
        };
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CliError::Usage(format!("--alpha must lie in [0, 1], got {}", self.alpha)));
        }
        let bnb = BnbConfig {
            time_limit,
            node_limit: self.node_limit.unwrap_or(usize::MAX),
            mip_gap: self.mip_gap,
            root_cut_rounds: self.root_rounds,
            cuts_per_round: self.cuts_per_round,
            ..BnbConfig::default()
        };
        bnb.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(SolveConfig {
            bnb,
            size_guard: self.size_guard,
            warm_start: (self.warm_iterations > 0).then_some(WarmStart {
                iterations: self.warm_iterations,
                alpha: self.alpha,
                seed: self.warm_seed,
            }),
        })
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value = "rowgen", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value = "callback", value_parser = parse_strategy)]
    strategy: Strategy,
    /// Violation threshold for integral candidates, in [1, 2).
    #[arg(long, default_value_t = 1.0, value_parser = parse_b)]
    b: f64,
    #[command(flatten)]
    limits: Limits,
    /// Also write the solution as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    instance: PathBuf,
    /// Solution JSON written by `solve --json`.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Largest number of open sets to enumerate.
    #[arg(long, default_value_t = DEFAULT_SUBSET_LIMIT)]
    subset_limit: u128,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Instance files or directories holding `.domp` files.
    paths: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "soc,woc,bc,rowgen", value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "pool,callback", value_parser = parse_strategy)]
    strategies: Vec<Strategy>,
    #[arg(long = "b", value_delimiter = ',', default_value = "1.0", value_parser = parse_b)]
    thresholds: Vec<f64>,
    #[command(flatten)]
    limits: Limits,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV destination; stdout if absent.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    /// Leave the time_s column empty.
    #[arg(long)]
    no_time: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s {
        "pool" => Ok(Strategy::Pool),
        "callback" => Ok(Strategy::Callback),
        _ => Err(format!("unknown strategy '{s}' (pool, callback)")),
    }
}

fn parse_b(s: &str) -> Result<f64, String> {
    let b: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (1.0..2.0).contains(&b) {
        Ok(b)
    } else {
        Err(format!("b = {b} must lie in [1, 2)"))
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Mismatch(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Mismatch(_) => EXIT_MISMATCH,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Mismatch(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<MethodError> for CliError {
    fn from(e: MethodError) -> Self {
        match e {
            MethodError::SizeGuard { .. } | MethodError::Threshold(_) | MethodError::Unsupported(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    fs::create_dir_all(&a.output)?;
    for idx in 0..a.count {
        let seed = a.seed + idx as u64;
        let inst = generate_instance(a.n, a.p, seed, a.self_service_zero)?;
        let path = a.output.join(format!("{}_n{}_p{}_s{}.domp", a.name, a.n, a.p, seed));
        save_instance(&inst, &path)?;
        writeln!(out, "{}", path.display())?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

fn cmd_solve(a: SolveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let inst = load_instance(&a.instance)?;
    let config = a.limits.config()?;
    let report = solve(&inst, a.method, a.strategy, a.b, &config)?;
    writeln!(out, "instance: {} (n = {}, p = {})", inst.name(), inst.n(), inst.p())?;
    writeln!(out, "method: {}", a.method)?;
    if a.method.uses_strategy() {
        writeln!(out, "strategy: {}", a.strategy)?;
    }
    if a.method.uses_threshold() {
        writeln!(out, "b: {}", a.b)?;
    }
    writeln!(out, "status: {}", report.status)?;
    writeln!(out, "value: {}", fmt_opt(report.value))?;
    writeln!(out, "lower_bound: {}", report.lower_bound)?;
    writeln!(out, "gap_root_pct: {}", fmt_opt(report.gap_root_pct))?;
    writeln!(out, "gap_pct: {}", fmt_opt(report.gap_pct))?;
    writeln!(out, "nodes: {}", report.nodes)?;
    writeln!(out, "cuts: {}", report.cuts)?;
    writeln!(out, "orig_cons: {}", report.orig_cons)?;
    writeln!(out, "time_s: {:.3}", report.wall_time.as_secs_f64())?;
    if let Some(sol) = &report.incumbent {
        let sites: Vec<String> = sol.open.sites().iter().map(|s| s.to_string()).collect();
        writeln!(out, "open_sites: {}", sites.join(" "))?;
    }
    if let Some(path) = a.json {
        let json = SolutionJson::from_report(&report);
        let text = serde_json::to_string_pretty(&json).map_err(|e| CliError::Internal(e.to_string()))?;
        fs::write(path, text + "\n")?;
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let inst = load_instance(&a.instance)?;
    let (optimum, open) = brute_force(&inst, a.subset_limit).map_err(|e| match e {
        ObjectiveError::TooLarge { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Internal(e.to_string()),
    })?;
    let sites: Vec<String> = open.sites().iter().map(|s| s.to_string()).collect();
    writeln!(out, "optimum: {optimum}")?;
    writeln!(out, "optimal_sites: {}", sites.join(" "))?;
    let Some(path) = a.solution else {
        return Ok(());
    };
    let text = fs::read_to_string(&path)?;
    let sol: SolutionJson =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    match verify_solution(&inst, &sol, optimum) {
        Verdict::Pass => {
            writeln!(out, "verdict: pass")?;
            Ok(())
        }
        Verdict::Infeasible(why) => {
            writeln!(out, "verdict: infeasible")?;
            Err(CliError::Mismatch(format!("infeasible solution: {why}")))
        }
        Verdict::Mismatch {
            reported,
            recomputed,
            optimum,
        } => {
            writeln!(out, "verdict: mismatch")?;
            Err(CliError::Mismatch(format!(
                "reported {reported}, recomputed {recomputed}, optimum {optimum}"
            )))
        }
    }
}

/// Expands directories to their `.domp` files, sorted by name.
fn collect_instances(paths: &[PathBuf]) -> Result<Vec<Instance>, CliError> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "domp"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    files.iter().map(|p| load(p)).collect()
}

fn load(path: &Path) -> Result<Instance, CliError> {
    load_instance(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let instances = collect_instances(&a.paths)?;
    let config = BenchConfig {
        methods: a.methods,
        strategies: a.strategies,
        thresholds: a.thresholds,
        solve: a.limits.config()?,
        jobs: a.jobs.max(1),
    };
    let rows = run_bench(&instances, &config);
    let csv_err = |e: domp::bench::CsvError| CliError::Internal(e.to_string());
    match a.output {
        Some(path) => {
            let file = BufWriter::new(File::create(path)?);
            write_csv_with(&rows, file, !a.no_time).map_err(csv_err)?;
        }
        None => write_csv_with(&rows, out, !a.no_time).map_err(csv_err)?,
    }
    Ok(())
}
