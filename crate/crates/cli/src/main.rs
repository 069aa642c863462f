//! `feigenlab`: command-line driver for the experiments in `feigenlab-core`.
//!
//! Each subcommand resolves its settings (defaults, then the `--config` file,
//! then flags), runs, and writes `results.csv`, `results.json`, optional
//! extra files and a `manifest.json` into a run directory under `--out`.

mod commands;
mod config;
mod expr;
mod run;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use commands::dimension::{BoxdimFlags, BoxdimSettings};
use commands::fibonacci::{FibonacciFlags, FibonacciSettings};
use commands::nest::{NestFlags, NestSettings, StatsFlags, StatsSettings};
use commands::params::{FindParamFlags, FindParamSettings, FixedPointFlags, FixedPointSettings};
use commands::series::{MeasureFlags, MeasureSettings, PoincareFlags, PoincareSettings, ScalingFlags, ScalingSettings};
use commands::trichotomy::{TrichotomyFlags, TrichotomySettings};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration; exit code 2.
    Usage(String),
    /// The computation refused or failed; exit code 1.
    Failed(String),
}

impl CliError {
    pub fn io(e: impl fmt::Display) -> Self {
        CliError::Failed(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<feigenlab::Error> for CliError {
    fn from(e: feigenlab::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "feigenlab", version, about = "Numerical experiments on Feigenbaum-type polynomials")]
struct Cli {
    /// TOML file with a table per subcommand and an optional [run] table.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root directory for run directories [default: runs].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "FEIGENLAB_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Superstable, doubling-limit or Fibonacci parameters.
    FindParam(FindParamFlags),
    /// Renormalization fixed point by collocation.
    SolveFixedpoint(FixedPointFlags),
    /// Nest of renormalization domains with optional diagnostics.
    BuildNest(NestFlags),
    /// Monte Carlo escape statistics on a nest.
    Stats(StatsFlags),
    /// Truncated Poincaré series and divergence diagnostics.
    Poincare(PoincareFlags),
    /// Atomic conformal measure and its covariance test.
    Measure(MeasureFlags),
    /// Lean / Balanced / Black-hole classification.
    Trichotomy(TrichotomyFlags),
    /// Box-counting dimension of the Julia set.
    Boxdim(BoxdimFlags),
    /// Mass-scaling exponent of a conformal measure.
    Scaling(ScalingFlags),
    /// Principal nest of the real Fibonacci map.
    Fibonacci(FibonacciFlags),
    /// Show a run manifest, optionally replaying it.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ReportArgs {
    run_dir: PathBuf,
    /// Re-run into <run-dir>/replay and compare output digests.
    #[arg(long)]
    replay: bool,
}

fn resolve<S, F>(file: Option<&toml::Table>, name: &'static str, flags: &F) -> Result<(&'static str, Value), CliError>
where
    S: serde::de::DeserializeOwned + Serialize,
    F: Serialize,
{
    let (_, value) = config::resolve::<S, F>(file, name, flags)?;
    Ok((name, value))
}

/// Prints a line; a closed pipe is not an error.
fn say(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn execute_and_write(out: &Path, command: &str, config: &Value) -> Result<(), CliError> {
    let started = Instant::now();
    let outputs = commands::execute(command, config)?;
    let dir = run::run_dir(out, command, config);
    run::write_run(&dir, command, config, commands::seeds(config), started, &outputs)?;
    say(&outputs.summary);
    say(&format!("run directory: {}", dir.display()));
    Ok(())
}

fn report(args: &ReportArgs) -> Result<(), CliError> {
    let manifest = run::read_manifest(&args.run_dir)?;
    say(&format!("command: {}", manifest.command));
    say(&format!("version: {}", manifest.version));
    say(&format!("workers: {}", manifest.workers));
    say(&format!("wall time: {:.3} s", manifest.wall_time_s));
    say(&format!("config: {}", manifest.config));
    for (name, digest) in &manifest.outputs {
        say(&format!("  {name}  {digest}"));
    }
    if !args.replay {
        return Ok(());
    }
    let started = Instant::now();
    let outputs = commands::execute(&manifest.command, &manifest.config)?;
    let dir = args.run_dir.join("replay");
    let replayed = run::write_run(&dir, &manifest.command, &manifest.config, manifest.seeds.clone(), started, &outputs)?;
    let mut mismatched = Vec::new();
    for (name, digest) in &manifest.outputs {
        let same = replayed.outputs.get(name) == Some(digest);
        say(&format!("replay {name}: {}", if same { "identical" } else { "DIFFERS" }));
        if !same {
            mismatched.push(name.clone());
        }
    }
    if replayed.outputs.len() != manifest.outputs.len() {
        mismatched.push("(file set)".into());
    }
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("replay differs in {}", mismatched.join(", "))))
    }
}

fn run_cli(cli: Cli) -> Result<(), CliError> {
    let file = config::load(cli.config.as_deref())?;
    let file = file.as_ref();
    let workers = match cli.workers {
        Some(w) => Some(w),
        None => config::run_value::<usize>(file, "workers")?,
    };
    if let Some(w) = workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global().map_err(CliError::io)?;
    }
    let out = match cli.out {
        Some(o) => o,
        None => config::run_value::<PathBuf>(file, "out")?.unwrap_or_else(|| PathBuf::from("runs")),
    };
    let (name, value) = match &cli.command {
        Command::FindParam(f) => resolve::<FindParamSettings, _>(file, "find-param", f)?,
        Command::SolveFixedpoint(f) => resolve::<FixedPointSettings, _>(file, "solve-fixedpoint", f)?,
        Command::BuildNest(f) => resolve::<NestSettings, _>(file, "build-nest", f)?,
        Command::Stats(f) => resolve::<StatsSettings, _>(file, "stats", f)?,
        Command::Poincare(f) => resolve::<PoincareSettings, _>(file, "poincare", f)?,
        Command::Measure(f) => resolve::<MeasureSettings, _>(file, "measure", f)?,
        Command::Trichotomy(f) => resolve::<TrichotomySettings, _>(file, "trichotomy", f)?,
        Command::Boxdim(f) => resolve::<BoxdimSettings, _>(file, "boxdim", f)?,
        Command::Scaling(f) => resolve::<ScalingSettings, _>(file, "scaling", f)?,
        Command::Fibonacci(f) => resolve::<FibonacciSettings, _>(file, "fibonacci", f)?,
        Command::Report(args) => return report(args),
    };
    execute_and_write(&out, name, &value)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run_cli(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
