//! `arcchoice` — command-line front end for simulating, estimating,
//! comparing, diagnosing, and reporting on random-consideration
//! discrete-choice models.
//!
//! Exit codes: 0 success, 2 validation failure, 3 non-convergence under
//! `--strict`, 4 I/O failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;
use manifest::Manifest;

/// Errors carrying their process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: config, flags, dataset contents, or model domain. Exit 2.
    Validation(String),
    /// Optimizer failed to converge in strict mode. Exit 3.
    NonConvergence(String),
    /// Filesystem or serialization failure. Exit 4.
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::NonConvergence(m) | CliError::Io(m) => {
                f.write_str(m)
            }
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<arcchoice::Error> for CliError {
    fn from(e: arcchoice::Error) -> Self {
        match e {
            arcchoice::Error::Io(_) | arcchoice::Error::Csv(_) => CliError::Io(e.to_string()),
            arcchoice::Error::NonConvergence(_) => CliError::NonConvergence(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "arcchoice",
    version,
    about = "Random-consideration discrete choice under risk: simulate, estimate, compare, diagnose, report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct CliArgs {
    /// Configuration file (TOML with [model], [distribution], [mechanism],
    /// [optimizer], [io] sections). All sections optional; defaults are
    /// recorded in the manifest.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides [io] output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = hardware parallelism; overrides [io] threads).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Input dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Treat the input CSV as a multi-line portfolio file.
    #[arg(long, default_value_t = false)]
    pub portfolio: bool,

    /// Population template for simulation: collision or triplet.
    #[arg(long, default_value = "collision")]
    pub population: String,

    /// Households to simulate.
    #[arg(long, default_value_t = 1000)]
    pub households: usize,

    /// Seed for simulation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Model to fit: basic, proportional, alt-specific, or mixed-logit.
    #[arg(long, default_value = "basic")]
    pub fit: String,

    /// Kernel override: breakpoint, riemann, or bruteforce.
    #[arg(long)]
    pub kernel: Option<String>,

    /// Exit 3 when the optimizer does not converge (estimate) or 2 when a
    /// diagnostic fails (check).
    #[arg(long, default_value_t = false)]
    pub strict: bool,

    /// Bootstrap replicates for confidence intervals (0 = skip).
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,

    /// Type threshold for the consideration test (defaults to 80% of the
    /// support).
    #[arg(long)]
    pub nu_star: Option<f64>,

    /// Probe points for the consideration test's applicability checks.
    #[arg(long, default_value_t = 25)]
    pub probes: usize,

    /// Grid points for recovered-density and density outputs.
    #[arg(long, default_value_t = 400)]
    pub grid_points: usize,

    /// Comma-separated demographic columns to group welfare output by.
    #[arg(long)]
    pub group_by: Option<String>,

    /// Premium-level bins for the shares report.
    #[arg(long, default_value_t = 5)]
    pub bins: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a population and its choices into dataset/truth CSVs.
    Simulate(CliArgs),
    /// Fit a model to a dataset CSV; writes estimate.json and parameters.csv.
    Estimate(CliArgs),
    /// Fit the consideration model and the additive-noise benchmark, then
    /// run the model-comparison test.
    Compare(CliArgs),
    /// Menu diagnostics: anchored-cutoff ordering, pricing ratio condition,
    /// and three-alternative cutoff configurations.
    Check(CliArgs),
    /// Nonparametric test of full consideration on an analytic field.
    TestConsideration(CliArgs),
    /// Sequential recovery of the risk density and inclusion rates on an
    /// analytic field; writes identify.json and density.csv.
    IdentifyDemo(CliArgs),
    /// Expected welfare losses from limited consideration, grouped by
    /// demographics; writes welfare.csv / welfare.json.
    Welfare(CliArgs),
    /// Plot-ready CSVs: predicted vs observed shares per premium bin,
    /// consideration bars, and the risk-density grid.
    Report(CliArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Estimate(_) => "estimate",
            Command::Compare(_) => "compare",
            Command::Check(_) => "check",
            Command::TestConsideration(_) => "test-consideration",
            Command::IdentifyDemo(_) => "identify-demo",
            Command::Welfare(_) => "welfare",
            Command::Report(_) => "report",
        }
    }

    fn args(&self) -> &CliArgs {
        match self {
            Command::Simulate(a)
            | Command::Estimate(a)
            | Command::Compare(a)
            | Command::Check(a)
            | Command::TestConsideration(a)
            | Command::IdentifyDemo(a)
            | Command::Welfare(a)
            | Command::Report(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: &Command) -> Result<i32, CliError> {
    let args = command.args();

    let (config, config_bytes) = match &args.config {
        Some(path) => {
            let (c, bytes) = Config::load(path)?;
            (c, Some((path.clone(), bytes)))
        }
        None => (Config::default(), None),
    };
    commands::validate_family_config(&config)?;

    let threads = args.threads.unwrap_or(config.io.threads);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.io.output_dir))
        .join(command.name());
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;

    let mut manifest = Manifest::new(command.name(), config.clone());
    if let Some((path, bytes)) = &config_bytes {
        manifest.record_config_source(path, bytes);
    }
    manifest.threads = if threads == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        threads
    };
    record_flags(&mut manifest, args);
    manifest.flag("kernel_settings", config.optimizer.kernel.clone());

    let needs_data = matches!(
        command,
        Command::Estimate(_)
            | Command::Compare(_)
            | Command::Check(_)
            | Command::Welfare(_)
            | Command::Report(_)
    );
    if needs_data && args.data.is_none() {
        return Err(CliError::Validation(format!(
            "{} needs --data pointing at a dataset CSV",
            command.name()
        )));
    }

    let code = match command {
        Command::Simulate(a) => commands::simulate(&config, a, &mut manifest, &out)?,
        Command::Estimate(a) => commands::estimate(&config, a, &mut manifest, &out)?,
        Command::Compare(a) => commands::compare(&config, a, &mut manifest, &out)?,
        Command::Check(a) => commands::check(&config, a, &mut manifest, &out)?,
        Command::TestConsideration(a) => {
            commands::test_consideration(&config, a, &mut manifest, &out)?
        }
        Command::IdentifyDemo(a) => commands::identify_demo(&config, a, &mut manifest, &out)?,
        Command::Welfare(a) => commands::welfare(&config, a, &mut manifest, &out)?,
        Command::Report(a) => commands::report(&config, a, &mut manifest, &out)?,
    };
    manifest.finish(&out)?;
    Ok(code)
}

fn record_flags(manifest: &mut Manifest, args: &CliArgs) {
    manifest.flag("portfolio", args.portfolio);
    manifest.flag("population", &args.population);
    manifest.flag("households", args.households);
    manifest.flag("seed", args.seed);
    manifest.flag("fit", &args.fit);
    manifest.flag("strict", args.strict);
    manifest.flag("bootstrap", args.bootstrap);
    manifest.flag("probes", args.probes);
    manifest.flag("grid_points", args.grid_points);
    manifest.flag("bins", args.bins);
    if let Some(v) = &args.data {
        manifest.flag("data", v.display().to_string());
    }
    if let Some(v) = &args.kernel {
        manifest.flag("kernel", v);
    }
    if let Some(v) = args.nu_star {
        manifest.flag("nu_star", v);
    }
    if let Some(v) = &args.group_by {
        manifest.flag("group_by", v);
    }
}
